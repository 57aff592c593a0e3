#pragma once

#include <algorithm>
#include <cmath>

namespace rtb {

inline constexpr int kMaxBid = 300;

// Round half up, then clip into the platform bid range [0, 300].
inline int round_clip_bid(double price) {
  const double r = std::floor(price + 0.5);
  return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(kMaxBid)));
}

}  // namespace rtb
