#include "rtb/common/hash.hpp"

#include <cstdio>

namespace rtb {

std::string ContentHash::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

}  // namespace rtb
