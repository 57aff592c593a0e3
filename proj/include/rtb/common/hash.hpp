#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

namespace rtb {

// Incremental 64-bit FNV-1a. Stable across platforms and runs; used for cache keys.
class ContentHash {
 public:
  ContentHash& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  ContentHash& text(std::string_view s) {
    const std::uint64_t n = s.size();
    bytes(&n, sizeof n);
    return bytes(s.data(), s.size());
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  ContentHash& value(T v) {
    return bytes(&v, sizeof v);
  }

  std::uint64_t digest() const noexcept { return state_; }

  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace rtb
