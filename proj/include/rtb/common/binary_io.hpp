#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "rtb/common/error.hpp"

namespace rtb {

static_assert(std::endian::native == std::endian::little,
              "binary artifacts are little-endian; big-endian hosts need byte swapping");

// Every binary artifact starts with an 8-byte magic, a kind tag and a format version.
struct ArtifactHeader {
  std::uint32_t kind = 0;
  std::uint32_t version = 0;
};

inline constexpr char kArtifactMagic[8] = {'R', 'T', 'B', 'A', 'R', 'E', 'N', 'A'};

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void header(ArtifactHeader h) {
    out_.write(kArtifactMagic, sizeof kArtifactMagic);
    pod(h.kind);
    pod(h.version);
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void array(std::span<const T> values) {
    pod<std::uint64_t>(values.size());
    out_.write(reinterpret_cast<const char*>(values.data()),
               static_cast<std::streamsize>(values.size_bytes()));
  }

  void string(const std::string& s) {
    array(std::span<const char>(s.data(), s.size()));
  }

  void check() const {
    if (!out_) throw DataError("write failed");
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  // Validates magic and kind; returns the stored version.
  std::uint32_t header(std::uint32_t expected_kind, std::uint32_t max_version) {
    char magic[sizeof kArtifactMagic];
    in_.read(magic, sizeof magic);
    if (!in_ || !std::equal(magic, magic + sizeof magic, kArtifactMagic)) {
      throw DataError("not an rtb-arena artifact (bad magic)");
    }
    const auto kind = pod<std::uint32_t>();
    const auto version = pod<std::uint32_t>();
    if (kind != expected_kind) {
      throw DataError("artifact kind " + std::to_string(kind) + ", expected " +
                      std::to_string(expected_kind));
    }
    if (version == 0 || version > max_version) {
      throw DataError("unsupported artifact version " + std::to_string(version));
    }
    return version;
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw DataError("truncated artifact");
    return v;
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  std::vector<T> array(std::uint64_t max_elements = (1ULL << 34)) {
    const auto n = pod<std::uint64_t>();
    if (n > max_elements) throw DataError("corrupt artifact: array length " + std::to_string(n));
    std::vector<T> values(n);
    in_.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in_) throw DataError("truncated artifact");
    return values;
  }

  std::string string() {
    auto chars = array<char>(1ULL << 30);
    return std::string(chars.begin(), chars.end());
  }

 private:
  std::istream& in_;
};

// Artifact kinds.
inline constexpr std::uint32_t kKindEpisodeCache = 1;
inline constexpr std::uint32_t kKindFmModel = 2;
inline constexpr std::uint32_t kKindAgentCheckpoint = 3;

}  // namespace rtb
