#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace cdsr {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

inline constexpr const char* kToolVersion = "0.1.0";

enum class Domain : std::uint8_t { X = 0, Y = 1 };

inline char domain_char(Domain d) { return d == Domain::X ? 'X' : 'Y'; }

inline Domain other_domain(Domain d) {
  return d == Domain::X ? Domain::Y : Domain::X;
}

// Throws std::runtime_error on failure. All fatal library errors funnel
// through here so the CLI can map them to a single machine-parsable line.
inline void check(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

// FNV-1a, used for content fingerprints and stable per-user hashing.
// std::hash is not stable across implementations; this is.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 14695981039346656037ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

// splitmix64 finalizer; decorrelates derived seeds from a root seed.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return mix64(root ^ mix64(stream));
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace cdsr
