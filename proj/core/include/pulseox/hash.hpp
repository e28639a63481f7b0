#pragma once

#include <cstdint>
#include <cstring>
#include <span>

namespace pulseox {

// FNV-1a over raw bytes. Used to fingerprint parameter groups when checking
// freezing contracts; not cryptographic.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(std::span<const double> v,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(v.data(), v.size() * sizeof(double), h);
}

}  // namespace pulseox
