#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vseg {

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

std::uint64_t fnv1a64_file(const std::string& path);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

// Fixed-width decimal formatting used by every CSV writer; locale-free so
// emitted artifacts are byte-reproducible.
std::string fmt_double(double x, int precision = 6);

}  // namespace vseg
