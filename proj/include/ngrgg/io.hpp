#pragma once
// Small text I/O helpers shared by the writers: stable float formatting for
// reproducible output files, and a checksum for manifests.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ngrgg {

// Shortest-ish decimal that stays deterministic across runs of one binary.
inline std::string fmt_g(double v, int precision = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return std::string(buf);
}

// Full round-trip precision; used for state dumps meant for exact restarts.
inline std::string fmt_exact(double v) { return fmt_g(v, 17); }

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ngrgg
