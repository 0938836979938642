// Copyright 2026 The fbrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FBRL_COMMON_HPP_
#define FBRL_COMMON_HPP_

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbrl {

// Error taxonomy. The CLI maps these onto its exit-code contract:
//   ContractError (and subclasses) -> 2, NumericError -> 3, IoError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated precondition, bad configuration, malformed user input.
struct ContractError : Error {
  using Error::Error;
};

// Shape mismatch between arrays; a kind of contract violation.
struct DimensionError : ContractError {
  using ContractError::ContractError;
};

// Non-finite values, divergence, singular solves.
struct NumericError : Error {
  using Error::Error;
};

// Unreadable/unwritable files, bad magic headers, corrupt containers.
struct IoError : Error {
  using Error::Error;
};

// FNV-1a 64-bit hash; used for config hashes embedded in checkpoints and for
// the determinism checks that compare artifact files.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

// Exact decimal round-trip formatting for doubles (17 significant digits).
inline std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Exact hexadecimal float formatting; shortest bit-exact representation.
inline std::string format_hex(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", x);
  return buf;
}

inline double parse_double(const std::string& s, const char* what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ContractError(std::string("expected a number for ") + what +
                        ", got '" + s + "'");
  }
  return v;
}

inline long long parse_int(const std::string& s, const char* what) {
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    throw ContractError(std::string("expected an integer for ") + what +
                        ", got '" + s + "'");
  }
  return v;
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Whole-file text IO. Binary-mode streams so artifact files hash identically
// across platforms.
inline std::string read_text_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open for reading: " + path);
  std::string out;
  char buf[1 << 16];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) {
    out.append(buf, got);
  }
  const bool bad = std::ferror(f) != 0;
  std::fclose(f);
  if (bad) throw IoError("read failure: " + path);
  return out;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw IoError("cannot open for writing: " + path);
  const std::size_t put = std::fwrite(content.data(), 1, content.size(), f);
  const bool bad = put != content.size() || std::fclose(f) != 0;
  if (bad) throw IoError("write failure: " + path);
}

}  // namespace fbrl

#endif  // FBRL_COMMON_HPP_
