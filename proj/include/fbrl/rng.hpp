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

#ifndef FBRL_RNG_HPP_
#define FBRL_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fbrl/common.hpp"

namespace fbrl {

// Deterministic random source. The engine (std::mt19937_64) is fully
// specified by the standard; the distribution transforms below are our own,
// because the std:: distributions are implementation-defined and would break
// the bit-identical-artifacts guarantee across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Unbiased via rejection sampling.
  int uniform_int(int n) {
    if (n <= 0) throw ContractError("uniform_int requires n > 0");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();  // guard log(0)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(t);
    has_cached_ = true;
    return r * std::cos(t);
  }

  // Sample an index from a categorical distribution given per-index weights
  // that sum to ~1. The final index absorbs any rounding slack.
  int categorical(const std::vector<double>& probs) {
    if (probs.empty()) throw ContractError("categorical over empty support");
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  // Deterministically derive an independent child stream, e.g. per
  // (task, episode). Depends only on the constructor seed and the stream id,
  // never on how much of the parent stream has been consumed.
  Rng split(std::uint64_t stream) const {
    std::uint64_t h = fnv1a64(&stream, sizeof(stream), seed_ ^ 0x9e3779b97f4a7c15ULL);
    return Rng(h);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace fbrl

#endif  // FBRL_RNG_HPP_
