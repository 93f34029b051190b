// Copyright 2026 The semfuse Authors
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

#ifndef SEMFUSE__RNG_HPP_
#define SEMFUSE__RNG_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace semfuse
{

/// Counter-based SplitMix64 stream. Every draw is a pure function of (seed, counter),
/// so results are identical across platforms and standard libraries.
class Rng
{
public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed)) {}

  /// Independent stream for one frame, stable under any processing order.
  static Rng for_frame(std::uint64_t seed, std::string_view frame_id) { return Rng(frame_seed(seed, frame_id)); }

  /// Seed of the per-frame stream; `Rng(frame_seed(s, id))` replays `for_frame(s, id)`.
  static constexpr std::uint64_t frame_seed(std::uint64_t seed, std::string_view frame_id)
  {
    return mix(seed) ^ fnv1a(frame_id);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + kGamma * ++counter_); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n)
  {
    // Lemire's multiply-shift with rejection; unbiased.
    while (true) {
      const unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
      const auto low = static_cast<std::uint64_t>(m);
      if (low >= n || low >= (0 - n) % n) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  /// Standard normal via Box-Muller (one variate per call).
  double normal()
  {
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  static constexpr std::uint64_t fnv1a(std::string_view s)
  {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z)
  {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace semfuse

#endif  // SEMFUSE__RNG_HPP_
