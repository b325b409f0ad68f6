#pragma once

#include <cstdint>
#include <random>

#include "pancakes/common.hpp"

namespace pancakes {

/// SplitMix64 step; used to whiten seeds and derive substream keys.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic substream key from a master seed and up to three indices.
/// Streams for distinct index tuples are decorrelated, so work items can be
/// assigned to any number of workers without changing their draws.
inline std::uint64_t substream(std::uint64_t master, std::uint64_t a,
                               std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = master;
  splitmix64(s);
  s ^= 0x6a09e667f3bcc909ULL + a;
  splitmix64(s);
  s ^= 0xbb67ae8584caa73bULL + b;
  splitmix64(s);
  s ^= 0x3c6ef372fe94f82bULL + c;
  return splitmix64(s);
}

/// Seeded random stream. All samplers in this library take an explicit Rng;
/// there is no global generator state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return unif_(engine_); }

  /// Standard normal N(0, 1).
  double normal() { return normal_(engine_); }

  /// N(0, 1/(2*pi)), the coordinate law of the stationary Gaussian.
  double normal_q() { return normal_(engine_) * kInvSqrt2Pi; }

  std::uint64_t raw() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  static constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline Rng make_stream(std::uint64_t master, std::uint64_t a,
                       std::uint64_t b = 0, std::uint64_t c = 0) {
  return Rng(substream(master, a, b, c));
}

}  // namespace pancakes
