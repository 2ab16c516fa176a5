#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace srft {

/// Seeded generator with hand-rolled distributions. std::* distributions are
/// implementation-defined, so every draw here is specified arithmetic over
/// mt19937_64 output; identical seeds give identical streams on any platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound); bound > 0. Rejection-free modulo is fine
  /// here: bound is always tiny relative to 2^64 so the bias is negligible
  /// and, more importantly, deterministic.
  uint64_t uniform_int(uint64_t bound) { return next_u64() % bound; }

  /// Standard normal via Box-Muller (no cached spare: two u64 per draw keeps
  /// the stream position independent of call history).
  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Derived stream for an independent sub-task (splitmix-style mixing).
  Rng fork(uint64_t stream) {
    uint64_t z = next_u64() + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace srft
