#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lentil {

// Deterministic random source. All stochastic draws in the simulator go
// through this wrapper so that a (seed, stream) pair fully determines a run;
// std::distributions are avoided because their outputs are not pinned by the
// standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : eng_(mix(seed ^ (stream * 0x9e3779b97f4a7c15ULL))) {}

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // exponential with the given rate (events per unit time); rate > 0
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // zero-mean gaussian, Box-Muller with a cached spare
  double gaussian(double sigma) {
    if (has_spare_) {
      has_spare_ = false;
      return sigma * spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return sigma * r * std::cos(a);
  }

  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // index sampled from nonnegative weights summing to ~1
  std::size_t discrete(std::span<const double> weights) {
    double u = uniform();
    double acc = 0.0;
    std::size_t last_nonzero = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) last_nonzero = i;
      acc += weights[i];
      if (u < acc) return i;
    }
    return last_nonzero;  // u landed in residual rounding mass
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer, decorrelates nearby seeds
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lentil
