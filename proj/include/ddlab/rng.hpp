#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "errors.hpp"

namespace ddlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive hash of a key tuple; used to derive independent substreams.
inline std::uint64_t hash_keys(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

// All draws go through explicit bit manipulation so a seed yields the same stream
// on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  std::uint64_t next() { return eng_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  double normal() {
    double u1 = uniform_pos(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * n) % n; }

  // Poisson by inversion for small means, split recursively otherwise.
  std::uint64_t poisson(double mean) {
    std::uint64_t total = 0;
    while (mean > 30.0) {
      total += poisson(30.0);
      mean -= 30.0;
    }
    double l = std::exp(-mean), p = 1.0;
    std::uint64_t k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > l);
    return total + k - 1;
  }

  // Index drawn from unnormalized nonnegative weights.
  std::size_t categorical(std::span<const double> w) {
    double total = 0.0;
    for (double v : w) total += v;
    if (!(total > 0.0)) throw DomainError("categorical weights have no mass");
    double u = uniform() * total, acc = 0.0;
    std::size_t last = 0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (w[k] <= 0.0) continue;
      acc += w[k];
      last = k;
      if (u < acc) return k;
    }
    return last;
  }

 private:
  std::mt19937_64 eng_;
};

// Inverse-cdf sampler for a fixed discrete distribution.
class CdfSampler {
 public:
  explicit CdfSampler(std::span<const double> w) : cdf_(w.size()) {
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      acc += w[k];
      cdf_[k] = acc;
    }
    if (!(acc > 0.0)) throw DomainError("sampler weights have no mass");
    for (auto& c : cdf_) c /= acc;
  }

  std::size_t operator()(Rng& rng) const {
    double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t k = static_cast<std::size_t>(it - cdf_.begin());
    if (k >= cdf_.size()) k = cdf_.size() - 1;
    // skip zero-mass entries that share a cdf value with their predecessor
    while (k > 0 && cdf_[k] == cdf_[k - 1]) --k;
    return k;
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace ddlab
