#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace wvsn {

// Draw helpers are built on raw mt19937_64 output so that generated values are
// identical across standard library implementations (std distributions are
// not portable).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t bits() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(bits()) * n) >> 64);
  }

  /// Gaussian via Box-Muller on portable uniforms.
  double normal(double mean, double stddev) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    return mean + stddev * z;
  }

  /// First k elements of a Fisher-Yates shuffle of `items`, in draw order.
  template <typename T>
  std::vector<T> sample(std::vector<T> items, size_t k) {
    if (k > items.size()) k = items.size();
    for (size_t i = 0; i < k; ++i) {
      const size_t j = i + static_cast<size_t>(below(items.size() - i));
      std::swap(items[i], items[j]);
    }
    items.resize(k);
    return items;
  }

 private:
  std::mt19937_64 gen_;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent named streams per (seed, realization): deployment, link loss,
/// fallback drops, synthetic content.
enum class RngStream : uint64_t { Deployment = 1, Links = 2, Drops = 3, Content = 4 };

inline uint64_t stream_seed(uint64_t base_seed, uint64_t realization, RngStream stream) {
  uint64_t h = splitmix64(base_seed ^ 0x5bf0363546e42757ULL);
  h = splitmix64(h ^ realization);
  h = splitmix64(h ^ static_cast<uint64_t>(stream));
  return h;
}

}  // namespace wvsn
