#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace vcstk {

// splitmix64; used for seeding and for deriving per-(epoch, image) streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic generator with bit-portable distributions. std::mt19937_64 is
// specified exactly by the standard, but the std distributions are not; the
// helpers below fix the mapping so identical seeds give identical streams on
// every platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    state_[0] = splitmix64(s);
    state_[1] = splitmix64(s);
    state_[2] = splitmix64(s);
    state_[3] = splitmix64(s);
  }

  // Derive an independent stream keyed by up to three indices.
  static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    std::uint64_t s = seed;
    std::uint64_t h = splitmix64(s);
    s = h ^ (a * 0x9e3779b97f4a7c15ULL);
    h = splitmix64(s);
    s = h ^ (b * 0xc2b2ae3d27d4eb4fULL);
    h = splitmix64(s);
    s = h ^ (c * 0x165667b19e3779f9ULL);
    return Rng(splitmix64(s));
  }

  // xoshiro256++
  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t x, int k) {
      return (x << k) | (x >> (64 - k));
    };
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1. Rejection sampling, unbiased.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; one value per call (the pair's second half is dropped to keep
  // the stream position independent of call parity).
  double normal(double mean = 0.0, double sigma = 1.0) {
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(2.0 * M_PI * u2);
  }

  // k distinct values from [0, n), ascending.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k) {
    // Floyd's algorithm, then sort for determinism of output order.
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
      std::size_t t = uniform_int(j + 1);
      bool dup = false;
      for (auto v : picked) dup |= (v == t);
      picked.push_back(dup ? j : t);
    }
    for (std::size_t i = 1; i < picked.size(); ++i)
      for (std::size_t j = i; j > 0 && picked[j - 1] > picked[j]; --j)
        std::swap(picked[j - 1], picked[j]);
    return picked;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[uniform_int(i)]);
  }

private:
  std::uint64_t state_[4];
};

}  // namespace vcstk
