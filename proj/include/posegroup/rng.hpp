#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace posegroup {

// Deterministic random source. All sampling code in this project goes
// through this class so that results are reproducible bit-for-bit from a
// seed, independent of the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], both inclusive. Rejection-free modulo is
  // acceptable here; the bias at 64 bits is immaterial for data generation.
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(gen_() % span);
  }

  // Standard normal via Box-Muller. The spare value is cached, so a single
  // Rng instance is not safe for concurrent use (nothing here is).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// splitmix64 finalizer; used to derive independent child seeds.
inline uint64_t mix_seed(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Seed for item `index` of stream `stream` rooted at `base`. Streams keep
// training data, held-out data, and initialization draws disjoint.
inline uint64_t derive_seed(uint64_t base, uint64_t stream, uint64_t index) {
  return mix_seed(mix_seed(base ^ (0xA5A5A5A5A5A5A5A5ull * (stream + 1))) ^ index);
}

}  // namespace posegroup
