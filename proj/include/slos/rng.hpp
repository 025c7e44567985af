#pragma once

#include <cmath>
#include <cstdint>

namespace slos {

// splitmix64 finalizer: bijective 64-bit mixer used both for key derivation and
// as the generator step. Quality is sufficient for Monte Carlo use and the
// output is identical on every platform, unlike std::normal_distribution.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Roles keep the per-replicate substreams disjoint: the simulation harness
// guarantees that train covariates, train noise and test covariates never
// share a stream.
enum class StreamRole : std::uint64_t {
  TrainCovariates = 1,
  TrainNoise = 2,
  TestCovariates = 3,
  TestNoise = 4,
  Permutation = 5,
};

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replicate,
                                StreamRole role) {
  std::uint64_t k = mix64(seed ^ 0xD6E8FEB86659FD93ull);
  k = mix64(k ^ replicate);
  k = mix64(k ^ (static_cast<std::uint64_t>(role) * 0xA5A5A5A5A5A5A5A5ull));
  return k;
}

// Counter-based splitmix64 stream with Box-Muller normals. Deterministic and
// allocation-free; safe to run one instance per worker thread.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() { return mix64(state_++); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; caches the second variate of each pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace slos
