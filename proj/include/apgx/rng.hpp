#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace apgx {

// Deterministic random stream. The mt19937_64 engine is standardized, and all
// distributions here are hand-rolled (std:: distributions are implementation
// defined), so identical seeds give identical draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(scramble(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // Box-Muller; consumes two uniforms per draw.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Eigen::VectorXd normal_vec(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Derive an independent stream, e.g. for evaluation rollouts.
  Rng split(std::uint64_t salt) {
    return Rng(next_u64() ^ scramble(salt));
  }

 private:
  // splitmix64 finalizer; decorrelates nearby seeds.
  static std::uint64_t scramble(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 gen_;
};

}  // namespace apgx
