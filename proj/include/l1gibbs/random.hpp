#pragma once

#include <cstdint>
#include <random>

namespace l1gibbs {

/// Deterministic random stream for one chain.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions are implemented here rather than taken from
/// <random>, whose algorithms are left to the library vendor; this keeps
/// sample paths reproducible across toolchains. Bump kVersion whenever any
/// transformation below changes.
class Rng {
 public:
  static constexpr std::uint32_t kVersion = 1;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1), 53 random bits.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), n > 0. Lemire's nearly divisionless method.
  std::uint64_t index(std::uint64_t n);

  double normal();
  double gamma(double shape);
  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }
  std::uint64_t binomial(std::uint64_t n, double p);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 mixing step; used to derive independent per-chain seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of chain `index` in a family rooted at `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace l1gibbs
