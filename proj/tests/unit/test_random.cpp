#include <doctest.h>

#include <cmath>
#include <vector>

#include "l1gibbs/random.hpp"
#include "oracles.hpp"

using l1gibbs::Rng;

TEST_CASE("streams are reproducible and derived seeds differ") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= (x != c.next_u64());
  }
  CHECK(differs);
  CHECK(l1gibbs::derive_seed(1, 0) != l1gibbs::derive_seed(1, 1));
  CHECK(l1gibbs::derive_seed(1, 1) != l1gibbs::derive_seed(2, 1));
}

TEST_CASE("uniform stays in the open interval") {
  Rng rng(1);
  double lo = 1, hi = 0;
  for (int i = 0; i < 1000000; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
}

TEST_CASE("index is unbiased") {
  Rng rng(2);
  std::vector<int> counts(7, 0);
  const int n = 700000;
  for (int i = 0; i < n; ++i) ++counts[rng.index(7)];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  CHECK(chi2 < 22.5);  // 6 dof, p ~ 0.001
}

TEST_CASE("normal and gamma draws follow their distributions") {
  Rng rng(3);
  std::vector<double> z(200000);
  for (auto& x : z) x = rng.normal();
  CHECK(oracle::ks_distance(z, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }) < 1.95 / std::sqrt(2e5));
  for (double shape : {0.3, 1.0, 2.5, 40.0}) {
    CAPTURE(shape);
    std::vector<double> g(200000);
    for (auto& x : g) x = rng.gamma(shape);
    const double ks = oracle::ks_distance(g, [&](double x) { return static_cast<double>(oracle::gamma_p(shape, x)); });
    CHECK(ks < 1.95 / std::sqrt(2e5));
  }
}

TEST_CASE("beta and binomial moments") {
  Rng rng(4);
  const int n = 400000;
  double s = 0;
  for (int i = 0; i < n; ++i) s += rng.beta(2.0, 5.0);
  CHECK(std::fabs(s / n - 2.0 / 7.0) < 5 * std::sqrt(10.0 / (49.0 * 8.0) / n));
  for (auto [trials, p] : {std::pair<std::uint64_t, double>{10, 0.3}, {1000000, 0.01}, {50, 0.9}}) {
    double m = 0, m2 = 0;
    const int reps = 100000;
    for (int i = 0; i < reps; ++i) {
      const double x = static_cast<double>(rng.binomial(trials, p));
      m += x;
      m2 += x * x;
    }
    m /= reps;
    const double var = trials * p * (1 - p);
    CHECK(std::fabs(m - trials * p) < 5 * std::sqrt(var / reps));
    CHECK(std::fabs(m2 / reps - m * m - var) < 0.05 * var);
  }
}
