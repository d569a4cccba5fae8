// Worked examples for each operation, one small check apiece.
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "l1gibbs/diagnostics.hpp"
#include "l1gibbs/expquad.hpp"
#include "l1gibbs/scenarios.hpp"
#include "l1gibbs/special_functions.hpp"
#include "oracles.hpp"

using namespace l1gibbs;
using oracle::real;

namespace {

const real kSqrtPiL = 1.772453850905516027298167483341145L;

SparseMatrixD eye(Index n) {
  SparseMatrixD d(n, n);
  d.setIdentity();
  return d;
}

PosteriorModel identity_model(const VectorXd& m, double sigma, double lambda) {
  const Index n = m.size();
  return PosteriorModel(std::make_shared<IdentityOperator>(n), m, sigma, lambda, eye(n), Basis::identity(n),
                        std::vector<char>(static_cast<std::size_t>(n), 1));
}

// Batch-means standard error with 100 batches.
double batch_se(const std::vector<double>& x) {
  const std::size_t b = 100, len = x.size() / b;
  double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double acc = 0;
  for (std::size_t i = 0; i < b; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < len; ++j) s += x[i * len + j];
    s /= static_cast<double>(len);
    acc += (s - mean) * (s - mean);
  }
  return std::sqrt(acc / (b - 1) / b);
}

double angle_deg(const VectorXd& a, const VectorXd& b) {
  const double c = std::min(1.0, std::fabs(a.normalized().dot(b.normalized())));
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace

// ---- special functions ------------------------------------------------------

TEST_CASE("erfc identities and quadrature value at 1") {
  CHECK(l1gibbs::erfc(0.0) == 1.0);
  for (double x = -6.0; x <= 6.0; x += 0.37) CHECK(l1gibbs::erfc(x) + l1gibbs::erfc(-x) == doctest::Approx(2.0).epsilon(1e-15));
  const real q = 2.0L / kSqrtPiL * oracle::integrate([](real t) { return std::exp(-t * t); }, 1.0L, 30.0L);
  CHECK(std::fabs(l1gibbs::erfc(1.0) - static_cast<double>(q)) < 1e-14 * static_cast<double>(q));
}

TEST_CASE("erfcx reflection and quadrature value at 10") {
  CHECK(l1gibbs::erfcx(0.0) == 1.0);
  for (double x = 0.0; x <= 25.0; x += 0.5) {
    CAPTURE(x);
    const double want = 2.0 * std::exp(x * x) - l1gibbs::erfcx(x);
    CHECK(l1gibbs::erfcx(-x) == doctest::Approx(want).epsilon(1e-14));
  }
  // erfcx(x) = 2/sqrt(pi) int_0^inf exp(-t^2 - 2 x t) dt
  const real q = 2.0L / kSqrtPiL * oracle::integrate([](real t) { return std::exp(-t * t - 20.0L * t); }, 0.0L, 10.0L);
  CHECK(std::fabs(l1gibbs::erfcx(10.0) - static_cast<double>(q)) < 1e-14 * static_cast<double>(q));
}

TEST_CASE("erfcinv round trip and bisection value") {
  CHECK(l1gibbs::erfcinv(1.0) == 0.0);
  for (double x = -5.0; x <= 5.0; x += 0.25) {
    // Rounding erfc(x) to a double limits what any inverse can recover.
    const double y = l1gibbs::erfc(x);
    const double cond = 4 * std::nextafter(y, 3.0) - 4 * y;
    const double slope = 2 / std::sqrt(std::numbers::pi) * std::exp(-x * x);
    CHECK(std::fabs(l1gibbs::erfcinv(y) - x) <= 1e-14 * (1 + std::fabs(x)) + cond / slope);
  }
  real lo = 0, hi = 1;
  for (int i = 0; i < 200; ++i) {
    const real mid = 0.5L * (lo + hi);
    (std::erfc(mid) > 0.5L ? lo : hi) = mid;
  }
  CHECK(std::fabs(l1gibbs::erfcinv(0.5) - static_cast<double>(lo)) < 1e-14);
}

TEST_CASE("erfcinv_log examples") {
  CHECK(l1gibbs::erfcinv_log(0.0) == 0.0);
  CHECK(l1gibbs::erfcinv_log(std::log(0.5)) == doctest::Approx(l1gibbs::erfcinv(0.5)).epsilon(1e-14));
  // mpmath: erfcinv(exp(-690)).
  CHECK(std::fabs(l1gibbs::erfcinv_log(-690.0) - 26.1946817366658049305594) <= 2.5e-12);
}

TEST_CASE("log_add examples") {
  auto r = log_add(LogSigned::from_log(std::log(2.0)), LogSigned::from_log(std::log(3.0)));
  CHECK(r.value.log_abs == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  r = log_add(LogSigned::from_log(1.5), LogSigned::zero());
  CHECK(r.value.log_abs == 1.5);
  r = log_add(LogSigned::from_log(800.0), LogSigned::from_log(799.0));
  // 800 + log1p(e^-1) from mpmath.
  CHECK(std::fabs(r.value.log_abs - 800.31326168751822283) < 1e-12);
  CHECK(r.value.sign == 1);
}

// ---- exp-quadratic law ------------------------------------------------------

TEST_CASE("normalization examples") {
  CHECK(prepare({1, 0, 0}).log_norm == doctest::Approx(std::log(std::sqrt(std::numbers::pi))).epsilon(1e-15));
  CHECK(prepare({1, 2, 0}).log_norm == doctest::Approx(1.0 + std::log(std::sqrt(std::numbers::pi))).epsilon(1e-15));
  const real z = oracle::integrate([](real x) { return std::exp(-2 * x * x + x - 3 * std::fabs(x)); }, -20.0L, 0.0L) +
                 oracle::integrate([](real x) { return std::exp(-2 * x * x + x - 3 * std::fabs(x)); }, 0.0L, 20.0L);
  CHECK(std::fabs(prepare({2, 1, 3}).log_norm - static_cast<double>(std::log(z))) < 1e-10);
}

TEST_CASE("cdf examples") {
  CHECK(cdf(prepare({1, 0, 2}), 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cdf(prepare({1, 0, 0}), 1.0) == doctest::Approx(0.5 * std::erfc(-1.0)).epsilon(1e-15));
  auto f = [](real x) { return std::exp(-3 * x * x - 4 * x - 7 * std::fabs(x)); };
  const real below = oracle::integrate(f, -20.0L, 0.0L) + oracle::integrate(f, 0.0L, 0.3L);
  const real total = below + oracle::integrate(f, 0.3L, 20.0L);
  CHECK(std::fabs(cdf(prepare({3, -4, 7}), 0.3) - static_cast<double>(below / total)) <= 1e-9);
}

TEST_CASE("cdf_inv examples") {
  CHECK(cdf_inv(prepare({1, 0, 5}), 0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  const auto t = prepare({1e4, 300, 1e3});
  for (double y = -10; y <= 10; y += 0.5) {
    const double r = cdf(t, y);
    if (r <= 0.0 || r >= 1.0) continue;  // far outside the mass
    CHECK(std::fabs(cdf_inv(t, r) - y) <= 1e-8 * (1 + std::fabs(y)));
  }
  // Bisection on the quadrature cdf.
  const oracle::ExpQuadDensity ref(2, 1, 3);
  real lo = -5, hi = 5;
  for (int i = 0; i < 100; ++i) {
    const real mid = 0.5L * (lo + hi);
    (ref.cdf(mid) < 0.9L ? lo : hi) = mid;
  }
  CHECK(std::fabs(cdf_inv(prepare({2, 1, 3}), 0.9) - static_cast<double>(lo)) <= 1e-8);
}

TEST_CASE("sample examples at 10^6 draws") {
  Rng rng(101);
  const int n = 1000000;
  {
    const auto t = prepare({1, 0, 0});
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = sample(t, rng);
      s += x;
      s2 += x * x;
    }
    CHECK(std::fabs(s / n) < 4 * std::sqrt(0.5 / n));
    CHECK((s2 / n - (s / n) * (s / n)) == doctest::Approx(0.5).epsilon(0.01));
  }
  {
    const auto t = prepare({1, 0, 4});
    std::vector<double> xs(n);
    for (auto& x : xs) x = sample(t, rng);
    CHECK(oracle::ks_distance(xs, [&](double y) { return cdf(t, y); }) < 0.002);
  }
  {
    const auto t = prepare({0.5, 3, 1});
    const oracle::ExpQuadDensity ref(0.5, 3, 1);
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = sample(t, rng);
      s += x;
      s2 += x * x;
    }
    const double mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
    CHECK(std::fabs(mean - static_cast<double>(ref.mean())) < 4 * sd / std::sqrt(n));
  }
}

TEST_CASE("overrelaxation examples") {
  const auto t = prepare({1, 0, 0});
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(sample_overrelaxed(t, 0.3, 1, a) == sample(t, b));
  // Many candidates: the update lands close to the mirror image.
  Rng rng(6);
  double s = 0;
  for (int i = 0; i < 2000; ++i) s += sample_overrelaxed(t, 1.2, 1001, rng);
  CHECK(s / 2000 == doctest::Approx(-1.2).epsilon(0.02));
  // Stationarity at 10^6 kernel applications.
  const auto p = prepare({2, 1, 3});
  std::vector<double> xs(1000000);
  double x = sample(p, rng);
  for (auto& v : xs) v = x = sample_overrelaxed(p, x, 7, rng);
  CHECK(oracle::ks_distance(xs, [&](double y) { return cdf(p, y); }) < 0.002);
}

// ---- posterior and cache ----------------------------------------------------

TEST_CASE("identity map: unit column norms and decoupled conditionals") {
  const VectorXd m = VectorXd::LinSpaced(5, -1, 1);
  const auto model = identity_model(m, 1.0 / std::sqrt(2.0), 3.0);
  CoefficientCache cache(model, VectorXd::Constant(5, 0.7));
  CHECK((cache.col_norms().array() - 1.0).abs().maxCoeff() < 1e-15);
  for (Index i = 0; i < 5; ++i) {
    const auto p = cache.conditional_params(i);
    CHECK(p.a == doctest::Approx(1.0));
    CHECK(p.b == doctest::Approx(2 * m[i]).scale(1.0));
    CHECK(p.c == 3.0);
  }
}

TEST_CASE("1-D n = 63 Gram matrix equals the explicit product") {
  Scenario1dConfig c;
  c.lambda = LambdaRule::parse("fixed:400");
  const Scenario s = build_1d(c);
  CoefficientCache cache(*s.model, VectorXd::Zero(63), {CacheMode::kDenseGram, 4096, 0});
  const MatrixXd av = MatrixXd(ccd_matrix(6, 5)) * Basis::step(63).to_dense();
  const MatrixXd want = av.transpose() * av / (2 * 0.001 * 0.001);
  CHECK((cache.gram() - want).cwiseAbs().maxCoeff() <= 1e-12 * want.cwiseAbs().maxCoeff());
}

TEST_CASE("2-D 16x16 column norms agree across modes") {
  const auto op = std::make_shared<Conv2DOperator>(16, 0.03);
  const PosteriorModel model(op, VectorXd::Ones(256), 0.1, 1.0, eye(256), Basis::identity(256),
                             std::vector<char>(256, 1));
  CoefficientCache d(model, VectorXd::Zero(256), {CacheMode::kDenseGram, 4096, 0});
  CoefficientCache o(model, VectorXd::Zero(256), {CacheMode::kOperator, 4096, 0});
  CHECK((d.col_norms() - o.col_norms()).cwiseAbs().maxCoeff() <= 1e-10 * d.col_norms().maxCoeff());
}

TEST_CASE("commits: no-op is bit-identical and drift stays small") {
  Rng rng(64);
  MatrixXd a(80, 64);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  VectorXd m(80);
  for (auto& v : m) v = rng.normal();
  std::vector<char> pen(64, 1);
  pen[0] = 0;
  const PosteriorModel model(std::make_shared<DenseOperator>(a), m, 0.3, 2.0, forward_difference(64),
                             Basis::step(64), pen);
  // No periodic refresh inside the 10^4 commits.
  CoefficientCache cache(model, VectorXd::Zero(64), {CacheMode::kOperator, 4096, 1000000});
  const VectorXd before = cache.image();
  cache.commit(5, cache.xi()[5]);
  CHECK(cache.image() == before);
  for (int s = 0; s < 10000; ++s) cache.commit(static_cast<Index>(rng.index(64)), rng.normal());
  const VectorXd fresh = a * model.u_from_xi(cache.xi());
  CHECK((cache.image() - fresh).norm() <= 1e-8 * fresh.norm());
  cache.refresh();
  CHECK((cache.image() - fresh).norm() <= 1e-13 * fresh.norm());
}

TEST_CASE("log posterior examples") {
  const auto zero = identity_model(VectorXd::Zero(4), 1.0, 5.0);
  CHECK(zero.log_posterior_u(VectorXd::Zero(4)) == 0.0);
  const VectorXd m = VectorXd::LinSpaced(4, 0, 1);
  auto p = identity_model(m, 0.5, 2.0);
  const VectorXd u = VectorXd::LinSpaced(4, 1, -1);
  const double before = p.log_posterior_u(u);
  p.set_lambda(4.0);
  CHECK(p.log_posterior_u(u) - before == doctest::Approx(-2.0 * u.lpNorm<1>()).epsilon(1e-14));

  Scenario1dConfig c;
  c.lambda = LambdaRule::parse("fixed:400");
  const Scenario s = build_1d(c);
  const MatrixXd a = MatrixXd(ccd_matrix(6, 5));
  real misfit = 0, tv = 0;
  for (Index r = 0; r < a.rows(); ++r) {
    real acc = s.model->data()[r];
    for (Index j = 0; j < 63; ++j) acc -= static_cast<real>(a(r, j)) * s.truth[j];
    misfit += acc * acc;
  }
  for (Index j = 0; j + 1 < 63; ++j) tv += std::fabs(static_cast<real>(s.truth[j + 1]) - s.truth[j]);
  const real want = -misfit / (2 * 1e-6L) - 400 * tv;
  CHECK(s.model->log_posterior_u(s.truth) == doctest::Approx(static_cast<double>(want)).epsilon(1e-12));
}

// ---- samplers ---------------------------------------------------------------

TEST_CASE("MH: zero change is accepted, tiny steps almost always accepted") {
  Scenario1dConfig c;
  c.lambda = LambdaRule::parse("fixed:400");
  const Scenario s = build_1d(c);
  MhConfig cfg;
  Rng rng(1);
  MhState flat(identity_model(VectorXd::Zero(3), 1.0, 0.0), VectorXd::Zero(3));
  (void)flat;
  for (MhVariant v : {MhVariant::kIso, MhVariant::kNcom, MhVariant::kSi}) {
    cfg.variant = v;
    MhState st(*s.model, s.truth);
    int acc = 0;
    for (int i = 0; i < 10000; ++i) acc += mh_step(st, cfg, 1e-8, rng);
    CHECK(acc > 9990);
  }
  // lambda = 0 and a flat likelihood: every proposal has equal density.
  const auto flat_model = PosteriorModel(std::make_shared<DenseOperator>(MatrixXd::Zero(1, 3)), VectorXd::Zero(1), 1.0,
                                         0.0, eye(3), Basis::identity(3), std::vector<char>(3, 1));
  MhState st(flat_model, VectorXd::Zero(3));
  cfg.variant = MhVariant::kIso;
  int acc = 0;
  for (int i = 0; i < 1000; ++i) acc += mh_step(st, cfg, 10.0, rng);
  CHECK(acc == 1000);
}

TEST_CASE("MH-Iso on a 2-D standard Gaussian") {
  const auto model = identity_model(VectorXd::Zero(2), 1.0, 0.0);
  SamplerSpec spec = parse_sampler("mh-iso");
  ChainConfig cc;
  cc.burn_in = 100000;
  cc.samples = 1000000;
  cc.seed = 9;
  const Chain ch = run_chain(model, spec, cc);
  CHECK(ch.acceptance_rate > 0.15);
  CHECK(ch.acceptance_rate < 0.35);
  for (Index c = 0; c < 2; ++c) {
    std::vector<double> x(ch.samples.rows()), x2(ch.samples.rows());
    for (Index r = 0; r < ch.samples.rows(); ++r) {
      x[r] = ch.samples(r, c);
      x2[r] = x[r] * x[r];
    }
    double m = 0, m2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m += x[i];
      m2 += x2[i];
    }
    m /= static_cast<double>(x.size());
    m2 /= static_cast<double>(x.size());
    CHECK(std::fabs(m) < 3 * batch_se(x));
    CHECK(std::fabs(m2 - 1.0) < 3 * batch_se(x2));
  }
}

TEST_CASE("single-coordinate Gibbs is exact sampling") {
  const auto model = identity_model(VectorXd::Constant(1, 0.4), 0.5, 3.0);
  CoefficientCache cache(model, VectorXd::Zero(1));
  const auto t = prepare(cache.conditional_params(0));
  Rng rng(12);
  GibbsConfig g;
  Index cursor = 0;
  std::vector<double> xs(1000000);
  for (auto& x : xs) {
    gibbs_update(cache, g, rng, cursor);
    x = cache.xi()[0];
  }
  CHECK(oracle::ks_distance(xs, [&](double y) { return cdf(t, y); }) < 0.002);
}

TEST_CASE("diagonal posterior: each marginal is its exp-quadratic law") {
  VectorXd m(16);
  for (Index i = 0; i < 16; ++i) m[i] = 0.1 * static_cast<double>(i) - 0.7;
  const auto model = identity_model(m, 0.3, 4.0);
  ChainConfig cc;
  cc.burn_in = 10;
  cc.samples = 50000;
  const Chain ch = run_chain(model, parse_sampler("rngibbs"), cc);
  for (Index i = 0; i < 16; ++i) {
    const double s = 0.5 / (0.3 * 0.3);
    const auto t = prepare({s, 2 * s * m[i], 4.0});
    std::vector<double> xs(ch.samples.rows());
    for (Index r = 0; r < ch.samples.rows(); ++r) xs[r] = ch.samples(r, i);
    CAPTURE(i);
    // Sweeps of a product target are i.i.d. only for random scan up to
    // repeats; a loose band suffices.
    CHECK(oracle::ks_distance(xs, [&](double y) { return cdf(t, y); }) < 0.015);
  }
}

TEST_CASE("systematic scan visits components in order") {
  const auto model = identity_model(VectorXd::Zero(7), 1.0, 1.0);
  CoefficientCache cache(model, VectorXd::Zero(7));
  GibbsConfig g;
  g.scan = Scan::kSystematic;
  Rng rng(1);
  Index cursor = 0;
  for (int sweep = 0; sweep < 3; ++sweep)
    for (Index i = 0; i < 7; ++i) CHECK(gibbs_update(cache, g, rng, cursor) == i);
}

TEST_CASE("noise variance examples") {
  Rng rng(13);
  HierarchicalConfig h;
  h.alpha = 3.0;
  h.beta = 2.0;
  std::vector<double> xs(1000000);
  double s = 0, s2 = 0;
  for (auto& x : xs) {
    x = sample_sigma2(0.0, 4, h, rng);
    s += x;
    s2 += x * x;
  }
  // Zero misfit: InverseGamma(alpha + k/2, beta) = InverseGamma(5, 2).
  CHECK(oracle::ks_distance(xs, [](double y) { return static_cast<double>(1.0L - oracle::gamma_p(5.0L, 2.0L / y)); }) <
        0.002);
  const double n = static_cast<double>(xs.size()), mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
  CHECK(std::fabs(mean - 2.0 / 4.0) < 4 * sd / std::sqrt(n));
}

TEST_CASE("empty run and CM self-consistency at (63, 400)") {
  Scenario1dConfig c;
  c.lambda = LambdaRule::parse("fixed:400");
  const Scenario s = build_1d(c);
  ChainConfig cc;
  cc.samples = 0;
  const Chain empty = run_chain(*s.model, parse_sampler("rngibbs"), cc);
  CHECK(empty.samples.rows() == 0);
  CHECK_FALSE(empty.aborted);

  cc.burn_in = 1000;
  cc.samples = 5000;
  cc.seed = 21;
  const VectorXd short_cm = cm_estimate(run_chain(*s.model, parse_sampler("rngibbs"), cc));
  cc.samples = 50000;
  cc.seed = 22;
  const VectorXd ref = cm_estimate(run_chain(*s.model, parse_sampler("rngibbs"), cc));
  CHECK((short_cm - ref).norm() <= 0.02 * ref.norm());
}

// ---- diagnostics ------------------------------------------------------------

TEST_CASE("acf examples") {
  Rng rng(31);
  std::vector<double> iid(100000);
  for (auto& x : iid) x = rng.normal();
  const auto a = autocorrelation(iid, 100);
  CHECK(a.r[0] == doctest::Approx(1.0));
  for (std::size_t t = 1; t <= 100; ++t) CHECK(std::fabs(a.r[t]) < 0.02);

  std::vector<double> ar(10000000);
  double v = rng.normal() / std::sqrt(1 - 0.81);
  for (auto& x : ar) x = v = 0.9 * v + rng.normal();
  const auto b = autocorrelation(ar, 60);
  for (std::size_t t = 0; t <= 50; ++t) CHECK(std::fabs(b.r[t] - std::pow(0.9, t)) < 0.01);
  const auto lag = lag_below(b);
  CHECK(lag.tau >= 41);
  CHECK(lag.tau <= 47);

  AcfResult quick;
  quick.r = {1.0, 0.005, 0.3};
  CHECK(lag_below(quick).tau == 1);
}

TEST_CASE("temporal acf examples") {
  AcfResult a;
  a.r = {1.0, 0.6, 0.3, 0.1};
  a.t_s = 1.0;
  const auto one = temporal_acf(a);
  for (std::size_t i = 0; i < a.r.size(); ++i) {
    CHECK(one.t[i] == static_cast<double>(i));
    CHECK(one.r[i] == a.r[i]);
  }
  a.t_s = 2.0;
  const auto two = temporal_acf(a);
  for (std::size_t i = 0; i < a.r.size(); ++i) CHECK(two.at(2.0 * static_cast<double>(i)) == one.at(static_cast<double>(i)));
  // Two samplers on a common time grid.
  AcfResult fast;
  fast.r = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3};
  fast.t_s = 0.5;
  const auto f = temporal_acf(fast);
  CHECK(f.at(2.0) == 0.6);
  CHECK(two.at(2.0) == 0.6);
  CHECK(two.at(3.0) == 0.6);
}

TEST_CASE("leading eigenvector examples") {
  Rng rng(41);
  MatrixXd x(100000, 3);
  for (Index r = 0; r < x.rows(); ++r) x.row(r) << 2 * rng.normal(), rng.normal(), rng.normal();
  const auto e = leading_eigvec(x);
  CHECK(angle_deg(e.function.direction, VectorXd::Unit(3, 0)) < 2.0);

  // Rotate the samples: the direction rotates with them.
  MatrixXd g(3, 3);
  for (Index i = 0; i < 9; ++i) g.data()[i] = rng.normal();
  const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(g).householderQ();
  const auto er = leading_eigvec(x * q.transpose());
  CHECK(angle_deg(er.function.direction, q * e.function.direction) < 1.0);
}

TEST_CASE("conditional-mean examples") {
  MatrixXd one(1, 3);
  one << 1, 2, 3;
  CHECK(cm_estimate(one) == one.row(0).transpose());
  Rng rng(51);
  MatrixXd x(100000, 2);
  for (Index r = 0; r < x.rows(); ++r) x.row(r) << 1 + rng.normal(), -2 + 3 * rng.normal();
  const VectorXd cm = cm_estimate(x);
  CHECK(std::fabs(cm[0] - 1) < 4 * 1 / std::sqrt(1e5));
  CHECK(std::fabs(cm[1] + 2) < 4 * 3 / std::sqrt(1e5));
  CHECK((cm_estimate(MatrixXd(2.5 * x)) - 2.5 * cm).norm() < 1e-12);
}

TEST_CASE("single-chain burn-in curve is the raw trace") {
  Scenario1dConfig c;
  c.lambda = LambdaRule::parse("fixed:400");
  const Scenario s = build_1d(c);
  const auto spec = parse_sampler("rngibbs");
  const auto curve = burn_in_curve(*s.model, spec, 1, 50, 77);
  ChainConfig cc;
  cc.burn_in = 50;
  cc.seed = 77;
  cc.trace_burn_in = true;
  cc.store_samples = false;
  const Chain ch = run_chain(*s.model, spec, cc);
  CHECK(curve == ch.burn_in_trace);
}

// ---- scenarios ---------------------------------------------------------------

TEST_CASE("1-D scenario examples") {
  // D times the step basis, with the offset column dropped, is the identity.
  const MatrixXd dv = MatrixXd(forward_difference(63)) * Basis::step(63).to_dense();
  CHECK((dv.rightCols(62) - MatrixXd::Identity(62, 62)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(dv.col(0).cwiseAbs().maxCoeff() == 0.0);

  Scenario1dConfig c;
  c.lambda = LambdaRule::parse("fixed:400");
  const Scenario s = build_1d(c);
  for (Index row = 0; row < 30; ++row) {
    const double lo = static_cast<double>(row + 1) / 32.0, hi = static_cast<double>(row + 2) / 32.0;
    if (lo > 1.0 / 3.0 && hi < 2.0 / 3.0) CHECK(s.clean[row] == doctest::Approx(1.0 / 32.0).epsilon(1e-14));
    if (hi < 1.0 / 3.0 || lo > 2.0 / 3.0) CHECK(s.clean[row] == 0.0);
  }
  CHECK(lambda_schedule(LambdaRule::parse("scaled"), 1023) == doctest::Approx(800.0));
}

TEST_CASE("2-D blur examples") {
  const Conv2DOperator op(33, 0.05);
  CHECK((op * VectorXd::Zero(33 * 33)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(((op * VectorXd::Constant(33 * 33, 1.7)).array() - 1.7).abs().maxCoeff() < 1e-13);
  CHECK(clean_data_2d({}, 33, 4, 0.05).cwiseAbs().maxCoeff() == 0.0);

  // Dense A by direct integration of the kernel over pixel pairs, with the
  // reflected copies of each source pixel summed explicitly.
  const int n = 33;
  const real h = 1.0L / n, s = 0.05L;
  std::vector<real> w(2 * 3 * n + 1, 0.0L);
  const int off = 3 * n;
  // Only d >= 0 is integrated, where the two erfc terms do not cancel;
  // beyond 8 sigma the weight is below 1e-14.
  for (int d = 0; d <= off; ++d) {
    if (d * h > 8 * s + h) break;
    auto f = [&](real x) {
      const real a = (x - d * h) / s, b = (x - (d + 1) * h) / s;
      return 0.5L * (std::erfc(-a / std::sqrt(2.0L)) - std::erfc(-b / std::sqrt(2.0L)));
    };
    w[off + d] = w[off - d] = oracle::integrate(f, 0, h, 1e-15L) / h;
  }
  MatrixXd b = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int img : {j, -1 - j, 2 * n - 1 - j}) {
        const int d = i - img;
        if (d >= -off && d <= off) b(i, j) += static_cast<double>(w[d + off]);
      }
  Rng rng(3);
  VectorXd u(n * n);
  for (auto& x : u) x = rng.normal();
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> img(u.data(), n, n);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> want = b * img * b.transpose();
  const VectorXd got = op * u;
  const Eigen::Map<const VectorXd> want_flat(want.data(), n * n);
  CHECK((got - want_flat).norm() <= 1e-8 * want_flat.norm());
}
