#include "l1gibbs/expquad.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>

namespace l1gibbs {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// log(1 + exp(x)) without overflow.
double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// log(erfc(alpha + delta) / erfc(alpha)) for delta >= 0. For alpha >= 0 the
// squares cancel analytically: erfc(q) = exp(-q^2) erfcx(q) and
// alpha^2 - q^2 = -delta (2 alpha + delta). When both arguments are negative
// the two erfc values sit near 2 and their ratio near 1, so the small
// difference erfc(-q) - erfc(-alpha) is carried instead.
double log_erfc_ratio(double alpha, double delta) {
  if (delta == 0.0) return 0.0;
  if (!(delta < 1e150)) return -std::numeric_limits<double>::infinity();
  const double q = alpha + delta;
  if (alpha >= 0.0) {
    return -delta * (2.0 * alpha + delta) + log_erfcx(q) - log_erfcx(alpha);
  }
  if (q < 0.0) {
    const double l0 = log_erfc(-alpha);
    const double l1 = log_erfc(-q);
    const double log_d = l1 + std::log(-std::expm1(l0 - l1)) - log_erfc(alpha);
    return std::log1p(-std::exp(log_d));
  }
  return log_erfc(q) - log_erfc(alpha);
}

// Finds delta >= 0 with log(erfc(alpha + delta) / erfc(alpha)) = t, t <= 0.
// The erfcinv route gives z = alpha + delta directly; when alpha is large the
// subtraction z - alpha loses the digits that matter at the density's scale
// 1/(2 alpha), so a few Newton steps on the ratio itself restore them.
double solve_branch(double alpha, double t) {
  if (t >= 0.0) return 0.0;
  const double lea = log_erfc(alpha);
  const double w = t + lea;
  double z;
  if (w > 0.0) {
    // erfc(z) > 1, so z < 0: solve erfc(-z) = erfc(-alpha) + (1 - e^t) erfc(alpha)
    // to keep the digits that 2 - erfc(z) would lose.
    const LogSigned q = log_add(LogSigned::from_log(log_erfc(-alpha)),
                                LogSigned::from_log(std::log(-std::expm1(t)) + lea))
                            .value;
    z = -erfcinv_log(q.log_abs);
  } else {
    z = erfcinv_log(w);
  }
  if (!std::isfinite(z)) return std::numeric_limits<double>::infinity();
  double delta = std::max(z - alpha, 0.0);
  if (alpha > 1.0) {
    for (int iter = 0; iter < 6; ++iter) {
      const double g = log_erfc_ratio(alpha, delta) - t;
      const double slope = -2.0 * kInvSqrtPi / erfcx(alpha + delta);
      const double step = g / slope;
      delta = std::max(delta - step, 0.0);
      if (std::fabs(step) <= 4.0 * kEps * delta) break;
    }
  }
  return delta;
}

void check_finite_term(double v, const char* name, const ExpQuadParams& p) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os.precision(17);
    os << "expquad: non-finite " << name << " for a=" << p.a << " b=" << p.b
       << " c=" << p.c;
    throw NumericalError(os.str(), p);
  }
}

}  // namespace

void ExpQuadParams::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) {
    throw std::domain_error("ExpQuadParams: non-finite coefficient");
  }
  if (c < 0.0) throw std::domain_error("ExpQuadParams: c must be non-negative");
  if (a == 0.0) {
    if (!(std::fabs(b) < c)) throw std::domain_error("ExpQuadParams: a = 0 needs |b| < c");
  } else if (!(a > 0.0)) {
    throw std::domain_error("ExpQuadParams: a must be non-negative");
  }
}

const char* to_string(SignCase s) {
  switch (s) {
    case SignCase::kPlusPlus: return "++";
    case SignCase::kMinusPlus: return "-+";
    case SignCase::kPlusMinus: return "+-";
  }
  return "?";
}

NormalizationTerms prepare(const ExpQuadParams& params) {
  params.validate();
  NormalizationTerms t;
  t.params = params;
  if (params.a == 0.0) {
    t.laplace = true;
    t.rate_left = params.c + params.b;
    t.rate_right = params.c - params.b;
    t.log_left = -std::log(t.rate_left);
    t.log_right = -std::log(t.rate_right);
    t.log_total = std::log(2.0 * params.c) + t.log_left + t.log_right;
    t.log_norm = t.log_total;
    t.log_p_left = std::log(t.rate_right / (2.0 * params.c));
    t.log_p_right = std::log(t.rate_left / (2.0 * params.c));
    return t;
  }
  t.sqrt_a = std::sqrt(params.a);
  t.alpha_plus = (params.b + params.c) / (2.0 * t.sqrt_a);
  t.alpha_minus = (params.c - params.b) / (2.0 * t.sqrt_a);
  check_finite_term(t.alpha_plus, "alpha_plus", params);
  check_finite_term(t.alpha_minus, "alpha_minus", params);
  t.log_chi = 0.5 * std::log(std::numbers::pi / params.a) - std::numbers::ln2;

  const double ap = t.alpha_plus;
  const double am = t.alpha_minus;
  if (ap < 0.0) {
    t.sign_case = SignCase::kMinusPlus;
    t.gamma = log_add(LogSigned::from_log(log_erfcx(-ap)),
                      LogSigned::from_log(log_erfcx(am), -1))
                  .value;
  } else if (am < 0.0) {
    t.sign_case = SignCase::kPlusMinus;
    t.gamma = log_add(LogSigned::from_log(log_erfcx(ap)),
                      LogSigned::from_log(log_erfcx(-am), -1))
                  .value;
  } else {
    t.sign_case = SignCase::kPlusPlus;
    t.gamma = log_add(LogSigned::from_log(log_erfcx(ap)),
                      LogSigned::from_log(log_erfcx(am)))
                  .value;
  }

  t.log_left = log_erfcx(ap);
  t.log_right = log_erfcx(am);
  check_finite_term(t.log_left, "left mass", params);
  check_finite_term(t.log_right, "right mass", params);
  t.log_total = std::max(t.log_left, t.log_right) +
                std::log1p(std::exp(-std::fabs(t.log_left - t.log_right)));
  t.log_norm = t.log_chi + t.log_total;
  check_finite_term(t.log_norm, "normalization", params);
  const double d = t.log_right - t.log_left;
  t.log_p_left = -log1pexp(d);
  t.log_p_right = -log1pexp(-d);
  return t;
}

Tails cdf_tails(const NormalizationTerms& terms, double y) {
  if (std::isnan(y)) throw std::domain_error("cdf: NaN argument");
  if (terms.laplace) {
    if (y <= 0.0) {
      const double lf = terms.rate_left * y + terms.log_p_left;
      return {std::exp(lf), -std::expm1(lf)};
    }
    const double lu = -terms.rate_right * y + terms.log_p_right;
    return {-std::expm1(lu), std::exp(lu)};
  }
  if (y <= 0.0) {
    const double lf = log_erfc_ratio(terms.alpha_plus, -terms.sqrt_a * y) + terms.log_p_left;
    return {std::exp(lf), -std::expm1(lf)};
  }
  const double lu = log_erfc_ratio(terms.alpha_minus, terms.sqrt_a * y) + terms.log_p_right;
  return {-std::expm1(lu), std::exp(lu)};
}

double cdf(const NormalizationTerms& terms, double y) { return cdf_tails(terms, y).lower; }

double quantile(const NormalizationTerms& terms, double lower, double upper) {
  // Each log comes from whichever tail is the small, exactly known one.
  const double log_lower = upper < 0.5 ? std::log1p(-upper) : std::log(lower);
  const double log_upper = lower < 0.5 ? std::log1p(-lower) : std::log(upper);
  if (terms.laplace) {
    if (log_lower <= terms.log_p_left) return (log_lower - terms.log_p_left) / terms.rate_left;
    return -(log_upper - terms.log_p_right) / terms.rate_right;
  }
  if (log_lower <= terms.log_p_left) {
    const double delta = solve_branch(terms.alpha_plus, log_lower - terms.log_p_left);
    return -delta / terms.sqrt_a;
  }
  const double delta = solve_branch(terms.alpha_minus, log_upper - terms.log_p_right);
  return delta / terms.sqrt_a;
}

double cdf_inv(const NormalizationTerms& terms, double r) {
  if (!(r > 0.0 && r < 1.0)) {
    throw std::domain_error("cdf_inv: probability must lie in (0, 1)");
  }
  return quantile(terms, r, 1.0 - r);
}

double sample(const NormalizationTerms& terms, Rng& rng) {
  const double u = rng.uniform();
  return quantile(terms, u, 1.0 - u);
}

double sample_overrelaxed(const NormalizationTerms& terms, double current, int n_o, Rng& rng) {
  if (n_o < 1 || n_o % 2 == 0) {
    throw std::domain_error("sample_overrelaxed: n_o must be a positive odd integer");
  }
  if (!std::isfinite(current)) {
    throw std::domain_error("sample_overrelaxed: non-finite current value");
  }
  if (n_o == 1) return sample(terms, rng);

  const Tails tails = cdf_tails(terms, current);
  const auto n = static_cast<std::uint64_t>(n_o);
  // Rank of the current value among the n_o + 1 points on the uniform scale.
  const std::uint64_t rank = rng.binomial(n, tails.lower);
  const std::uint64_t target = n - rank;
  if (target == rank) return current;

  if (target > rank) {
    // (target - rank)-th smallest of the n - rank uniforms above F(current).
    const std::uint64_t m = n - rank;
    const std::uint64_t j = target - rank;
    const double x = rng.gamma(static_cast<double>(j));
    const double y = rng.gamma(static_cast<double>(m - j + 1));
    const double below = x / (x + y);
    const double above = y / (x + y);
    return quantile(terms, tails.lower + tails.upper * below, tails.upper * above);
  }
  // (target + 1)-th smallest of the rank uniforms below F(current).
  const std::uint64_t j = target + 1;
  const double x = rng.gamma(static_cast<double>(j));
  const double y = rng.gamma(static_cast<double>(rank - j + 1));
  const double below = x / (x + y);
  const double above = y / (x + y);
  return quantile(terms, tails.lower * below, tails.upper + tails.lower * above);
}

}  // namespace l1gibbs
