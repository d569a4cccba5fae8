#pragma once

#include <stdexcept>
#include <string>

#include "l1gibbs/random.hpp"
#include "l1gibbs/special_functions.hpp"

namespace l1gibbs {

/// Coefficients of the 1-D density p(x) ~ exp(-a x^2 + b x - c |x|).
struct ExpQuadParams {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;

  /// Throws std::domain_error unless all are finite, c >= 0 and either a > 0
  /// or (a = 0 and |b| < c). The latter is a two-sided exponential.
  void validate() const;
};

/// Raised when a numerically delicate term cannot be evaluated reliably.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, ExpQuadParams params)
      : std::runtime_error(what), params_(params) {}
  const ExpQuadParams& params() const { return params_; }

 private:
  ExpQuadParams params_;
};

/// Which of alpha_plus / alpha_minus is negative. Both cannot be, since c >= 0.
enum class SignCase { kPlusPlus, kMinusPlus, kPlusMinus };

const char* to_string(SignCase s);

/// Everything about p(x) that does not depend on the evaluation point.
///
/// The two half-line masses are expressed relative to chi * p(0), where
/// chi = sqrt(pi / a) / 2:
///
///   left  = exp(alpha_plus^2)  erfc(alpha_plus)  = erfcx(alpha_plus)
///   right = exp(alpha_minus^2) erfc(alpha_minus) = erfcx(alpha_minus)
///
/// and log(erfcx) stays finite for negative arguments, which is where the
/// (-+) and (+-) cases would otherwise overflow.
struct NormalizationTerms {
  ExpQuadParams params;
  double sqrt_a = 1.0;
  double alpha_plus = 0.0;   // (b + c) / (2 sqrt(a))
  double alpha_minus = 0.0;  // (c - b) / (2 sqrt(a))
  double log_chi = 0.0;
  SignCase sign_case = SignCase::kPlusPlus;
  // Case-specific combination of erfcx terms:
  //   (++)  erfcx(a+) + erfcx(a-)
  //   (-+)  erfcx(-a+) - erfcx(a-)   (>= 0)
  //   (+-)  erfcx(a+) - erfcx(-a-)   (<= 0)
  LogSigned gamma;
  double log_left = 0.0;
  double log_right = 0.0;
  double log_total = 0.0;    // log(left + right)
  double log_norm = 0.0;     // log of the integral of exp(-a x^2 + b x - c|x|)
  double log_p_left = 0.0;   // log F(0)
  double log_p_right = 0.0;  // log(1 - F(0))
  // a = 0: p(x) ~ exp((c + b) x) left of 0 and exp(-(c - b) x) right of it.
  bool laplace = false;
  double rate_left = 0.0;
  double rate_right = 0.0;
};

NormalizationTerms prepare(const ExpQuadParams& params);

/// Both tails at a point: lower = F(y), upper = 1 - F(y), each to full
/// relative precision.
struct Tails {
  double lower;
  double upper;
};

Tails cdf_tails(const NormalizationTerms& terms, double y);

/// F(y). The point y = 0 belongs to the left branch.
double cdf(const NormalizationTerms& terms, double y);

/// Quantile for a probability given through both of its tails. Only the tail
/// on the relevant branch is used, so probabilities within 1e-300 of 1 are
/// resolved as long as `upper` carries them.
double quantile(const NormalizationTerms& terms, double lower, double upper);

/// F^{-1}(r) for r in (0, 1).
double cdf_inv(const NormalizationTerms& terms, double r);

/// One exact draw by inversion.
double sample(const NormalizationTerms& terms, Rng& rng);

/// Ordered overrelaxation with n_o (odd) auxiliary draws, realized on the
/// uniform scale: the rank of F(current) among n_o uniforms is a binomial
/// count, and the mirrored order statistic is a scaled beta variate.
double sample_overrelaxed(const NormalizationTerms& terms, double current, int n_o,
                          Rng& rng);

}  // namespace l1gibbs
