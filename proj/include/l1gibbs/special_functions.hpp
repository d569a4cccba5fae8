#pragma once

#include <cmath>
#include <limits>

namespace l1gibbs {

/// A real number stored as sign * exp(log_abs). Zero is (+1, -inf).
struct LogSigned {
  int sign = 1;
  double log_abs = -std::numeric_limits<double>::infinity();

  static LogSigned zero() { return {}; }
  static LogSigned from_log(double log_abs, int sign = 1) { return {sign, log_abs}; }
  static LogSigned from_value(double v);

  bool is_zero() const { return log_abs == -std::numeric_limits<double>::infinity(); }
  double value() const { return sign * std::exp(log_abs); }
};

struct LogAddResult {
  LogSigned value;
  // Set when the operands cancel to below ~1e-15 of the larger magnitude.
  // The result is then unreliable and the caller should evaluate directly.
  bool cancelled = false;
};

/// x + y in log representation:
/// log(x+y) = log|x| + log(1 + sign * exp(log|y| - log|x|)), |x| >= |y|.
LogAddResult log_add(LogSigned x, LogSigned y);

double erfc(double x);

/// Scaled complementary error function exp(x^2) erfc(x). Overflows to +inf
/// for x below about -26.6.
double erfcx(double x);

/// log(erfc(x)), finite for every finite x.
double log_erfc(double x);

/// log(erfcx(x)) = x^2 + log(erfc(x)), finite for every finite x.
double log_erfcx(double x);

/// Inverse of erfc on (0, 2).
double erfcinv(double r);

/// erfcinv(exp(w)) for w <= log 2. Below w = -680 the asymptotic series is
/// used, since exp(w) leaves the double range shortly after.
double erfcinv_log(double w);

/// Five-term asymptotic expansion of erfcinv(exp(w)) for w -> -inf.
double erfcinv_log_asymptotic(double w);

inline constexpr double kErfcinvLogSwitch = -680.0;

}  // namespace l1gibbs
