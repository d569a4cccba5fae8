#include "l1gibbs/special_functions.hpp"

#include <algorithm>
#include <array>
#include <numbers>
#include <stdexcept>
#include <string>

namespace l1gibbs {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;  // 1/sqrt(pi)
constexpr double kLn2 = std::numbers::ln2;

void require_finite(double x, const char* fn) {
  if (!std::isfinite(x)) {
    throw std::domain_error(std::string(fn) + ": non-finite argument");
  }
}

// exp(-y*y) without the rounding error of forming y*y: y is split into a
// part with 4 fractional bits (whose square is exact) and the remainder.
double exp_neg_square(double y) {
  const double head = std::trunc(y * 16.0) / 16.0;
  const double del = (y - head) * (y + head);
  return std::exp(-head * head) * std::exp(-del);
}

double exp_square(double y) {
  const double head = std::trunc(y * 16.0) / 16.0;
  const double del = (y - head) * (y + head);
  return std::exp(head * head) * std::exp(del);
}

enum class ErfKind { kErf, kErfc, kErfcx };

// W. J. Cody, "Rational Chebyshev approximations for the error function",
// Math. Comp. 23 (1969), as distributed in the netlib specfun CALERF packet.
double calerf(double x, ErfKind kind) {
  static constexpr std::array<double, 5> a = {
      3.16112374387056560e00, 1.13864154151050156e02, 3.77485237685302021e02,
      3.20937758913846947e03, 1.85777706184603153e-1};
  static constexpr std::array<double, 4> b = {
      2.36012909523441209e01, 2.44024637934444173e02, 1.28261652607737228e03,
      2.84423683343917062e03};
  static constexpr std::array<double, 9> c = {
      5.64188496988670089e-1, 8.88314979438837594e00, 6.61191906371416295e01,
      2.98635138197400131e02, 8.81952221241769090e02, 1.71204761263407058e03,
      2.05107837782607147e03, 1.23033935479799725e03, 2.15311535474403846e-8};
  static constexpr std::array<double, 8> d = {
      1.57449261107098347e01, 1.17693950891312499e02, 5.37181101862009858e02,
      1.62138957456669019e03, 3.29079923573345963e03, 4.36261909014324716e03,
      3.43936767414372164e03, 1.23033935480374942e03};
  static constexpr std::array<double, 6> p = {
      3.05326634961232344e-1, 3.60344899949804439e-1, 1.25781726111229246e-1,
      1.60837851487422766e-2, 6.58749161529837803e-4, 1.63153871373020978e-2};
  static constexpr std::array<double, 5> q = {
      2.56852019228982242e00, 1.87295284992346047e00, 5.27905102951428412e-1,
      6.05183413124413191e-2, 2.33520497626869185e-3};

  constexpr double kThresh = 0.46875;
  constexpr double kXSmall = 1.11e-16;
  constexpr double kXBig = 26.543;
  constexpr double kXHuge = 6.71e7;
  constexpr double kXMax = 2.53e307;
  constexpr double kXNeg = -26.628;

  const double y = std::fabs(x);
  double result = 0.0;

  if (y <= kThresh) {
    const double ysq = y > kXSmall ? y * y : 0.0;
    double num = a[4] * ysq;
    double den = ysq;
    for (int i = 0; i < 3; ++i) {
      num = (num + a[i]) * ysq;
      den = (den + b[i]) * ysq;
    }
    result = x * (num + a[3]) / (den + b[3]);
    if (kind == ErfKind::kErf) return result;
    result = 1.0 - result;
    if (kind == ErfKind::kErfcx) result *= std::exp(ysq);
    return result;
  }

  if (y <= 4.0) {
    double num = c[8] * y;
    double den = y;
    for (int i = 0; i < 7; ++i) {
      num = (num + c[i]) * y;
      den = (den + d[i]) * y;
    }
    result = (num + c[7]) / (den + d[7]);
    if (kind != ErfKind::kErfcx) result *= exp_neg_square(y);
  } else {
    bool done = false;
    if (y >= kXBig) {
      if (kind != ErfKind::kErfcx || y >= kXMax) {
        result = 0.0;
        done = true;
      } else if (y >= kXHuge) {
        result = kInvSqrtPi / y;
        done = true;
      }
    }
    if (!done) {
      const double ysq = 1.0 / (y * y);
      double num = p[5] * ysq;
      double den = ysq;
      for (int i = 0; i < 4; ++i) {
        num = (num + p[i]) * ysq;
        den = (den + q[i]) * ysq;
      }
      result = ysq * (num + p[4]) / (den + q[4]);
      result = (kInvSqrtPi - result) / y;
      if (kind != ErfKind::kErfcx) result *= exp_neg_square(y);
    }
  }

  switch (kind) {
    case ErfKind::kErf:
      result = (0.5 - result) + 0.5;
      return x < 0.0 ? -result : result;
    case ErfKind::kErfc:
      return x < 0.0 ? 2.0 - result : result;
    case ErfKind::kErfcx:
      if (x < 0.0) {
        if (x < kXNeg) return std::numeric_limits<double>::infinity();
        const double e = exp_square(x);
        result = (e + e) - result;
      }
      return result;
  }
  return result;
}

double erf_cody(double x) { return calerf(x, ErfKind::kErf); }

// Initial guess for erfcinv(r), r in (0, 1]; relative error ~1e-7.
// M. Giles, "Approximating the erfinv function", GPU Computing Gems (2011),
// applied to erfinv(1 - r) with the logarithm formed from r directly.
double erfcinv_initial_guess(double r) {
  const double w = -std::log(r * (2.0 - r));
  double p;
  double t;
  if (w < 6.25) {
    t = w - 3.125;
    p = -3.6444120640178196996e-21;
    p = -1.685059138182016589e-19 + p * t;
    p = 1.2858480715256400167e-18 + p * t;
    p = 1.115787767802518096e-17 + p * t;
    p = -1.333171662854620906e-16 + p * t;
    p = 2.0972767875968561637e-17 + p * t;
    p = 6.6376381343583238325e-15 + p * t;
    p = -4.0545662729752068639e-14 + p * t;
    p = -8.1519341976054721522e-14 + p * t;
    p = 2.6335093153082322977e-12 + p * t;
    p = -1.2975133253453532498e-11 + p * t;
    p = -5.4154120542946279317e-11 + p * t;
    p = 1.051212273321532285e-09 + p * t;
    p = -4.1126339803469836976e-09 + p * t;
    p = -2.9070369957882005086e-08 + p * t;
    p = 4.2347877827932403518e-07 + p * t;
    p = -1.3654692000834678645e-06 + p * t;
    p = -1.3882523362786468719e-05 + p * t;
    p = 0.0001867342080340571352 + p * t;
    p = -0.00074070253416626697512 + p * t;
    p = -0.0060336708714301490533 + p * t;
    p = 0.24015818242558961693 + p * t;
    p = 1.6536545626831027356 + p * t;
  } else if (w < 16.0) {
    t = std::sqrt(w) - 3.25;
    p = 2.2137376921775787049e-09;
    p = 9.0756561938885390979e-08 + p * t;
    p = -2.7517406297064545428e-07 + p * t;
    p = 1.8239629214389227755e-08 + p * t;
    p = 1.5027403968909827627e-06 + p * t;
    p = -4.013867526981545969e-06 + p * t;
    p = 2.9234449089955446044e-06 + p * t;
    p = 1.2475304481671778723e-05 + p * t;
    p = -4.7318229009055733981e-05 + p * t;
    p = 6.8284851459573175448e-05 + p * t;
    p = 2.4031110387097893999e-05 + p * t;
    p = -0.0003550375203628474796 + p * t;
    p = 0.00095328937973738049703 + p * t;
    p = -0.0016882755560235047313 + p * t;
    p = 0.0024914420961078508066 + p * t;
    p = -0.0037512085075692412107 + p * t;
    p = 0.005370914553590063617 + p * t;
    p = 1.0052589676941592334 + p * t;
    p = 3.0838856104922207635 + p * t;
  } else {
    t = std::sqrt(w) - 5.0;
    p = -2.7109920616438573243e-11;
    p = -2.5556418169965252055e-10 + p * t;
    p = 1.5076572693500548083e-09 + p * t;
    p = -3.7894654401267369937e-09 + p * t;
    p = 7.6157012080783393804e-09 + p * t;
    p = -1.4960026627149240478e-08 + p * t;
    p = 2.9147953450901080826e-08 + p * t;
    p = -6.7711997758452339498e-08 + p * t;
    p = 2.2900482228026654717e-07 + p * t;
    p = -9.9298272942317002539e-07 + p * t;
    p = 4.5260625972231537039e-06 + p * t;
    p = -1.9681778105531670567e-05 + p * t;
    p = 7.5995277030017761139e-05 + p * t;
    p = -0.00021503011930044477347 + p * t;
    p = -0.00013871931833623122026 + p * t;
    p = 1.0103004648645343977 + p * t;
    p = 4.8499064014085844221 + p * t;
  }
  return p * (1.0 - r);
}

// Solves log(erfc(z)) = w for z >= 0, i.e. w <= 0, by Newton iteration on
// the concave function log(erfc(z)).
double erfcinv_log_newton(double w, double z) {
  for (int iter = 0; iter < 12; ++iter) {
    const double f = log_erfc(z) - w;
    // d/dz log erfc(z) = -2 / (sqrt(pi) erfcx(z))
    const double step = f * erfcx(z) / (2.0 * kInvSqrtPi);
    z += step;
    if (std::fabs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * std::fabs(z)) {
      break;
    }
  }
  return z;
}

}  // namespace

LogSigned LogSigned::from_value(double v) {
  if (v == 0.0) return zero();
  return {v < 0.0 ? -1 : 1, std::log(std::fabs(v))};
}

LogAddResult log_add(LogSigned x, LogSigned y) {
  if (y.is_zero()) return {x, false};
  if (x.is_zero()) return {y, false};
  if (y.log_abs > x.log_abs) std::swap(x, y);
  const double d = y.log_abs - x.log_abs;  // <= 0
  if (x.sign == y.sign) {
    return {LogSigned{x.sign, x.log_abs + std::log1p(std::exp(d))}, false};
  }
  const double rel = -std::expm1(d);  // 1 - |y|/|x|, in [0, 1)
  if (rel < 1e-15) {
    return {LogSigned::zero(), true};
  }
  return {LogSigned{x.sign, x.log_abs + std::log(rel)}, false};
}

double erfc(double x) {
  require_finite(x, "erfc");
  return calerf(x, ErfKind::kErfc);
}

double erfcx(double x) {
  require_finite(x, "erfcx");
  return calerf(x, ErfKind::kErfcx);
}

double log_erfc(double x) {
  require_finite(x, "log_erfc");
  if (std::fabs(x) < 0.5) return std::log1p(-erf_cody(x));
  if (x > 0.0) return std::log(calerf(x, ErfKind::kErfcx)) - x * x;
  // erfc(x) = 2 - erfc(-x), with erfc(-x) < 1
  return kLn2 + std::log1p(-0.5 * calerf(-x, ErfKind::kErfc));
}

double log_erfcx(double x) {
  require_finite(x, "log_erfcx");
  if (x > -26.0) return std::log(calerf(x, ErfKind::kErfcx));
  // erfcx(x) = 2 exp(x^2) - erfcx(-x)
  return x * x + kLn2 + std::log1p(-0.5 * calerf(-x, ErfKind::kErfc));
}

double erfcinv_log_asymptotic(double w) {
  const double theta = -std::log(std::numbers::pi) - std::log(-w);
  const double v = -theta - 2.0;
  const double s = 2.0 / (theta - 2.0 * w);
  const double a2 = v / 8.0;
  const double a3 = -(v * v + 6.0 * v - 6.0) / 32.0;
  const double a4 = (4.0 * v * v * v + 27.0 * v * v + 108.0 * v - 300.0) / 384.0;
  const double rs = std::sqrt(s);
  return 1.0 / rs + rs * s * (a2 + s * (a3 + s * a4));
}

double erfcinv_log(double w) {
  if (std::isnan(w)) throw std::domain_error("erfcinv_log: NaN argument");
  if (w > kLn2) throw std::domain_error("erfcinv_log: argument above log(2)");
  if (w == -std::numeric_limits<double>::infinity()) {
    return std::numeric_limits<double>::infinity();
  }
  if (w < kErfcinvLogSwitch) return erfcinv_log_asymptotic(w);
  if (w > 0.0) {
    // erfcinv(r) = -erfcinv(2 - r); log(2 - e^w) = log 2 + log(-expm1(w - log 2))
    const double reflected = kLn2 + std::log(-std::expm1(w - kLn2));
    return -erfcinv_log(reflected);
  }
  double z0;
  if (w < -10.0) {
    z0 = erfcinv_log_asymptotic(w);
  } else {
    z0 = erfcinv_initial_guess(std::exp(w));
  }
  return erfcinv_log_newton(w, z0);
}

double erfcinv(double r) {
  if (!(r > 0.0 && r < 2.0)) {
    throw std::domain_error("erfcinv: argument outside (0, 2)");
  }
  if (r > 1.0) return -erfcinv_log(std::log(2.0 - r));
  return erfcinv_log(std::log(r));
}

}  // namespace l1gibbs
