#include "ib/special.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "ib/errors.hpp"

namespace ib::special {

namespace {

// Report domain problems as exceptions or NaN rather than touching errno.
using Policy = boost::math::policies::policy<
    boost::math::policies::promote_double<false>,
    boost::math::policies::overflow_error<boost::math::policies::ignore_error>>;

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p outside (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p, Policy());
}

double student_t_cdf(double t, double nu) {
  if (!(nu > 0.0)) throw DomainError("student_t_cdf: nu must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double t2 = t * t;
  // Tail mass P(|T| > |t|) = I_{nu/(nu+t^2)}(nu/2, 1/2).
  double tail;
  if (nu > 2.0 * t2) {
    tail = boost::math::ibetac(0.5, 0.5 * nu, t2 / (nu + t2), Policy());
  } else {
    tail = boost::math::ibeta(0.5 * nu, 0.5, nu / (nu + t2), Policy());
  }
  return t > 0 ? 1.0 - 0.5 * tail : 0.5 * tail;
}

double student_t_log_pdf(double t, double nu) {
  const double lc = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                    0.5 * std::log(nu * std::numbers::pi);
  return lc - 0.5 * (nu + 1.0) * std::log1p(t * t / nu);
}

double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("student_t_quantile: p outside (0,1)");
  if (!(nu > 0.0)) throw DomainError("student_t_quantile: nu must be positive");
  if (p == 0.5) return 0.0;
  const double q = 2.0 * std::min(p, 1.0 - p);  // P(|T| > t)
  double t2;
  if (q > 0.5) {
    const double y = boost::math::ibeta_inv(0.5, 0.5 * nu, 1.0 - q, Policy());
    t2 = nu * y / (1.0 - y);
  } else {
    const double x = boost::math::ibeta_inv(0.5 * nu, 0.5, q, Policy());
    t2 = nu * (1.0 - x) / x;
  }
  double t = std::sqrt(t2);
  if (p < 0.5) t = -t;
  if (!std::isfinite(t)) return t;
  const double log_norm = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                          0.5 * std::log(nu * std::numbers::pi);
  for (int it = 0; it < 4; ++it) {
    const double f = std::exp(log_norm - 0.5 * (nu + 1.0) * std::log1p(t * t / nu));
    if (!(f > 0.0)) break;
    // Work with the smaller tail to keep relative accuracy far out.
    const double step = p < 0.5 ? (student_t_cdf(t, nu) - p) / f
                                : (p - (1.0 - student_t_cdf(-t, nu))) / -f;
    t -= step;
    if (std::abs(step) <= 1e-12 * std::max(1.0, std::abs(t))) break;
  }
  return t;
}

double chi_square_quantile(double p, double k) {
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(k), p);
}

double digamma(double x) { return boost::math::digamma(x, Policy()); }

}  // namespace ib::special
