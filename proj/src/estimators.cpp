#include "ib/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ib/errors.hpp"
#include "ib/optim.hpp"
#include "ib/special.hpp"

namespace ib {

namespace {

void require_nonempty(const Dataset& data) {
  if (data.n() == 0) throw EmptyData();
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

}  // namespace

bool Estimator::z(const Dataset&, std::span<const double>, std::span<double>) const {
  throw NoZFunction(std::string(name()));
}

// ---------------------------------------------------------------------------

AuxEstimate SampleMaxEstimator::estimate(const Dataset& data) const {
  require_nonempty(data);
  return {{*std::max_element(data.y.begin(), data.y.end())}};
}

bool SampleMaxEstimator::z(const Dataset& data, std::span<const double> pi,
                           std::span<double> out) const {
  require_nonempty(data);
  out[0] = *std::max_element(data.y.begin(), data.y.end()) - pi[0];
  return true;
}

AuxEstimate ParetoMleEstimator::estimate(const Dataset& data) const {
  if (data.n() < 2) throw EmptyData();
  const double mu = *std::min_element(data.y.begin(), data.y.end());
  if (!(mu > 0.0)) throw DomainError("pareto_mle: observations must be positive");
  const double log_mu = std::log(mu);
  double s = 0.0;
  for (double y : data.y) s += std::log(y) - log_mu;
  if (!(s > 0.0)) throw DegenerateSample("pareto_mle: all observations are equal");
  return {{mu, static_cast<double>(data.n()) / s}};
}

bool ParetoMleEstimator::z(const Dataset& data, std::span<const double> pi,
                           std::span<double> out) const {
  if (!(pi[0] > 0.0 && pi[1] > 0.0)) return false;
  const double mn = *std::min_element(data.y.begin(), data.y.end());
  const double log_mu = std::log(pi[0]);
  double s = 0.0;
  for (double y : data.y) s += std::log(y) - log_mu;
  out[0] = mn - pi[0];
  out[1] = 1.0 / pi[1] - s / static_cast<double>(data.n());
  return true;
}

AuxEstimate CensoredMeanEstimator::estimate(const Dataset& data) const {
  require_nonempty(data);
  const double m = std::accumulate(data.y.begin(), data.y.end(), 0.0) / static_cast<double>(data.n());
  return {{std::max(m, 0.0)}};
}

// ---------------------------------------------------------------------------
// Lomax

namespace {

// sum_i log(1 + y_i / b), as sum_i log(b + y_i) - n log b.
double lomax_sum_log(const Dataset& data, double b) {
  double s = 0.0;
  for (double y : data.y) s += std::log(b + y);
  return s - static_cast<double>(data.n()) * std::log(b);
}

void lomax_mean_score(const Dataset& data, double b, double q, double& gb, double& gq) {
  double r = 0.0;
  for (double y : data.y) r += y / (b + y);
  const double n = static_cast<double>(data.n());
  gb = ((q + 1.0) * r / n - 1.0) / b;
  gq = 1.0 / q - lomax_sum_log(data, b) / n;
}

// Newton on the mean score with the analytic Jacobian, in (log b, log q).
bool lomax_score_polish(const Dataset& data, double& b, double& q, int& iters) {
  const double n = static_cast<double>(data.n());
  for (int it = 0; it < 30; ++it) {
    double gb = 0, gq = 0, jbb = 0, jbq = 0, jqq = 0;
    for (double y : data.y) {
      const double by = b * b + b * y;
      gb += (q + 1.0) * y / by - 1.0 / b;
      jbb += -(q + 1.0) * y * (2.0 * b + y) / (by * by) + 1.0 / (b * b);
      jbq += y / by;
    }
    gq = n / q - lomax_sum_log(data, b);
    jqq = -n / (q * q);
    gb /= n;
    gq /= n;
    jbb /= n;
    jbq /= n;
    jqq /= n;
    ++iters;
    if (std::abs(gb) * b <= 1e-13 && std::abs(gq) * q <= 1e-13) return true;
    // Chain rule to log coordinates.
    Eigen::Matrix2d J;
    J << jbb * b, jbq * q, jbq * b, jqq * q;
    const Eigen::Vector2d g(gb, gq);
    const Eigen::Vector2d d = -J.fullPivLu().solve(g);
    if (!d.allFinite()) return false;
    const double step = std::max(std::abs(d(0)), std::abs(d(1)));
    const double damp = step > 0.5 ? 0.5 / step : 1.0;
    b *= std::exp(damp * d(0));
    q *= std::exp(damp * d(1));
    if (step < 1e-15) return true;
  }
  double gb, gq;
  lomax_mean_score(data, b, q, gb, gq);
  return std::abs(gb) * b <= 1e-10 && std::abs(gq) * q <= 1e-10;
}

}  // namespace

AuxEstimate LomaxMleEstimator::estimate(const Dataset& data) const {
  require_nonempty(data);
  for (double y : data.y) {
    if (!(y > 0.0)) throw DomainError("lomax_mle: observations must be positive");
  }
  const double n = static_cast<double>(data.n());
  const auto [ymin, ymax] = std::minmax_element(data.y.begin(), data.y.end());
  auto sum_log = [&](double b) { return lomax_sum_log(data, b); };
  // Negative profile log-likelihood over t = log b, up to constants.
  auto neg_profile = [&](double t) {
    const double s = sum_log(std::exp(t));
    return n * std::log(s) + n * t + s;
  };
  const double lo = std::log(*ymin) - std::log(1e6);
  const double hi = std::log(*ymax) + std::log(1e6);
  const auto [t_best, f_best] = optim::brent_minimize(neg_profile, lo, hi, 30, 200);
  (void)f_best;
  AuxEstimate est;
  double b = std::exp(t_best);
  double q = n / sum_log(b);
  const double edge = 1e-3 * (hi - lo);
  if (t_best - lo < edge || hi - t_best < edge) {
    est.pi = {b, q};
    est.converged = false;
    est.at_boundary = true;
    return est;
  }
  int iters = 0;
  const bool ok = lomax_score_polish(data, b, q, iters);
  est.pi = {b, q};
  est.iterations = iters;
  est.converged = ok && std::isfinite(b) && std::isfinite(q);
  return est;
}

AuxEstimate LomaxMleEstimator::estimate_near(const Dataset& data,
                                             std::span<const double> hint) const {
  if (hint.size() != 2 || !(hint[0] > 0.0 && hint[1] > 0.0) || !std::isfinite(hint[0]) ||
      !std::isfinite(hint[1])) {
    return estimate(data);
  }
  require_nonempty(data);
  for (double y : data.y) {
    if (!(y > 0.0)) throw DomainError("lomax_mle: observations must be positive");
  }
  double b = hint[0], q = hint[1];
  int iters = 0;
  if (!lomax_score_polish(data, b, q, iters) || !std::isfinite(b) || !std::isfinite(q)) {
    return estimate(data);
  }
  // Accept a local maximum whose profile beats the exponential limit b -> inf.
  const double n = static_cast<double>(data.n());
  double hbb = 0.0, hbq = 0.0, sum_y = 0.0;
  for (double y : data.y) {
    const double by = b * b + b * y;
    hbb += -(q + 1.0) * y * (2.0 * b + y) / (by * by) + 1.0 / (b * b);
    hbq += y / by;
    sum_y += y;
  }
  const double hqq = -n / (q * q);
  const double sl = lomax_sum_log(data, b);
  const double profile = n * std::log(sl) + n * std::log(b) + sl;
  if (!(hbb < 0.0 && hbb * hqq - hbq * hbq > 0.0 && profile < n * std::log(sum_y))) {
    return estimate(data);
  }
  AuxEstimate est;
  est.pi = {b, q};
  est.iterations = iters;
  return est;
}

bool LomaxMleEstimator::z(const Dataset& data, std::span<const double> pi,
                          std::span<double> out) const {
  if (!(pi[0] > 0.0 && pi[1] > 0.0)) return false;
  lomax_mean_score(data, pi[0], pi[1], out[0], out[1]);
  return std::isfinite(out[0]) && std::isfinite(out[1]);
}

LomaxNaiveWmleEstimator::LomaxNaiveWmleEstimator()
    : c_(std::sqrt(special::chi_square_quantile(0.95, 2.0))) {}

LomaxNaiveWmleEstimator::LomaxNaiveWmleEstimator(double c) : c_(c) {}

double LomaxNaiveWmleEstimator::weight(double y, double b, double q) const {
  double sb, sq;
  LomaxModel::score(y, b, q, sb, sq);
  const Eigen::Matrix2d inv = LomaxModel::fisher_information(b, q).inverse();
  const double m2 = inv(0, 0) * sb * sb + 2.0 * inv(0, 1) * sb * sq + inv(1, 1) * sq * sq;
  const double m = std::sqrt(std::max(m2, 0.0));
  return m > c_ ? c_ / m : 1.0;
}

bool LomaxNaiveWmleEstimator::z(const Dataset& data, std::span<const double> pi,
                                std::span<double> out) const {
  const double b = pi[0], q = pi[1];
  if (!(b > 0.0 && q > 0.0) || !std::isfinite(b) || !std::isfinite(q)) return false;
  const Eigen::Matrix2d inv = LomaxModel::fisher_information(b, q).inverse();
  double gb = 0.0, gq = 0.0;
  for (double y : data.y) {
    double sb, sq;
    LomaxModel::score(y, b, q, sb, sq);
    const double m2 = inv(0, 0) * sb * sb + 2.0 * inv(0, 1) * sb * sq + inv(1, 1) * sq * sq;
    const double m = std::sqrt(std::max(m2, 0.0));
    const double w = m > c_ ? c_ / m : 1.0;
    gb += w * sb;
    gq += w * sq;
  }
  const double n = static_cast<double>(data.n());
  out[0] = gb / n;
  out[1] = gq / n;
  return std::isfinite(out[0]) && std::isfinite(out[1]);
}

namespace {

// Lomax quantile matching at the median and the 0.9 quantile.
std::vector<double> lomax_quantile_start(const Dataset& data) {
  std::vector<double> y = data.y;
  std::sort(y.begin(), y.end());
  auto quant = [&](double p) {
    const double pos = p * static_cast<double>(y.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return i + 1 < y.size() ? y[i] * (1 - f) + y[i + 1] * f : y.back();
  };
  const double q50 = quant(0.5), q90 = quant(0.9);
  if (!(q50 > 0.0) || !(q90 > q50)) return {std::max(q50, 1e-3), 1.0};
  const double ratio = q90 / q50;
  auto r_of = [](double q) { return std::expm1(std::log(10.0) / q) / std::expm1(std::log(2.0) / q); };
  // r_of decreases from +inf (q -> 0) to log 10 / log 2 (q -> inf).
  double q = 1.0;
  if (ratio <= std::log(10.0) / std::log(2.0) * (1 + 1e-9)) {
    q = 50.0;
  } else {
    double lo = 1e-3, hi = 1e3;
    for (int i = 0; i < 100; ++i) {
      const double mid = std::sqrt(lo * hi);
      if (r_of(mid) > ratio) lo = mid; else hi = mid;
    }
    q = std::sqrt(lo * hi);
  }
  const double b = q50 / std::expm1(std::log(2.0) / q);
  return {b, q};
}

}  // namespace

AuxEstimate LomaxNaiveWmleEstimator::estimate(const Dataset& data) const {
  require_nonempty(data);
  for (double y : data.y) {
    if (!(y > 0.0)) throw DomainError("lomax_naive_wmle: observations must be positive");
  }
  std::vector<double> start = LomaxMleEstimator().estimate(data).pi;
  AuxEstimate mle_start{start};
  if (!(std::isfinite(start[0]) && std::isfinite(start[1])) ||
      start[0] > 1e4 * (std::accumulate(data.y.begin(), data.y.end(), 0.0) / data.n())) {
    start = lomax_quantile_start(data);
  }
  auto system = [&](std::span<const double> x, std::span<double> out) {
    const double pi[2] = {std::exp(x[0]), std::exp(x[1])};
    return z(data, pi, out);
  };
  optim::RootOptions ro;
  ro.tol_f = 1e-13;
  ro.max_evals = 400;
  auto solve_from = [&](const std::vector<double>& s) {
    const std::vector<double> x0{std::log(s[0]), std::log(s[1])};
    return optim::solve_system(system, x0, 2, ro);
  };
  optim::RootResult rr = solve_from(start);
  if (!rr.converged) {
    optim::RootResult alt = solve_from(lomax_quantile_start(data));
    if (alt.norm < rr.norm) rr = std::move(alt);
  }
  AuxEstimate est;
  est.pi = {std::exp(rr.x[0]), std::exp(rr.x[1])};
  est.iterations = rr.evals;
  est.converged = rr.converged || rr.norm <= 1e-10;
  return est;
}

// ---------------------------------------------------------------------------
// Student's t regression

namespace {

struct TFit {
  std::vector<double> beta;
  double sigma;
};

// OLS on [1, X] with a MAD-based scale.
TFit t_start(const Dataset& data, std::size_t k, bool drop_censored) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (!drop_censored || data.d.empty() || data.d[i]) rows.push_back(i);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(k + 1));
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t i = rows[static_cast<std::size_t>(r)];
    X(r, 0) = 1.0;
    for (std::size_t j = 0; j < k; ++j) X(r, static_cast<Eigen::Index>(j + 1)) = data.x[i * k + j];
    y(r) = data.y[i];
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  Eigen::VectorXd res = (y - X * beta).cwiseAbs();
  std::vector<double> r(res.data(), res.data() + res.size());
  std::nth_element(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(r.size() / 2), r.end());
  double sigma = 1.4826 * r[r.size() / 2];
  if (!(sigma > 0.0)) sigma = 1.0;
  return {std::vector<double>(beta.data(), beta.data() + beta.size()), sigma};
}

// Mean log-likelihood and gradient (natural coordinates) of the uncensored t
// regression, over rows selected by `use`.
double t_loglik_grad(const Dataset& data, std::size_t k, std::span<const double> theta,
                     bool drop_censored, double* grad) {
  const double sigma = theta[k + 1], nu = theta[k + 2];
  const double lc = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                    0.5 * std::log(nu * std::numbers::pi) - std::log(sigma);
  double ll = 0.0;
  std::size_t used = 0;
  if (grad) std::fill(grad, grad + k + 3, 0.0);
  double g_sigma = 0.0, g_nu_data = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (drop_censored && !data.d.empty() && !data.d[i]) continue;
    ++used;
    double mu = theta[0];
    for (std::size_t j = 0; j < k; ++j) mu += data.x[i * k + j] * theta[j + 1];
    const double r = (data.y[i] - mu) / sigma;
    const double r2 = r * r;
    const double l1 = std::log1p(r2 / nu);
    ll += lc - 0.5 * (nu + 1.0) * l1;
    if (grad) {
      const double D = nu + r2;
      const double gb = (nu + 1.0) * r / (sigma * D);
      grad[0] += gb;
      for (std::size_t j = 0; j < k; ++j) grad[j + 1] += gb * data.x[i * k + j];
      g_sigma += (nu + 1.0) * r2 / (sigma * D);
      g_nu_data += -l1 + (nu + 1.0) * r2 / (nu * D);
    }
  }
  const double m = static_cast<double>(used);
  if (grad) {
    const double cnu = special::digamma(0.5 * (nu + 1.0)) - special::digamma(0.5 * nu) - 1.0 / nu;
    for (std::size_t j = 0; j <= k; ++j) grad[j] /= m;
    grad[k + 1] = -1.0 / sigma + g_sigma / m;
    grad[k + 2] = 0.5 * (cnu + g_nu_data / m);
  }
  return ll / m;
}

}  // namespace

StudentTNaiveMleEstimator::StudentTNaiveMleEstimator(std::size_t covariates, bool drop_censored,
                                                     double nu_min, double nu_max)
    : k_(covariates), drop_censored_(drop_censored), nu_min_(nu_min), nu_max_(nu_max) {}

double StudentTNaiveMleEstimator::mean_log_likelihood(const Dataset& data,
                                                      std::span<const double> theta) const {
  return t_loglik_grad(data, k_, theta, drop_censored_, nullptr);
}

bool StudentTNaiveMleEstimator::z(const Dataset& data, std::span<const double> pi,
                                  std::span<double> out) const {
  if (!(pi[k_ + 1] > 0.0 && pi[k_ + 2] > 0.0)) return false;
  t_loglik_grad(data, k_, pi, drop_censored_, out.data());
  for (double v : out) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

AuxEstimate StudentTNaiveMleEstimator::estimate(const Dataset& data) const {
  const std::size_t p = k_ + 3;
  if (data.n() <= p || data.k != k_) throw EmptyData();
  const TFit start = t_start(data, k_, drop_censored_);
  const double log_lo = std::log(nu_min_) - std::log(10.0);
  const double log_hi = std::log(nu_max_) + std::log(10.0);

  // x = (beta, log sigma, log nu); nu_fixed > 0 pins nu.
  auto fit = [&](double nu_fixed, const std::vector<double>& x0) {
    const std::size_t px = nu_fixed > 0 ? p - 1 : p;
    auto to_theta = [&](std::span<const double> x, std::vector<double>& th) {
      th.assign(p, 0.0);
      for (std::size_t j = 0; j <= k_; ++j) th[j] = x[j];
      th[k_ + 1] = std::exp(x[k_ + 1]);
      th[k_ + 2] = nu_fixed > 0 ? nu_fixed : std::exp(x[k_ + 2]);
    };
    std::vector<double> th;
    auto f = [&](std::span<const double> x) {
      if (nu_fixed <= 0 && (x[k_ + 2] < log_lo || x[k_ + 2] > log_hi)) return -kInf;
      to_theta(x, th);
      return t_loglik_grad(data, k_, th, drop_censored_, nullptr);
    };
    std::vector<double> gfull(p);
    auto g = [&](std::span<const double> x, std::span<double> out) {
      if (nu_fixed <= 0 && (x[k_ + 2] < log_lo || x[k_ + 2] > log_hi)) return false;
      to_theta(x, th);
      t_loglik_grad(data, k_, th, drop_censored_, gfull.data());
      for (std::size_t j = 0; j <= k_; ++j) out[j] = gfull[j];
      out[k_ + 1] = gfull[k_ + 1] * th[k_ + 1];
      if (px == p) out[k_ + 2] = gfull[k_ + 2] * th[k_ + 2];
      return true;
    };
    optim::MaximizeOptions mo;
    mo.grad_tol = 1e-12;
    std::vector<double> x(x0.begin(), x0.begin() + static_cast<std::ptrdiff_t>(px));
    auto r = optim::newton_maximize(f, g, x, mo);
    to_theta(r.x, th);
    return std::make_pair(r, th);
  };

  std::vector<double> x0(start.beta);
  x0.push_back(std::log(start.sigma));
  x0.push_back(std::log(4.0));
  auto [res, theta] = fit(0.0, x0);
  AuxEstimate est;
  est.iterations = res.iterations;
  const double nu = theta[k_ + 2];
  if (nu < nu_min_ || nu > nu_max_ || !res.converged) {
    const double edge = nu < std::sqrt(nu_min_ * nu_max_) ? nu_min_ : nu_max_;
    if (nu < nu_min_ || nu > nu_max_) {
      auto [r2, th2] = fit(edge, res.x);
      est.pi = th2;
      est.iterations += r2.iterations;
      est.at_boundary = true;
      est.converged = false;
      return est;
    }
  }
  est.pi = theta;
  est.converged = res.converged;
  return est;
}

// Censored likelihood ------------------------------------------------------

namespace {

double t_censored_loglik_grad(const Dataset& data, std::size_t k, std::span<const double> theta,
                              double* grad) {
  const double sigma = theta[k + 1], nu = theta[k + 2];
  const double lc = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                    0.5 * std::log(nu * std::numbers::pi) - std::log(sigma);
  double ll = 0.0;
  if (grad) std::fill(grad, grad + k + 3, 0.0);
  double g_sigma = 0.0, g_nu = 0.0;
  std::size_t n_obs = 0;
  const double hnu = 1e-5 * nu;
  for (std::size_t i = 0; i < data.n(); ++i) {
    double mu = theta[0];
    for (std::size_t j = 0; j < k; ++j) mu += data.x[i * k + j] * theta[j + 1];
    if (data.d[i]) {
      ++n_obs;
      const double r = (data.y[i] - mu) / sigma;
      const double r2 = r * r;
      const double l1 = std::log1p(r2 / nu);
      ll += lc - 0.5 * (nu + 1.0) * l1;
      if (grad) {
        const double D = nu + r2;
        const double gb = (nu + 1.0) * r / (sigma * D);
        grad[0] += gb;
        for (std::size_t j = 0; j < k; ++j) grad[j + 1] += gb * data.x[i * k + j];
        g_sigma += -1.0 / sigma + (nu + 1.0) * r2 / (sigma * D);
        g_nu += -0.5 * l1 + 0.5 * (nu + 1.0) * r2 / (nu * D);
      }
    } else {
      const double a = -mu / sigma;
      const double cdf = special::student_t_cdf(a, nu);
      ll += std::log(cdf);
      if (grad) {
        const double ratio = std::exp(special::student_t_log_pdf(a, nu)) / cdf;
        grad[0] += -ratio / sigma;
        for (std::size_t j = 0; j < k; ++j) grad[j + 1] += -ratio * data.x[i * k + j] / sigma;
        g_sigma += ratio * mu / (sigma * sigma);
        const double lp = std::log(special::student_t_cdf(a, nu + hnu));
        const double lm = std::log(special::student_t_cdf(a, nu - hnu));
        g_nu += (lp - lm) / (2.0 * hnu);
      }
    }
  }
  const double n = static_cast<double>(data.n());
  if (grad) {
    const double cnu = 0.5 * (special::digamma(0.5 * (nu + 1.0)) - special::digamma(0.5 * nu) - 1.0 / nu);
    for (std::size_t j = 0; j <= k; ++j) grad[j] /= n;
    grad[k + 1] = g_sigma / n;
    grad[k + 2] = (g_nu + static_cast<double>(n_obs) * cnu) / n;
  }
  return ll / n;
}

}  // namespace

StudentTCensoredMleEstimator::StudentTCensoredMleEstimator(std::size_t covariates, double nu_min,
                                                           double nu_max)
    : k_(covariates), nu_min_(nu_min), nu_max_(nu_max) {}

double StudentTCensoredMleEstimator::mean_log_likelihood(const Dataset& data,
                                                         std::span<const double> theta) const {
  return t_censored_loglik_grad(data, k_, theta, nullptr);
}

AuxEstimate StudentTCensoredMleEstimator::estimate(const Dataset& data) const {
  const std::size_t p = k_ + 3;
  if (data.n() <= p || data.k != k_ || data.d.size() != data.n()) throw EmptyData();
  const TFit start = t_start(data, k_, true);
  const double log_lo = std::log(nu_min_), log_hi = std::log(nu_max_);

  auto run = [&](double nu_fixed, const std::vector<double>& x0) {
    const std::size_t px = nu_fixed > 0 ? p - 1 : p;
    std::vector<double> th(p), gfull(p);
    auto to_theta = [&](std::span<const double> x) {
      for (std::size_t j = 0; j <= k_; ++j) th[j] = x[j];
      th[k_ + 1] = std::exp(x[k_ + 1]);
      th[k_ + 2] = nu_fixed > 0 ? nu_fixed : std::exp(x[k_ + 2]);
    };
    auto outside = [&](std::span<const double> x) {
      return nu_fixed <= 0 && (x[k_ + 2] < log_lo - 2.3 || x[k_ + 2] > log_hi + 2.3);
    };
    auto f = [&](std::span<const double> x) {
      if (outside(x)) return -kInf;
      to_theta(x);
      return t_censored_loglik_grad(data, k_, th, nullptr);
    };
    auto g = [&](std::span<const double> x, std::span<double> out) {
      if (outside(x)) return false;
      to_theta(x);
      t_censored_loglik_grad(data, k_, th, gfull.data());
      for (std::size_t j = 0; j <= k_; ++j) out[j] = gfull[j];
      out[k_ + 1] = gfull[k_ + 1] * th[k_ + 1];
      if (px == p) out[k_ + 2] = gfull[k_ + 2] * th[k_ + 2];
      for (std::size_t j = 0; j < px; ++j) {
        if (!std::isfinite(out[j])) return false;
      }
      return true;
    };
    optim::MaximizeOptions mo;
    mo.grad_tol = 1e-9;
    std::vector<double> x(x0.begin(), x0.begin() + static_cast<std::ptrdiff_t>(px));
    auto r = optim::newton_maximize(f, g, x, mo);
    to_theta(r.x);
    return std::make_pair(r, th);
  };
  std::vector<double> x0(start.beta);
  x0.push_back(std::log(start.sigma));
  x0.push_back(std::log(4.0));
  auto [res, theta] = run(0.0, x0);
  AuxEstimate est;
  est.iterations = res.iterations;
  const double nu = theta[k_ + 2];
  if (nu < nu_min_ || nu > nu_max_) {
    const double edge = nu < nu_min_ ? nu_min_ : nu_max_;
    auto [r2, th2] = run(edge, res.x);
    est.pi = th2;
    est.at_boundary = true;
    est.converged = r2.converged;
    est.iterations += r2.iterations;
    return est;
  }
  est.pi = theta;
  est.converged = res.converged;
  return est;
}

// ---------------------------------------------------------------------------
// Frechet

double FrechetMleEstimator::mean_log_likelihood(const Dataset& data, double m, double s, double a) {
  if (!(s > 0.0 && a > 0.0)) return -kInf;
  const double la = std::log(a), ls = std::log(s);
  double ll = 0.0;
  for (double y : data.y) {
    if (!(y > m)) return -kInf;
    const double L = std::log((y - m) / s);
    ll += la - ls - (1.0 + a) * L - std::exp(-a * L);
  }
  return ll / static_cast<double>(data.n());
}

namespace {

bool frechet_mean_grad(const Dataset& data, double m, double s, double a, double* g) {
  if (!(s > 0.0 && a > 0.0)) return false;
  double gm = 0.0, gs = 0.0, ga = 0.0;
  for (double y : data.y) {
    if (!(y > m)) return false;
    const double zz = (y - m) / s;
    const double L = std::log(zz);
    const double za = std::exp(-a * L);
    gm += ((1.0 + a) - a * za) / (s * zz);
    gs += a * (1.0 - za) / s;
    ga += 1.0 / a - L + za * L;
  }
  const double n = static_cast<double>(data.n());
  g[0] = gm / n;
  g[1] = gs / n;
  g[2] = ga / n;
  return std::isfinite(g[0]) && std::isfinite(g[1]) && std::isfinite(g[2]);
}

}  // namespace

bool FrechetMleEstimator::z(const Dataset& data, std::span<const double> pi,
                            std::span<double> out) const {
  return frechet_mean_grad(data, pi[0], pi[1], pi[2], out.data());
}

AuxEstimate FrechetMleEstimator::estimate(const Dataset& data) const {
  if (data.n() < 4) throw EmptyData();
  const double ymin = *std::min_element(data.y.begin(), data.y.end());
  std::vector<double> sorted = data.y;
  std::sort(sorted.begin(), sorted.end());
  const double med = sorted[sorted.size() / 2];
  double gap = 0.5 * (med - ymin);
  if (!(gap > 0.0)) gap = std::max(1e-3 * std::abs(ymin), 1e-6);
  if (sorted.front() == sorted.back()) throw DegenerateSample("frechet_mle: all observations are equal");

  // Gumbel moments of log(y - m0) give the shape and scale start.
  const double m0 = ymin - gap;
  double mean = 0.0, sq = 0.0;
  for (double y : data.y) mean += std::log(y - m0);
  mean /= static_cast<double>(data.n());
  for (double y : data.y) sq += (std::log(y - m0) - mean) * (std::log(y - m0) - mean);
  const double sd = std::sqrt(sq / static_cast<double>(data.n()));
  const double a0 = std::numbers::pi / (std::sqrt(6.0) * std::max(sd, 1e-6));
  const double s0 = std::exp(mean - std::numbers::egamma / a0);

  // x = (log(ymin - m), log s, log a).
  auto natural = [&](std::span<const double> x, double& m, double& s, double& a) {
    m = ymin - std::exp(x[0]);
    s = std::exp(x[1]);
    a = std::exp(x[2]);
  };
  auto f = [&](std::span<const double> x) {
    double m, s, a;
    natural(x, m, s, a);
    return mean_log_likelihood(data, m, s, a);
  };
  auto g = [&](std::span<const double> x, std::span<double> out) {
    double m, s, a, gn[3];
    natural(x, m, s, a);
    if (!frechet_mean_grad(data, m, s, a, gn)) return false;
    out[0] = -gn[0] * std::exp(x[0]);
    out[1] = gn[1] * s;
    out[2] = gn[2] * a;
    return true;
  };
  optim::MaximizeOptions mo;
  mo.grad_tol = 1e-12;
  const std::vector<double> x0{std::log(gap), std::log(s0), std::log(a0)};
  auto r = optim::newton_maximize(f, g, x0, mo);
  AuxEstimate est;
  double m, s, a;
  natural(r.x, m, s, a);
  est.pi = {m, s, a};
  est.iterations = r.iterations;
  est.converged = r.converged;
  if (!r.converged) {
    double gn[3];
    if (frechet_mean_grad(data, m, s, a, gn) && max_abs(gn) <= 1e-9) est.converged = true;
  }
  return est;
}

// ---------------------------------------------------------------------------

std::shared_ptr<const Estimator> make_estimator(const std::string& name, const Model& model) {
  const auto* t_model = dynamic_cast<const CensoredStudentTModel*>(&model);
  if (name == "sample_max") return std::make_shared<SampleMaxEstimator>();
  if (name == "pareto_mle") return std::make_shared<ParetoMleEstimator>();
  if (name == "censored_mean") return std::make_shared<CensoredMeanEstimator>();
  if (name == "lomax_mle") return std::make_shared<LomaxMleEstimator>();
  if (name == "lomax_naive_wmle") return std::make_shared<LomaxNaiveWmleEstimator>();
  if (name == "frechet_mle") return std::make_shared<FrechetMleEstimator>();
  if (t_model) {
    const std::size_t k = t_model->covariates();
    const double lo = t_model->box().lower.back(), hi = t_model->box().upper.back();
    if (name == "t_naive_mle") return std::make_shared<StudentTNaiveMleEstimator>(k, false, lo, hi);
    if (name == "t_naive_mle_drop") return std::make_shared<StudentTNaiveMleEstimator>(k, true, lo, hi);
    if (name == "t_censored_mle") return std::make_shared<StudentTCensoredMleEstimator>(k, lo, hi);
  }
  throw ConfigError("unknown estimator '" + name + "' for model '" + std::string(model.name()) + "'");
}

}  // namespace ib
