#include "ib/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ib/errors.hpp"
#include "ib/special.hpp"

namespace ib {

bool Box::contains(std::span<const double> theta) const noexcept {
  if (theta.size() != dim()) return false;
  for (std::size_t j = 0; j < dim(); ++j) {
    const double t = theta[j];
    if (std::isnan(t)) return false;
    const bool closed = j < closed_lower.size() && closed_lower[j];
    if (closed ? t < lower[j] : t <= lower[j]) return false;
    if (t >= upper[j] && std::isfinite(upper[j])) return false;
    if (std::isinf(t)) return false;
  }
  return true;
}

std::vector<double> Box::center() const {
  std::vector<double> c(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    const double lo = lower[j], hi = upper[j];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      c[j] = 0.5 * (lo + hi);
    } else if (std::isfinite(lo)) {
      c[j] = lo + 1.0;
    } else if (std::isfinite(hi)) {
      c[j] = hi - 1.0;
    } else {
      c[j] = 0.0;
    }
  }
  return c;
}

std::vector<double> Box::clamp(std::span<const double> theta) const {
  std::vector<double> c(theta.begin(), theta.end());
  for (std::size_t j = 0; j < dim(); ++j) {
    const double lo = lower[j], hi = upper[j];
    const double span = (std::isfinite(lo) && std::isfinite(hi)) ? hi - lo : 1.0;
    const double margin = 1e-6 * span;
    const bool closed = j < closed_lower.size() && closed_lower[j];
    if (!std::isfinite(c[j])) c[j] = center()[j];
    if (std::isfinite(lo)) {
      if (closed ? c[j] < lo : c[j] <= lo) c[j] = closed ? lo : lo + margin * std::max(1.0, std::abs(lo));
    }
    if (std::isfinite(hi) && c[j] >= hi) c[j] = hi - margin * std::max(1.0, std::abs(hi));
  }
  return c;
}

std::vector<double> Functional::grad(std::span<const double> theta) const {
  if (gradient) return gradient(theta);
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  std::vector<double> g(theta.size());
  std::vector<double> t(theta.begin(), theta.end());
  for (std::size_t j = 0; j < t.size(); ++j) {
    const double h = h0 * (1.0 + std::abs(theta[j]));
    t[j] = theta[j] + h;
    const double fp = psi(t);
    t[j] = theta[j] - h;
    const double fm = psi(t);
    t[j] = theta[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Functional coordinate_functional(std::size_t k, std::string label) {
  Functional f;
  f.label = std::move(label);
  f.psi = [k](std::span<const double> t) { return t[k]; };
  f.gradient = [k](std::span<const double> t) {
    std::vector<double> g(t.size(), 0.0);
    g[k] = 1.0;
    return g;
  };
  return f;
}

Functional lomax_survival_functional(double y) {
  Functional f;
  std::ostringstream os;
  os << "survival(" << y << ")";
  f.label = os.str();
  f.psi = [y](std::span<const double> t) { return std::pow(1.0 + y / t[0], -t[1]); };
  f.gradient = [y](std::span<const double> t) {
    const double b = t[0], q = t[1];
    const double base = 1.0 + y / b;
    const double s = std::pow(base, -q);
    return std::vector<double>{s * q * y / (b * b * base), -s * std::log(base)};
  };
  return f;
}

// ---------------------------------------------------------------------------

std::vector<double> Model::to_unconstrained(std::span<const double> theta) const {
  const Box& bx = box();
  std::vector<double> z(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double lo = bx.lower[j], hi = bx.upper[j], t = theta[j];
    const bool closed = j < bx.closed_lower.size() && bx.closed_lower[j];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      const double r = (t - lo) / (hi - lo);
      z[j] = std::log(r / (1.0 - r));
    } else if (std::isfinite(lo)) {
      z[j] = closed ? std::sqrt(std::max(t - lo, 0.0)) : std::log(t - lo);
    } else if (std::isfinite(hi)) {
      z[j] = -std::log(hi - t);
    } else {
      z[j] = t;
    }
  }
  return z;
}

std::vector<double> Model::from_unconstrained(std::span<const double> z) const {
  const Box& bx = box();
  std::vector<double> t(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double lo = bx.lower[j], hi = bx.upper[j];
    const bool closed = j < bx.closed_lower.size() && bx.closed_lower[j];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      t[j] = lo + (hi - lo) / (1.0 + std::exp(-z[j]));
    } else if (std::isfinite(lo)) {
      t[j] = closed ? lo + z[j] * z[j] : lo + std::exp(z[j]);
    } else if (std::isfinite(hi)) {
      t[j] = hi - std::exp(-z[j]);
    } else {
      t[j] = z[j];
    }
  }
  return t;
}

std::vector<double> Model::initial_from_aux(std::span<const double> pi) const {
  if (pi.size() != dim()) return box().center();
  return box().clamp(pi);
}

double Model::log_likelihood(std::span<const double>, const Dataset&) const {
  throw Error("model '" + std::string(name()) + "' has no log-likelihood");
}

Eigen::MatrixXd Model::observed_information(std::span<const double> theta,
                                            const Dataset& data) const {
  const std::size_t p = theta.size();
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  std::vector<double> h(p);
  for (std::size_t j = 0; j < p; ++j) h[j] = h0 * (1.0 + std::abs(theta[j]));
  std::vector<double> t(theta.begin(), theta.end());
  auto f = [&](std::span<const double> x) { return log_likelihood(x, data); };
  const double f0 = f(t);
  Eigen::MatrixXd info(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    t[i] = theta[i] + h[i];
    const double fp = f(t);
    t[i] = theta[i] - h[i];
    const double fm = f(t);
    t[i] = theta[i];
    info(i, i) = -(fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (std::size_t j = 0; j < i; ++j) {
      t[i] = theta[i] + h[i];
      t[j] = theta[j] + h[j];
      const double fpp = f(t);
      t[j] = theta[j] - h[j];
      const double fpm = f(t);
      t[i] = theta[i] - h[i];
      const double fmm = f(t);
      t[j] = theta[j] + h[j];
      const double fmp = f(t);
      t[i] = theta[i];
      t[j] = theta[j];
      info(i, j) = info(j, i) = -(fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
    }
  }
  if (!info.allFinite()) throw SingularInformation("non-finite observed information");
  return info;
}

void Model::require_inside(std::span<const double> theta) const {
  if (theta.size() != dim()) {
    throw OutOfBox(std::string(name()) + ": parameter dimension mismatch");
  }
  if (!feasible(theta)) {
    std::ostringstream os;
    os << name() << ": parameter outside its space (";
    for (std::size_t j = 0; j < theta.size(); ++j) os << (j ? ", " : "") << theta[j];
    os << ")";
    throw OutOfBox(os.str());
  }
}

namespace {

Box positive_box(std::size_t p) {
  return Box{std::vector<double>(p, 0.0), std::vector<double>(p, kInf), std::vector<bool>(p, false)};
}

}  // namespace

// ---------------------------------------------------------------------------

UniformScaleModel::UniformScaleModel() : box_(positive_box(1)) {}

void UniformScaleModel::simulate_into(const ParamVector& theta, const RandomBlock& w,
                                      Dataset& out) const {
  require_inside(theta.values());
  const double t = theta[0];
  out.y.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out.y[i] = t * w[i];
}

ParetoModel::ParetoModel() : box_(positive_box(2)) {}

void ParetoModel::simulate_into(const ParamVector& theta, const RandomBlock& w,
                                Dataset& out) const {
  require_inside(theta.values());
  const double mu = theta[0], inv_alpha = 1.0 / theta[1];
  out.y.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    out.y[i] = mu * std::exp(-inv_alpha * std::log1p(-w[i]));
  }
}

LomaxModel::LomaxModel() : box_(positive_box(2)) {}

namespace {

// -log(1 - u_i) for the most recent block seen by this thread.
const std::vector<double>& neg_log1m(const RandomBlock& w) {
  thread_local std::uint64_t serial = 0;
  thread_local std::vector<double> e;
  if (serial != w.serial() || e.size() != w.size() || w.serial() == 0) {
    e.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) e[i] = -std::log1p(-w[i]);
    serial = w.serial();
  }
  return e;
}

}  // namespace

void LomaxModel::simulate_into(const ParamVector& theta, const RandomBlock& w,
                               Dataset& out) const {
  require_inside(theta.values());
  const double b = theta[0], inv_q = 1.0 / theta[1];
  const auto& e = neg_log1m(w);
  out.y.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out.y[i] = b * std::expm1(inv_q * e[i]);
}

double LomaxModel::log_likelihood(std::span<const double> theta, const Dataset& data) const {
  const double b = theta[0], q = theta[1];
  if (!(b > 0.0 && q > 0.0)) return -kInf;
  double s = 0.0;
  for (double y : data.y) s += std::log1p(y / b);
  const double n = static_cast<double>(data.n());
  return n * (std::log(q) - std::log(b)) - (q + 1.0) * s;
}

void LomaxModel::score(double y, double b, double q, double& sb, double& sq) noexcept {
  sb = (q + 1.0) * y / (b * b + b * y) - 1.0 / b;
  sq = 1.0 / q - std::log1p(y / b);
}

Eigen::Matrix2d LomaxModel::fisher_information(double b, double q) noexcept {
  Eigen::Matrix2d m;
  m(0, 0) = q / (b * b * (q + 2.0));
  m(0, 1) = m(1, 0) = -1.0 / (b * (q + 1.0));
  m(1, 1) = 1.0 / (q * q);
  return m;
}

NormalMeanModel::NormalMeanModel()
    : box_{std::vector<double>{0.0}, std::vector<double>{kInf}, std::vector<bool>{true}} {}

void NormalMeanModel::simulate_into(const ParamVector& theta, const RandomBlock& w,
                                    Dataset& out) const {
  require_inside(theta.values());
  const double t = theta[0];
  out.y.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out.y[i] = t + special::normal_quantile(w[i]);
}

double NormalMeanModel::log_likelihood(std::span<const double> theta,
                                       const Dataset& data) const {
  double s = 0.0;
  for (double y : data.y) s += (y - theta[0]) * (y - theta[0]);
  return -0.5 * static_cast<double>(data.n()) * std::log(2.0 * std::numbers::pi) - 0.5 * s;
}

Eigen::MatrixXd NormalMeanModel::observed_information(std::span<const double>,
                                                      const Dataset& data) const {
  return Eigen::MatrixXd::Constant(1, 1, static_cast<double>(data.n()));
}

// ---------------------------------------------------------------------------

Design Design::head(std::size_t n) const {
  if (n > rows()) throw ConfigError("design has fewer rows than the requested sample size");
  Design d;
  d.k = k;
  d.x.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n * k));
  return d;
}

Design load_design_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open design file " + path);
  std::string line;
  std::size_t lineno = 0;
  Design d;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (lineno == 1) {
      for (std::size_t j = 0; j < cells.size(); ++j) {
        if (cells[j] != "x" + std::to_string(j + 1)) {
          throw ParseError(lineno, "design header must read x1,...,xk");
        }
      }
      d.k = cells.size();
      continue;
    }
    if (cells.size() != d.k) throw ParseError(lineno, "wrong number of columns");
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        d.x.push_back(std::stod(c, &used));
        if (used != c.size()) throw ParseError(lineno, "trailing characters in '" + c + "'");
      } catch (const std::invalid_argument&) {
        throw ParseError(lineno, "not a number: '" + c + "'");
      }
    }
  }
  if (d.k == 0) throw ParseError(lineno, "empty design file");
  return d;
}

CensoredStudentTModel::CensoredStudentTModel(Design design, double nu_min, double nu_max)
    : design_(std::move(design)) {
  const std::size_t p = design_.k + 3;
  box_.lower.assign(p, -kInf);
  box_.upper.assign(p, kInf);
  box_.closed_lower.assign(p, false);
  box_.lower[p - 2] = 0.0;
  box_.lower[p - 1] = nu_min;
  box_.upper[p - 1] = nu_max;
}

namespace {

// Standardized t noise for one block at one nu. Matching solves evaluate many
// parameter points against the same block, mostly at an unchanged nu.
struct TNoiseCache {
  std::uint64_t serial = 0;
  double nu = 0.0;
  std::vector<double> eps;
};

const std::vector<double>& t_noise(const RandomBlock& w, double nu) {
  thread_local TNoiseCache cache;
  if (cache.serial != w.serial() || cache.nu != nu || cache.eps.size() != w.size() ||
      w.serial() == 0) {
    cache.eps.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) cache.eps[i] = special::student_t_quantile(w[i], nu);
    cache.serial = w.serial();
    cache.nu = nu;
  }
  return cache.eps;
}

}  // namespace

void CensoredStudentTModel::simulate_into(const ParamVector& theta, const RandomBlock& w,
                                          Dataset& out) const {
  require_inside(theta.values());
  const std::size_t n = w.size();
  if (n > design_.rows()) throw ConfigError("sample size exceeds design rows");
  const std::size_t k = design_.k;
  const double sigma = theta[k + 1], nu = theta[k + 2];
  const auto& eps = t_noise(w, nu);
  out.k = k;
  out.x.assign(design_.x.begin(), design_.x.begin() + static_cast<std::ptrdiff_t>(n * k));
  out.y.resize(n);
  out.d.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = theta[0];
    for (std::size_t j = 0; j < k; ++j) mu += design_.x[i * k + j] * theta[j + 1];
    const double y = mu + sigma * eps[i];
    out.d[i] = y > 0.0 ? 1 : 0;
    out.y[i] = y > 0.0 ? y : 0.0;
  }
}

double CensoredStudentTModel::log_likelihood(std::span<const double> theta,
                                             const Dataset& data) const {
  const std::size_t k = design_.k;
  const double sigma = theta[k + 1], nu = theta[k + 2];
  if (!(sigma > 0.0 && nu > 0.0)) return -kInf;
  const double lc = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                    0.5 * std::log(nu * std::numbers::pi) - std::log(sigma);
  double ll = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    double mu = theta[0];
    for (std::size_t j = 0; j < k; ++j) mu += data.x[i * k + j] * theta[j + 1];
    if (data.d[i]) {
      const double r = (data.y[i] - mu) / sigma;
      ll += lc - 0.5 * (nu + 1.0) * std::log1p(r * r / nu);
    } else {
      ll += std::log(special::student_t_cdf(-mu / sigma, nu));
    }
  }
  return ll;
}

// ---------------------------------------------------------------------------

MG1QueueModel::MG1QueueModel()
    : box_{std::vector<double>{0.0, 0.0, 0.0}, std::vector<double>{kInf, kInf, kInf},
           std::vector<bool>{false, false, false}} {}

bool MG1QueueModel::feasible(std::span<const double> theta) const {
  return theta.size() == 3 && theta[0] > 0.0 && theta[1] > theta[0] && theta[2] > 0.0 &&
         std::isfinite(theta[1]) && std::isfinite(theta[2]);
}

std::vector<double> MG1QueueModel::to_unconstrained(std::span<const double> theta) const {
  return {std::log(theta[0]), std::log(theta[1] - theta[0]), std::log(theta[2])};
}

std::vector<double> MG1QueueModel::from_unconstrained(std::span<const double> z) const {
  const double t1 = std::exp(z[0]);
  return {t1, t1 + std::exp(z[1]), std::exp(z[2])};
}

std::vector<double> MG1QueueModel::initial_from_aux(std::span<const double> pi) const {
  if (pi.size() != 3 || !(pi[1] > 0.0) || !(pi[2] > 0.0)) return {0.5, 1.0, 1.0};
  // Inter-departure times are at least theta1 and have mean 1 / theta3; read
  // both off quantiles of the fitted Frechet law.
  auto quantile = [&](double p) { return pi[0] + pi[1] * std::pow(-std::log(p), -1.0 / pi[2]); };
  const double lo = quantile(0.005), med = quantile(0.5);
  if (!(lo > 0.0) || !(med > lo) || !std::isfinite(med)) return {0.5, 1.0, 1.0};
  return {lo, med, 1.0 / med};
}

void MG1QueueModel::simulate_into(const ParamVector& theta, const RandomBlock& w,
                                  Dataset& out) const {
  require_inside(theta.values());
  const std::size_t n = w.size() / 2;
  const double t1 = theta[0], width = theta[1] - theta[0], rate = theta[2];
  out.y.resize(n);
  double arrival = 0.0, departure = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double service = t1 + width * w[i];
    arrival += -std::log1p(-w[n + i]) / rate;
    // d_i = max(d_{i-1}, a_i) + s_i, written so that y_i >= s_i holds exactly.
    const double y = arrival > departure ? (arrival - departure) + service : service;
    out.y[i] = y;
    departure += y;
  }
}

}  // namespace ib
