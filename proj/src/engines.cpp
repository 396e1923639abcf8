#include "ib/engines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>

#include "ib/errors.hpp"
#include "ib/optim.hpp"
#include "ib/parallel.hpp"
#include "ib/special.hpp"

namespace ib {

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("IB_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

// ---------------------------------------------------------------------------
// Quantiles and intervals

double empirical_quantile_sorted(std::span<const double> sorted, double alpha) {
  if (sorted.empty()) throw EmptyData();
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("quantile level must lie in (0,1)");
  const double B = static_cast<double>(sorted.size());
  const double ab = alpha * B;
  const double r = std::round(ab);
  const double k = std::abs(ab - r) <= 1e-9 * std::max(1.0, ab) ? r : std::ceil(ab);
  const std::size_t idx = static_cast<std::size_t>(std::clamp(k, 1.0, B)) - 1;
  return sorted[idx];
}

double empirical_quantile(const DistributionSample& sample, double alpha) {
  std::vector<double> v = sample.values;
  std::sort(v.begin(), v.end());
  return empirical_quantile_sorted(v, alpha);
}

const char* method_name(CIMethod m) noexcept {
  switch (m) {
    case CIMethod::Implicit: return "implicit";
    case CIMethod::Percentile: return "percentile";
    case CIMethod::Studentized: return "studentized";
    case CIMethod::BCa: return "bca";
    case CIMethod::Asymptotic: return "asymptotic";
  }
  return "?";
}

CIMethod parse_method(const std::string& name) {
  for (CIMethod m : {CIMethod::Implicit, CIMethod::Percentile, CIMethod::Studentized,
                     CIMethod::BCa, CIMethod::Asymptotic}) {
    if (name == method_name(m)) return m;
  }
  throw ConfigError("unknown interval method '" + name + "'");
}

IntervalEstimate::IntervalEstimate(CIMethod method, std::vector<double> sorted, double point,
                                   double sigma, double z0, double accel,
                                   double delta_flag_fraction)
    : method_(method),
      sorted_(std::move(sorted)),
      point_(point),
      sigma_(sigma),
      z0_(z0),
      accel_(accel),
      delta_flag_fraction_(delta_flag_fraction) {}

double IntervalEstimate::level_quantile(double level) const {
  switch (method_) {
    case CIMethod::Implicit:
    case CIMethod::Percentile:
      return empirical_quantile_sorted(sorted_, level);
    case CIMethod::BCa: {
      const double zl = special::normal_quantile(level);
      const double s = z0_ + zl;
      const double den = 1.0 - accel_ * s;
      double adj = den > 0.0 ? special::normal_cdf(z0_ + s / den) : (s > 0 ? 1.0 : 0.0);
      const double lo = 0.5 / static_cast<double>(sorted_.size());
      adj = std::clamp(adj, lo, 1.0 - lo);
      return empirical_quantile_sorted(sorted_, adj);
    }
    case CIMethod::Studentized:
      return point_ - sigma_ * empirical_quantile_sorted(sorted_, 1.0 - level);
    case CIMethod::Asymptotic:
      return point_ + sigma_ * special::normal_quantile(level);
  }
  return point_;
}

double IntervalEstimate::upper(double alpha) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  return level_quantile(alpha);
}

std::pair<double, double> IntervalEstimate::two_sided(double gamma) const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("confidence level must lie in (0,1)");
  double lo = level_quantile(0.5 * (1.0 - gamma));
  double hi = level_quantile(0.5 * (1.0 + gamma));
  if (lo > hi) std::swap(lo, hi);
  return {lo, hi};
}

CIResult IntervalEstimate::one_sided_ci(double alpha) const {
  CIResult r;
  r.method = method_;
  r.alpha = alpha;
  r.lower = -kInf;
  r.upper = upper(alpha);
  r.point = point_;
  r.B = sorted_.size();
  r.delta_flag_fraction = delta_flag_fraction_;
  r.sigma_hat = sigma_;
  return r;
}

CIResult IntervalEstimate::two_sided_ci(double gamma) const {
  CIResult r = one_sided_ci(0.5);
  r.alpha = gamma;
  std::tie(r.lower, r.upper) = two_sided(gamma);
  return r;
}

// ---------------------------------------------------------------------------
// BootstrapRun

DistributionSample BootstrapRun::sample(const Functional& psi) const {
  DistributionSample s;
  s.requested = requested;
  s.failed = failed;
  s.delta_flagged = delta_flagged;
  s.values.reserve(draws.size());
  for (const auto& t : draws) s.values.push_back(psi(t));
  for (auto c : draw_converged) s.nonconverged += c ? 0 : 1;
  if (!draw_delta.empty()) {
    double acc = 0.0;
    for (double d : draw_delta) acc += d;
    s.mean_delta = acc / static_cast<double>(draw_delta.size());
  }
  return s;
}

namespace {

double quad_form(const Eigen::MatrixXd& cov, const std::vector<double>& g) {
  const Eigen::Map<const Eigen::VectorXd> v(g.data(), static_cast<Eigen::Index>(g.size()));
  return v.dot(cov * v);
}

}  // namespace

IntervalEstimate BootstrapRun::interval(const Functional& psi) const {
  const double flag_frac =
      draws.empty() ? 0.0 : static_cast<double>(delta_flagged) / static_cast<double>(draws.size());
  switch (method) {
    case CIMethod::Implicit:
    case CIMethod::Percentile: {
      std::vector<double> v;
      v.reserve(draws.size());
      for (const auto& t : draws) v.push_back(psi(t));
      std::sort(v.begin(), v.end());
      if (v.empty()) throw NonConvergence("no successful bootstrap draws");
      const double point = method == CIMethod::Percentile ? psi(theta_hat)
                                                          : empirical_quantile_sorted(v, 0.5);
      return IntervalEstimate(method, std::move(v), point, 0.0, 0.0, 0.0, flag_frac);
    }
    case CIMethod::BCa: {
      std::vector<double> v;
      for (const auto& t : draws) v.push_back(psi(t));
      std::sort(v.begin(), v.end());
      if (v.empty()) throw NonConvergence("no successful bootstrap draws");
      const double point = psi(theta_hat);
      const double B = static_cast<double>(v.size());
      const auto lower = std::lower_bound(v.begin(), v.end(), point);
      const auto upper = std::upper_bound(v.begin(), v.end(), point);
      double frac = (static_cast<double>(lower - v.begin()) +
                     0.5 * static_cast<double>(upper - lower)) / B;
      frac = std::clamp(frac, 0.5 / B, 1.0 - 0.5 / B);
      const double z0 = special::normal_quantile(frac);
      double accel = 0.0;
      if (jackknife.size() >= 2) {
        std::vector<double> j;
        for (const auto& t : jackknife) j.push_back(psi(t));
        double mean = 0.0;
        for (double x : j) mean += x;
        mean /= static_cast<double>(j.size());
        double s2 = 0.0, s3 = 0.0;
        for (double x : j) {
          const double d = mean - x;
          s2 += d * d;
          s3 += d * d * d;
        }
        if (s2 > 0.0) accel = s3 / (6.0 * std::pow(s2, 1.5));
      }
      return IntervalEstimate(method, std::move(v), point, 0.0, z0, accel, flag_frac);
    }
    case CIMethod::Studentized: {
      const double point = psi(theta_hat);
      const double sigma = std::sqrt(quad_form(cov_hat, psi.grad(theta_hat.values())));
      std::vector<double> t;
      t.reserve(draws.size());
      for (std::size_t b = 0; b < draws.size(); ++b) {
        const double s = std::sqrt(quad_form(draw_cov[b], psi.grad(draws[b].values())));
        if (s > 0.0 && std::isfinite(s)) t.push_back((psi(draws[b]) - point) / s);
      }
      if (t.empty() || !(sigma > 0.0)) throw SingularInformation("studentized: zero standard error");
      std::sort(t.begin(), t.end());
      return IntervalEstimate(method, std::move(t), point, sigma, 0.0, 0.0, flag_frac);
    }
    case CIMethod::Asymptotic: {
      const double point = psi(theta_hat);
      const double sigma = std::sqrt(quad_form(cov_hat, psi.grad(theta_hat.values())));
      if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw SingularInformation("asymptotic: invalid standard error");
      }
      return IntervalEstimate(method, {}, point, sigma, 0.0, 0.0, 0.0);
    }
  }
  throw DomainError("unknown interval method");
}

// ---------------------------------------------------------------------------
// Draw machinery

double delta_threshold(std::size_t n, const AuxEstimate& pi_obs) {
  double s = 0.0;
  for (double v : pi_obs.pi) s += v * v;
  return 0.5 * std::pow(static_cast<double>(n), -1.5) * std::sqrt(s);
}

Eigen::MatrixXd inverse_information(const Model& model, std::span<const double> theta,
                                    const Dataset& data) {
  const Eigen::MatrixXd info = model.observed_information(theta, data);
  if (!info.allFinite()) throw SingularInformation("observed information is not finite");
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SingularInformation("observed information is not positive definite");
  }
  const Eigen::VectorXd d = ldlt.vectorD();
  if (d.minCoeff() <= 1e-12 * std::max(1.0, d.maxCoeff())) {
    throw SingularInformation("observed information is singular");
  }
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  return 0.5 * (inv + inv.transpose());
}

namespace {

struct Draw {
  ParamVector theta;
  bool converged = true;
  double delta = 0.0;
  Eigen::MatrixXd cov;
};

void finish(BootstrapRun& run, std::vector<std::optional<Draw>>& draws, const EngineConfig& cfg,
            double flag_threshold) {
  run.requested = draws.size();
  for (auto& d : draws) {
    if (!d) {
      ++run.failed;
      continue;
    }
    run.draws.push_back(std::move(d->theta));
    run.draw_converged.push_back(d->converged ? 1 : 0);
    if (run.method == CIMethod::Implicit) {
      run.draw_delta.push_back(d->delta);
      if (d->delta > flag_threshold) ++run.delta_flagged;
    }
    if (run.method == CIMethod::Studentized) run.draw_cov.push_back(std::move(d->cov));
  }
  if (static_cast<double>(run.failed) > cfg.max_fail_fraction * static_cast<double>(run.requested) ||
      run.draws.empty()) {
    throw NonConvergence(std::string(method_name(run.method)) + ": " + std::to_string(run.failed) +
                         " of " + std::to_string(run.requested) + " draws failed");
  }
  if (run.requested < 100) {
    run.warnings.push_back("B = " + std::to_string(run.requested) +
                           " is below 100; percentile endpoints are coarse");
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

ParamVector point_in_box(const Model& model, const AuxEstimate& e) {
  if (e.pi.size() != model.dim()) {
    throw ConfigError("baseline estimator must estimate the model parameter");
  }
  if (!all_finite(e.pi)) throw NonConvergence("point estimate is not finite");
  return ParamVector(model.box().clamp(e.pi));
}

// theta_hat*_b = est(simulate(theta_hat, BOOT(b))) for b = 1..count.
std::vector<std::optional<Draw>> parametric_draws(const Model& model, const Estimator& est,
                                                  const ParamVector& theta_hat, std::size_t n,
                                                  std::size_t count, const EngineConfig& cfg,
                                                  bool with_cov, std::uint64_t salt) {
  std::vector<std::optional<Draw>> out(count);
  const std::size_t m = model.noise_dim(n);
  parallel_for(count, cfg.threads, [&](std::size_t b) {
    const RandomBlock w = rng::draw_block(cfg.master, rng::StreamKey::boot(cfg.replicate, b + 1, salt), m);
    try {
      const Dataset data = model.simulate(theta_hat, w);
      const AuxEstimate e = est.estimate(data);
      if (e.pi.size() != model.dim() || !all_finite(e.pi)) return;
      Draw d;
      d.theta = ParamVector(model.box().clamp(e.pi));
      d.converged = e.converged;
      if (with_cov) d.cov = inverse_information(model, d.theta.values(), data);
      out[b] = std::move(d);
    } catch (const Error&) {
    }
  });
  return out;
}

}  // namespace

BootstrapRun implicit_bootstrap(const Dataset& data, const Model& model, const Estimator& est,
                                const EngineConfig& cfg) {
  return implicit_bootstrap_from(est.estimate(data), data.n(), model, est, cfg);
}

BootstrapRun implicit_bootstrap_from(const AuxEstimate& pi_obs, std::size_t n, const Model& model,
                                     const Estimator& est, const EngineConfig& cfg) {
  if (cfg.B == 0) throw ConfigError("B must be positive");
  BootstrapRun run;
  run.method = CIMethod::Implicit;
  run.n = n;
  run.pi_obs = pi_obs;
  const std::size_t m = model.noise_dim(n);
  SolverConfig scfg = cfg.solver;
  if (cfg.pilot_init && cfg.path != MatchPath::ClosedForm) {
    const RandomBlock w0 = rng::draw_block(cfg.master, rng::StreamKey::boot(cfg.replicate, 0), m);
    try {
      const MatchResult r0 = match(cfg.path, pi_obs, model, est, w0, scfg);
      if (std::isfinite(r0.delta)) {
        scfg.init_rule = InitRule::User;
        scfg.user_init = r0.theta_check.vec();
      }
    } catch (const Error&) {
    }
  }
  std::vector<std::optional<Draw>> draws(cfg.B);
  parallel_for(cfg.B, cfg.threads, [&](std::size_t b) {
    const RandomBlock w = rng::draw_block(cfg.master, rng::StreamKey::boot(cfg.replicate, b + 1), m);
    try {
      const MatchResult r = match(cfg.path, pi_obs, model, est, w, scfg);
      if (!std::isfinite(r.delta) || !all_finite(r.theta_check.values())) return;
      draws[b] = Draw{r.theta_check, r.converged, r.delta, {}};
    } catch (const Error&) {
    }
  });
  finish(run, draws, cfg, delta_threshold(n, pi_obs));
  return run;
}

BootstrapRun percentile_bootstrap(const Dataset& data, const Model& model, const Estimator& est,
                                  const EngineConfig& cfg) {
  if (cfg.B == 0) throw ConfigError("B must be positive");
  BootstrapRun run;
  run.method = CIMethod::Percentile;
  run.n = data.n();
  run.pi_obs = est.estimate(data);
  run.theta_hat = point_in_box(model, run.pi_obs);
  auto draws = parametric_draws(model, est, run.theta_hat, data.n(), cfg.B, cfg, false, 0);
  finish(run, draws, cfg, 0.0);
  return run;
}

BootstrapRun studentized_bootstrap(const Dataset& data, const Model& model, const Estimator& est,
                                   const EngineConfig& cfg) {
  if (!model.has_log_likelihood()) {
    throw ConfigError("studentized bootstrap needs a model with a log-likelihood");
  }
  if (cfg.B == 0) throw ConfigError("B must be positive");
  BootstrapRun run;
  run.method = CIMethod::Studentized;
  run.n = data.n();
  run.pi_obs = est.estimate(data);
  run.theta_hat = point_in_box(model, run.pi_obs);
  run.cov_hat = inverse_information(model, run.theta_hat.values(), data);
  auto draws = parametric_draws(model, est, run.theta_hat, data.n(), cfg.B, cfg, true, 0);
  finish(run, draws, cfg, 0.0);
  return run;
}

BootstrapRun bca_bootstrap(const Dataset& data, const Model& model, const Estimator& est,
                           const EngineConfig& cfg) {
  if (cfg.B == 0) throw ConfigError("B must be positive");
  BootstrapRun run;
  run.method = CIMethod::BCa;
  run.n = data.n();
  run.pi_obs = est.estimate(data);
  run.theta_hat = point_in_box(model, run.pi_obs);
  auto draws = parametric_draws(model, est, run.theta_hat, data.n(), cfg.B, cfg, false, 0);
  finish(run, draws, cfg, 0.0);

  const std::size_t n = data.n();
  std::vector<std::optional<ParamVector>> jk(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    Dataset d;
    d.k = data.k;
    d.y.reserve(n - 1);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == i) continue;
      d.y.push_back(data.y[r]);
      if (data.k) d.x.insert(d.x.end(), data.x.begin() + r * data.k, data.x.begin() + (r + 1) * data.k);
      if (!data.d.empty()) d.d.push_back(data.d[r]);
    }
    try {
      const AuxEstimate e = est.estimate(d);
      if (e.pi.size() == model.dim() && all_finite(e.pi)) jk[i] = ParamVector(model.box().clamp(e.pi));
    } catch (const Error&) {
    }
  });
  for (auto& j : jk) {
    if (j) run.jackknife.push_back(std::move(*j));
  }
  if (run.jackknife.size() < std::max<std::size_t>(2, n / 2)) {
    run.jackknife.clear();
    run.warnings.push_back("jackknife failed; acceleration set to 0");
  }
  return run;
}

BootstrapRun asymptotic_ci(const Dataset& data, const Model& model, const Estimator& est,
                           const EngineConfig& cfg, CovarianceSource source,
                           std::size_t cov_draws) {
  BootstrapRun run;
  run.method = CIMethod::Asymptotic;
  run.n = data.n();
  run.pi_obs = est.estimate(data);
  run.theta_hat = point_in_box(model, run.pi_obs);
  if (source == CovarianceSource::Information) {
    if (!model.has_log_likelihood()) {
      throw ConfigError("information-based Wald intervals need a log-likelihood");
    }
    run.cov_hat = inverse_information(model, run.theta_hat.values(), data);
    return run;
  }
  if (cov_draws < 2) throw ConfigError("bootstrap covariance needs at least 2 draws");
  auto draws = parametric_draws(model, est, run.theta_hat, data.n(), cov_draws, cfg, false, 0);
  const std::size_t p = model.dim();
  std::vector<Eigen::VectorXd> ok;
  for (auto& d : draws) {
    if (d) ok.push_back(Eigen::Map<const Eigen::VectorXd>(d->theta.vec().data(), static_cast<Eigen::Index>(p)));
  }
  if (static_cast<double>(ok.size()) < (1.0 - cfg.max_fail_fraction) * static_cast<double>(cov_draws) ||
      ok.size() < 2) {
    throw NonConvergence("bootstrap covariance: too many failed draws");
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (const auto& v : ok) mean += v;
  mean /= static_cast<double>(ok.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (const auto& v : ok) cov += (v - mean) * (v - mean).transpose();
  run.cov_hat = cov / static_cast<double>(ok.size() - 1);
  return run;
}

// ---------------------------------------------------------------------------
// Indirect inference

namespace {

IndirectInferenceResult ii_solve(const AuxEstimate& pi_obs, const Model& model, const Estimator& est,
                                 const std::vector<RandomBlock>& blocks, const SolverConfig& cfg) {
  const std::size_t q = pi_obs.pi.size();
  Dataset scratch;
  std::vector<double> avg(q);
  int evals = 0;
  auto g = [&](std::span<const double> theta) -> double {
    ++evals;
    if (!model.feasible(theta)) return kInf;
    std::fill(avg.begin(), avg.end(), 0.0);
    try {
      for (const auto& w : blocks) {
        model.simulate_into(ParamVector(theta), w, scratch);
        const AuxEstimate e = est.estimate(scratch);
        if (e.pi.size() != q) return kInf;
        for (std::size_t i = 0; i < q; ++i) avg[i] += e.pi[i];
      }
    } catch (const Error&) {
      return kInf;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      const double d = pi_obs.pi[i] - avg[i] / static_cast<double>(blocks.size());
      s += d * d;
    }
    return std::isfinite(s) ? std::sqrt(s) : kInf;
  };
  const std::vector<double> theta0 = initial_point(pi_obs, model, cfg);
  const double g0 = g(theta0);
  IndirectInferenceResult r;
  if (g0 == 0.0) {
    r.theta = ParamVector(theta0);
    r.converged = true;
    r.evals = evals;
    return r;
  }
  optim::NelderMeadOptions nm;
  nm.f_target = 0.0;
  nm.tol_x = cfg.tol_x;
  nm.max_evals = cfg.max_evals > 0 ? cfg.max_evals : 2000 * static_cast<int>(model.dim());
  nm.restarts = cfg.restarts;
  auto obj = [&](std::span<const double> x) { return g(model.from_unconstrained(x)); };
  const auto res = optim::nelder_mead(obj, model.to_unconstrained(theta0), nm);
  const bool better = res.f < g0;
  r.theta = ParamVector(better ? model.from_unconstrained(res.x) : theta0);
  r.delta = better ? res.f : g0;
  r.evals = evals;
  double norm = 0.0;
  for (double v : pi_obs.pi) norm += v * v;
  r.converged = r.delta <= cfg.tol_delta * std::max(1.0, std::sqrt(norm)) * 1e2 || res.converged;
  return r;
}

std::vector<RandomBlock> inner_blocks(const Model& model, std::size_t H, rng::MasterSeed master,
                                      std::uint64_t replicate, std::size_t n) {
  if (H == 0) throw ConfigError("indirect inference needs H >= 1");
  std::vector<RandomBlock> blocks;
  blocks.reserve(H);
  const std::size_t m = model.noise_dim(n);
  for (std::size_t h = 0; h < H; ++h) {
    blocks.push_back(rng::draw_block(master, rng::StreamKey::inner(replicate, 0, h), m));
  }
  return blocks;
}

}  // namespace

IndirectInferenceResult indirect_inference_correct(const Dataset& data, const Model& model,
                                                   const Estimator& est, std::size_t H,
                                                   rng::MasterSeed master, std::uint64_t replicate,
                                                   const SolverConfig& cfg) {
  const auto blocks = inner_blocks(model, H, master, replicate, data.n());
  return ii_solve(est.estimate(data), model, est, blocks, cfg);
}

IndirectInferenceEstimator::IndirectInferenceEstimator(std::shared_ptr<const Model> model,
                                                       std::shared_ptr<const Estimator> base,
                                                       std::size_t H, rng::MasterSeed master,
                                                       std::uint64_t replicate, std::size_t n,
                                                       SolverConfig cfg)
    : model_(std::move(model)),
      base_(std::move(base)),
      blocks_(inner_blocks(*model_, H, master, replicate, n)),
      cfg_(std::move(cfg)),
      name_(std::string(base_->name()) + "_ii") {}

AuxEstimate IndirectInferenceEstimator::estimate(const Dataset& data) const {
  if (data.n() != model_->sample_size(blocks_.front().size())) {
    throw DomainError("indirect inference: sample size differs from the frozen blocks");
  }
  const IndirectInferenceResult r = ii_solve(base_->estimate(data), *model_, *base_, blocks_, cfg_);
  AuxEstimate e;
  e.pi = r.theta.vec();
  e.converged = r.converged;
  e.iterations = r.evals;
  return e;
}

}  // namespace ib
