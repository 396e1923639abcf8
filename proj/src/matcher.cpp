#include "ib/matcher.hpp"

#include <algorithm>
#include <cmath>

#include "ib/errors.hpp"
#include "ib/optim.hpp"

namespace ib {

const char* path_name(MatchPath p) noexcept {
  switch (p) {
    case MatchPath::Nested: return "nested";
    case MatchPath::Switched: return "switched";
    case MatchPath::ClosedForm: return "closed_form";
  }
  return "?";
}

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

// delta(theta) = || pi_obs - est(simulate(theta, w*)) ||, +inf where the
// model or the estimator cannot be evaluated.
class DeltaEvaluator {
 public:
  DeltaEvaluator(const AuxEstimate& pi_obs, const Model& model, const Estimator& est,
                 const RandomBlock& w_star)
      : pi_(pi_obs.pi), model_(model), est_(est), w_(w_star) {}

  double operator()(std::span<const double> theta) { return eval(theta, false); }
  /// Same value; the estimator may start its search at pi_obs.
  double near(std::span<const double> theta) { return eval(theta, true); }

  int evals() const noexcept { return evals_; }

 private:
  double eval(std::span<const double> theta, bool warm) {
    ++evals_;
    if (!model_.feasible(theta)) return kInf;
    try {
      model_.simulate_into(ParamVector(theta), w_, scratch_);
      const AuxEstimate e = warm ? est_.estimate_near(scratch_, pi_) : est_.estimate(scratch_);
      if (e.pi.size() != pi_.size()) return kInf;
      double s = 0.0;
      for (std::size_t i = 0; i < pi_.size(); ++i) {
        const double d = pi_[i] - e.pi[i];
        s += d * d;
      }
      const double r = std::sqrt(s);
      return std::isfinite(r) ? r : kInf;
    } catch (const Error&) {
      return kInf;
    }
  }

  const std::vector<double>& pi_;
  const Model& model_;
  const Estimator& est_;
  const RandomBlock& w_;
  Dataset scratch_;
  int evals_ = 0;
};

bool within_tol(double delta, const AuxEstimate& pi_obs, const SolverConfig& cfg) {
  return delta <= cfg.tol_delta * std::max(1.0, norm(pi_obs.pi));
}

int budget(const Model& model, const SolverConfig& cfg) {
  return cfg.max_evals > 0 ? cfg.max_evals : 2000 * static_cast<int>(model.dim());
}

void check_inputs(const AuxEstimate& pi_obs, const Model& model, const RandomBlock& w_star) {
  for (double v : pi_obs.pi) {
    if (!std::isfinite(v)) throw DomainError("observed auxiliary estimate is not finite");
  }
  if (w_star.size() == 0) throw EmptyBlock();
  if (model.noise_dim(model.sample_size(w_star.size())) != w_star.size()) {
    throw DomainError("noise block dimension does not match the model");
  }
}

MatchResult nested_from(const AuxEstimate& pi_obs, const Model& model, const Estimator& est,
                        const RandomBlock& w_star, const SolverConfig& cfg,
                        std::vector<double> theta0, int evals_so_far) {
  DeltaEvaluator delta(pi_obs, model, est, w_star);
  MatchResult r;
  r.path = MatchPath::Nested;
  const double d0 = delta(theta0);
  if (d0 == 0.0) {
    r.theta_check = ParamVector(std::move(theta0));
    r.objective_evals = evals_so_far + delta.evals();
    r.converged = true;
    return r;
  }
  auto objective = [&](std::span<const double> x) {
    return delta(model.from_unconstrained(x));
  };
  optim::NelderMeadOptions nm;
  nm.f_target = 0.0;
  nm.tol_x = cfg.tol_x;
  nm.max_evals = std::max(1, budget(model, cfg) - evals_so_far - 1);
  nm.restarts = cfg.restarts;
  const std::vector<double> x0 = model.to_unconstrained(theta0);
  const optim::NelderMeadResult res = optim::nelder_mead(objective, x0, nm);
  if (res.f < d0) {
    r.theta_check = ParamVector(model.from_unconstrained(res.x));
    r.delta = res.f;
  } else {
    r.theta_check = ParamVector(std::move(theta0));
    r.delta = d0;
  }
  r.objective_evals = evals_so_far + delta.evals();
  r.converged = std::isfinite(r.delta) && within_tol(r.delta, pi_obs, cfg);
  return r;
}

}  // namespace

std::vector<double> initial_point(const AuxEstimate& pi_obs, const Model& model,
                                  const SolverConfig& cfg) {
  switch (cfg.init_rule) {
    case InitRule::AtPiHat: return model.initial_from_aux(pi_obs.pi);
    case InitRule::AtBoxCenter: return model.box().center();
    case InitRule::User:
      if (cfg.user_init.size() != model.dim()) {
        throw ConfigError("user_init has the wrong dimension");
      }
      return cfg.user_init;
  }
  return model.box().center();
}

MatchResult nested_match(const AuxEstimate& pi_obs, const Model& model, const Estimator& est,
                         const RandomBlock& w_star, const SolverConfig& cfg) {
  check_inputs(pi_obs, model, w_star);
  return nested_from(pi_obs, model, est, w_star, cfg, initial_point(pi_obs, model, cfg), 0);
}

MatchResult switched_match(const AuxEstimate& pi_obs, const Model& model, const Estimator& est,
                           const RandomBlock& w_star, const SolverConfig& cfg) {
  if (!est.has_z()) throw NoZFunction(std::string(est.name()));
  check_inputs(pi_obs, model, w_star);
  const std::size_t p = model.dim();
  if (est.dim() != p) throw DomainError("switched path needs dim(pi) == dim(theta)");

  Dataset scratch;
  int z_evals = 0;
  auto system = [&](std::span<const double> x, std::span<double> out) {
    ++z_evals;
    const std::vector<double> theta = model.from_unconstrained(x);
    if (!model.feasible(theta)) return false;
    try {
      model.simulate_into(ParamVector(theta), w_star, scratch);
      return est.z(scratch, pi_obs.pi, out);
    } catch (const Error&) {
      return false;
    }
  };

  std::vector<double> theta0 = initial_point(pi_obs, model, cfg);
  DeltaEvaluator delta(pi_obs, model, est, w_star);

  // An exact fixed point is returned untouched.
  const std::vector<double> x0 = model.to_unconstrained(theta0);
  std::vector<double> z0(p);
  const bool z0_ok = system(x0, z0);
  if (z0_ok && norm(z0) <= 1e-10 && delta(theta0) == 0.0) {
    MatchResult r;
    r.theta_check = ParamVector(std::move(theta0));
    r.objective_evals = z_evals + delta.evals();
    r.converged = true;
    r.path = MatchPath::Switched;
    return r;
  }

  optim::RootOptions ro;
  ro.tol_f = cfg.tol_z;
  ro.max_evals = std::max(50, budget(model, cfg) / 4);
  const optim::RootResult rr =
      optim::solve_system(system, x0, p, ro, z0_ok ? std::span<const double>(z0) : std::span<const double>());
  const std::vector<double> theta = model.from_unconstrained(rr.x);
  const double d = std::isfinite(rr.norm) ? delta.near(theta) : kInf;
  if (std::isfinite(d) && (rr.converged || within_tol(d, pi_obs, cfg))) {
    MatchResult r;
    r.theta_check = ParamVector(theta);
    r.delta = d;
    r.objective_evals = z_evals + delta.evals();
    r.converged = within_tol(d, pi_obs, cfg);
    r.path = MatchPath::Switched;
    return r;
  }
  // Root finder stalled: continue with the nested search from the better point.
  std::vector<double> start = std::isfinite(d) ? theta : theta0;
  return nested_from(pi_obs, model, est, w_star, cfg, std::move(start),
                     z_evals + delta.evals());
}

MatchResult closed_form_match(exact::Example example, const AuxEstimate& pi_obs,
                              const RandomBlock& w_star) {
  MatchResult r;
  r.path = MatchPath::ClosedForm;
  r.converged = true;
  r.objective_evals = 1;
  switch (example) {
    case exact::Example::Uniform: {
      // sample_max(theta w*) = theta u*_(n).
      const Dataset canon = UniformScaleModel().simulate(ParamVector{1.0}, w_star);
      const double m = SampleMaxEstimator().estimate(canon).pi[0];
      if (!(pi_obs.pi[0] > 0.0)) throw DomainError("uniform closed form needs pi > 0");
      r.theta_check = ParamVector{pi_obs.pi[0] / m};
      r.delta = std::abs(pi_obs.pi[0] - r.theta_check[0] * m);
      return r;
    }
    case exact::Example::Pareto: {
      // Pareto(mu, a) data are mu Y^(1/a) with Y ~ Pareto(1, 1); the MLE maps
      // to (mu m1^(1/a), a a1) where (m1, a1) is the MLE on Y.
      const Dataset canon = ParetoModel().simulate(ParamVector{1.0, 1.0}, w_star);
      const std::vector<double> e = ParetoMleEstimator().estimate(canon).pi;
      const double alpha = pi_obs.pi[1] / e[1];
      const double mu = pi_obs.pi[0] * std::pow(e[0], -1.0 / alpha);
      r.theta_check = ParamVector{mu, alpha};
      r.delta = 0.0;
      return r;
    }
    case exact::Example::Andrews: {
      // mean of the canonical sample at theta = 0 is w*; pi(theta) = max(theta + w*, 0).
      const Dataset canon = NormalMeanModel().simulate(ParamVector{0.0}, w_star);
      double w = 0.0;
      for (double y : canon.y) w += y;
      w /= static_cast<double>(canon.n());
      const double theta = std::max(pi_obs.pi[0] - w, 0.0);
      r.theta_check = ParamVector{theta};
      r.delta = std::abs(pi_obs.pi[0] - std::max(theta + w, 0.0));
      return r;
    }
  }
  throw UnsupportedExample(exact::example_name(example));
}

MatchResult match(MatchPath path, const AuxEstimate& pi_obs, const Model& model,
                  const Estimator& est, const RandomBlock& w_star, const SolverConfig& cfg) {
  switch (path) {
    case MatchPath::Nested: return nested_match(pi_obs, model, est, w_star, cfg);
    case MatchPath::Switched: return switched_match(pi_obs, model, est, w_star, cfg);
    case MatchPath::ClosedForm: {
      const std::string name(model.name());
      return closed_form_match(exact::parse_example(name), pi_obs, w_star);
    }
  }
  throw DomainError("unknown match path");
}

}  // namespace ib
