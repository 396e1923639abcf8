#pragma once

// Solves the matching problem
//   theta_check = argmin_theta || pi_obs - pi_hat(simulate(theta, w*)) ||
// with the noise block w* held fixed (common random numbers).

#include <cstddef>
#include <vector>

#include "ib/estimators.hpp"
#include "ib/exact_models.hpp"
#include "ib/models.hpp"

namespace ib {

enum class InitRule { AtPiHat, AtBoxCenter, User };
enum class MatchPath { Nested, Switched, ClosedForm };

const char* path_name(MatchPath p) noexcept;

struct SolverConfig {
  double tol_delta = 1e-8;  // relative to max(1, ||pi_obs||)
  double tol_x = 1e-10;
  double tol_z = 1e-11;     // switched path: target norm of the estimating equation
  int max_evals = 0;        // 0 means 2000 p
  int restarts = 3;
  InitRule init_rule = InitRule::AtPiHat;
  std::vector<double> user_init;
};

struct MatchResult {
  ParamVector theta_check;
  double delta = 0.0;
  int objective_evals = 0;
  bool converged = false;
  MatchPath path = MatchPath::Nested;
};

/// Nelder-Mead on the model's unconstrained coordinates. The starting point
/// is evaluated first and returned as is when it matches exactly.
MatchResult nested_match(const AuxEstimate& pi_obs, const Model& model, const Estimator& est,
                         const RandomBlock& w_star, const SolverConfig& cfg);

/// Solves z(simulate(theta, w*), pi_obs) = 0 by Levenberg-Marquardt, then
/// reports delta as in the nested path. Falls back to nested_match (and says
/// so in `path`) when the root finder fails. Throws NoZFunction.
MatchResult switched_match(const AuxEstimate& pi_obs, const Model& model, const Estimator& est,
                           const RandomBlock& w_star, const SolverConfig& cfg);

/// Algebraic solution for the exact examples, obtained by running the
/// estimator on the canonical dataset simulated from w* and using the
/// model's equivariance.
MatchResult closed_form_match(exact::Example example, const AuxEstimate& pi_obs,
                              const RandomBlock& w_star);

/// Dispatch on `path`.
MatchResult match(MatchPath path, const AuxEstimate& pi_obs, const Model& model,
                  const Estimator& est, const RandomBlock& w_star, const SolverConfig& cfg);

/// Starting point for a match under cfg.init_rule.
std::vector<double> initial_point(const AuxEstimate& pi_obs, const Model& model,
                                  const SolverConfig& cfg);

}  // namespace ib
