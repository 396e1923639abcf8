#pragma once

// Numerical solvers shared by the matcher and the estimators: a restarted
// Nelder-Mead with dimension-adaptive coefficients, a Levenberg-Marquardt
// root finder with finite-difference Jacobians, and a damped Newton maximizer.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ib::optim {

using Objective = std::function<double(std::span<const double>)>;
/// Writes F(x) into `out`; returns false when x is outside the domain.
using System = std::function<bool(std::span<const double>, std::span<double>)>;
using Gradient = std::function<bool(std::span<const double>, std::span<double>)>;

struct NelderMeadOptions {
  double f_target = 0.0;   // stop as soon as the best value is <= f_target
  double tol_f = 1e-15;
  double tol_x = 1e-10;
  int max_evals = 2000;
  int restarts = 3;
  double initial_step = 0.1;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int evals = 0;
  int restarts_used = 0;
  bool converged = false;
};

/// Minimizes f from x0. Non-finite values are treated as +infinity.
/// Gao-Han adaptive coefficients for dim >= 2, the classic ones for dim 1.
/// After convergence the search restarts from the best vertex with a shrunken
/// simplex; the returned point is the best over all restarts.
NelderMeadResult nelder_mead(const Objective& f, std::span<const double> x0,
                             const NelderMeadOptions& opts);

struct RootOptions {
  double tol_f = 1e-12;      // success when ||F|| <= tol_f
  double tol_step = 1e-14;   // relative step size at which iteration stalls
  int max_evals = 300;
  double fd_rel_step = 1.5e-8;
  bool broyden = true;       // secant updates between difference Jacobians
};

struct RootResult {
  std::vector<double> x;
  std::vector<double> fx;
  double norm = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Levenberg-Marquardt on ||F||^2 with forward-difference Jacobians; F maps
/// R^p to R^m with m >= p. A non-empty `f0` is taken as F(x0).
RootResult solve_system(const System& fn, std::span<const double> x0, std::size_t m,
                        const RootOptions& opts, std::span<const double> f0 = {});

struct MaximizeOptions {
  double grad_tol = 1e-11;  // on the max-abs gradient entry
  int max_iter = 200;
  double fd_rel_step = 1e-6;
};

struct MaximizeResult {
  std::vector<double> x;
  double f = 0.0;
  std::vector<double> grad;
  int iterations = 0;
  int evals = 0;
  bool converged = false;
};

/// Damped Newton ascent with Hessians from differences of the gradient.
/// f returns -inf outside the domain. grad may be empty, in which case a
/// central-difference gradient of f is used.
MaximizeResult newton_maximize(const Objective& f, const Gradient& grad,
                               std::span<const double> x0, const MaximizeOptions& opts);

/// Brent's method on [lo, hi].
std::pair<double, double> brent_minimize(const std::function<double(double)>& f, double lo,
                                         double hi, int bits = 52, int max_iter = 200);

}  // namespace ib::optim
