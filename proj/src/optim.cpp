#include "ib/optim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <numeric>

namespace ib::optim {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double finite_or_inf(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

struct NmRun {
  std::vector<double> x;
  double f;
  int evals;
  bool converged;
};

NmRun nelder_mead_once(const Objective& f, std::span<const double> x0, double f0,
                       double step, const NelderMeadOptions& opts, int budget) {
  const std::size_t n = x0.size();
  const double dn = static_cast<double>(n);
  double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  if (n >= 2) {
    gamma = 1.0 + 2.0 / dn;
    rho = 0.75 - 1.0 / (2.0 * dn);
    sigma = 1.0 - 1.0 / dn;
  }

  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(x0.begin(), x0.end()));
  std::vector<double> fv(n + 1);
  fv[0] = f0;
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return finite_or_inf(f(x));
  };
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1][i] += step * std::max(1.0, std::abs(x0[i]));
    fv[i + 1] = eval(simplex[i + 1]);
  }

  std::vector<std::size_t> order(n + 1);
  std::vector<double> c(n), xr(n), xe(n), xc(n);
  bool converged = false;
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    {
      std::vector<std::vector<double>> s2(n + 1);
      std::vector<double> f2(n + 1);
      for (std::size_t i = 0; i <= n; ++i) {
        s2[i] = std::move(simplex[order[i]]);
        f2[i] = fv[order[i]];
      }
      simplex = std::move(s2);
      fv = std::move(f2);
    }
    if (fv[0] <= opts.f_target) {
      converged = true;
      break;
    }
    double diam = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) diam = std::max(diam, std::abs(simplex[i][j] - simplex[0][j]));
    }
    const double spread = fv[n] - fv[0];
    if (diam <= opts.tol_x || (std::isfinite(spread) && spread <= opts.tol_f)) {
      converged = true;
      break;
    }
    if (evals >= budget) break;

    std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) c[j] += simplex[i][j] / dn;
    const auto& worst = simplex[n];
    for (std::size_t j = 0; j < n; ++j) xr[j] = c[j] + alpha * (c[j] - worst[j]);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      for (std::size_t j = 0; j < n; ++j) xe[j] = c[j] + gamma * (xr[j] - c[j]);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
      continue;
    }
    if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
      continue;
    }
    bool accepted = false;
    if (fr < fv[n]) {
      for (std::size_t j = 0; j < n; ++j) xc[j] = c[j] + rho * (xr[j] - c[j]);
      const double fc = eval(xc);
      if (fc <= fr) {
        simplex[n] = xc;
        fv[n] = fc;
        accepted = true;
      }
    } else {
      for (std::size_t j = 0; j < n; ++j) xc[j] = c[j] + rho * (worst[j] - c[j]);
      const double fc = eval(xc);
      if (fc < fv[n]) {
        simplex[n] = xc;
        fv[n] = fc;
        accepted = true;
      }
    }
    if (!accepted) {
      for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
          simplex[i][j] = simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]);
        fv[i] = eval(simplex[i]);
      }
    }
  }
  return {simplex[0], fv[0], evals, converged};
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::span<const double> x0,
                             const NelderMeadOptions& opts) {
  NelderMeadResult res;
  res.x.assign(x0.begin(), x0.end());
  res.f = finite_or_inf(f(res.x));
  res.evals = 1;
  if (res.f <= opts.f_target) {
    res.converged = true;
    return res;
  }
  double step = opts.initial_step;
  for (int r = 0; r <= opts.restarts; ++r) {
    const int budget = opts.max_evals - res.evals;
    if (budget <= 0) break;
    const double f_before = res.f;
    NmRun run = nelder_mead_once(f, res.x, res.f, step, opts, budget);
    res.evals += run.evals;
    res.restarts_used = r;
    if (run.f < res.f) {
      res.x = std::move(run.x);
      res.f = run.f;
    }
    res.converged = run.converged;
    if (res.f <= opts.f_target) break;
    // A restart that cannot improve ends the search.
    if (r > 0 && !(res.f < f_before)) break;
    step *= 0.5;
  }
  return res;
}

RootResult solve_system(const System& fn, std::span<const double> x0, std::size_t m,
                        const RootOptions& opts, std::span<const double> f0) {
  const std::size_t p = x0.size();
  RootResult res;
  res.x.assign(x0.begin(), x0.end());
  res.fx.assign(m, 0.0);
  if (f0.size() == m) {
    std::copy(f0.begin(), f0.end(), res.fx.begin());
  } else if (++res.evals; !fn(res.x, res.fx)) {
    res.norm = std::numeric_limits<double>::infinity();
    return res;
  }
  auto norm_of = [](std::span<const double> v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return std::sqrt(s);
  };
  res.norm = norm_of(res.fx);
  if (!std::isfinite(res.norm)) return res;

  Eigen::MatrixXd J(m, p);
  std::vector<double> xh(p), fh(m), xn(p), fn_new(m);
  double lambda = 1e-4;
  bool need_jacobian = true;
  bool fresh = false;  // J came from differences at the current point
  while (res.evals < opts.max_evals) {
    if (res.norm <= opts.tol_f) {
      res.converged = true;
      break;
    }
    if (need_jacobian) {
      // Forward-difference Jacobian; step backwards at the domain edge.
      bool jac_ok = true;
      for (std::size_t j = 0; j < p && jac_ok; ++j) {
        xh = res.x;
        double h = opts.fd_rel_step * std::max(1.0, std::abs(res.x[j]));
        xh[j] = res.x[j] + h;
        h = xh[j] - res.x[j];
        ++res.evals;
        if (!fn(xh, fh)) {
          xh[j] = res.x[j] - h;
          h = xh[j] - res.x[j];
          ++res.evals;
          if (!fn(xh, fh)) {
            jac_ok = false;
            break;
          }
        }
        for (std::size_t i = 0; i < m; ++i) J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fh[i] - res.fx[i]) / h;
      }
      if (!jac_ok || !J.allFinite()) break;
      need_jacobian = false;
      fresh = true;
    }
    const Eigen::Map<const Eigen::VectorXd> F(res.fx.data(), static_cast<Eigen::Index>(m));
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * F;
    bool stepped = false;
    bool stalled = false;
    while (res.evals < opts.max_evals) {
      Eigen::MatrixXd Ad = A;
      for (Eigen::Index j = 0; j < Ad.rows(); ++j) Ad(j, j) += lambda * std::max(A(j, j), 1e-300);
      const Eigen::VectorXd delta = -Ad.ldlt().solve(g);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        if (lambda > 1e16) {
          stalled = true;
          break;
        }
        continue;
      }
      double xnorm = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        xn[j] = res.x[j] + delta(static_cast<Eigen::Index>(j));
        xnorm = std::max(xnorm, std::abs(res.x[j]));
      }
      if (delta.lpNorm<Eigen::Infinity>() <= opts.tol_step * (1.0 + xnorm)) {
        stalled = true;
        break;
      }
      ++res.evals;
      if (fn(xn, fn_new)) {
        const double nn = norm_of(fn_new);
        if (nn < res.norm) {
          if (opts.broyden) {
            // Rank-one secant update of J along the accepted step.
            const Eigen::Map<const Eigen::VectorXd> Fn(fn_new.data(), static_cast<Eigen::Index>(m));
            const Eigen::VectorXd r = (Fn - F) - J * delta;
            J += r * delta.transpose() / delta.squaredNorm();
          } else {
            need_jacobian = true;
          }
          res.x = xn;
          res.fx = fn_new;
          res.norm = nn;
          lambda = std::max(lambda / 5.0, 1e-12);
          stepped = true;
          fresh = false;
          break;
        }
      }
      if (!fresh) {
        // A secant Jacobian failed to produce descent: refresh it first.
        need_jacobian = true;
        stepped = true;
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e16) {
        stalled = true;
        break;
      }
    }
    if (stalled && !fresh) {
      need_jacobian = true;
      continue;
    }
    if (stalled || !stepped) break;
  }
  res.converged = res.norm <= opts.tol_f;
  return res;
}

namespace {

bool fd_gradient(const Objective& f, std::span<const double> x, std::span<double> g) {
  const double h0 = std::cbrt(kEps);
  std::vector<double> t(x.begin(), x.end());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = h0 * (1.0 + std::abs(x[j]));
    t[j] = x[j] + h;
    const double fp = f(t);
    t[j] = x[j] - h;
    const double fm = f(t);
    t[j] = x[j];
    if (!std::isfinite(fp) || !std::isfinite(fm)) return false;
    g[j] = (fp - fm) / (2.0 * h);
  }
  return true;
}

}  // namespace

MaximizeResult newton_maximize(const Objective& f, const Gradient& grad,
                               std::span<const double> x0, const MaximizeOptions& opts) {
  const std::size_t p = x0.size();
  MaximizeResult res;
  res.x.assign(x0.begin(), x0.end());
  res.grad.assign(p, 0.0);
  auto gradient = [&](std::span<const double> x, std::span<double> g) {
    ++res.evals;
    return grad ? grad(x, g) : fd_gradient(f, x, g);
  };
  res.f = f(res.x);
  ++res.evals;
  if (!std::isfinite(res.f) || !gradient(res.x, res.grad)) return res;

  Eigen::MatrixXd H(p, p);
  std::vector<double> xh(p), gh(p), xn(p), gn(p);
  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    double gmax = 0.0;
    for (double v : res.grad) gmax = std::max(gmax, std::abs(v));
    if (gmax <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    bool hess_ok = true;
    for (std::size_t j = 0; j < p; ++j) {
      xh = res.x;
      double h = opts.fd_rel_step * (1.0 + std::abs(res.x[j]));
      xh[j] += h;
      h = xh[j] - res.x[j];
      if (!gradient(xh, gh)) {
        xh[j] = res.x[j] - h;
        h = -h;
        if (!gradient(xh, gh)) {
          hess_ok = false;
          break;
        }
      }
      for (std::size_t i = 0; i < p; ++i) H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (gh[i] - res.grad[i]) / h;
    }
    if (!hess_ok || !H.allFinite()) break;
    Eigen::MatrixXd A = -0.5 * (H + H.transpose());
    const Eigen::Map<const Eigen::VectorXd> g(res.grad.data(), static_cast<Eigen::Index>(p));
    double mu = 0.0;
    const double scale = std::max(1e-12, A.diagonal().cwiseAbs().maxCoeff());
    Eigen::VectorXd d;
    for (int tries = 0; tries < 40; ++tries) {
      Eigen::MatrixXd Am = A;
      Am.diagonal().array() += mu;
      Eigen::LLT<Eigen::MatrixXd> llt(Am);
      if (llt.info() == Eigen::Success) {
        d = llt.solve(g);
        if (d.allFinite()) break;
      }
      mu = mu == 0.0 ? 1e-8 * scale : mu * 10.0;
      d.resize(0);
    }
    if (d.size() == 0) break;
    const double slope = g.dot(d);
    double t = 1.0;
    bool improved = false;
    double fnew = res.f;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < p; ++j) xn[j] = res.x[j] + t * d(static_cast<Eigen::Index>(j));
      fnew = f(xn);
      ++res.evals;
      if (std::isfinite(fnew) &&
          fnew >= res.f + 1e-4 * t * slope - 16.0 * kEps * (1.0 + std::abs(res.f))) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved || !gradient(xn, gn)) break;
    double moved = 0.0;
    for (std::size_t j = 0; j < p; ++j) moved = std::max(moved, std::abs(xn[j] - res.x[j]) / (1.0 + std::abs(res.x[j])));
    res.x = xn;
    res.f = fnew;
    res.grad = gn;
    if (moved <= 1e-15) {
      double gm = 0.0;
      for (double v : res.grad) gm = std::max(gm, std::abs(v));
      res.converged = gm <= opts.grad_tol;
      break;
    }
  }
  return res;
}

std::pair<double, double> brent_minimize(const std::function<double(double)>& f, double lo,
                                         double hi, int bits, int max_iter) {
  std::uintmax_t it = static_cast<std::uintmax_t>(max_iter);
  return boost::math::tools::brent_find_minima(f, lo, hi, bits, it);
}

}  // namespace ib::optim
