#pragma once

// Closed-form implicit bootstrap for the three examples with exact coverage
// (uniform scale, Pareto, normal mean on [0, inf)). Everything here works on
// noise summaries computed straight from the uniforms, without going through
// the model/estimator pipeline, so it can serve as an oracle for it.
//
// Rewriting the closed forms through the observed estimate:
//   uniform:  pi = theta0 w,  w = u_(n)                  => check = pi / w*
//   pareto:   pi = (mu0 w1^(-1/alpha0), alpha0 w2),
//             w1 = max_i (1 - u_i), w2 = n / sum_i log(w1 / (1 - u_i))
//             => alpha_check = alpha_hat / w2*,
//                mu_check    = mu_hat (w1*)^(w2* / alpha_hat)
//   andrews:  pi = max(theta0 + w, 0), w = mean_i Phi^-1(u_i)
//             => check = max(pi - w*, 0)

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ib/rng.hpp"

namespace ib::exact {

enum class Example { Uniform, Pareto, Andrews };

const char* example_name(Example e) noexcept;
/// Parses "uniform", "pareto", "andrews"; throws UnsupportedExample.
Example parse_example(const std::string& name);

struct NoiseSummary {
  Example example;
  /// uniform: {u_(n)}; pareto: {w1, w2}; andrews: {w}.
  std::vector<double> w;
};

/// Summary of a full block of canonical uniforms.
NoiseSummary summarize(Example example, std::span<const double> u);
/// Draws n uniforms from `seed` and summarizes them.
NoiseSummary sample_summary(Example example, std::size_t n, std::uint64_t seed);

/// Observed estimate generated by theta0 and the summary w.
std::vector<double> pi_from_summary(Example example, std::span<const double> theta0,
                                    const NoiseSummary& w);

/// Closed-form implicit bootstrap draw given the observed estimate.
std::vector<double> exact_theta_check(Example example, std::span<const double> pi_obs,
                                      const NoiseSummary& w_star);

/// Coverage Pr(psi0 <= quantile) implied by the closed forms (andrews at
/// theta0 = 0, with the strict inequality for alpha <= 1/2).
double exact_coverage_theory(Example example, double alpha);

/// Pareto location factorization mu_check = h_w(h(w*)) with
/// h(w*) = (w1*)^(w2*) and h_w(x) = mu0 (x w1^(-w2))^(1 / (alpha0 w2)).
double pareto_h(const NoiseSummary& w_star);
double pareto_h_w(double x, const NoiseSummary& w, double mu0, double alpha0);

}  // namespace ib::exact
