#include "ib/exact_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ib/errors.hpp"
#include "ib/special.hpp"

namespace ib::exact {

const char* example_name(Example e) noexcept {
  switch (e) {
    case Example::Uniform: return "uniform";
    case Example::Pareto: return "pareto";
    case Example::Andrews: return "andrews";
  }
  return "?";
}

Example parse_example(const std::string& name) {
  if (name == "uniform") return Example::Uniform;
  if (name == "pareto") return Example::Pareto;
  if (name == "andrews") return Example::Andrews;
  throw UnsupportedExample(name);
}

NoiseSummary summarize(Example example, std::span<const double> u) {
  if (u.empty()) throw EmptyBlock();
  NoiseSummary s{example, {}};
  switch (example) {
    case Example::Uniform:
      s.w = {*std::max_element(u.begin(), u.end())};
      break;
    case Example::Pareto: {
      double w1 = 0.0;
      for (double v : u) w1 = std::max(w1, 1.0 - v);
      double acc = 0.0;
      for (double v : u) acc += std::log(w1 / (1.0 - v));
      s.w = {w1, static_cast<double>(u.size()) / acc};
      break;
    }
    case Example::Andrews: {
      double acc = 0.0;
      for (double v : u) acc += special::normal_quantile(v);
      s.w = {acc / static_cast<double>(u.size())};
      break;
    }
  }
  return s;
}

NoiseSummary sample_summary(Example example, std::size_t n, std::uint64_t seed) {
  const rng::RandomBlock block = rng::draw_block(seed, n);
  return summarize(example, block.values());
}

std::vector<double> pi_from_summary(Example example, std::span<const double> theta0,
                                    const NoiseSummary& w) {
  switch (example) {
    case Example::Uniform: return {theta0[0] * w.w[0]};
    case Example::Pareto:
      return {theta0[0] * std::pow(w.w[0], -1.0 / theta0[1]), theta0[1] * w.w[1]};
    case Example::Andrews: return {std::max(theta0[0] + w.w[0], 0.0)};
  }
  throw UnsupportedExample(example_name(example));
}

std::vector<double> exact_theta_check(Example example, std::span<const double> pi_obs,
                                      const NoiseSummary& w_star) {
  switch (example) {
    case Example::Uniform:
      if (!(pi_obs[0] > 0.0) || !(w_star.w[0] > 0.0 && w_star.w[0] < 1.0)) {
        throw DomainError("uniform closed form needs pi > 0 and u*_(n) in (0,1)");
      }
      return {pi_obs[0] / w_star.w[0]};
    case Example::Pareto: {
      const double mu = pi_obs[0], a = pi_obs[1], w1 = w_star.w[0], w2 = w_star.w[1];
      if (!(mu > 0.0 && a > 0.0 && w1 > 0.0 && w1 <= 1.0 && w2 > 0.0)) {
        throw DomainError("pareto closed form outside its support");
      }
      return {mu * std::pow(w1, w2 / a), a / w2};
    }
    case Example::Andrews:
      if (pi_obs[0] < 0.0) throw DomainError("andrews closed form needs pi >= 0");
      return {std::max(pi_obs[0] - w_star.w[0], 0.0)};
  }
  throw UnsupportedExample(example_name(example));
}

double exact_coverage_theory(Example example, double alpha) {
  if (example == Example::Andrews) return alpha <= 0.5 ? alpha : 1.0;
  return alpha;
}

double pareto_h(const NoiseSummary& w_star) { return std::pow(w_star.w[0], w_star.w[1]); }

double pareto_h_w(double x, const NoiseSummary& w, double mu0, double alpha0) {
  return mu0 * std::pow(x * std::pow(w.w[0], -w.w[1]), 1.0 / (alpha0 * w.w[1]));
}

}  // namespace ib::exact
