#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "ib/errors.hpp"
#include "ib/exact_models.hpp"
#include "ib/matcher.hpp"

using namespace ib;

namespace {

RandomBlock key_block(std::uint64_t replicate, rng::Role role, std::uint64_t b, std::size_t m) {
  rng::StreamKey key{replicate, role, b, 0, 0};
  return rng::draw_block(rng::MasterSeed{2718}, key, m);
}

struct Pair {
  std::shared_ptr<const Model> model;
  std::shared_ptr<const Estimator> est;
  ParamVector theta0;
  std::size_t n;
};

std::vector<Pair> all_pairs() {
  const auto design = load_design_csv(std::string(IB_DATA_DIR) + "/student_t_design.csv").head(100);
  auto t = std::make_shared<CensoredStudentTModel>(design);
  return {
      {std::make_shared<UniformScaleModel>(), std::make_shared<SampleMaxEstimator>(), {1.0}, 10},
      {std::make_shared<ParetoModel>(), std::make_shared<ParetoMleEstimator>(), {1.0, 1.0}, 20},
      {std::make_shared<LomaxModel>(), std::make_shared<LomaxMleEstimator>(), {1.0, 1.5}, 50},
      {std::make_shared<LomaxModel>(), std::make_shared<LomaxNaiveWmleEstimator>(), {1.0, 1.5}, 50},
      {std::make_shared<NormalMeanModel>(), std::make_shared<CensoredMeanEstimator>(), {0.3}, 25},
      {t, make_estimator("t_naive_mle", *t),
       {4.0, -1.0, 1.5, -0.5, -1.5, std::numbers::sqrt2, 2.0}, 100},
      {std::make_shared<MG1QueueModel>(), std::make_shared<FrechetMleEstimator>(), {0.5, 1.5, 0.8}, 250}};
}

double max_abs_diff(const ParamVector& a, const ParamVector& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

}  // namespace

TEST_CASE("perfect matching returns the generating parameter") {
  for (const auto& c : all_pairs()) {
    SolverConfig cfg;
    cfg.init_rule = InitRule::User;
    cfg.user_init = c.theta0.vec();
    for (std::uint64_t r = 0; r < 5; ++r) {
      const auto w = key_block(r, rng::Role::Observed, 0, c.model->noise_dim(c.n));
      const auto pi = c.est->estimate(c.model->simulate(c.theta0, w));
      CAPTURE(c.est->name());
      const auto nested = nested_match(pi, *c.model, *c.est, w, cfg);
      CHECK(nested.delta == 0.0);
      CHECK(nested.converged);
      CHECK(max_abs_diff(nested.theta_check, c.theta0) <= cfg.tol_x);
      if (c.est->has_z() && pi.converged) {
        const auto sw = switched_match(pi, *c.model, *c.est, w, cfg);
        CHECK(sw.delta == 0.0);
        CHECK(max_abs_diff(sw.theta_check, c.theta0) <= cfg.tol_x);
      }
    }
  }
}

TEST_CASE("queue starting point lies near the queue parameter") {
  MG1QueueModel m;
  FrechetMleEstimator est;
  SolverConfig cfg;
  int switched = 0, total = 0;
  for (std::uint64_t r = 0; r < 10; ++r) {
    const auto data = m.simulate({0.3, 0.9, 1.0}, key_block(r, rng::Role::Observed, 0, 500));
    const auto pi = est.estimate(data);
    const auto x0 = m.initial_from_aux(pi.pi);
    CHECK(m.feasible(x0));
    const double ymin = *std::min_element(data.y.begin(), data.y.end());
    CHECK(std::abs(x0[0] / ymin - 1.0) < 0.2);
    for (std::uint64_t b = 1; b <= 5; ++b) {
      const auto res = switched_match(pi, m, est, key_block(r, rng::Role::Boot, b, 500), cfg);
      switched += res.path == MatchPath::Switched && res.converged;
      ++total;
    }
  }
  CHECK(switched >= 45);
  CHECK(total == 50);
}

TEST_CASE("closed-form examples") {
  SUBCASE("uniform") {
    std::vector<double> u(5, 0.1);
    u[2] = 0.75;
    const auto r = closed_form_match(exact::Example::Uniform, AuxEstimate{{0.9}}, RandomBlock(u));
    CHECK(r.theta_check[0] == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(r.path == MatchPath::ClosedForm);
  }
  SUBCASE("andrews point mass") {
    for (std::uint64_t b = 1; b <= 20; ++b) {
      const auto w = key_block(0, rng::Role::Boot, b, 25);
      const auto r = closed_form_match(exact::Example::Andrews, AuxEstimate{{0.0}}, w);
      const auto canon = NormalMeanModel().simulate({0.0}, w);
      double mean = 0;
      for (double y : canon.y) mean += y / 25.0;
      if (mean >= 0.0) CHECK(r.theta_check[0] == 0.0);
    }
  }
  SUBCASE("pareto shape") {
    const auto w = key_block(0, rng::Role::Boot, 3, 20);
    const auto s = exact::summarize(exact::Example::Pareto, w.values());
    const AuxEstimate pi{{1.7, 2.4}};
    const auto r = closed_form_match(exact::Example::Pareto, pi, w);
    CHECK(r.theta_check[1] == doctest::Approx(2.4 / s.w[1]).epsilon(1e-13));
  }
}

TEST_CASE("uniform switched path reproduces the closed form") {
  UniformScaleModel m;
  SampleMaxEstimator est;
  SolverConfig cfg;
  for (std::uint64_t b = 1; b <= 20; ++b) {
    const auto obs = key_block(b, rng::Role::Observed, 0, 10);
    const auto w = key_block(b, rng::Role::Boot, 1, 10);
    const auto pi = est.estimate(m.simulate({1.0}, obs));
    const auto cf = closed_form_match(exact::Example::Uniform, pi, w);
    const auto sw = switched_match(pi, m, est, w, cfg);
    CHECK(sw.path == MatchPath::Switched);
    CHECK(std::abs(sw.theta_check[0] - cf.theta_check[0]) < 1e-10);
  }
}

TEST_CASE("three paths agree on pareto") {
  ParetoModel m;
  ParetoMleEstimator est;
  SolverConfig cfg;
  for (std::uint64_t b = 1; b <= 10; ++b) {
    const auto obs = key_block(b, rng::Role::Observed, 0, 20);
    const auto w = key_block(b, rng::Role::Boot, 1, 20);
    const auto pi = est.estimate(m.simulate({1.0, 1.0}, obs));
    const auto cf = closed_form_match(exact::Example::Pareto, pi, w);
    const auto ne = nested_match(pi, m, est, w, cfg);
    const auto sw = switched_match(pi, m, est, w, cfg);
    CHECK(ne.converged);
    CHECK(sw.converged);
    CHECK(max_abs_diff(ne.theta_check, cf.theta_check) < 1e-6);
    CHECK(max_abs_diff(sw.theta_check, cf.theta_check) < 1e-6);
  }
}

TEST_CASE("lomax switched path is no costlier than nested") {
  LomaxModel m;
  LomaxMleEstimator est;
  SolverConfig cfg;
  std::vector<int> nested_evals, switched_evals;
  std::size_t used = 0;
  for (std::uint64_t r = 0; used < 50 && r < 80; ++r) {
    const auto obs = key_block(r, rng::Role::Observed, 0, 50);
    const auto pi = est.estimate(m.simulate({1.0, 1.5}, obs));
    if (!pi.converged) continue;
    ++used;
    const auto w = key_block(r, rng::Role::Boot, 1, 50);
    const auto ne = nested_match(pi, m, est, w, cfg);
    const auto sw = switched_match(pi, m, est, w, cfg);
    if (ne.converged && sw.converged) CHECK(max_abs_diff(ne.theta_check, sw.theta_check) < 1e-5);
    nested_evals.push_back(ne.objective_evals);
    switched_evals.push_back(sw.objective_evals);
  }
  REQUIRE(used == 50);
  auto median = [](std::vector<int> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  CHECK(median(switched_evals) <= median(nested_evals));
}

TEST_CASE("delta is the residual of the returned point") {
  LomaxModel m;
  LomaxMleEstimator est;
  SolverConfig cfg;
  const auto obs = key_block(3, rng::Role::Observed, 0, 50);
  const auto pi = est.estimate(m.simulate({1.0, 1.5}, obs));
  const auto w = key_block(3, rng::Role::Boot, 2, 50);
  for (auto path : {MatchPath::Nested, MatchPath::Switched}) {
    const auto r = match(path, pi, m, est, w, cfg);
    const auto again = est.estimate(m.simulate(r.theta_check, w));
    const double d = std::hypot(pi.pi[0] - again.pi[0], pi.pi[1] - again.pi[1]);
    CHECK(r.delta == doctest::Approx(d).epsilon(1e-12));
    CHECK(r.delta >= 0.0);
    if (r.converged) CHECK(r.delta <= cfg.tol_delta * std::max(1.0, std::hypot(pi.pi[0], pi.pi[1])));
  }
}

TEST_CASE("error paths") {
  NormalMeanModel m;
  CensoredMeanEstimator est;
  const auto w = key_block(0, rng::Role::Boot, 1, 25);
  CHECK_THROWS_AS(switched_match(AuxEstimate{{0.2}}, m, est, w, {}), NoZFunction);
  CHECK_THROWS_AS(nested_match(AuxEstimate{{std::nan("")}}, m, est, w, {}), DomainError);
  SolverConfig bad;
  bad.init_rule = InitRule::User;
  CHECK_THROWS_AS(initial_point(AuxEstimate{{0.2}}, m, bad), ConfigError);
  CHECK_THROWS_AS(match(MatchPath::ClosedForm, AuxEstimate{{1.0, 1.5}}, LomaxModel(),
                        LomaxMleEstimator(), key_block(0, rng::Role::Boot, 1, 50), {}),
                  UnsupportedExample);
}

TEST_CASE("deterministic results") {
  LomaxModel m;
  LomaxNaiveWmleEstimator est;
  const auto obs = key_block(9, rng::Role::Observed, 0, 50);
  const auto pi = est.estimate(m.simulate({1.0, 1.5}, obs));
  const auto w = key_block(9, rng::Role::Boot, 4, 50);
  for (auto path : {MatchPath::Nested, MatchPath::Switched}) {
    const auto a = match(path, pi, m, est, w, {});
    const auto b = match(path, pi, m, est, w, {});
    CHECK(a.theta_check == b.theta_check);
    CHECK(a.objective_evals == b.objective_evals);
  }
}
