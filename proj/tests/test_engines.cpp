#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "ib/engines.hpp"
#include "ib/errors.hpp"

using namespace ib;

namespace {

RandomBlock obs_block(std::uint64_t replicate, std::size_t m) {
  return rng::draw_block(rng::MasterSeed{1234}, rng::StreamKey::observed(replicate), m);
}

EngineConfig config(std::size_t B, std::uint64_t master = 99) {
  EngineConfig cfg;
  cfg.B = B;
  cfg.master = rng::MasterSeed{master};
  return cfg;
}

Functional log_functional(std::size_t k) {
  Functional f;
  f.label = "log";
  f.psi = [k](std::span<const double> t) { return std::log(t[k]); };
  return f;
}

class AlwaysFails final : public Estimator {
 public:
  std::string_view name() const override { return "always_fails"; }
  std::size_t dim() const override { return 1; }
  AuxEstimate estimate(const Dataset& data) const override {
    if (data.n() == 3) return AuxEstimate{{1.0}};
    throw NonConvergence("always");
  }
};

// Log-likelihood flat in its second coordinate.
class FlatModel final : public Model {
 public:
  FlatModel() : box_{{0.0, 0.0}, {kInf, kInf}, {false, false}} {}
  std::string_view name() const override { return "flat"; }
  std::size_t dim() const override { return 2; }
  std::size_t noise_dim(std::size_t n) const override { return n; }
  std::size_t sample_size(std::size_t m) const override { return m; }
  const Box& box() const override { return box_; }
  void simulate_into(const ParamVector& theta, const RandomBlock& w, Dataset& out) const override {
    out.y.assign(w.values().begin(), w.values().end());
    for (double& y : out.y) y *= theta[0];
  }
  bool has_log_likelihood() const override { return true; }
  double log_likelihood(std::span<const double> theta, const Dataset& data) const override {
    double s = 0.0;
    for (double y : data.y) s -= (y - theta[0]) * (y - theta[0]);
    return s;
  }

 private:
  Box box_;
};

class FlatEstimator final : public Estimator {
 public:
  std::string_view name() const override { return "flat"; }
  std::size_t dim() const override { return 2; }
  AuxEstimate estimate(const Dataset&) const override { return AuxEstimate{{1.0, 1.0}}; }
};

}  // namespace

TEST_CASE("empirical quantile examples") {
  DistributionSample s;
  s.values = {4.0, 2.0, 3.0, 1.0};
  CHECK(empirical_quantile(s, 0.5) == 2.0);
  CHECK(empirical_quantile(s, 0.51) == 3.0);
  CHECK(empirical_quantile(s, 0.25) == 1.0);
  CHECK(empirical_quantile(s, 1.0 - 1e-12) == 4.0);
  CHECK(empirical_quantile(s, 1e-12) == 1.0);
  CHECK_THROWS_AS(empirical_quantile(s, 0.0), DomainError);
  CHECK_THROWS_AS(empirical_quantile(s, 1.0), DomainError);
  // 0.95 * 2000 is 1900 up to rounding.
  std::vector<double> v(2000);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(empirical_quantile_sorted(v, 0.95) == 1900.0);
  CHECK(empirical_quantile_sorted(v, 0.975) == 1950.0);
}

TEST_CASE("quantiles are nondecreasing in alpha") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto u = rng::draw_block(seed, 37 + seed * 13);
    std::vector<double> v(u.values().begin(), u.values().end());
    std::sort(v.begin(), v.end());
    double prev = -kInf;
    for (int i = 1; i < 1000; ++i) {
      const double q = empirical_quantile_sorted(v, i / 1000.0);
      CHECK(q >= prev);
      prev = q;
    }
  }
}

TEST_CASE("percentile endpoints commute with increasing transformations") {
  LomaxModel m;
  LomaxMleEstimator est;
  const auto data = m.simulate({1.0, 1.5}, obs_block(0, 50));
  const auto run = implicit_bootstrap(data, m, est, config(200));
  const auto raw = run.interval(coordinate_functional(0, "b"));
  const auto logged = run.interval(log_functional(0));
  const auto surv = run.interval(lomax_survival_functional(6.0));
  for (double a : {0.05, 0.1, 0.5, 0.9, 0.95, 0.99}) {
    CHECK(logged.upper(a) == std::log(raw.upper(a)));
  }
  // S(6) decreases in b for fixed q, so a joint functional has its own ordering;
  // the draw-level map is checked instead.
  const auto s = run.sample(lomax_survival_functional(6.0));
  for (std::size_t b = 0; b < run.draws.size(); ++b) {
    const auto& t = run.draws[b];
    CHECK(s.values[b] == std::pow(1.0 + 6.0 / t[0], -t[1]));
  }
  CHECK(surv.upper(0.95) >= surv.upper(0.9));
}

TEST_CASE("implicit draws depend on the data only through the observed estimate") {
  UniformScaleModel m;
  SampleMaxEstimator est;
  Dataset a, b;
  a.y = {0.2, 0.9, 0.4};
  b.y = {0.9, 0.1, 0.3, 0.05};
  auto cfg = config(100);
  cfg.path = MatchPath::Switched;
  // Same max, different n would change the noise dimension, so pad b to 3.
  b.y = {0.9, 0.1, 0.3};
  const auto ra = implicit_bootstrap(a, m, est, cfg);
  const auto rb = implicit_bootstrap(b, m, est, cfg);
  REQUIRE(ra.draws.size() == rb.draws.size());
  for (std::size_t i = 0; i < ra.draws.size(); ++i) CHECK(ra.draws[i] == rb.draws[i]);

  LomaxModel lm;
  LomaxMleEstimator lest;
  const auto d = lm.simulate({1.0, 1.5}, obs_block(1, 50));
  const auto pi = lest.estimate(d);
  auto lcfg = config(50);
  const auto from_data = implicit_bootstrap(d, lm, lest, lcfg);
  const auto from_pi = implicit_bootstrap_from(pi, 50, lm, lest, lcfg);
  for (std::size_t i = 0; i < from_data.draws.size(); ++i) CHECK(from_data.draws[i] == from_pi.draws[i]);
}

TEST_CASE("results do not depend on the number of threads") {
  LomaxModel m;
  LomaxMleEstimator est;
  const auto data = m.simulate({1.0, 1.5}, obs_block(2, 50));
  for (auto method : {CIMethod::Implicit, CIMethod::Percentile, CIMethod::BCa}) {
    std::vector<BootstrapRun> runs;
    for (std::size_t threads : {1, 3, 8}) {
      auto cfg = config(120);
      cfg.threads = threads;
      runs.push_back(method == CIMethod::Implicit     ? implicit_bootstrap(data, m, est, cfg)
                     : method == CIMethod::Percentile ? percentile_bootstrap(data, m, est, cfg)
                                                      : bca_bootstrap(data, m, est, cfg));
    }
    const auto psi = coordinate_functional(1, "q");
    for (std::size_t k = 1; k < runs.size(); ++k) {
      CHECK(runs[k].draws == runs[0].draws);
      CHECK(runs[k].interval(psi).upper(0.95) == runs[0].interval(psi).upper(0.95));
    }
  }
}

TEST_CASE("repeat runs with the same master seed are identical") {
  LomaxModel m;
  LomaxMleEstimator est;
  const auto data = m.simulate({1.0, 1.5}, obs_block(3, 50));
  const auto psi = coordinate_functional(0, "b");
  const auto a = percentile_bootstrap(data, m, est, config(100)).interval(psi).two_sided(0.9);
  const auto b = percentile_bootstrap(data, m, est, config(100)).interval(psi).two_sided(0.9);
  CHECK(a == b);
  const auto c = studentized_bootstrap(data, m, est, config(100)).interval(psi).upper(0.95);
  const auto d = studentized_bootstrap(data, m, est, config(100)).interval(psi).upper(0.95);
  CHECK(c == d);
  const auto e = percentile_bootstrap(data, m, est, config(100, 100)).interval(psi).upper(0.95);
  CHECK(e != a.second);
}

TEST_CASE("a single draw gives a degenerate interval") {
  LomaxModel m;
  LomaxMleEstimator est;
  const auto data = m.simulate({1.0, 1.5}, obs_block(4, 50));
  const auto run = implicit_bootstrap(data, m, est, config(1));
  REQUIRE(run.draws.size() == 1);
  CHECK_FALSE(run.warnings.empty());
  const auto iv = run.interval(coordinate_functional(0, "b"));
  CHECK(iv.upper(0.95) == run.draws[0][0]);
  const auto [lo, hi] = iv.two_sided(0.9);
  CHECK(lo == hi);
}

TEST_CASE("wald interval on the normal mean is the textbook z-interval") {
  NormalMeanModel m;
  CensoredMeanEstimator est;
  const auto data = m.simulate({2.0}, obs_block(5, 40));
  const double mean = std::accumulate(data.y.begin(), data.y.end(), 0.0) / 40.0;
  const auto iv = asymptotic_ci(data, m, est, config(0)).interval(coordinate_functional(0, "theta"));
  const double se = 1.0 / std::sqrt(40.0);
  CHECK(std::abs(iv.upper(0.95) - (mean + 1.6448536269514722 * se)) < 1e-12);
  const auto [lo, hi] = iv.two_sided(0.95);
  CHECK(std::abs(lo - (mean - 1.959963984540054 * se)) < 1e-12);
  CHECK(std::abs(hi - (mean + 1.959963984540054 * se)) < 1e-12);
  CHECK(iv.sigma() == doctest::Approx(se).epsilon(1e-15));
}

TEST_CASE("studentized interval approaches Wald for a large symmetric model") {
  NormalMeanModel m;
  CensoredMeanEstimator est;
  const auto data = m.simulate({5.0}, obs_block(6, 400));
  const auto psi = coordinate_functional(0, "theta");
  const auto wald = asymptotic_ci(data, m, est, config(0)).interval(psi);
  const auto stud = studentized_bootstrap(data, m, est, config(2000)).interval(psi);
  CHECK(std::abs(stud.upper(0.95) - wald.upper(0.95)) < 0.1 * wald.sigma());
  CHECK(std::abs(stud.upper(0.05) - wald.upper(0.05)) < 0.1 * wald.sigma());
}

TEST_CASE("BCa reduces to the percentile interval") {
  std::vector<double> sorted(101);
  for (std::size_t i = 0; i < sorted.size(); ++i) sorted[i] = static_cast<double>(i) * 0.37 - 3.0;
  const IntervalEstimate pct(CIMethod::Percentile, sorted, 0.0, 0.0, 0.0, 0.0, 0.0);
  const IntervalEstimate bca(CIMethod::BCa, sorted, 0.0, 0.0, 0.0, 0.0, 0.0);
  for (double a : {0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99}) CHECK(bca.upper(a) == pct.upper(a));

  // Symmetric draws around theta_hat give z0 = 0; a flat jackknife gives a = 0.
  BootstrapRun run;
  run.method = CIMethod::BCa;
  run.theta_hat = ParamVector{0.0};
  for (int i = -50; i <= 50; ++i) run.draws.push_back(ParamVector{0.1 * i});
  run.jackknife = {ParamVector{1.0}, ParamVector{1.0}, ParamVector{1.0}};
  const auto iv = run.interval(coordinate_functional(0, "x"));
  CHECK(iv.z0() == 0.0);
  CHECK(iv.acceleration() == 0.0);
  run.method = CIMethod::Percentile;
  const auto p = run.interval(coordinate_functional(0, "x"));
  for (double a : {0.05, 0.5, 0.95}) CHECK(iv.upper(a) == p.upper(a));
}

TEST_CASE("intervals are ordered and one-sided results are consistent") {
  LomaxModel m;
  LomaxMleEstimator est;
  const auto data = m.simulate({1.0, 1.5}, obs_block(7, 50));
  const auto psi = coordinate_functional(1, "q");
  for (auto run : {implicit_bootstrap(data, m, est, config(200)),
                   percentile_bootstrap(data, m, est, config(200)),
                   studentized_bootstrap(data, m, est, config(200)),
                   bca_bootstrap(data, m, est, config(200)),
                   asymptotic_ci(data, m, est, config(200))}) {
    const auto iv = run.interval(psi);
    CAPTURE(method_name(run.method));
    const auto one = iv.one_sided_ci(0.95);
    CHECK(one.lower == -kInf);
    CHECK(one.upper == iv.upper(0.95));
    const auto two = iv.two_sided_ci(0.9);
    CHECK(two.lower <= two.upper);
    CHECK(iv.upper(0.9) <= iv.upper(0.95));
  }
}

TEST_CASE("delta threshold and flags") {
  AuxEstimate pi{{3.0, 4.0}};
  CHECK(delta_threshold(100, pi) == doctest::Approx(0.5 * 5.0 / 1000.0).epsilon(1e-15));
  LomaxModel m;
  LomaxMleEstimator est;
  const auto data = m.simulate({1.0, 1.5}, obs_block(8, 50));
  const auto run = implicit_bootstrap(data, m, est, config(100));
  const double thr = delta_threshold(50, run.pi_obs);
  std::size_t flagged = 0;
  for (double d : run.draw_delta) flagged += d > thr;
  CHECK(flagged == run.delta_flagged);
}

TEST_CASE("failure handling") {
  UniformScaleModel m;
  AlwaysFails est;
  Dataset data;
  data.y = {0.1, 0.2, 0.3};
  // The observed estimate succeeds (n = 3); every bootstrap re-estimate on n = 3 succeeds too,
  // so use a different size for the failing case.
  Dataset bigger;
  bigger.y = {0.1, 0.2, 0.3, 0.4};
  CHECK_THROWS_AS(percentile_bootstrap(bigger, m, est, config(10)), NonConvergence);
  CHECK_THROWS_AS(implicit_bootstrap_from(AuxEstimate{{1.0}}, 4, m, est, config(10)), NonConvergence);
  CHECK_THROWS_AS(implicit_bootstrap(data, m, est, config(0)), ConfigError);
  CHECK_THROWS_AS(studentized_bootstrap(data, m, SampleMaxEstimator(), config(10)), ConfigError);
}

TEST_CASE("singular information is reported") {
  FlatModel flat;
  Dataset data;
  data.y = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(inverse_information(flat, std::vector{1.0, 1.0}, data), SingularInformation);
  CHECK_THROWS_AS(asymptotic_ci(data, flat, FlatEstimator(), config(0)), SingularInformation);
  NormalMeanModel nm;
  CHECK(inverse_information(nm, std::vector{0.0}, data)(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("indirect inference") {
  LomaxModel m;
  auto shared_model = std::make_shared<LomaxModel>();
  SUBCASE("consistent estimator is nearly a fixed point") {
    LomaxMleEstimator est;
    const auto data = m.simulate({1.0, 1.5}, obs_block(9, 2000));
    const auto direct = est.estimate(data);
    const auto r = indirect_inference_correct(data, m, est, 10, rng::MasterSeed{5}, 9, {});
    CHECK(r.converged);
    CHECK(std::abs(r.theta[0] / direct.pi[0] - 1.0) < 0.03);
    CHECK(std::abs(r.theta[1] / direct.pi[1] - 1.0) < 0.03);
    const auto again = indirect_inference_correct(data, m, est, 10, rng::MasterSeed{5}, 9, {});
    CHECK(again.theta == r.theta);
  }
  SUBCASE("corrects the naive WMLE to the MLE") {
    auto base = std::make_shared<LomaxNaiveWmleEstimator>();
    LomaxMleEstimator mle;
    double ib = 0.0, iq = 0.0, mb = 0.0, mq = 0.0, nb = 0.0;
    const int reps = 10;
    for (int r = 0; r < reps; ++r) {
      const auto data = m.simulate({1.0, 1.5}, obs_block(100 + r, 2000));
      IndirectInferenceEstimator ii(shared_model, base, 10, rng::MasterSeed{6}, 100 + r, 2000);
      const auto e = ii.estimate(data);
      const auto d = mle.estimate(data);
      ib += e.pi[0] / reps;
      iq += e.pi[1] / reps;
      mb += d.pi[0] / reps;
      mq += d.pi[1] / reps;
      nb += base->estimate(data).pi[0] / reps;
    }
    CHECK(std::abs(ib / mb - 1.0) < 0.05);
    CHECK(std::abs(iq / mq - 1.0) < 0.05);
    CHECK(nb / mb > 1.15);
  }
  SUBCASE("argument checks") {
    auto base = std::make_shared<LomaxMleEstimator>();
    IndirectInferenceEstimator ii(shared_model, base, 3, rng::MasterSeed{1}, 0, 20);
    CHECK(ii.name() == "lomax_mle_ii");
    const auto wrong = m.simulate({1.0, 1.5}, obs_block(0, 21));
    CHECK_THROWS_AS(ii.estimate(wrong), DomainError);
    CHECK_THROWS_AS(IndirectInferenceEstimator(shared_model, base, 0, rng::MasterSeed{1}, 0, 20),
                    ConfigError);
  }
}

TEST_CASE("method names round-trip") {
  for (auto m : {CIMethod::Implicit, CIMethod::Percentile, CIMethod::Studentized, CIMethod::BCa,
                 CIMethod::Asymptotic}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("double"), ConfigError);
}
