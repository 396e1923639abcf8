// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails. The default run covers the fast tier; the
// censored-regression and queue criteria run with --long-only or --all.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ib/engines.hpp"
#include "ib/errors.hpp"
#include "ib/exact_models.hpp"
#include "ib/harness.hpp"
#include "ib/matcher.hpp"

using namespace ib;
namespace hs = ib::harness;

namespace {

int failures = 0;

void report(const char* id, bool pass, const std::string& what) {
  std::printf("[%s] %s %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void info(const char* id, const std::string& what) {
  std::printf("[INFO] %s %s\n", id, what.c_str());
  std::fflush(stdout);
}

std::string f4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string e3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

double band(double alpha, std::size_t M) {
  return 3.0 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(M));
}

hs::ScenarioConfig config(const std::string& file) {
  return hs::load_config(std::string(IB_CONFIG_DIR) + "/" + file);
}

const hs::CoverageRecord* find(const hs::CoverageReport& rep, const std::string& scenario,
                               const std::string& method, double alpha) {
  for (const auto& r : rep.records) {
    if (r.scenario == scenario && r.method == method && std::abs(r.alpha - alpha) < 1e-12) return &r;
  }
  return nullptr;
}

double coverage_of(const hs::CoverageReport& rep, const std::string& scenario,
                   const std::string& method, double alpha) {
  const auto* r = find(rep, scenario, method, alpha);
  return r ? r->coverage : std::nan("");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string exact_lines(const hs::ExactCheckReport& rep) {
  std::string s;
  for (const auto& l : rep.lines) {
    if (!s.empty()) s += ' ';
    s += l.functional + "@" + f4(l.alpha) + "=" + f4(l.coverage);
  }
  return s;
}

// 1 and 9 share the uniform closed-form config.
void uniform_and_determinism(std::size_t threads) {
  auto t0 = std::chrono::steady_clock::now();
  const auto ex = hs::run_exact_check(exact::Example::Uniform, 10000, 2000, 7, {}, threads);
  const double secs = seconds_since(t0);
  report("C1", ex.pass() && secs < 120.0,
         "uniform exact coverage n=10 M=10000 B=2000: " + exact_lines(ex) + " (" + f4(secs) + " s)");

  auto cfg = config("uniform_n10.json");
  std::vector<std::string> csv;
  hs::CoverageReport first;
  for (std::size_t k : {1, 4, 8}) {
    cfg.threads = k;
    auto rep = hs::run_coverage(cfg);
    csv.push_back(hs::to_csv(rep.records));
    if (k == 1) first = std::move(rep);
  }
  const double perc = coverage_of(first, "uniform_n10/theta", "percentile:sample_max", 0.95);
  const double w = band(0.95, cfg.M);
  report("C1", std::abs(perc - 0.95) > w,
         "uniform percentile contrast at 0.95: coverage " + f4(perc) + " outside 0.95 +/- " + f4(w));
  report("C9", csv[0] == csv[1] && csv[0] == csv[2],
         "uniform coverage CSV byte-identical at 1, 4 and 8 threads");
}

void pareto(std::size_t threads) {
  const auto ex = hs::run_exact_check(exact::Example::Pareto, 10000, 2000, 7, {}, threads);
  report("C2", ex.pass(), "pareto exact coverage n=20 M=10000 B=2000: " + exact_lines(ex));
}

void andrews(std::size_t threads) {
  const auto ex = hs::run_exact_check(exact::Example::Andrews, 10000, 2000, 7, {}, threads);
  report("C3", ex.pass(), "andrews boundary n=25 M=10000 B=2000: " + exact_lines(ex));
  const auto half = hs::run_exact_check(exact::Example::Andrews, 10000, 2000, 7, {0.5}, threads);
  info("C3", "andrews alpha=0.5 coverage " + f4(half.lines.front().coverage) +
                 " (the quantile sits on the point mass at 0; not part of the gate)");
}

double max_abs_diff(const ParamVector& a, const ParamVector& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

void oracle_equivalence() {
  struct Case {
    exact::Example ex;
    std::shared_ptr<const Model> model;
    std::shared_ptr<const Estimator> est;
    ParamVector theta0;
    std::size_t n;
  };
  const std::vector<Case> cases = {
      {exact::Example::Uniform, std::make_shared<UniformScaleModel>(),
       std::make_shared<SampleMaxEstimator>(), {1.0}, 10},
      {exact::Example::Pareto, std::make_shared<ParetoModel>(), std::make_shared<ParetoMleEstimator>(),
       {1.0, 1.0}, 20}};
  const SolverConfig cfg;
  const rng::MasterSeed master{9001};
  for (const auto& c : cases) {
    double worst = 0.0;
    int flagged = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const auto obs = rng::draw_block(master, rng::StreamKey::observed(i), c.n);
      const auto w = rng::draw_block(master, rng::StreamKey::boot(i, 1), c.n);
      const auto pi = c.est->estimate(c.model->simulate(c.theta0, obs));
      const auto cf = closed_form_match(c.ex, pi, w);
      const auto ne = nested_match(pi, *c.model, *c.est, w, cfg);
      const auto sw = switched_match(pi, *c.model, *c.est, w, cfg);
      flagged += (!cf.converged) + (!ne.converged) + (!sw.converged);
      worst = std::max({worst, max_abs_diff(ne.theta_check, cf.theta_check),
                        max_abs_diff(sw.theta_check, cf.theta_check)});
    }
    report("C4", worst <= 1e-6 && flagged == 0,
           std::string(exact::example_name(c.ex)) + " nested/switched/closed-form on 100 instances: max |diff| " +
               e3(worst) + ", flagged " + std::to_string(flagged));
  }
}

void fixed_point() {
  const auto design = load_design_csv(std::string(IB_DATA_DIR) + "/student_t_design.csv").head(100);
  auto t = std::make_shared<CensoredStudentTModel>(design);
  struct Case {
    std::shared_ptr<const Model> model;
    std::shared_ptr<const Estimator> est;
    ParamVector theta0;
    std::size_t n;
  };
  const std::vector<Case> cases = {
      {std::make_shared<UniformScaleModel>(), std::make_shared<SampleMaxEstimator>(), {1.0}, 10},
      {std::make_shared<ParetoModel>(), std::make_shared<ParetoMleEstimator>(), {1.0, 1.0}, 20},
      {std::make_shared<LomaxModel>(), std::make_shared<LomaxMleEstimator>(), {1.0, 1.5}, 50},
      {std::make_shared<LomaxModel>(), std::make_shared<LomaxNaiveWmleEstimator>(), {1.0, 1.5}, 50},
      {std::make_shared<NormalMeanModel>(), std::make_shared<CensoredMeanEstimator>(), {0.3}, 25},
      {t, make_estimator("t_naive_mle", *t), {4.0, -1.0, 1.5, -0.5, -1.5, std::numbers::sqrt2, 2.0}, 100},
      {std::make_shared<MG1QueueModel>(), std::make_shared<FrechetMleEstimator>(), {0.3, 0.9, 1.0}, 250}};
  for (const auto& c : cases) {
    SolverConfig cfg;
    cfg.init_rule = InitRule::User;
    cfg.user_init = c.theta0.vec();
    double worst_delta = 0.0, worst_x = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
      const auto w = rng::draw_block(rng::MasterSeed{31337}, rng::StreamKey::observed(i),
                                     c.model->noise_dim(c.n));
      const auto pi = c.est->estimate(c.model->simulate(c.theta0, w));
      const auto ne = nested_match(pi, *c.model, *c.est, w, cfg);
      worst_delta = std::max(worst_delta, ne.delta);
      worst_x = std::max(worst_x, max_abs_diff(ne.theta_check, c.theta0));
      if (c.est->has_z() && pi.converged) {
        const auto sw = switched_match(pi, *c.model, *c.est, w, cfg);
        worst_delta = std::max(worst_delta, sw.delta);
        worst_x = std::max(worst_x, max_abs_diff(sw.theta_check, c.theta0));
      }
    }
    report("C5", worst_delta == 0.0 && worst_x <= cfg.tol_x,
           std::string(c.model->name()) + "/" + std::string(c.est->name()) + " fixed point on 20 instances: max delta " +
               e3(worst_delta) + ", max |theta - theta0| " + e3(worst_x));
  }
}

void implicit_vs_percentile(const char* id, const hs::CoverageReport& rep, const std::string& scenario,
                            const std::string& implicit, const std::string& percentile) {
  const double ci = coverage_of(rep, scenario, implicit, 0.95);
  const double cp = coverage_of(rep, scenario, percentile, 0.95);
  report(id, std::abs(ci - 0.95) <= 0.02,
         scenario + " implicit coverage at 0.95: " + f4(ci) + " within 0.95 +/- 0.02");
  report(id, std::abs(cp - 0.95) > std::abs(ci - 0.95),
         scenario + " percentile coverage at 0.95: " + f4(cp) + " further from 0.95 than implicit");
}

void lomax(std::size_t threads) {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = config("lomax_n50.json");
  cfg.methods = {{CIMethod::Implicit, "lomax_mle"}, {CIMethod::Percentile, "lomax_mle"}};
  cfg.functionals = {"b", "q"};
  cfg.alphas = {0.95};
  cfg.threads = threads;
  const auto rep = hs::run_coverage(cfg);
  for (const char* f : {"b", "q"}) {
    implicit_vs_percentile("C6", rep, "lomax_n50/" + std::string(f), "implicit:lomax_mle",
                           "percentile:lomax_mle");
  }

  auto surv = config("lomax_n100_survival.json");
  surv.methods = {{CIMethod::Implicit, "lomax_mle"}, {CIMethod::Percentile, "lomax_mle"}};
  surv.alphas = {0.95};
  surv.threads = threads;
  const auto rep2 = hs::run_coverage(surv);
  implicit_vs_percentile("C6", rep2, "lomax_n100/S(6)", "implicit:lomax_mle", "percentile:lomax_mle");
  const double secs = seconds_since(t0);
  report("C6", secs < 1800.0, "lomax coverage runtime " + f4(secs) + " s under 1800 s");
}

void timing(std::size_t threads) {
  auto cfg = config("lomax_n50.json");
  cfg.methods = {{CIMethod::Implicit, "lomax_mle"}, {CIMethod::Percentile, "lomax_mle"}};
  cfg.threads = threads;
  const auto lines = hs::run_bench(cfg, 20);
  const double ratio = lines[0].median_s / lines[1].median_s;
  report("C10", ratio <= 3.0,
         "lomax n=50 B=500 median CI time implicit " + f4(lines[0].median_s) + " s, percentile " +
             f4(lines[1].median_s) + " s, ratio " + f4(ratio) + " <= 3");

  // Consistent WMLE by indirect inference is the comparator of the naive
  // WMLE implicit bootstrap.
  auto wm = config("lomax_n50.json");
  wm.methods = {{CIMethod::Implicit, "lomax_naive_wmle"}, {CIMethod::Percentile, "lomax_naive_wmle_ii"}};
  wm.B = 50;
  wm.ii_H = 50;
  wm.threads = threads;
  const auto wl = hs::run_bench(wm, 3);
  info("C10", "WMLE comparator at B=50: implicit on naive WMLE " + f4(wl[0].median_s) +
                  " s, percentile on consistent WMLE " + f4(wl[1].median_s) + " s, ratio " +
                  f4(wl[1].median_s / wl[0].median_s));
}

void invariants() {
  const rng::MasterSeed master{777};
  // Quantile monotonicity.
  {
    bool ok = true;
    for (std::uint64_t s = 0; s < 50 && ok; ++s) {
      const auto blk = rng::draw_block(master, rng::StreamKey::boot(s, 0), 97);
      std::vector<double> sorted(blk.values().begin(), blk.values().end());
      std::sort(sorted.begin(), sorted.end());
      double prev = -kInf;
      for (int a = 1; a < 100; ++a) {
        const double q = empirical_quantile_sorted(sorted, a / 100.0);
        ok = ok && q >= prev;
        prev = q;
      }
    }
    report("C11", ok, "empirical quantiles nondecreasing in alpha");
  }

  LomaxModel lomax;
  LomaxMleEstimator mle;
  EngineConfig ec;
  ec.B = 200;
  ec.master = master;
  const auto data = lomax.simulate({1.0, 1.5}, rng::draw_block(master, rng::StreamKey::observed(3), 50));

  // Transformation equivariance of the percentile-type intervals.
  {
    const Functional q = coordinate_functional(1, "q");
    Functional logq{"log q", [](std::span<const double> t) { return std::log(t[1]); }, {}};
    bool ok = true;
    const auto run = implicit_bootstrap(data, lomax, mle, ec);
    const auto iq = run.interval(q);
    const auto il = run.interval(logq);
    for (double a : {0.05, 0.5, 0.9, 0.95, 0.99}) {
      ok = ok && std::abs(std::log(iq.upper(a)) - il.upper(a)) <= 1e-12 * std::max(1.0, std::abs(il.upper(a)));
    }
    report("C11", ok, "implicit interval for log q equals log of interval for q");
  }

  // Conditional-distribution contract: draws depend on the data through pi_obs only.
  {
    const auto pi = mle.estimate(data);
    const auto a = implicit_bootstrap(data, lomax, mle, ec);
    const auto b = implicit_bootstrap_from(pi, data.n(), lomax, mle, ec);
    bool ok = a.draws.size() == b.draws.size();
    for (std::size_t i = 0; ok && i < a.draws.size(); ++i) ok = max_abs_diff(a.draws[i], b.draws[i]) == 0.0;
    report("C11", ok, "implicit draws are a function of the observed auxiliary estimate");
  }

  // Pareto location factorization.
  {
    bool ok = true;
    const auto w = exact::sample_summary(exact::Example::Pareto, 20, 11);
    double prev = -kInf;
    for (int i = 1; i <= 200; ++i) {
      const double v = exact::pareto_h_w(0.01 * i, w, 1.0, 1.0);
      ok = ok && v > prev;
      prev = v;
    }
    for (std::uint64_t s = 0; s < 100 && ok; ++s) {
      const auto ws = exact::sample_summary(exact::Example::Pareto, 20, 1000 + s);
      const auto pi = exact::pi_from_summary(exact::Example::Pareto, std::vector<double>{1.0, 1.0}, w);
      const auto th = exact::exact_theta_check(exact::Example::Pareto, pi, ws);
      ok = ok && std::abs(th[0] - exact::pareto_h_w(exact::pareto_h(ws), w, 1.0, 1.0)) <= 1e-12 * th[0];
    }
    report("C11", ok, "pareto mu_check = h_w(h(w*)) with h_w strictly increasing");
  }

  // Sampling-path parity.
  {
    double worst = 0.0;
    for (auto ex : {exact::Example::Uniform, exact::Example::Pareto, exact::Example::Andrews}) {
      const std::size_t n = ex == exact::Example::Uniform ? 10 : ex == exact::Example::Pareto ? 20 : 25;
      const std::vector<double> theta0 =
          ex == exact::Example::Pareto ? std::vector<double>{1.0, 1.0} : std::vector<double>{ex == exact::Example::Uniform ? 1.0 : 0.0};
      for (std::uint64_t s = 0; s < 200; ++s) {
        const auto obs = exact::sample_summary(ex, n, 5000 + s);
        const auto pi = exact::pi_from_summary(ex, theta0, obs);
        const auto w = rng::draw_block(master, rng::StreamKey::boot(s, 1), n);
        const auto a = closed_form_match(ex, AuxEstimate{pi}, w);
        const auto b = exact::exact_theta_check(ex, pi, exact::summarize(ex, w.values()));
        for (std::size_t j = 0; j < b.size(); ++j) {
          worst = std::max(worst, std::abs(a.theta_check[j] - b[j]) / std::max(1.0, std::abs(b[j])));
        }
      }
    }
    report("C11", worst <= 1e-12, "closed-form match equals summary-based draw: max rel diff " + e3(worst));
  }
}

void student_t(std::size_t threads) {
  auto cfg = config("student_t_n100_c10.json");
  cfg.alphas = {0.95};
  cfg.threads = threads;
  const auto rep = hs::run_coverage(cfg);
  const std::string sc = "student_t_n100_c10/beta1";
  const double ci = coverage_of(rep, sc, "implicit:t_naive_mle", 0.95);
  const double cp = coverage_of(rep, sc, "percentile:t_censored_mle", 0.95);
  const double ca = coverage_of(rep, sc, "asymptotic:t_censored_mle", 0.95);
  report("C7", !rep.excess_exclusions && std::abs(ci - 0.939) <= 0.02,
         sc + " implicit coverage at 0.95: " + f4(ci) + " within 0.939 +/- 0.02, exclusion rate " +
             f4(rep.max_exclusion_rate));
  report("C7", std::abs(ci - 0.95) <= std::abs(cp - 0.95) && std::abs(cp - 0.95) <= std::abs(ca - 0.95),
         sc + " closeness to 0.95: implicit " + f4(ci) + ", percentile " + f4(cp) + ", asymptotic " + f4(ca));
}

void mg1(std::size_t threads) {
  auto cfg = config("mg1_n250.json");
  cfg.alphas = {0.95};
  cfg.threads = threads;
  const auto rep = hs::run_coverage(cfg);
  for (const char* f : {"theta1", "theta2", "theta3"}) {
    const std::string sc = "mg1_n250/" + std::string(f);
    const double c = coverage_of(rep, sc, "implicit:frechet_mle", 0.95);
    report("C8", !rep.excess_exclusions && std::abs(c - 0.95) <= 0.025,
           sc + " implicit coverage at 0.95: " + f4(c) + " within 0.95 +/- 0.025");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  bool long_only = false, all = false;
  std::size_t threads = 0;
  app.add_flag("--long-only", long_only, "run only the long tier (censored regression, queue)");
  app.add_flag("--all", all, "run both tiers");
  app.add_option("--threads", threads, "worker threads (0: IB_THREADS or hardware)");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!long_only) {
      uniform_and_determinism(threads);
      pareto(threads);
      andrews(threads);
      oracle_equivalence();
      fixed_point();
      lomax(threads);
      timing(threads);
      invariants();
    }
    if (long_only || all) {
      student_t(threads);
      mg1(threads);
    }
  } catch (const std::exception& e) {
    std::printf("[FAIL] aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criterion check(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
