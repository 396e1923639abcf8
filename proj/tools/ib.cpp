// Command-line front end: ci, simulate-coverage, exact-check, bench, plot.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ib/errors.hpp"
#include "ib/harness.hpp"
#include "ib/parallel.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kAcceptanceFailure = 3;
constexpr int kExcessExclusions = 4;

namespace hs = ib::harness;

int cmd_ci(const std::string& config, const std::string& data_path) {
  const hs::ScenarioConfig cfg = hs::load_config(config);
  const ib::Dataset data = hs::load_data_csv(data_path);
  std::cout << hs::run_ci(cfg, data).dump(2) << '\n';
  return kOk;
}

int cmd_simulate(const std::string& config, bool paper_scale, std::size_t threads,
                 const std::string& out_dir) {
  hs::ScenarioConfig cfg = hs::load_config(config, paper_scale);
  if (threads > 0) cfg.threads = threads;
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  {
    std::ofstream resolved(dir / (cfg.scenario + ".config.json"));
    resolved << hs::to_json(cfg).dump(2) << '\n';
  }
  const hs::CoverageReport rep = hs::run_coverage(cfg);
  const auto csv = dir / (cfg.scenario + ".csv");
  hs::write_csv(csv.string(), rep.records);
  std::printf("%-28s %-32s %7s %9s %9s %9s %5s\n", "scenario", "method", "alpha", "coverage",
              "stderr", "mean_len", "excl");
  for (const auto& r : rep.records) {
    std::printf("%-28s %-32s %7.4g %9.4f %9.4f %9.4g %5zu\n", r.scenario.c_str(), r.method.c_str(),
                r.alpha, r.coverage, r.mc_stderr, r.mean_len, r.excluded);
  }
  std::printf("wrote %s\n", csv.string().c_str());
  for (const auto& m : rep.messages) std::fprintf(stderr, "excess exclusions: %s\n", m.c_str());
  return rep.excess_exclusions ? kExcessExclusions : kOk;
}

int cmd_exact(const std::string& example, std::size_t M, std::size_t B, std::uint64_t seed,
              std::size_t threads) {
  const auto ex = ib::exact::parse_example(example);
  const hs::ExactCheckReport rep = hs::run_exact_check(ex, M, B, seed, {}, threads);
  std::printf("exact check: %s n=%zu M=%zu B=%zu\n", example.c_str(), rep.n, rep.M, rep.B);
  for (const auto& l : rep.lines) {
    std::printf("  %-6s alpha=%-6g coverage=%.4f theory=%.4f band=%.4f %s\n", l.functional.c_str(),
                l.alpha, l.coverage, l.theory, l.band, l.pass ? "PASS" : "FAIL");
  }
  return rep.pass() ? kOk : kAcceptanceFailure;
}

int cmd_bench(const std::string& config, std::size_t reps) {
  const hs::ScenarioConfig cfg = hs::load_config(config);
  const auto lines = hs::run_bench(cfg, reps);
  std::printf("%-36s %6s %12s\n", "method", "reps", "median_s");
  for (const auto& l : lines) std::printf("%-36s %6zu %12.6f\n", l.method.c_str(), l.reps, l.median_s);
  for (const auto& a : lines) {
    if (a.method.rfind("implicit:", 0) != 0 || a.median_s <= 0) continue;
    for (const auto& b : lines) {
      if (&a == &b || b.median_s <= 0) continue;
      std::printf("ratio %s / %s = %.3f\n", a.method.c_str(), b.method.c_str(), a.median_s / b.median_s);
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit bootstrap confidence intervals and coverage experiments"};
  app.require_subcommand(1);

  std::string config, data, out_dir = "out", example, in_csv, out_svg;
  bool paper_scale = false;
  std::size_t threads = 0, M = 10000, B = 2000, reps = 20;
  std::uint64_t seed = 7;

  auto* ci = app.add_subcommand("ci", "confidence intervals for a dataset");
  ci->add_option("--config", config, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
  ci->add_option("--data", data, "observations (CSV)")->required()->check(CLI::ExistingFile);

  auto* sim = app.add_subcommand("simulate-coverage", "Monte Carlo coverage study");
  sim->add_option("--config", config, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_flag("--paper-scale", paper_scale, "apply the config's paper_scale overrides");
  sim->add_option("--threads", threads, "worker threads (default $IB_THREADS or all cores)");
  sim->add_option("--out", out_dir, "output directory");

  auto* ex = app.add_subcommand("exact-check", "coverage of the closed-form examples");
  ex->add_option("--example", example, "uniform, pareto or andrews")
      ->required()
      ->check(CLI::IsMember({"uniform", "pareto", "andrews"}));
  ex->add_option("--M", M, "replicates");
  ex->add_option("--B", B, "bootstrap draws");
  ex->add_option("--seed", seed, "master seed");
  ex->add_option("--threads", threads, "worker threads");

  auto* bench = app.add_subcommand("bench", "median wall time per interval");
  bench->add_option("--config", config, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
  bench->add_option("--reps", reps, "datasets to time");

  auto* plot = app.add_subcommand("plot", "coverage curves from a CSV");
  plot->add_option("--in", in_csv, "coverage CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", out_svg, "SVG output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*ci) return cmd_ci(config, data);
    if (*sim) return cmd_simulate(config, paper_scale, threads, out_dir);
    if (*ex) return cmd_exact(example, M, B, seed, threads);
    if (*bench) return cmd_bench(config, reps);
    if (*plot) {
      hs::emit_plot(in_csv, out_svg);
      return kOk;
    }
  } catch (const ib::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const ib::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kConfigError;
  } catch (const ib::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kOk;
}
