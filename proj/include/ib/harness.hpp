#pragma once

// Monte Carlo coverage experiments, exact-coverage self-checks, timing
// benchmarks and SVG coverage plots.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ib/engines.hpp"
#include "ib/exact_models.hpp"

namespace ib::harness {

struct MethodSpec {
  CIMethod engine = CIMethod::Implicit;
  std::string estimator;
  std::string label() const;
};

struct ScenarioConfig {
  std::string scenario = "scenario";
  std::string model;
  std::vector<double> theta0;
  std::size_t n = 0;
  std::size_t M = 2000;
  std::size_t B = 500;
  std::vector<MethodSpec> methods;
  std::vector<std::string> functionals{"coord:0"};
  std::vector<double> alphas{0.9, 0.925, 0.95, 0.975, 0.99};
  MatchPath path = MatchPath::Switched;
  std::uint64_t seed = 20240101;
  bool strict = false;  // count psi0 < U instead of psi0 <= U
  SolverConfig solver;
  bool pilot_init = false;
  std::string design;  // covariate CSV for the regression model
  double nu_min = 0.3;
  double nu_max = 100.0;
  bool naive_drop_censored = false;
  std::size_t ii_H = 50;
  CovarianceSource asymptotic_cov = CovarianceSource::Information;
  std::size_t cov_draws = 200;
  double max_exclusion = 0.1;
  bool record_timing = false;
  std::size_t threads = 0;
  std::optional<nlohmann::json> paper_scale;  // overrides applied by --paper-scale
};

/// Parses and validates a config; unknown keys and invalid values throw
/// ConfigError. With paper_scale the "paper_scale" object's keys override.
ScenarioConfig parse_config(const nlohmann::json& j, bool paper_scale = false);
ScenarioConfig load_config(const std::string& path, bool paper_scale = false);
/// Every field, defaults included.
nlohmann::json to_json(const ScenarioConfig& cfg);

std::shared_ptr<const Model> make_model(const ScenarioConfig& cfg);
/// "coord:k", a parameter name of the model, or "lomax_survival:y".
Functional make_functional(const std::string& spec, const Model& model);
std::vector<std::string> parameter_names(const Model& model);

struct CoverageRecord {
  std::string scenario;
  std::string method;
  double alpha = 0.0;
  std::size_t n = 0;
  std::size_t M = 0;  // replicates used (after exclusions)
  std::size_t B = 0;
  double coverage = 0.0;
  double mc_stderr = 0.0;
  double mean_len = 0.0;
  double mean_delta = 0.0;
  std::size_t excluded = 0;
  double wall_s = 0.0;
};

struct CoverageReport {
  std::vector<CoverageRecord> records;
  /// Largest per-method exclusion fraction.
  double max_exclusion_rate = 0.0;
  bool excess_exclusions = false;
  std::vector<std::string> messages;
};

CoverageReport run_coverage(const ScenarioConfig& cfg);

/// Shortest round-trip text for a double.
std::string format_double(double v);
std::string csv_header();
std::string to_csv(const std::vector<CoverageRecord>& records);
void write_csv(const std::string& path, const std::vector<CoverageRecord>& records);
std::vector<CoverageRecord> read_csv(const std::string& path);

struct ExactCheckLine {
  std::string functional;
  double alpha = 0.0;
  double coverage = 0.0;
  double theory = 0.0;
  double band = 0.0;  // allowed |coverage - theory|; 0 means exact
  bool pass = false;
};

struct ExactCheckReport {
  exact::Example example;
  std::size_t n = 0, M = 0, B = 0;
  std::vector<ExactCheckLine> lines;
  bool pass() const;
};

/// Coverage of the closed-form implicit bootstrap against its theoretical
/// value: uniform (theta0 = 1, n = 10), pareto ((1,1), n = 20, both
/// coordinates), andrews (theta0 = 0, n = 25, strict inequality).
ExactCheckReport run_exact_check(exact::Example example, std::size_t M, std::size_t B,
                                 std::uint64_t seed = 7, std::vector<double> alphas = {},
                                 std::size_t threads = 0);

struct BenchLine {
  std::string method;
  std::size_t reps = 0;
  double median_s = 0.0;
};

/// Median wall time of one CI computation per method, over `reps` datasets.
std::vector<BenchLine> run_bench(const ScenarioConfig& cfg, std::size_t reps);

/// Coverage-vs-alpha SVG, one polyline per (scenario, method).
void emit_plot(const std::string& csv_path, const std::string& svg_path);
std::string render_plot(const std::vector<CoverageRecord>& records);

}  // namespace ib::harness

namespace ib::harness {

/// Reads observations for `ib ci`: a single numeric column (optional header)
/// or a headered table with a `y` column and covariates x1..xk.
Dataset load_data_csv(const std::string& path);

/// Intervals for every configured method and functional on one dataset.
/// The regression model takes its design from the data.
nlohmann::json run_ci(const ScenarioConfig& cfg, const Dataset& data);

}  // namespace ib::harness
