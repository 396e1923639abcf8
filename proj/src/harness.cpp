#include "ib/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "ib/errors.hpp"
#include "ib/parallel.hpp"

namespace ib::harness {

using nlohmann::json;

std::string MethodSpec::label() const { return std::string(method_name(engine)) + ":" + estimator; }

// ---------------------------------------------------------------------------
// Config

namespace {

const std::set<std::string> kKeys = {
    "scenario", "model", "theta0", "n", "M", "B", "methods", "functionals", "alphas",
    "path", "seed", "strict", "solver", "pilot_init", "design", "nu_bounds",
    "naive_drop_censored", "ii_H", "asymptotic_cov", "cov_draws", "max_exclusion",
    "record_timing", "threads", "paper_scale"};
const std::set<std::string> kSolverKeys = {"tol_delta", "tol_x", "tol_z", "max_evals",
                                           "restarts", "init_rule", "user_init"};

template <class T>
T get_as(const json& j, const std::string& key) {
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
      throw ConfigError("config key '" + key + "' must be a non-negative integer");
    }
  }
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

MatchPath parse_path(const std::string& s) {
  if (s == "nested") return MatchPath::Nested;
  if (s == "switched") return MatchPath::Switched;
  if (s == "closed_form") return MatchPath::ClosedForm;
  throw ConfigError("unknown match path '" + s + "'");
}

InitRule parse_init(const std::string& s) {
  if (s == "at_pi_hat") return InitRule::AtPiHat;
  if (s == "at_box_center") return InitRule::AtBoxCenter;
  if (s == "user") return InitRule::User;
  throw ConfigError("unknown init_rule '" + s + "'");
}

const char* init_name(InitRule r) {
  switch (r) {
    case InitRule::AtPiHat: return "at_pi_hat";
    case InitRule::AtBoxCenter: return "at_box_center";
    case InitRule::User: return "user";
  }
  return "?";
}

MethodSpec parse_method_spec(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos || colon + 1 >= s.size()) {
    throw ConfigError("method '" + s + "' must look like engine:estimator");
  }
  return {parse_method(s.substr(0, colon)), s.substr(colon + 1)};
}

void apply(ScenarioConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    if (!kKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
    if (key == "scenario") c.scenario = get_as<std::string>(val, key);
    else if (key == "model") c.model = get_as<std::string>(val, key);
    else if (key == "theta0") c.theta0 = get_as<std::vector<double>>(val, key);
    else if (key == "n") c.n = get_as<std::size_t>(val, key);
    else if (key == "M") c.M = get_as<std::size_t>(val, key);
    else if (key == "B") c.B = get_as<std::size_t>(val, key);
    else if (key == "methods") {
      c.methods.clear();
      for (const auto& s : get_as<std::vector<std::string>>(val, key)) c.methods.push_back(parse_method_spec(s));
    } else if (key == "functionals") c.functionals = get_as<std::vector<std::string>>(val, key);
    else if (key == "alphas") c.alphas = get_as<std::vector<double>>(val, key);
    else if (key == "path") c.path = parse_path(get_as<std::string>(val, key));
    else if (key == "seed") c.seed = get_as<std::uint64_t>(val, key);
    else if (key == "strict") c.strict = get_as<bool>(val, key);
    else if (key == "pilot_init") c.pilot_init = get_as<bool>(val, key);
    else if (key == "design") c.design = get_as<std::string>(val, key);
    else if (key == "nu_bounds") {
      const auto b = get_as<std::vector<double>>(val, key);
      if (b.size() != 2) throw ConfigError("nu_bounds needs two values");
      c.nu_min = b[0];
      c.nu_max = b[1];
    } else if (key == "naive_drop_censored") c.naive_drop_censored = get_as<bool>(val, key);
    else if (key == "ii_H") c.ii_H = get_as<std::size_t>(val, key);
    else if (key == "asymptotic_cov") {
      const auto s = get_as<std::string>(val, key);
      if (s == "information") c.asymptotic_cov = CovarianceSource::Information;
      else if (s == "bootstrap") c.asymptotic_cov = CovarianceSource::Bootstrap;
      else throw ConfigError("asymptotic_cov must be 'information' or 'bootstrap'");
    } else if (key == "cov_draws") c.cov_draws = get_as<std::size_t>(val, key);
    else if (key == "max_exclusion") c.max_exclusion = get_as<double>(val, key);
    else if (key == "record_timing") c.record_timing = get_as<bool>(val, key);
    else if (key == "threads") c.threads = get_as<std::size_t>(val, key);
    else if (key == "paper_scale") {
      if (!val.is_object()) throw ConfigError("paper_scale must be an object");
      if (val.contains("paper_scale")) throw ConfigError("paper_scale cannot nest");
      c.paper_scale = val;
    } else if (key == "solver") {
      if (!val.is_object()) throw ConfigError("solver must be an object");
      for (const auto& [sk, sv] : val.items()) {
        if (!kSolverKeys.count(sk)) throw ConfigError("unknown solver key '" + sk + "'");
        if (sk == "tol_delta") c.solver.tol_delta = get_as<double>(sv, sk);
        else if (sk == "tol_x") c.solver.tol_x = get_as<double>(sv, sk);
        else if (sk == "tol_z") c.solver.tol_z = get_as<double>(sv, sk);
        else if (sk == "max_evals") c.solver.max_evals = get_as<int>(sv, sk);
        else if (sk == "restarts") c.solver.restarts = get_as<int>(sv, sk);
        else if (sk == "init_rule") c.solver.init_rule = parse_init(get_as<std::string>(sv, sk));
        else if (sk == "user_init") c.solver.user_init = get_as<std::vector<double>>(sv, sk);
      }
    }
  }
}

void validate(const ScenarioConfig& c) {
  if (c.model.empty()) throw ConfigError("config needs a model");
  if (c.n == 0) throw ConfigError("n must be >= 1");
  if (c.M == 0 || c.B == 0) throw ConfigError("M and B must be >= 1");
  if (c.methods.empty()) throw ConfigError("config needs at least one method");
  if (c.functionals.empty()) throw ConfigError("config needs at least one functional");
  if (c.alphas.empty()) throw ConfigError("alpha grid is empty");
  for (std::size_t i = 0; i < c.alphas.size(); ++i) {
    if (!(c.alphas[i] > 0.0 && c.alphas[i] < 1.0)) throw ConfigError("alphas must lie in (0,1)");
    if (i > 0 && !(c.alphas[i] > c.alphas[i - 1])) throw ConfigError("alphas must be strictly increasing");
  }
  const SolverConfig& s = c.solver;
  if (!(s.tol_delta > 0.0 && s.tol_x > 0.0 && s.tol_z > 0.0) || s.restarts < 0 || s.max_evals < 0) {
    throw ConfigError("solver settings must be positive");
  }
  if (!(c.max_exclusion >= 0.0 && c.max_exclusion <= 1.0)) throw ConfigError("max_exclusion must lie in [0,1]");
  if (!(c.nu_min > 0.0 && c.nu_max > c.nu_min)) throw ConfigError("invalid nu_bounds");
}

}  // namespace

ScenarioConfig parse_config(const json& j, bool paper_scale) {
  ScenarioConfig c;
  apply(c, j);
  if (paper_scale && c.paper_scale) {
    const json overrides = *c.paper_scale;
    apply(c, overrides);
    c.paper_scale = overrides;
  }
  validate(c);
  const auto model = make_model(c);
  if (c.theta0.size() != model->dim()) throw ConfigError("theta0 has the wrong dimension");
  if (!model->feasible(c.theta0)) throw ConfigError("theta0 lies outside the parameter space");
  for (const auto& f : c.functionals) make_functional(f, *model);
  return c;
}

ScenarioConfig load_config(const std::string& path, bool paper_scale) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j, paper_scale);
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["scenario"] = c.scenario;
  j["model"] = c.model;
  j["theta0"] = c.theta0;
  j["n"] = c.n;
  j["M"] = c.M;
  j["B"] = c.B;
  std::vector<std::string> methods;
  for (const auto& m : c.methods) methods.push_back(m.label());
  j["methods"] = methods;
  j["functionals"] = c.functionals;
  j["alphas"] = c.alphas;
  j["path"] = path_name(c.path);
  j["seed"] = c.seed;
  j["strict"] = c.strict;
  j["solver"] = {{"tol_delta", c.solver.tol_delta},
                 {"tol_x", c.solver.tol_x},
                 {"tol_z", c.solver.tol_z},
                 {"max_evals", c.solver.max_evals},
                 {"restarts", c.solver.restarts},
                 {"init_rule", init_name(c.solver.init_rule)},
                 {"user_init", c.solver.user_init}};
  j["pilot_init"] = c.pilot_init;
  j["design"] = c.design;
  j["nu_bounds"] = {c.nu_min, c.nu_max};
  j["naive_drop_censored"] = c.naive_drop_censored;
  j["ii_H"] = c.ii_H;
  j["asymptotic_cov"] = c.asymptotic_cov == CovarianceSource::Information ? "information" : "bootstrap";
  j["cov_draws"] = c.cov_draws;
  j["max_exclusion"] = c.max_exclusion;
  j["record_timing"] = c.record_timing;
  j["threads"] = c.threads;
  if (c.paper_scale) j["paper_scale"] = *c.paper_scale;
  return j;
}

std::shared_ptr<const Model> make_model(const ScenarioConfig& c) {
  if (c.model == "uniform") return std::make_shared<UniformScaleModel>();
  if (c.model == "pareto") return std::make_shared<ParetoModel>();
  if (c.model == "lomax") return std::make_shared<LomaxModel>();
  if (c.model == "andrews") return std::make_shared<NormalMeanModel>();
  if (c.model == "mg1") return std::make_shared<MG1QueueModel>();
  if (c.model == "student_t_censored") {
    const std::string path = c.design.empty() ? std::string(IB_DATA_DIR) + "/student_t_design.csv" : c.design;
    const Design full = load_design_csv(path);
    if (full.rows() < c.n) throw ConfigError("design has fewer rows than n");
    return std::make_shared<CensoredStudentTModel>(full.head(c.n), c.nu_min, c.nu_max);
  }
  throw ConfigError("unknown model '" + c.model + "'");
}

std::vector<std::string> parameter_names(const Model& model) {
  const std::string name(model.name());
  if (name == "uniform" || name == "andrews") return {"theta"};
  if (name == "pareto") return {"mu", "alpha"};
  if (name == "lomax") return {"b", "q"};
  if (name == "mg1") return {"theta1", "theta2", "theta3"};
  std::vector<std::string> out;
  if (const auto* t = dynamic_cast<const CensoredStudentTModel*>(&model)) {
    for (std::size_t j = 0; j <= t->covariates(); ++j) out.push_back("beta" + std::to_string(j));
    out.push_back("sigma");
    out.push_back("nu");
    return out;
  }
  for (std::size_t j = 0; j < model.dim(); ++j) out.push_back("theta" + std::to_string(j));
  return out;
}

Functional make_functional(const std::string& spec, const Model& model) {
  const auto names = parameter_names(model);
  if (spec.rfind("coord:", 0) == 0) {
    std::size_t k = 0;
    const std::string rest = spec.substr(6);
    const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), k);
    if (res.ec != std::errc() || res.ptr != rest.data() + rest.size() || k >= model.dim()) {
      throw ConfigError("bad functional '" + spec + "'");
    }
    return coordinate_functional(k, names[k]);
  }
  if (spec.rfind("lomax_survival:", 0) == 0) {
    if (model.name() != "lomax") throw ConfigError("lomax_survival needs the lomax model");
    const std::string rest = spec.substr(15);
    double y = 0.0;
    const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), y);
    if (res.ec != std::errc() || res.ptr != rest.data() + rest.size() || !(y > 0.0)) {
      throw ConfigError("bad functional '" + spec + "'");
    }
    Functional f = lomax_survival_functional(y);
    f.label = "S(" + rest + ")";
    return f;
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == spec) return coordinate_functional(k, names[k]);
  }
  throw ConfigError("unknown functional '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Coverage

namespace {

std::shared_ptr<const Estimator> build_estimator(const std::string& name, const ScenarioConfig& c,
                                                 const std::shared_ptr<const Model>& model,
                                                 std::uint64_t replicate) {
  const std::string suffix = "_ii";
  if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
    auto base = build_estimator(name.substr(0, name.size() - suffix.size()), c, model, replicate);
    return std::make_shared<IndirectInferenceEstimator>(model, base, c.ii_H, rng::MasterSeed{c.seed},
                                                        replicate, c.n, c.solver);
  }
  if (name == "t_naive_mle" && c.naive_drop_censored) return make_estimator("t_naive_mle_drop", *model);
  return make_estimator(name, *model);
}

BootstrapRun run_method(const MethodSpec& m, const Dataset& data, const ScenarioConfig& c,
                        const std::shared_ptr<const Model>& model, const Estimator& est,
                        std::uint64_t replicate, std::size_t threads,
                        const AuxEstimate* aux = nullptr) {
  EngineConfig ec;
  ec.B = c.B;
  ec.master = rng::MasterSeed{c.seed};
  ec.replicate = replicate;
  ec.path = c.path;
  ec.solver = c.solver;
  ec.pilot_init = c.pilot_init;
  ec.threads = threads;
  switch (m.engine) {
    case CIMethod::Implicit:
      return aux ? implicit_bootstrap_from(*aux, data.n(), *model, est, ec)
                 : implicit_bootstrap(data, *model, est, ec);
    case CIMethod::Percentile: return percentile_bootstrap(data, *model, est, ec);
    case CIMethod::Studentized: return studentized_bootstrap(data, *model, est, ec);
    case CIMethod::BCa: return bca_bootstrap(data, *model, est, ec);
    case CIMethod::Asymptotic: return asymptotic_ci(data, *model, est, ec, c.asymptotic_cov, c.cov_draws);
  }
  throw ConfigError("unknown method");
}

struct MethodOutcome {
  bool excluded = true;
  std::vector<std::vector<double>> upper;  // [functional][alpha]
  std::vector<std::vector<double>> len;
  double mean_delta = 0.0;
  double seconds = 0.0;
};

Dataset observed_data(const ScenarioConfig& c, const Model& model, std::uint64_t replicate) {
  const RandomBlock w =
      rng::draw_block(rng::MasterSeed{c.seed}, rng::StreamKey::observed(replicate), model.noise_dim(c.n));
  return model.simulate(ParamVector(c.theta0), w);
}

}  // namespace

CoverageReport run_coverage(const ScenarioConfig& c) {
  const auto model = make_model(c);
  std::vector<Functional> psis;
  for (const auto& f : c.functionals) psis.push_back(make_functional(f, *model));
  const std::size_t nm = c.methods.size(), nf = psis.size(), na = c.alphas.size();

  // Estimators that do not depend on the replicate are shared.
  std::vector<std::shared_ptr<const Estimator>> shared(nm);
  for (std::size_t k = 0; k < nm; ++k) {
    const auto& name = c.methods[k].estimator;
    if (name.size() < 3 || name.compare(name.size() - 3, 3, "_ii") != 0) {
      shared[k] = build_estimator(name, c, model, 0);
    }
  }

  std::vector<std::vector<MethodOutcome>> results(c.M, std::vector<MethodOutcome>(nm));
  parallel_for(c.M, resolve_threads(c.threads), [&](std::size_t r) {
    const Dataset data = observed_data(c, *model, r);
    for (std::size_t k = 0; k < nm; ++k) {
      MethodOutcome& out = results[r][k];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        auto est = shared[k] ? shared[k] : build_estimator(c.methods[k].estimator, c, model, r);
        // Replicates whose observed estimate fails are excluded before any simulation.
        const AuxEstimate aux = est->estimate(data);
        if (!aux.converged) {
          out.excluded = true;
        } else {
          const BootstrapRun run = run_method(c.methods[k], data, c, model, *est, r, 1, &aux);
          out.upper.assign(nf, std::vector<double>(na));
          out.len.assign(nf, std::vector<double>(na));
          for (std::size_t f = 0; f < nf; ++f) {
            const IntervalEstimate iv = run.interval(psis[f]);
            for (std::size_t a = 0; a < na; ++a) {
              out.upper[f][a] = iv.upper(c.alphas[a]);
              const auto [lo, hi] = iv.two_sided(c.alphas[a]);
              out.len[f][a] = hi - lo;
            }
          }
          if (!run.draw_delta.empty()) {
            double s = 0.0;
            for (double d : run.draw_delta) s += d;
            out.mean_delta = s / static_cast<double>(run.draw_delta.size());
          }
          out.excluded = false;
        }
      } catch (const Error&) {
        out.excluded = true;
      }
      out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  });

  CoverageReport rep;
  for (std::size_t k = 0; k < nm; ++k) {
    std::size_t excluded = 0;
    double seconds = 0.0, delta = 0.0;
    for (std::size_t r = 0; r < c.M; ++r) {
      excluded += results[r][k].excluded ? 1 : 0;
      seconds += results[r][k].seconds;
      if (!results[r][k].excluded) delta += results[r][k].mean_delta;
    }
    const std::size_t used = c.M - excluded;
    const double rate = static_cast<double>(excluded) / static_cast<double>(c.M);
    rep.max_exclusion_rate = std::max(rep.max_exclusion_rate, rate);
    if (rate > c.max_exclusion) {
      rep.excess_exclusions = true;
      rep.messages.push_back(c.methods[k].label() + ": " + std::to_string(excluded) + " of " +
                             std::to_string(c.M) + " replicates excluded");
    }
    for (std::size_t f = 0; f < nf; ++f) {
      const double psi0 = psis[f](ParamVector(c.theta0));
      for (std::size_t a = 0; a < na; ++a) {
        std::size_t hits = 0;
        double len = 0.0;
        for (std::size_t r = 0; r < c.M; ++r) {
          const MethodOutcome& o = results[r][k];
          if (o.excluded) continue;
          const double u = o.upper[f][a];
          hits += (c.strict ? psi0 < u : psi0 <= u) ? 1 : 0;
          len += o.len[f][a];
        }
        CoverageRecord rec;
        rec.scenario = c.scenario + "/" + psis[f].label;
        rec.method = c.methods[k].label();
        rec.alpha = c.alphas[a];
        rec.n = c.n;
        rec.M = used;
        rec.B = c.methods[k].engine == CIMethod::Asymptotic ? 0 : c.B;
        rec.excluded = excluded;
        if (used > 0) {
          rec.coverage = static_cast<double>(hits) / static_cast<double>(used);
          rec.mc_stderr = std::sqrt(rec.coverage * (1.0 - rec.coverage) / static_cast<double>(used));
          rec.mean_len = len / static_cast<double>(used);
          rec.mean_delta = delta / static_cast<double>(used);
        }
        rec.wall_s = c.record_timing ? seconds : 0.0;
        rep.records.push_back(rec);
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_header() {
  return "scenario,method,alpha,n,M,B,coverage,mc_stderr,mean_len,mean_delta,excluded,wall_s";
}

std::string to_csv(const std::vector<CoverageRecord>& records) {
  std::ostringstream os;
  os << csv_header() << '\n';
  for (const auto& r : records) {
    os << r.scenario << ',' << r.method << ',' << format_double(r.alpha) << ',' << r.n << ','
       << r.M << ',' << r.B << ',' << format_double(r.coverage) << ','
       << format_double(r.mc_stderr) << ',' << format_double(r.mean_len) << ','
       << format_double(r.mean_delta) << ',' << r.excluded << ',' << format_double(r.wall_s)
       << '\n';
  }
  return os.str();
}

void write_csv(const std::string& path, const std::vector<CoverageRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << to_csv(records);
}

namespace {

template <class T>
T parse_field(const std::string& s, std::size_t line, const char* what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(line, std::string("invalid ") + what + " '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<CoverageRecord> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) throw ParseError(1, "unexpected header");
  std::vector<CoverageRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 12) throw ParseError(lineno, "expected 12 fields, found " + std::to_string(f.size()));
    CoverageRecord r;
    r.scenario = f[0];
    r.method = f[1];
    r.alpha = parse_field<double>(f[2], lineno, "alpha");
    r.n = parse_field<std::size_t>(f[3], lineno, "n");
    r.M = parse_field<std::size_t>(f[4], lineno, "M");
    r.B = parse_field<std::size_t>(f[5], lineno, "B");
    r.coverage = parse_field<double>(f[6], lineno, "coverage");
    r.mc_stderr = parse_field<double>(f[7], lineno, "mc_stderr");
    r.mean_len = parse_field<double>(f[8], lineno, "mean_len");
    r.mean_delta = parse_field<double>(f[9], lineno, "mean_delta");
    r.excluded = parse_field<std::size_t>(f[10], lineno, "excluded");
    r.wall_s = parse_field<double>(f[11], lineno, "wall_s");
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact check

bool ExactCheckReport::pass() const {
  return std::all_of(lines.begin(), lines.end(), [](const ExactCheckLine& l) { return l.pass; });
}

ExactCheckReport run_exact_check(exact::Example example, std::size_t M, std::size_t B,
                                 std::uint64_t seed, std::vector<double> alphas,
                                 std::size_t threads) {
  ScenarioConfig c;
  c.seed = seed;
  c.M = M;
  c.B = B;
  c.path = MatchPath::ClosedForm;
  c.methods = {{CIMethod::Implicit, ""}};
  switch (example) {
    case exact::Example::Uniform:
      c.model = "uniform";
      c.theta0 = {1.0};
      c.n = 10;
      c.methods[0].estimator = "sample_max";
      c.functionals = {"theta"};
      break;
    case exact::Example::Pareto:
      c.model = "pareto";
      c.theta0 = {1.0, 1.0};
      c.n = 20;
      c.methods[0].estimator = "pareto_mle";
      c.functionals = {"mu", "alpha"};
      break;
    case exact::Example::Andrews:
      c.model = "andrews";
      c.theta0 = {0.0};
      c.n = 25;
      c.methods[0].estimator = "censored_mean";
      c.functionals = {"theta"};
      c.strict = true;
      break;
  }
  if (alphas.empty()) {
    alphas = example == exact::Example::Andrews
                 ? std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.45, 0.6, 0.75, 0.9}
                 : std::vector<double>{0.9, 0.925, 0.95, 0.975, 0.99};
  }
  c.alphas = alphas;
  c.scenario = std::string("exact_") + exact::example_name(example);
  c.threads = threads;
  c.max_exclusion = 0.0;
  validate(c);
  const CoverageReport rep = run_coverage(c);

  ExactCheckReport out{example, c.n, M, B, {}};
  for (const auto& r : rep.records) {
    ExactCheckLine l;
    l.functional = r.scenario.substr(r.scenario.find('/') + 1);
    l.alpha = r.alpha;
    l.coverage = r.coverage;
    l.theory = exact::exact_coverage_theory(example, r.alpha);
    l.band = l.theory < 1.0 ? 3.0 * std::sqrt(l.theory * (1.0 - l.theory) / static_cast<double>(M)) : 0.0;
    l.pass = r.excluded == 0 && std::abs(l.coverage - l.theory) <= l.band;
    out.lines.push_back(l);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bench

std::vector<BenchLine> run_bench(const ScenarioConfig& c, std::size_t reps) {
  if (reps == 0) throw ConfigError("bench needs reps >= 1");
  const auto model = make_model(c);
  const Functional psi = make_functional(c.functionals.front(), *model);
  std::vector<BenchLine> out;
  for (const auto& m : c.methods) {
    std::vector<double> times;
    for (std::size_t r = 0; r < reps; ++r) {
      const Dataset data = observed_data(c, *model, r);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        auto est = build_estimator(m.estimator, c, model, r);
        const BootstrapRun run = run_method(m, data, c, model, *est, r, resolve_threads(c.threads));
        (void)run.interval(psi).upper(0.95);
      } catch (const Error&) {
        continue;
      }
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    BenchLine b{m.label(), times.size(), 0.0};
    if (!times.empty()) {
      std::sort(times.begin(), times.end());
      const std::size_t h = times.size() / 2;
      b.median_s = times.size() % 2 ? times[h] : 0.5 * (times[h - 1] + times[h]);
    }
    out.push_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plot

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char ch : s) {
    switch (ch) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += ch;
    }
  }
  return o;
}

}  // namespace

std::string render_plot(const std::vector<CoverageRecord>& records) {
  constexpr double W = 640, H = 480, L = 70, R = 200, T = 30, Bm = 60;
  double lo = 1.0, hi = 0.0;
  for (const auto& r : records) {
    lo = std::min({lo, r.alpha, r.coverage});
    hi = std::max({hi, r.alpha, r.coverage});
  }
  if (records.empty()) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 0.02) {
    lo -= 0.01;
    hi += 0.01;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto px = [&](double a) { return L + (a - lo) / (hi - lo) * (W - L - R); };
  auto py = [&](double c) { return H - Bm - (c - lo) / (hi - lo) * (H - T - Bm); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(H - Bm) << "\" x2=\"" << fmt(W - R) << "\" y2=\""
     << fmt(H - Bm) << "\"/>\n";
  os << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(T) << "\" x2=\"" << fmt(L) << "\" y2=\""
     << fmt(H - Bm) << "\"/>\n";
  os << "</g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    os << "<text x=\"" << fmt(px(v)) << "\" y=\"" << fmt(H - Bm + 16)
       << "\" text-anchor=\"middle\">" << fmt(v) << "</text>\n";
    os << "<text x=\"" << fmt(L - 6) << "\" y=\"" << fmt(py(v) + 4) << "\" text-anchor=\"end\">"
       << fmt(v) << "</text>\n";
  }
  os << "<text x=\"" << fmt((L + W - R) / 2) << "\" y=\"" << fmt(H - 15)
     << "\" text-anchor=\"middle\">confidence level</text>\n";
  os << "<text x=\"15\" y=\"" << fmt((T + H - Bm) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
     << fmt((T + H - Bm) / 2) << ")\">empirical coverage</text>\n";
  os << "</g>\n";
  os << "<line x1=\"" << fmt(px(lo)) << "\" y1=\"" << fmt(py(lo)) << "\" x2=\"" << fmt(px(hi))
     << "\" y2=\"" << fmt(py(hi)) << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";

  static const char* kColors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                  "#66a61e", "#e6ab02", "#a6761d", "#666666"};
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
  for (const auto& r : records) {
    const std::string key = r.scenario + " " + r.method;
    auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.first == key; });
    if (it == series.end()) {
      series.push_back({key, {}});
      it = series.end() - 1;
    }
    it->second.emplace_back(r.alpha, r.coverage);
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    auto pts = series[s].second;
    std::sort(pts.begin(), pts.end());
    const char* color = kColors[s % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      os << (i ? " " : "") << fmt(px(pts[i].first)) << ',' << fmt(py(pts[i].second));
    }
    os << "\"/>\n";
    const double ly = T + 14.0 * static_cast<double>(s);
    os << "<text x=\"" << fmt(W - R + 10) << "\" y=\"" << fmt(ly + 4)
       << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" << color << "\">"
       << xml_escape(series[s].first) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_plot(const std::string& csv_path, const std::string& svg_path) {
  const auto records = read_csv(csv_path);
  std::ofstream out(svg_path, std::ios::binary);
  if (!out) throw Error("cannot write '" + svg_path + "'");
  out << render_plot(records);
}

}  // namespace ib::harness

namespace ib::harness {

Dataset load_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    std::vector<double> vals;
    bool numeric = true;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        numeric = false;
        break;
      }
      vals.push_back(v);
    }
    if (!numeric) {
      if (header.empty() && rows.empty()) {
        header = cells;
        continue;
      }
      throw ParseError(lineno, "non-numeric value");
    }
    if (!rows.empty() && vals.size() != rows.front().size()) {
      throw ParseError(lineno, "inconsistent number of columns");
    }
    if (!header.empty() && vals.size() != header.size()) {
      throw ParseError(lineno, "row does not match the header");
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw EmptyData();
  Dataset d;
  const std::size_t cols = rows.front().size();
  if (cols == 1) {
    for (const auto& r : rows) d.y.push_back(r[0]);
    return d;
  }
  if (header.empty()) throw ParseError(1, "multi-column data needs a header");
  std::size_t ycol = cols;
  std::vector<std::size_t> xcols;
  for (std::size_t j = 0; j < cols; ++j) {
    if (header[j] == "y") ycol = j;
  }
  if (ycol == cols) throw ParseError(1, "no 'y' column");
  for (std::size_t k = 1; k < cols; ++k) {
    const std::string want = "x" + std::to_string(k);
    auto it = std::find(header.begin(), header.end(), want);
    if (it == header.end()) throw ParseError(1, "missing column '" + want + "'");
    xcols.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  d.k = xcols.size();
  for (const auto& r : rows) {
    d.y.push_back(r[ycol]);
    for (std::size_t c : xcols) d.x.push_back(r[c]);
    d.d.push_back(r[ycol] > 0.0 ? 1 : 0);
  }
  return d;
}

nlohmann::json run_ci(const ScenarioConfig& cfg, const Dataset& data) {
  ScenarioConfig c = cfg;
  c.n = data.n();
  std::shared_ptr<const Model> model;
  if (c.model == "student_t_censored") {
    if (data.k == 0) throw ConfigError("the regression model needs covariates x1..xk in the data");
    model = std::make_shared<CensoredStudentTModel>(Design{data.x, data.k}, c.nu_min, c.nu_max);
  } else {
    if (data.k != 0) throw ConfigError("model '" + c.model + "' takes a single column of data");
    model = make_model(c);
  }
  nlohmann::json out;
  out["model"] = c.model;
  out["n"] = c.n;
  out["B"] = c.B;
  out["seed"] = c.seed;
  out["results"] = nlohmann::json::array();
  for (const auto& m : c.methods) {
    auto est = build_estimator(m.estimator, c, model, 0);
    const BootstrapRun run = run_method(m, data, c, model, *est, 0, resolve_threads(c.threads));
    for (const auto& fs : c.functionals) {
      const Functional psi = make_functional(fs, *model);
      const IntervalEstimate iv = run.interval(psi);
      nlohmann::json r;
      r["method"] = m.label();
      r["functional"] = psi.label;
      r["point"] = iv.point();
      r["auxiliary_converged"] = run.pi_obs.converged;
      r["draws"] = run.draws.size();
      r["failed_draws"] = run.failed;
      r["delta_flagged"] = run.delta_flagged;
      r["warnings"] = run.warnings;
      for (double a : c.alphas) {
        const auto [lo, hi] = iv.two_sided(a);
        r["intervals"].push_back({{"alpha", a}, {"upper_one_sided", iv.upper(a)},
                                  {"two_sided", {lo, hi}}});
      }
      out["results"].push_back(r);
    }
  }
  return out;
}

}  // namespace ib::harness
