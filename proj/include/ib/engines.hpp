#pragma once

// Confidence intervals from simulated draws: the implicit bootstrap and the
// parametric baselines (percentile, studentized, BCa, Wald), plus the
// indirect-inference consistency correction.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ib/estimators.hpp"
#include "ib/matcher.hpp"
#include "ib/models.hpp"
#include "ib/rng.hpp"

namespace ib {

/// Draws of a scalar functional.
struct DistributionSample {
  std::vector<double> values;
  std::size_t requested = 0;   // B asked for
  std::size_t failed = 0;      // draws that could not be computed
  std::size_t nonconverged = 0;
  std::size_t delta_flagged = 0;
  double mean_delta = 0.0;

  std::size_t B() const noexcept { return values.size(); }
};

/// x_(k) with k = ceil(alpha B) of the sorted values; alpha B within 1e-9 of
/// an integer counts as that integer.
double empirical_quantile_sorted(std::span<const double> sorted, double alpha);
double empirical_quantile(const DistributionSample& sample, double alpha);

enum class CIMethod { Implicit, Percentile, Studentized, BCa, Asymptotic };
const char* method_name(CIMethod m) noexcept;
CIMethod parse_method(const std::string& name);

struct CIResult {
  CIMethod method = CIMethod::Implicit;
  double alpha = 0.95;
  double lower = -kInf;
  double upper = kInf;
  double point = 0.0;
  std::size_t B = 0;
  double delta_flag_fraction = 0.0;
  double sigma_hat = 0.0;  // 0 when the method has none
};

/// All intervals of one method for one functional.
class IntervalEstimate {
 public:
  IntervalEstimate(CIMethod method, std::vector<double> sorted, double point, double sigma,
                   double z0, double accel, double delta_flag_fraction);

  /// Upper endpoint of the one-sided level-alpha interval (-inf, U].
  double upper(double alpha) const;
  /// Equal-tailed two-sided interval at level gamma.
  std::pair<double, double> two_sided(double gamma) const;
  CIResult one_sided_ci(double alpha) const;
  CIResult two_sided_ci(double gamma) const;

  CIMethod method() const noexcept { return method_; }
  double point() const noexcept { return point_; }
  double sigma() const noexcept { return sigma_; }
  double z0() const noexcept { return z0_; }
  double acceleration() const noexcept { return accel_; }
  std::span<const double> sorted_values() const noexcept { return sorted_; }

 private:
  double level_quantile(double level) const;

  CIMethod method_;
  std::vector<double> sorted_;  // draws (implicit, percentile, BCa) or pivots (studentized)
  double point_;
  double sigma_;
  double z0_;
  double accel_;
  double delta_flag_fraction_;
};

/// Bootstrap output in parameter space; intervals for any functional are read
/// off it without re-simulating.
struct BootstrapRun {
  CIMethod method = CIMethod::Implicit;
  std::size_t n = 0;
  std::size_t requested = 0;
  std::vector<ParamVector> draws;           // successful draws only
  std::vector<std::uint8_t> draw_converged;
  std::vector<double> draw_delta;           // implicit only
  std::size_t failed = 0;
  std::size_t delta_flagged = 0;
  AuxEstimate pi_obs;                       // implicit: observed auxiliary estimate
  ParamVector theta_hat;                    // baselines: point estimate
  Eigen::MatrixXd cov_hat;                  // studentized / asymptotic
  std::vector<Eigen::MatrixXd> draw_cov;    // studentized
  std::vector<ParamVector> jackknife;       // BCa
  std::vector<std::string> warnings;

  DistributionSample sample(const Functional& psi) const;
  IntervalEstimate interval(const Functional& psi) const;
};

struct EngineConfig {
  std::size_t B = 1000;
  rng::MasterSeed master{0};
  std::uint64_t replicate = 0;
  MatchPath path = MatchPath::Switched;
  SolverConfig solver;
  /// Match once on the BOOT(0) block and start every draw from that point.
  bool pilot_init = false;
  std::size_t threads = 1;
  double max_fail_fraction = 0.5;
};

/// delta flag threshold 0.5 n^(-3/2) ||pi_obs||.
double delta_threshold(std::size_t n, const AuxEstimate& pi_obs);

/// Implicit bootstrap given the observed data.
BootstrapRun implicit_bootstrap(const Dataset& data, const Model& model, const Estimator& est,
                                const EngineConfig& cfg);
/// Same, conditional on the observed auxiliary estimate alone.
BootstrapRun implicit_bootstrap_from(const AuxEstimate& pi_obs, std::size_t n, const Model& model,
                                     const Estimator& est, const EngineConfig& cfg);

/// Percentile parametric bootstrap around theta_hat = clamp(est(data)).
BootstrapRun percentile_bootstrap(const Dataset& data, const Model& model, const Estimator& est,
                                  const EngineConfig& cfg);
/// Bootstrap-t with sigma from the inverse observed information per draw.
BootstrapRun studentized_bootstrap(const Dataset& data, const Model& model, const Estimator& est,
                                   const EngineConfig& cfg);
/// BCa: percentile draws plus leave-one-out estimates for the acceleration.
BootstrapRun bca_bootstrap(const Dataset& data, const Model& model, const Estimator& est,
                           const EngineConfig& cfg);

enum class CovarianceSource { Information, Bootstrap };
/// Wald intervals. With CovarianceSource::Bootstrap the covariance is the
/// sample covariance of `cov_draws` parametric bootstrap estimates.
BootstrapRun asymptotic_ci(const Dataset& data, const Model& model, const Estimator& est,
                           const EngineConfig& cfg,
                           CovarianceSource source = CovarianceSource::Information,
                           std::size_t cov_draws = 200);

/// Inverse of the observed information; throws SingularInformation.
Eigen::MatrixXd inverse_information(const Model& model, std::span<const double> theta,
                                    const Dataset& data);

/// Indirect-inference estimator: argmin over theta of
/// || est(data) - mean_h est(simulate(theta, W_h)) || with H blocks frozen
/// from INNER(replicate, 0, h). Deterministic in the data, so it can itself
/// serve as the estimator of a parametric bootstrap.
class IndirectInferenceEstimator final : public Estimator {
 public:
  IndirectInferenceEstimator(std::shared_ptr<const Model> model,
                             std::shared_ptr<const Estimator> base, std::size_t H,
                             rng::MasterSeed master, std::uint64_t replicate, std::size_t n,
                             SolverConfig cfg = {});
  std::string_view name() const override { return name_; }
  std::size_t dim() const override { return model_->dim(); }
  AuxEstimate estimate(const Dataset& data) const override;

 private:
  std::shared_ptr<const Model> model_;
  std::shared_ptr<const Estimator> base_;
  std::vector<RandomBlock> blocks_;
  SolverConfig cfg_;
  std::string name_;
};

struct IndirectInferenceResult {
  ParamVector theta;
  double delta = 0.0;
  int evals = 0;
  bool converged = false;
};

IndirectInferenceResult indirect_inference_correct(const Dataset& data, const Model& model,
                                                   const Estimator& est, std::size_t H,
                                                   rng::MasterSeed master, std::uint64_t replicate,
                                                   const SolverConfig& cfg);

}  // namespace ib
