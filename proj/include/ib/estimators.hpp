#pragma once

// Initial (auxiliary) estimators. Several are deliberately inconsistent for
// the model they are applied to; the matcher only needs them to be
// deterministic functions of the data.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ib/models.hpp"

namespace ib {

struct AuxEstimate {
  std::vector<double> pi;
  bool converged = true;
  bool at_boundary = false;
  int iterations = 0;
};

class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual std::string_view name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual AuxEstimate estimate(const Dataset& data) const = 0;
  /// Same value as estimate(), computed by a local search from `hint` where
  /// the estimator allows it.
  virtual AuxEstimate estimate_near(const Dataset& data, std::span<const double> hint) const {
    (void)hint;
    return estimate(data);
  }

  /// Estimating equation: z(data, estimate(data)) = 0. Returns false when pi
  /// lies outside the equation's domain for this data.
  virtual bool has_z() const { return false; }
  virtual bool z(const Dataset& data, std::span<const double> pi, std::span<double> out) const;
};

/// pi = max_i y_i. z = y_(n) - pi.
class SampleMaxEstimator final : public Estimator {
 public:
  std::string_view name() const override { return "sample_max"; }
  std::size_t dim() const override { return 1; }
  AuxEstimate estimate(const Dataset& data) const override;
  bool has_z() const override { return true; }
  bool z(const Dataset& data, std::span<const double> pi, std::span<double> out) const override;
};

/// Closed-form Pareto MLE: mu = y_(1), alpha = n / sum log(y_i / y_(1)).
/// z = (y_(1) - mu, 1/alpha - mean log(y_i / mu)).
class ParetoMleEstimator final : public Estimator {
 public:
  std::string_view name() const override { return "pareto_mle"; }
  std::size_t dim() const override { return 2; }
  AuxEstimate estimate(const Dataset& data) const override;
  bool has_z() const override { return true; }
  bool z(const Dataset& data, std::span<const double> pi, std::span<double> out) const override;
};

/// pi = max(mean(y), 0).
class CensoredMeanEstimator final : public Estimator {
 public:
  std::string_view name() const override { return "censored_mean"; }
  std::size_t dim() const override { return 1; }
  AuxEstimate estimate(const Dataset& data) const override;
};

/// Lomax MLE; z is the mean score. The maximizer of the profile likelihood
/// over log b is searched on [ybar 1e-6, ybar 1e6]; an edge solution (the
/// likelihood increasing toward the exponential limit) is returned with
/// at_boundary and converged=false.
class LomaxMleEstimator final : public Estimator {
 public:
  std::string_view name() const override { return "lomax_mle"; }
  std::size_t dim() const override { return 2; }
  AuxEstimate estimate(const Dataset& data) const override;
  /// Newton on the score from `hint`, kept when it ends at a local maximum
  /// above the exponential limit b -> inf; estimate() otherwise.
  AuxEstimate estimate_near(const Dataset& data, std::span<const double> hint) const override;
  bool has_z() const override { return true; }
  bool z(const Dataset& data, std::span<const double> pi, std::span<double> out) const override;
};

/// Naive Lomax weighted MLE: root of sum_i w(y_i; theta) s(y_i; theta) = 0
/// with Huber weights w = min(1, c / sqrt(s' I(theta)^-1 s)) and no Fisher
/// consistency correction.
class LomaxNaiveWmleEstimator final : public Estimator {
 public:
  /// Default c = sqrt(chi2_{2, 0.95}).
  LomaxNaiveWmleEstimator();
  explicit LomaxNaiveWmleEstimator(double c);

  std::string_view name() const override { return "lomax_naive_wmle"; }
  std::size_t dim() const override { return 2; }
  AuxEstimate estimate(const Dataset& data) const override;
  bool has_z() const override { return true; }
  bool z(const Dataset& data, std::span<const double> pi, std::span<double> out) const override;

  double weight(double y, double b, double q) const;
  double cutoff() const noexcept { return c_; }

 private:
  double c_;
};

/// Student's t linear regression MLE over (beta, sigma, nu) that treats every
/// stored response as exact, censored zeros included ("naive"); with
/// drop_censored the censored rows are removed instead. z is the mean
/// gradient. nu is searched on [nu_min, nu_max] in log scale; an edge
/// solution is flagged.
class StudentTNaiveMleEstimator final : public Estimator {
 public:
  explicit StudentTNaiveMleEstimator(std::size_t covariates, bool drop_censored = false,
                                     double nu_min = 0.3, double nu_max = 100.0);
  std::string_view name() const override { return drop_censored_ ? "t_naive_mle_drop" : "t_naive_mle"; }
  std::size_t dim() const override { return k_ + 3; }
  AuxEstimate estimate(const Dataset& data) const override;
  bool has_z() const override { return true; }
  bool z(const Dataset& data, std::span<const double> pi, std::span<double> out) const override;

  double mean_log_likelihood(const Dataset& data, std::span<const double> theta) const;

 private:
  std::size_t k_;
  bool drop_censored_;
  double nu_min_, nu_max_;
};

/// Consistent MLE of the left-censored Student's t regression, maximizing the
/// censored likelihood directly.
class StudentTCensoredMleEstimator final : public Estimator {
 public:
  explicit StudentTCensoredMleEstimator(std::size_t covariates, double nu_min = 0.3,
                                        double nu_max = 100.0);
  std::string_view name() const override { return "t_censored_mle"; }
  std::size_t dim() const override { return k_ + 3; }
  AuxEstimate estimate(const Dataset& data) const override;

  double mean_log_likelihood(const Dataset& data, std::span<const double> theta) const;

 private:
  std::size_t k_;
  double nu_min_, nu_max_;
};

/// Three-parameter Frechet MLE (location m < y_(1), scale s, shape a);
/// z is the mean gradient in (m, s, a).
class FrechetMleEstimator final : public Estimator {
 public:
  std::string_view name() const override { return "frechet_mle"; }
  std::size_t dim() const override { return 3; }
  AuxEstimate estimate(const Dataset& data) const override;
  bool has_z() const override { return true; }
  bool z(const Dataset& data, std::span<const double> pi, std::span<double> out) const override;

  static double mean_log_likelihood(const Dataset& data, double m, double s, double a);
};

/// Looks up an estimator by name for a model ("sample_max", "pareto_mle",
/// "censored_mean", "lomax_mle", "lomax_naive_wmle", "t_naive_mle",
/// "t_naive_mle_drop", "t_censored_mle", "frechet_mle").
std::shared_ptr<const Estimator> make_estimator(const std::string& name, const Model& model);

}  // namespace ib
