#pragma once

// Parametric data-generating processes Y(theta) = F(theta, W). Each model is a
// stateless, thread-shareable function of a parameter point and a block of
// canonical uniforms.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ib/rng.hpp"

namespace ib {

using rng::RandomBlock;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Per-coordinate bounds; infinite bounds allowed. Bounds are open unless
/// `closed_lower` marks a coordinate whose lower bound is attainable.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> closed_lower;

  std::size_t dim() const noexcept { return lower.size(); }
  bool contains(std::span<const double> theta) const noexcept;
  std::vector<double> center() const;
  std::vector<double> clamp(std::span<const double> theta) const;
};

/// A point of the parameter space.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(std::initializer_list<double> v) : values_(v) {}
  explicit ParamVector(std::vector<double> v) : values_(std::move(v)) {}
  explicit ParamVector(std::span<const double> v) : values_(v.begin(), v.end()) {}

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& vec() const noexcept { return values_; }
  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
};

/// n observations; regression models also carry a row-major n x k covariate
/// matrix and censoring indicators (d_i = 1 iff the stored response is > 0).
struct Dataset {
  std::vector<double> y;
  std::vector<double> x;
  std::size_t k = 0;
  std::vector<std::uint8_t> d;

  std::size_t n() const noexcept { return y.size(); }
  std::span<const double> row(std::size_t i) const noexcept { return {x.data() + i * k, k}; }
};

/// Scalar functional psi of the parameter, optionally with its gradient.
struct Functional {
  std::string label;
  std::function<double(std::span<const double>)> psi;
  std::function<std::vector<double>(std::span<const double>)> gradient;

  double operator()(const ParamVector& theta) const { return psi(theta.values()); }
  /// Analytic gradient when provided, central differences otherwise.
  std::vector<double> grad(std::span<const double> theta) const;
};

Functional coordinate_functional(std::size_t k, std::string label);
/// Lomax survival function at y: (1 + y/b)^(-q) for theta = (b, q).
Functional lomax_survival_functional(double y);

class Model {
 public:
  virtual ~Model() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t noise_dim(std::size_t n) const = 0;
  /// Inverse of noise_dim.
  virtual std::size_t sample_size(std::size_t m) const = 0;
  virtual const Box& box() const = 0;
  /// Writes F(theta, w) into `out`, reusing its storage.
  virtual void simulate_into(const ParamVector& theta, const RandomBlock& w,
                             Dataset& out) const = 0;

  Dataset simulate(const ParamVector& theta, const RandomBlock& w) const {
    Dataset d;
    simulate_into(theta, w, d);
    return d;
  }

  /// Bijection between the feasible set and R^p used by the optimizers.
  /// Defaults derive from the box: log for one-sided bounds, scaled logistic
  /// for two-sided bounds, identity for unbounded coordinates.
  virtual std::vector<double> to_unconstrained(std::span<const double> theta) const;
  virtual std::vector<double> from_unconstrained(std::span<const double> z) const;
  virtual bool feasible(std::span<const double> theta) const { return box().contains(theta); }

  /// Starting point derived from an auxiliary estimate. Default: componentwise
  /// clamp into the box when dimensions agree, box center otherwise.
  virtual std::vector<double> initial_from_aux(std::span<const double> pi) const;

  virtual bool has_log_likelihood() const { return false; }
  virtual double log_likelihood(std::span<const double> theta, const Dataset& data) const;
  /// Observed information (negative Hessian of the total log-likelihood).
  /// Default: central finite differences with h = eps^(1/3) (1 + |theta_j|).
  virtual Eigen::MatrixXd observed_information(std::span<const double> theta,
                                               const Dataset& data) const;

 protected:
  void require_inside(std::span<const double> theta) const;
};

/// Y_i = theta U_i.
class UniformScaleModel final : public Model {
 public:
  UniformScaleModel();
  std::string_view name() const override { return "uniform"; }
  std::size_t dim() const override { return 1; }
  std::size_t noise_dim(std::size_t n) const override { return n; }
  std::size_t sample_size(std::size_t m) const override { return m; }
  const Box& box() const override { return box_; }
  void simulate_into(const ParamVector& theta, const RandomBlock& w, Dataset& out) const override;

 private:
  Box box_;
};

/// Pareto(mu, alpha): y_i = mu (1 - u_i)^(-1/alpha).
class ParetoModel final : public Model {
 public:
  ParetoModel();
  std::string_view name() const override { return "pareto"; }
  std::size_t dim() const override { return 2; }
  std::size_t noise_dim(std::size_t n) const override { return n; }
  std::size_t sample_size(std::size_t m) const override { return m; }
  const Box& box() const override { return box_; }
  void simulate_into(const ParamVector& theta, const RandomBlock& w, Dataset& out) const override;

 private:
  Box box_;
};

/// Lomax(b, q): y_i = b ((1 - u_i)^(-1/q) - 1).
class LomaxModel final : public Model {
 public:
  LomaxModel();
  std::string_view name() const override { return "lomax"; }
  std::size_t dim() const override { return 2; }
  std::size_t noise_dim(std::size_t n) const override { return n; }
  std::size_t sample_size(std::size_t m) const override { return m; }
  const Box& box() const override { return box_; }
  void simulate_into(const ParamVector& theta, const RandomBlock& w, Dataset& out) const override;

  bool has_log_likelihood() const override { return true; }
  double log_likelihood(std::span<const double> theta, const Dataset& data) const override;

  /// Per-observation score (s_b, s_q).
  static void score(double y, double b, double q, double& sb, double& sq) noexcept;
  /// Per-observation Fisher information.
  static Eigen::Matrix2d fisher_information(double b, double q) noexcept;

 private:
  Box box_;
};

/// N(theta, 1) with theta >= 0: y_i = theta + Phi^-1(u_i).
class NormalMeanModel final : public Model {
 public:
  NormalMeanModel();
  std::string_view name() const override { return "andrews"; }
  std::size_t dim() const override { return 1; }
  std::size_t noise_dim(std::size_t n) const override { return n; }
  std::size_t sample_size(std::size_t m) const override { return m; }
  const Box& box() const override { return box_; }
  void simulate_into(const ParamVector& theta, const RandomBlock& w, Dataset& out) const override;

  bool has_log_likelihood() const override { return true; }
  double log_likelihood(std::span<const double> theta, const Dataset& data) const override;
  /// Exactly n: the log-likelihood is quadratic.
  Eigen::MatrixXd observed_information(std::span<const double> theta,
                                       const Dataset& data) const override;

 private:
  Box box_;
};

/// Fixed covariate design, row-major n x k.
struct Design {
  std::vector<double> x;
  std::size_t k = 0;
  std::size_t rows() const noexcept { return k == 0 ? 0 : x.size() / k; }
  Design head(std::size_t n) const;
};

/// Reads a headered CSV of covariates (header x1,...,xk).
Design load_design_csv(const std::string& path);

/// Student's t linear regression left-censored at 0:
/// y_i = max(x_i' beta + sigma T_nu^-1(u_i), 0), theta = (beta_0..beta_k, sigma, nu).
/// The intercept column is implicit.
class CensoredStudentTModel final : public Model {
 public:
  explicit CensoredStudentTModel(Design design, double nu_min = 0.3, double nu_max = 100.0);
  std::string_view name() const override { return "student_t_censored"; }
  std::size_t dim() const override { return design_.k + 3; }
  std::size_t noise_dim(std::size_t n) const override { return n; }
  std::size_t sample_size(std::size_t m) const override { return m; }
  const Box& box() const override { return box_; }
  void simulate_into(const ParamVector& theta, const RandomBlock& w, Dataset& out) const override;

  /// Censored likelihood: censored rows contribute log(1 - S_nu(x'beta/sigma)).
  bool has_log_likelihood() const override { return true; }
  double log_likelihood(std::span<const double> theta, const Dataset& data) const override;

  const Design& design() const noexcept { return design_; }
  std::size_t covariates() const noexcept { return design_.k; }

 private:
  Design design_;
  Box box_;
};

/// M/G/1 queue observed through inter-departure times. Service ~ U[theta1,
/// theta2], inter-arrival ~ Exp(theta3); noise is n service uniforms followed
/// by n arrival uniforms.
class MG1QueueModel final : public Model {
 public:
  MG1QueueModel();
  std::string_view name() const override { return "mg1"; }
  std::size_t dim() const override { return 3; }
  std::size_t noise_dim(std::size_t n) const override { return 2 * n; }
  std::size_t sample_size(std::size_t m) const override { return m / 2; }
  const Box& box() const override { return box_; }
  void simulate_into(const ParamVector& theta, const RandomBlock& w, Dataset& out) const override;

  /// (log theta1, log(theta2 - theta1), log theta3).
  std::vector<double> to_unconstrained(std::span<const double> theta) const override;
  std::vector<double> from_unconstrained(std::span<const double> z) const override;
  bool feasible(std::span<const double> theta) const override;
  /// Queue parameter guess from the 0.005 and 0.5 quantiles of a
  /// location-scale-shape Frechet fit.
  std::vector<double> initial_from_aux(std::span<const double> pi) const override;

 private:
  Box box_;
};

}  // namespace ib
