#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "exp4stab/environment.hpp"

namespace exp4stab {

/// Raised when the Gram matrix is (numerically) singular; the ridge
/// estimator is the remedy.
class SingularDesign : public std::runtime_error {
 public:
  explicit SingularDesign(const std::string& what) : std::runtime_error(what) {}
};

struct Observation {
  Eigen::VectorXd z;
  double loss = 0.0;
};

/// Running S = sum z z^T and b = sum z l, keeping the observations for
/// residual-based variance estimates.
class GramAccumulator {
 public:
  explicit GramAccumulator(int dim);

  void accumulate(const Eigen::VectorXd& z, double loss);
  /// Same result as the dense overload; touches only the nonzero block.
  void accumulate(const FeatureVector& f, double loss);

  int dim() const { return static_cast<int>(b_.size()); }
  long n() const { return static_cast<long>(observations_.size()); }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::VectorXd& moment() const { return b_; }
  std::span<const Observation> observations() const { return observations_; }

 private:
  Eigen::MatrixXd gram_;
  Eigen::VectorXd b_;
  std::vector<Observation> observations_;
};

enum class EstimatorKind { kOls, kRidge };

/// Residual normalization for sigma_hat: 1/n (default) or 1/(n - d).
enum class SigmaNormalization { kN, kNMinusD };

struct EstimateBundle {
  Eigen::VectorXd beta_hat;
  double sigma_hat = 0.0;
  EstimatorKind kind = EstimatorKind::kOls;
  double lambda_rid = 0.0;
};

/// Cholesky factor of a symmetric positive-definite design matrix. Quadratic
/// forms a^T M^{-1} a go through one triangular solve, never an inverse.
class DesignSolver {
 public:
  /// Throws SingularDesign unless lambda_min(m) > 1e-10 * trace(m) / d.
  explicit DesignSolver(const Eigen::MatrixXd& m);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  double inverse_quadratic_form(const Eigen::VectorXd& a) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// S + lambda I for the ridge kind, S otherwise.
Eigen::MatrixXd design_matrix(const GramAccumulator& acc, const EstimateBundle& bundle);

/// sqrt(sum (l_t - <z_t, beta>)^2 / n), or / (n - d) on request.
double sigma_hat(std::span<const Observation> rounds, const Eigen::VectorXd& beta_hat,
                 SigmaNormalization norm = SigmaNormalization::kN);

EstimateBundle ols(const GramAccumulator& acc, SigmaNormalization norm = SigmaNormalization::kN);
EstimateBundle ridge(const GramAccumulator& acc, double lambda_rid,
                     SigmaNormalization norm = SigmaNormalization::kN);

struct Interval {
  double center = 0.0;
  double half_width = 0.0;
  double alpha = 0.0;

  double lower() const { return center - half_width; }
  double upper() const { return center + half_width; }
  double width() const { return 2.0 * half_width; }
  bool contains(double value) const { return lower() <= value && value <= upper(); }
};

/// center a.beta_hat, half-width z_{1-alpha/2} sigma_hat sqrt(a^T M^{-1} a)
/// with M = S (OLS) or S + lambda_rid I (ridge).
Interval wald_interval(const Eigen::VectorXd& a, const EstimateBundle& bundle, const GramAccumulator& acc,
                       double alpha);
Interval wald_interval_from(double center, double sigma, double inverse_quad, double alpha);

/// sqrt(d log(T L / lambda) + log(1/alpha)) + sqrt(lambda) S.
double rt_factor(double horizon, double feature_bound, double lambda_reg, double alpha, int dim,
                 double param_bound);

/// Self-normalized interval: center a.beta_ridge(lambda), half-width
/// R_T sqrt(a^T V^{-1} a), V = lambda I + S. `ridge_bundle` must be the ridge
/// fit with the same lambda.
Interval aps_interval(const Eigen::VectorXd& a, const EstimateBundle& ridge_bundle, const GramAccumulator& acc,
                      double lambda_reg, double alpha, double feature_bound, double param_bound);

/// a^T(beta_hat - beta*) / (sigma_hat sqrt(a^T M^{-1} a)).
double standardized_stat(const Eigen::VectorXd& a, const EstimateBundle& bundle, const GramAccumulator& acc,
                         const Eigen::VectorXd& beta_star);

}  // namespace exp4stab
