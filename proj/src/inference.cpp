#include "exp4stab/inference.hpp"

#include <cmath>

#include "exp4stab/normal.hpp"

namespace exp4stab {

GramAccumulator::GramAccumulator(int dim)
    : gram_(Eigen::MatrixXd::Zero(dim, dim)), b_(Eigen::VectorXd::Zero(dim)) {
  if (dim < 1) throw std::invalid_argument("GramAccumulator: dimension must be positive");
}

void GramAccumulator::accumulate(const Eigen::VectorXd& z, double loss) {
  if (z.size() != dim()) throw std::invalid_argument("GramAccumulator: dimension mismatch");
  gram_.noalias() += z * z.transpose();
  b_ += z * loss;
  observations_.push_back(Observation{z, loss});
}

void GramAccumulator::accumulate(const FeatureVector& f, double loss) {
  if (f.z.size() != dim()) throw std::invalid_argument("GramAccumulator: dimension mismatch");
  if (f.width <= 0) {
    accumulate(f.z, loss);
    return;
  }
  const Eigen::Index off = static_cast<Eigen::Index>(f.block) * f.width;
  const auto x = f.z.segment(off, f.width);
  gram_.block(off, off, f.width, f.width).noalias() += x * x.transpose();
  b_.segment(off, f.width) += x * loss;
  observations_.push_back(Observation{f.z, loss});
}

DesignSolver::DesignSolver(const Eigen::MatrixXd& m) {
  const Eigen::Index d = m.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  const double tol = 1e-10 * m.trace() / static_cast<double>(d);
  if (!(min_eig > tol) || !(m.trace() > 0.0))
    throw SingularDesign("design matrix is singular (lambda_min = " + std::to_string(min_eig) +
                         "); use the ridge estimator");
  llt_.compute(m);
  if (llt_.info() != Eigen::Success) throw SingularDesign("Cholesky factorization failed; use the ridge estimator");
}

Eigen::VectorXd DesignSolver::solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }

double DesignSolver::inverse_quadratic_form(const Eigen::VectorXd& a) const {
  const Eigen::VectorXd y = llt_.matrixL().solve(a);
  return y.squaredNorm();
}

Eigen::MatrixXd design_matrix(const GramAccumulator& acc, const EstimateBundle& bundle) {
  Eigen::MatrixXd m = acc.gram();
  if (bundle.kind == EstimatorKind::kRidge) m.diagonal().array() += bundle.lambda_rid;
  return m;
}

double sigma_hat(std::span<const Observation> rounds, const Eigen::VectorXd& beta_hat, SigmaNormalization norm) {
  if (rounds.empty()) throw std::invalid_argument("sigma_hat: need at least one observation");
  double rss = 0.0;
  for (const auto& obs : rounds) {
    const double r = obs.loss - obs.z.dot(beta_hat);
    rss += r * r;
  }
  double denom = static_cast<double>(rounds.size());
  if (norm == SigmaNormalization::kNMinusD) {
    denom -= static_cast<double>(beta_hat.size());
    if (denom <= 0.0) throw std::invalid_argument("sigma_hat: n - d must be positive");
  }
  return std::sqrt(rss / denom);
}

EstimateBundle ols(const GramAccumulator& acc, SigmaNormalization norm) {
  if (acc.n() < acc.dim())
    throw SingularDesign("OLS needs at least d = " + std::to_string(acc.dim()) + " rounds, got " +
                         std::to_string(acc.n()) + "; use the ridge estimator");
  const DesignSolver solver(acc.gram());
  EstimateBundle out;
  out.kind = EstimatorKind::kOls;
  out.beta_hat = solver.solve(acc.moment());
  out.sigma_hat = sigma_hat(acc.observations(), out.beta_hat, norm);
  return out;
}

EstimateBundle ridge(const GramAccumulator& acc, double lambda_rid, SigmaNormalization norm) {
  if (!(lambda_rid > 0.0)) throw std::invalid_argument("ridge: lambda_rid must be positive");
  EstimateBundle out;
  out.kind = EstimatorKind::kRidge;
  out.lambda_rid = lambda_rid;
  Eigen::MatrixXd m = acc.gram();
  m.diagonal().array() += lambda_rid;
  out.beta_hat = m.llt().solve(acc.moment());
  out.sigma_hat = acc.n() > 0 ? sigma_hat(acc.observations(), out.beta_hat, norm) : 0.0;
  return out;
}

Interval wald_interval_from(double center, double sigma, double inverse_quad, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  return Interval{center, two_sided_critical(alpha) * sigma * std::sqrt(inverse_quad), alpha};
}

Interval wald_interval(const Eigen::VectorXd& a, const EstimateBundle& bundle, const GramAccumulator& acc,
                       double alpha) {
  const DesignSolver solver(design_matrix(acc, bundle));
  return wald_interval_from(a.dot(bundle.beta_hat), bundle.sigma_hat, solver.inverse_quadratic_form(a), alpha);
}

double rt_factor(double horizon, double feature_bound, double lambda_reg, double alpha, int dim,
                 double param_bound) {
  if (!(horizon > 0.0 && feature_bound > 0.0 && lambda_reg > 0.0))
    throw std::invalid_argument("rt_factor: T, L and lambda must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("rt_factor: alpha must lie in (0, 1]");
  const double inside = dim * std::log(horizon * feature_bound / lambda_reg) + std::log(1.0 / alpha);
  return std::sqrt(std::max(inside, 0.0)) + std::sqrt(lambda_reg) * param_bound;
}

Interval aps_interval(const Eigen::VectorXd& a, const EstimateBundle& ridge_bundle, const GramAccumulator& acc,
                      double lambda_reg, double alpha, double feature_bound, double param_bound) {
  if (ridge_bundle.kind != EstimatorKind::kRidge || ridge_bundle.lambda_rid != lambda_reg)
    throw std::invalid_argument("aps_interval: bundle must be the ridge fit with the same lambda");
  Eigen::MatrixXd v = acc.gram();
  v.diagonal().array() += lambda_reg;
  const DesignSolver solver(v);
  const double r = rt_factor(static_cast<double>(acc.n()), feature_bound, lambda_reg, alpha, acc.dim(), param_bound);
  return Interval{a.dot(ridge_bundle.beta_hat), r * std::sqrt(solver.inverse_quadratic_form(a)), alpha};
}

double standardized_stat(const Eigen::VectorXd& a, const EstimateBundle& bundle, const GramAccumulator& acc,
                         const Eigen::VectorXd& beta_star) {
  if (!(bundle.sigma_hat > 0.0)) throw std::domain_error("standardized_stat: sigma_hat must be positive");
  const DesignSolver solver(design_matrix(acc, bundle));
  return a.dot(bundle.beta_hat - beta_star) / (bundle.sigma_hat * std::sqrt(solver.inverse_quadratic_form(a)));
}

}  // namespace exp4stab
