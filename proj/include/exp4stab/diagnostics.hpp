#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "exp4stab/environment.hpp"
#include "exp4stab/exp4.hpp"
#include "exp4stab/experts.hpp"
#include "exp4stab/projection.hpp"

namespace exp4stab {

/// T * sum_k w*_k Sigma_k.
Eigen::MatrixXd sigma_star_T(const PopulationMoments& moments, const WeightState& w_star, int horizon);

/// ||Sigma*^{-1} S - I||_op, evaluated as the spectral radius of the
/// symmetric matrix L^{-1} S L^{-T} - I where Sigma* = L L^T (a similarity
/// transform of Sigma*^{-1} S). Throws std::domain_error when Sigma* is not
/// positive definite.
double stability_error(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& sigma_star);

/// ||wbar_T - w*_T||_1.
double weight_drift(const Trajectory& traj, const WeightState& w_star);

/// Regret bound 8 sqrt(tK log K) + g log(Kt) sqrt(t) + 4 g^2 log^3(Kt) / (K^2 sqrt(t)),
/// g = sqrt(log t).
double regret_bound(int t, int num_experts);

/// Per-round expected expert losses g*(x)_k = sum_a pi_k(a|x) E[l | x, a].
Eigen::VectorXd expert_expected_losses(const RoundRecord& round, const LinearEnv& env);

struct RegretReport {
  std::vector<double> cumulative;   // Reg(t), t = 1..T
  std::vector<double> bound_curve;  // regret_bound(t, K)
  Eigen::VectorXd w_star_vertex;
};

/// Reg(t) = sum_{s <= t} <g*(x_s), w_s - w*> with w* the minimizing vertex of gbar.
RegretReport regret_trace(const Trajectory& traj, const Eigen::VectorXd& gbar, const LinearEnv& env,
                          const ExpertSet& experts);

/// Right side minus left side of the per-round mirror-descent inequality
///   eta <g~_t, w_t - y> <= D(y, w_t) - D(y, w_{t+1}) + eta^2 ||g^_t||^2_{w_t,*}
///                          + eta^2 lambda^2 ||grad R(w_t)||^2_{w_t,*}.
/// Nonnegative when the inequality holds.
double master_inequality_gap(const RoundRecord& round, const Eigen::VectorXd& w_next, const Eigen::VectorXd& y,
                             const Exp4Params& params);

/// Smallest gap over every round of `traj`.
double min_master_inequality_gap(const Trajectory& traj, const Eigen::VectorXd& y, const Exp4Params& params);

struct NormalitySummary {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double ks_distance = 0.0;
  int n_trials = 0;
};

/// Mean, sample variance and the exact one-sample Kolmogorov-Smirnov distance
/// to the standard normal CDF. Requires at least two values.
NormalitySummary normality_summary(std::span<const double> pivots);

/// One trial's interval outcome for one method at one level.
struct IntervalOutcome {
  double lower = 0.0;
  double upper = 0.0;
  bool contains = false;
};

/// What coverage_table needs from a trial: per alpha, the Wald and APS outcomes.
struct TrialIntervals {
  std::vector<IntervalOutcome> wald;  // indexed like `alphas`
  std::vector<IntervalOutcome> aps;
};

struct CoverageRow {
  std::string method;
  double alpha = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_width = 0.0;
  int n_trials = 0;
};

/// Per alpha and method: empirical coverage, binomial standard error
/// sqrt(p(1-p)/n) and mean interval width (upper - lower). Rows are ordered
/// method-major (wald, then aps), alphas in the given order.
std::vector<CoverageRow> coverage_table(std::span<const TrialIntervals> trials, std::span<const double> alphas);

}  // namespace exp4stab
