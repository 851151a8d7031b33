#pragma once

#include <Eigen/Dense>

#include <vector>

#include "exp4stab/environment.hpp"
#include "exp4stab/experts.hpp"
#include "exp4stab/projection.hpp"
#include "exp4stab/rng.hpp"

namespace exp4stab {

enum class UpdateRule {
  /// w+ = w * exp(-eta * (g_hat + lambda * grad R(w))); the form the
  /// regret and stability analysis is carried out for.
  kAnalysis,
  /// w+ = w * exp(-eta * g_hat - lambda * grad R(w)), penalty not scaled by eta.
  kAlgorithm1,
};

/// Which count sits in the denominator of the default step size.
enum class EtaDenominator { kActions, kExperts };

struct Exp4Params {
  double eta = 0.0;
  double lambda_pen = 0.0;
  double eps_floor = 0.0;
  int num_experts = 1;
  int horizon = 0;
  double gamma = 0.0;
  UpdateRule update_rule = UpdateRule::kAnalysis;

  /// eta = sqrt(log K / (n T)) with n = A or K, eps = 1/(K T),
  /// gamma_T = sqrt(log T), lambda = gamma_T / sqrt(T).
  static Exp4Params defaults(int num_experts, int num_actions, int horizon,
                             EtaDenominator denominator = EtaDenominator::kActions);

  /// Throws std::invalid_argument when the parameters are inconsistent.
  void validate() const;
};

/// g_hat_k = loss * pi_k(a) / Q(a). Throws std::domain_error if q_at_a <= 0.
Eigen::VectorXd ips_estimate(double loss, const Eigen::VectorXd& pi_at_a, double q_at_a);

/// grad R(w)_k = log w_k + log(1/eps).
Eigen::VectorXd grad_penalty(const Eigen::VectorXd& w, double eps_floor);

/// Penalty R(w) = sum w_k (log w_k + log(1/eps) - 1).
double penalty(const Eigen::VectorXd& w, double eps_floor);

/// Unprojected multiplicative-weights step. The additive constant log(1/eps)
/// that appears in the literal algorithm statement is dropped: the projection
/// that follows is invariant to positive rescaling. Throws
/// std::overflow_error if any exponent leaves [-700, 700].
Eigen::VectorXd multiplicative_step(const Eigen::VectorXd& w, const Eigen::VectorXd& g_hat,
                                    const Exp4Params& params);

/// argmin over the eps-simplex of <gbar, w> + lambda R(w), i.e.
/// w_k = max(eps, gamma * exp(-gbar_k / lambda)). Requires lambda > 0.
WeightState penalized_opt_weight(const Eigen::VectorXd& gbar, const Exp4Params& params);

/// Minimizing vertex of gbar, lowest index on ties.
int best_vertex(const Eigen::VectorXd& gbar);

/// Vertex e_j smoothed into the eps-simplex: 1 - (K-1) eps at j, eps elsewhere.
Eigen::VectorXd smoothed_vertex(int num_experts, int vertex, double eps_floor);

struct RoundRecord {
  Context x;
  Eigen::MatrixXd per_expert_probs;  // K x A
  Eigen::VectorXd q;                 // A
  int action = 0;
  double loss = 0.0;
  FeatureVector z;
  WeightState w_before;
  Eigen::VectorXd g_hat;
  Eigen::VectorXd g_tilde;
};

struct Trajectory {
  std::vector<RoundRecord> rounds;
  WeightState final_weight;
  Eigen::VectorXd weight_sum;

  int size() const { return static_cast<int>(rounds.size()); }
  /// (1/T) sum_t w_t. Throws std::logic_error on an empty trajectory.
  Eigen::VectorXd mean_weight() const;
};

/// Runs one episode of penalized EXP4 for params.horizon rounds.
///
/// Two child generators are split off `rng` up front: one draws all contexts
/// (so expert probabilities can be evaluated in one batch), the other drives
/// action sampling and loss noise.
Trajectory run_episode(const LinearEnv& env, const ExpertSet& experts, const Exp4Params& params,
                       Rng& rng);

}  // namespace exp4stab
