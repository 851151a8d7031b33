#pragma once

#include <Eigen/Dense>

namespace exp4stab {

/// Mixture weights on the eps-floored simplex: sum w = 1, min w >= eps.
class WeightState {
 public:
  /// Validates membership (tolerance 1e-12 on both constraints).
  WeightState(Eigen::VectorXd w, double eps_floor);

  static WeightState uniform(int num_experts, double eps_floor);

  const Eigen::VectorXd& w() const { return w_; }
  double eps_floor() const { return eps_floor_; }
  int size() const { return static_cast<int>(w_.size()); }

 private:
  Eigen::VectorXd w_;
  double eps_floor_;
};

/// Bregman (KL) projection of a positive vector onto the eps-floored simplex.
///
/// The minimizer of D_phi(w, w_plus) over the constraint set has the
/// water-filling form w_k = max(eps, gamma * w_plus_k), where gamma > 0 solves
/// sum_k max(eps, gamma * w_plus_k) = 1. Sorting the entries makes the clamped
/// set a suffix, so each of the K candidate suffixes is checked in O(1) after
/// a prefix sum; bisection on gamma covers the case where rounding rejects
/// every candidate. The result is invariant to positive rescaling of w_plus.
///
/// Throws std::domain_error on a nonpositive or non-finite entry and
/// std::invalid_argument when K * eps > 1.
WeightState kl_project_eps_simplex(const Eigen::VectorXd& w_plus, double eps_floor);

}  // namespace exp4stab
