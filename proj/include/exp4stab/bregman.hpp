#pragma once

#include <Eigen/Dense>

namespace exp4stab {

// Negative-entropy geometry on the positive orthant:
//   phi(w)      = sum w log w - w,   grad phi(w) = log w
//   phi*(y)     = sum exp(y),        grad phi*(y) = exp(y)
//   D_phi(u, v) = sum u log(u/v) - u + v

double mirror_phi(const Eigen::VectorXd& w);
Eigen::VectorXd grad_mirror_phi(const Eigen::VectorXd& w);
double mirror_phi_dual(const Eigen::VectorXd& y);

/// D_phi(u, v). Throws std::domain_error on nonpositive entries.
double bregman_div_phi(const Eigen::VectorXd& u, const Eigen::VectorXd& v);
/// D_{phi*}(y, y') = sum exp(y) - exp(y') - exp(y') (y - y').
double bregman_div_phi_dual(const Eigen::VectorXd& y, const Eigen::VectorXd& y_prime);

/// sum_k w_k g_k^2.
double local_dual_norm_sq(const Eigen::VectorXd& g, const Eigen::VectorXd& w);

}  // namespace exp4stab
