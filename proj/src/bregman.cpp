#include "exp4stab/bregman.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace exp4stab {
namespace {

void require_positive(const Eigen::VectorXd& v, const char* what) {
  if (v.size() == 0 || !(v.minCoeff() > 0.0))
    throw std::domain_error(std::string(what) + ": entries must be strictly positive");
}

}  // namespace

double mirror_phi(const Eigen::VectorXd& w) {
  require_positive(w, "mirror_phi");
  return (w.array() * w.array().log() - w.array()).sum();
}

Eigen::VectorXd grad_mirror_phi(const Eigen::VectorXd& w) {
  require_positive(w, "grad_mirror_phi");
  return w.array().log().matrix();
}

double mirror_phi_dual(const Eigen::VectorXd& y) { return y.array().exp().sum(); }

double bregman_div_phi(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw std::invalid_argument("bregman_div_phi: size mismatch");
  require_positive(u, "bregman_div_phi");
  require_positive(v, "bregman_div_phi");
  double total = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) total += u[i] * std::log(u[i] / v[i]) - u[i] + v[i];
  return total;
}

double bregman_div_phi_dual(const Eigen::VectorXd& y, const Eigen::VectorXd& y_prime) {
  if (y.size() != y_prime.size()) throw std::invalid_argument("bregman_div_phi_dual: size mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = std::exp(y_prime[i]);
    total += std::exp(y[i]) - e - e * (y[i] - y_prime[i]);
  }
  return total;
}

double local_dual_norm_sq(const Eigen::VectorXd& g, const Eigen::VectorXd& w) {
  if (g.size() != w.size()) throw std::invalid_argument("local_dual_norm_sq: size mismatch");
  return (w.array() * g.array().square()).sum();
}

}  // namespace exp4stab
