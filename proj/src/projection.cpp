#include "exp4stab/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace exp4stab {
namespace {

constexpr double kTol = 1e-12;

void check_floor(int k, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps floor must be positive");
  if (static_cast<double>(k) * eps > 1.0 + kTol)
    throw std::invalid_argument("infeasible eps floor: K * eps exceeds 1");
}

Eigen::VectorXd bisect(const Eigen::VectorXd& v, double eps) {
  double lo = 0.0;
  double hi = 1.0 / v.maxCoeff();
  auto total = [&](double gamma) { return (gamma * v.array()).max(eps).sum(); };
  while (total(hi) < 1.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (total(mid) < 1.0 ? lo : hi) = mid;
  }
  Eigen::VectorXd w = (hi * v.array()).max(eps).matrix();
  // Put the residual on the free coordinates.
  double free_mass = 0.0;
  int clamped = 0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (hi * v[k] > eps) free_mass += w[k];
    else ++clamped;
  }
  if (free_mass > 0.0) {
    const double scale = (1.0 - clamped * eps) / free_mass;
    for (Eigen::Index k = 0; k < w.size(); ++k)
      if (hi * v[k] > eps) w[k] *= scale;
  }
  return w;
}

}  // namespace

WeightState::WeightState(Eigen::VectorXd w, double eps_floor) : w_(std::move(w)), eps_floor_(eps_floor) {
  if (w_.size() == 0) throw std::invalid_argument("WeightState: empty weight vector");
  check_floor(static_cast<int>(w_.size()), eps_floor_);
  if (std::abs(w_.sum() - 1.0) > kTol) throw std::invalid_argument("WeightState: weights do not sum to 1");
  if (w_.minCoeff() < eps_floor_ - kTol) throw std::invalid_argument("WeightState: weight below eps floor");
}

WeightState WeightState::uniform(int num_experts, double eps_floor) {
  if (num_experts < 1) throw std::invalid_argument("WeightState: need at least one expert");
  return WeightState(Eigen::VectorXd::Constant(num_experts, 1.0 / num_experts), eps_floor);
}

WeightState kl_project_eps_simplex(const Eigen::VectorXd& w_plus, double eps_floor) {
  const int K = static_cast<int>(w_plus.size());
  if (K == 0) throw std::invalid_argument("kl_project_eps_simplex: empty input");
  for (Eigen::Index k = 0; k < K; ++k)
    if (!(w_plus[k] > 0.0) || !std::isfinite(w_plus[k]))
      throw std::domain_error("kl_project_eps_simplex: entries must be positive and finite");
  check_floor(K, eps_floor);

  const double free_budget_all = 1.0 - K * eps_floor;
  if (free_budget_all <= kTol) {
    return WeightState(Eigen::VectorXd::Constant(K, 1.0 / K), eps_floor);
  }

  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w_plus[a] > w_plus[b]; });

  std::vector<double> prefix(static_cast<std::size_t>(K) + 1, 0.0);
  for (int i = 0; i < K; ++i) prefix[i + 1] = prefix[i] + w_plus[order[i]];

  // m = number of free (unclamped) coordinates, the m largest entries.
  for (int m = K; m >= 1; --m) {
    const double gamma = (1.0 - (K - m) * eps_floor) / prefix[m];
    const bool smallest_free_ok = gamma * w_plus[order[m - 1]] >= eps_floor;
    const bool largest_clamped_ok = (m == K) || gamma * w_plus[order[m]] <= eps_floor;
    if (smallest_free_ok && largest_clamped_ok) {
      Eigen::VectorXd w(K);
      for (int i = 0; i < K; ++i) {
        const int k = order[i];
        w[k] = i < m ? gamma * w_plus[k] : eps_floor;
      }
      return WeightState(std::move(w), eps_floor);
    }
  }
  return WeightState(bisect(w_plus, eps_floor), eps_floor);
}

}  // namespace exp4stab
