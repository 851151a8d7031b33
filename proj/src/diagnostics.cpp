#include "exp4stab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "exp4stab/bregman.hpp"
#include "exp4stab/normal.hpp"

namespace exp4stab {

Eigen::MatrixXd sigma_star_T(const PopulationMoments& moments, const WeightState& w_star, int horizon) {
  if (static_cast<int>(moments.sigma.size()) != w_star.size())
    throw std::invalid_argument("sigma_star_T: expert count mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(moments.sigma.front().rows(), moments.sigma.front().cols());
  for (int k = 0; k < w_star.size(); ++k) out += w_star.w()[k] * moments.sigma[static_cast<std::size_t>(k)];
  return static_cast<double>(horizon) * out;
}

double stability_error(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& sigma_star) {
  if (gram.rows() != sigma_star.rows()) throw std::invalid_argument("stability_error: dimension mismatch");
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma_star);
  if (llt.info() != Eigen::Success) throw std::domain_error("stability_error: Sigma*_T is not positive definite");
  const auto L = llt.matrixL();
  Eigen::MatrixXd tmp = L.solve(gram);                                   // L^{-1} S
  Eigen::MatrixXd b = L.solve(tmp.transpose()).transpose();              // L^{-1} S L^{-T}
  b = 0.5 * (b + b.transpose()).eval();
  b.diagonal().array() -= 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

double weight_drift(const Trajectory& traj, const WeightState& w_star) {
  return (traj.mean_weight() - w_star.w()).lpNorm<1>();
}

double regret_bound(int t, int num_experts) {
  if (t < 1) throw std::invalid_argument("regret_bound: t must be >= 1");
  const double T = t;
  const double K = num_experts;
  const double g2 = std::log(T);
  const double g = std::sqrt(g2);
  const double lkt = std::log(K * T);
  return 8.0 * std::sqrt(T * K * std::log(K)) + g * lkt * std::sqrt(T) +
         4.0 * g2 * lkt * lkt * lkt / (K * K * std::sqrt(T));
}

Eigen::VectorXd expert_expected_losses(const RoundRecord& round, const LinearEnv& env) {
  Eigen::VectorXd losses(env.num_actions());
  for (int a = 0; a < env.num_actions(); ++a) losses[a] = env.expected_loss(round.x, a);
  return round.per_expert_probs * losses;
}

RegretReport regret_trace(const Trajectory& traj, const Eigen::VectorXd& gbar, const LinearEnv& env,
                          const ExpertSet& experts) {
  if (traj.rounds.empty()) throw std::invalid_argument("regret_trace: empty trajectory");
  const int K = experts.size();
  RegretReport report;
  report.w_star_vertex = Eigen::VectorXd::Zero(K);
  report.w_star_vertex[best_vertex(gbar)] = 1.0;
  report.cumulative.reserve(traj.rounds.size());
  report.bound_curve.reserve(traj.rounds.size());
  double total = 0.0;
  int t = 0;
  for (const auto& round : traj.rounds) {
    total += expert_expected_losses(round, env).dot(round.w_before.w() - report.w_star_vertex);
    report.cumulative.push_back(total);
    report.bound_curve.push_back(regret_bound(++t, K));
  }
  return report;
}

NormalitySummary normality_summary(std::span<const double> pivots) {
  const std::size_t n = pivots.size();
  if (n < 2) throw std::invalid_argument("normality_summary: need at least two values");
  NormalitySummary s;
  s.n_trials = static_cast<int>(n);
  double sum = 0.0;
  for (double v : pivots) sum += v;
  s.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : pivots) ss += (v - s.mean) * (v - s.mean);
  s.variance = ss / static_cast<double>(n - 1);

  std::vector<double> sorted(pivots.begin(), pivots.end());
  std::sort(sorted.begin(), sorted.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = normal_cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  s.ks_distance = std::clamp(d, 0.0, 1.0);
  return s;
}

std::vector<CoverageRow> coverage_table(std::span<const TrialIntervals> trials, std::span<const double> alphas) {
  if (trials.empty()) throw std::invalid_argument("coverage_table: need at least one trial");
  std::vector<CoverageRow> rows;
  const double n = static_cast<double>(trials.size());
  for (const char* method : {"wald", "aps"}) {
    const bool wald = method[0] == 'w';
    for (std::size_t j = 0; j < alphas.size(); ++j) {
      double hits = 0.0;
      double width = 0.0;
      for (const auto& trial : trials) {
        const auto& outcome = wald ? trial.wald.at(j) : trial.aps.at(j);
        hits += outcome.contains ? 1.0 : 0.0;
        width += outcome.upper - outcome.lower;
      }
      const double p = hits / n;
      rows.push_back(CoverageRow{method, alphas[j], p, std::sqrt(p * (1.0 - p) / n), width / n,
                                 static_cast<int>(trials.size())});
    }
  }
  return rows;
}

double master_inequality_gap(const RoundRecord& round, const Eigen::VectorXd& w_next, const Eigen::VectorXd& y,
                             const Exp4Params& params) {
  const Eigen::VectorXd& w = round.w_before.w();
  const double eta = params.eta;
  const double lhs = eta * round.g_tilde.dot(w - y);
  const Eigen::VectorXd grad_r = grad_penalty(w, params.eps_floor);
  const double rhs = bregman_div_phi(y, w) - bregman_div_phi(y, w_next) +
                     eta * eta * local_dual_norm_sq(round.g_hat, w) +
                     eta * eta * params.lambda_pen * params.lambda_pen * local_dual_norm_sq(grad_r, w);
  return rhs - lhs;
}

double min_master_inequality_gap(const Trajectory& traj, const Eigen::VectorXd& y, const Exp4Params& params) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < traj.rounds.size(); ++t) {
    const Eigen::VectorXd& next =
        t + 1 < traj.rounds.size() ? traj.rounds[t + 1].w_before.w() : traj.final_weight.w();
    worst = std::min(worst, master_inequality_gap(traj.rounds[t], next, y, params));
  }
  return worst;
}

}  // namespace exp4stab
