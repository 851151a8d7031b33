#include "exp4stab/exp4.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace exp4stab {

Exp4Params Exp4Params::defaults(int num_experts, int num_actions, int horizon,
                                EtaDenominator denominator) {
  if (num_experts < 1 || num_actions < 1 || horizon < 1)
    throw std::invalid_argument("Exp4Params::defaults: K, A and T must be positive");
  Exp4Params p;
  p.num_experts = num_experts;
  p.horizon = horizon;
  const double T = horizon;
  const double n = denominator == EtaDenominator::kActions ? num_actions : num_experts;
  p.eta = std::sqrt(std::log(static_cast<double>(num_experts)) / (n * T));
  p.eps_floor = 1.0 / (num_experts * T);
  p.gamma = std::sqrt(std::log(T));
  p.lambda_pen = p.gamma / std::sqrt(T);
  return p;
}

void Exp4Params::validate() const {
  if (num_experts < 1) throw std::invalid_argument("Exp4Params: K must be positive");
  if (horizon < 0) throw std::invalid_argument("Exp4Params: T must be nonnegative");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("Exp4Params: eta must be finite and >= 0");
  if (!(lambda_pen >= 0.0) || !std::isfinite(lambda_pen))
    throw std::invalid_argument("Exp4Params: lambda_pen must be finite and >= 0");
  if (!(eps_floor > 0.0)) throw std::invalid_argument("Exp4Params: eps_floor must be positive");
  if (num_experts * eps_floor > 1.0 + 1e-12)
    throw std::invalid_argument("infeasible eps floor: K * eps = " + std::to_string(num_experts * eps_floor) +
                                " exceeds 1");
}

Eigen::VectorXd ips_estimate(double loss, const Eigen::VectorXd& pi_at_a, double q_at_a) {
  if (!(q_at_a > 0.0))
    throw std::domain_error("ips_estimate: Q(a) must be positive (floor or uniform-expert invariant broken)");
  return pi_at_a * (loss / q_at_a);
}

Eigen::VectorXd grad_penalty(const Eigen::VectorXd& w, double eps_floor) {
  return (w.array() / eps_floor).log().matrix();
}

double penalty(const Eigen::VectorXd& w, double eps_floor) {
  return (w.array() * ((w.array() / eps_floor).log() - 1.0)).sum();
}

Eigen::VectorXd multiplicative_step(const Eigen::VectorXd& w, const Eigen::VectorXd& g_hat,
                                    const Exp4Params& params) {
  if (w.size() != g_hat.size()) throw std::invalid_argument("multiplicative_step: size mismatch");
  const Eigen::VectorXd grad_r = grad_penalty(w, params.eps_floor);
  Eigen::VectorXd exponent;
  if (params.update_rule == UpdateRule::kAnalysis)
    exponent = -params.eta * (g_hat + params.lambda_pen * grad_r);
  else
    exponent = -params.eta * g_hat - params.lambda_pen * grad_r;
  if (!exponent.allFinite() || exponent.cwiseAbs().maxCoeff() > 700.0)
    throw std::overflow_error("multiplicative_step: exponent outside [-700, 700]");
  return w.cwiseProduct(exponent.array().exp().matrix());
}

WeightState penalized_opt_weight(const Eigen::VectorXd& gbar, const Exp4Params& params) {
  if (gbar.size() != params.num_experts) throw std::invalid_argument("penalized_opt_weight: size mismatch");
  if (!(params.lambda_pen > 0.0))
    throw std::invalid_argument(
        "penalized_opt_weight: lambda must be positive; for lambda = 0 use best_vertex");
  const double shift = gbar.minCoeff();
  const Eigen::VectorXd v = (-(gbar.array() - shift) / params.lambda_pen).exp().matrix();
  // Entries can underflow to zero when gaps are large relative to lambda; any
  // positive value below eps / (K * max) lands on the floor either way.
  Eigen::VectorXd safe = v.cwiseMax(std::numeric_limits<double>::min());
  return kl_project_eps_simplex(safe, params.eps_floor);
}

int best_vertex(const Eigen::VectorXd& gbar) {
  Eigen::Index idx = 0;
  for (Eigen::Index k = 1; k < gbar.size(); ++k)
    if (gbar[k] < gbar[idx]) idx = k;
  return static_cast<int>(idx);
}

Eigen::VectorXd smoothed_vertex(int num_experts, int vertex, double eps_floor) {
  Eigen::VectorXd y = Eigen::VectorXd::Constant(num_experts, eps_floor);
  y[vertex] = 1.0 - (num_experts - 1) * eps_floor;
  return y;
}

Eigen::VectorXd Trajectory::mean_weight() const {
  if (rounds.empty()) throw std::logic_error("mean_weight: empty trajectory");
  return weight_sum / static_cast<double>(rounds.size());
}

Trajectory run_episode(const LinearEnv& env, const ExpertSet& experts, const Exp4Params& params,
                       Rng& rng) {
  params.validate();
  const int K = experts.size();
  const int A = env.num_actions();
  if (params.num_experts != K) throw std::invalid_argument("run_episode: params.num_experts != expert count");
  if (experts.num_actions() != A) throw std::invalid_argument("run_episode: experts and environment disagree on A");

  Rng context_rng(rng());
  Rng action_rng(rng());
  const int T = params.horizon;

  Eigen::MatrixXd contexts(env.context_dim(), T);
  for (int t = 0; t < T; ++t) contexts.col(t) = env.sample_context(context_rng).x;
  const auto batch = experts.probs_batch(contexts);

  WeightState state = WeightState::uniform(K, params.eps_floor);
  Trajectory traj{{}, state, Eigen::VectorXd::Zero(K)};
  traj.rounds.reserve(static_cast<std::size_t>(T));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd probs(K, A);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) probs.row(k) = batch[static_cast<std::size_t>(k)].col(t).transpose();
    const Eigen::VectorXd q = mixture_probs(state.w(), probs);

    const double u = unit(action_rng) * q.sum();
    int action = -1;
    double cum = 0.0;
    for (int a = 0; a < A; ++a) {
      if (q[a] <= 0.0) continue;
      cum += q[a];
      action = a;
      if (u < cum) break;
    }
    if (action < 0) throw std::logic_error("run_episode: mixture assigns zero mass to every action");

    Context ctx{contexts.col(t)};
    const double loss = env.realize_loss(ctx, action, action_rng);
    const Eigen::VectorXd g_hat = ips_estimate(loss, probs.col(action), q[action]);
    const Eigen::VectorXd g_tilde = g_hat + params.lambda_pen * grad_penalty(state.w(), params.eps_floor);
    const Eigen::VectorXd w_plus = multiplicative_step(state.w(), g_hat, params);
    WeightState next = kl_project_eps_simplex(w_plus, params.eps_floor);

    traj.weight_sum += state.w();
    FeatureVector z = env.feature(ctx, action);
    traj.rounds.push_back(RoundRecord{std::move(ctx), probs, q, action, loss, std::move(z), state, g_hat, g_tilde});
    state = std::move(next);
  }
  traj.final_weight = state;
  return traj;
}

}  // namespace exp4stab
