#include "exp4stab/environment.hpp"

#include <stdexcept>
#include <string>

namespace exp4stab {

Eigen::VectorXd make_beta_star(Rng& rng, int num_actions, int context_dim) {
  if (num_actions < 1 || context_dim < 1)
    throw std::invalid_argument("make_beta_star: dimensions must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd beta(num_actions * context_dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] = normal(rng);
    norm = beta.norm();
  }
  return beta / norm;
}

LinearEnv::LinearEnv(int num_actions, int context_dim, Eigen::VectorXd beta_star,
                     double noise_half_width, NoiseLaw noise_law)
    : num_actions_(num_actions),
      context_dim_(context_dim),
      beta_star_(std::move(beta_star)),
      noise_half_width_(noise_half_width),
      noise_law_(noise_law) {
  if (num_actions_ < 1 || context_dim_ < 1)
    throw std::invalid_argument("LinearEnv: dimensions must be positive");
  if (beta_star_.size() != dim())
    throw std::invalid_argument("LinearEnv: beta_star has length " +
                                std::to_string(beta_star_.size()) + ", expected " +
                                std::to_string(dim()));
  if (beta_star_.norm() > 1.0 + 1e-12)
    throw std::invalid_argument("LinearEnv: ||beta_star||_2 must not exceed 1");
  if (!(noise_half_width_ >= 0.0))
    throw std::invalid_argument("LinearEnv: noise_half_width must be nonnegative");
}

double LinearEnv::noise_variance() const {
  const double h2 = noise_half_width_ * noise_half_width_;
  return noise_law_ == NoiseLaw::kUniform ? h2 / 3.0 : h2;
}

Context LinearEnv::sample_context(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd g(context_dim_);
  double norm = 0.0;
  while (norm == 0.0) {
    for (int i = 0; i < context_dim_; ++i) g[i] = normal(rng);
    norm = g.norm();
  }
  return Context{g / norm};
}

void LinearEnv::check_action(int action) const {
  if (action < 0 || action >= num_actions_)
    throw std::out_of_range("action index " + std::to_string(action) + " out of range [0, " +
                            std::to_string(num_actions_) + ")");
}

FeatureVector LinearEnv::feature(const Context& ctx, int action) const {
  check_action(action);
  if (ctx.x.size() != context_dim_) throw std::invalid_argument("feature: context dimension mismatch");
  FeatureVector f{Eigen::VectorXd::Zero(dim()), action, context_dim_};
  f.z.segment(static_cast<Eigen::Index>(action) * context_dim_, context_dim_) = ctx.x;
  return f;
}

double LinearEnv::expected_loss(const Context& ctx, int action) const {
  check_action(action);
  return beta_star_.segment(static_cast<Eigen::Index>(action) * context_dim_, context_dim_).dot(ctx.x);
}

double LinearEnv::sample_noise(Rng& rng) const {
  if (noise_half_width_ == 0.0) return 0.0;
  if (noise_law_ == NoiseLaw::kRademacher) {
    std::bernoulli_distribution coin(0.5);
    return coin(rng) ? noise_half_width_ : -noise_half_width_;
  }
  std::uniform_real_distribution<double> unif(-noise_half_width_, noise_half_width_);
  return unif(rng);
}

double LinearEnv::realize_loss(const Context& ctx, int action, Rng& rng) const {
  return expected_loss(ctx, action) + sample_noise(rng);
}

}  // namespace exp4stab
