#pragma once

#include <Eigen/Dense>

#include "exp4stab/rng.hpp"

namespace exp4stab {

/// A context on the unit sphere in R^{d_x}.
struct Context {
  Eigen::VectorXd x;
};

/// Block-sparse feature c(x, a): x placed in block `block`, zeros elsewhere.
struct FeatureVector {
  Eigen::VectorXd z;
  int block = 0;
  int width = 0;  // block length d_x
};

enum class NoiseLaw {
  kUniform,     // Unif(-h, h)
  kRademacher,  // +-h with equal probability
};

/// Draw beta* with i.i.d. standard normal entries, rescaled to unit norm.
Eigen::VectorXd make_beta_star(Rng& rng, int num_actions, int context_dim);

/// Stochastic linear-loss environment with the block feature map.
///
/// Immutable after construction; all randomness comes from the caller's
/// generator, so one instance can be shared by concurrently running trials.
class LinearEnv {
 public:
  LinearEnv(int num_actions, int context_dim, Eigen::VectorXd beta_star,
            double noise_half_width = 0.1, NoiseLaw noise_law = NoiseLaw::kUniform);

  int num_actions() const { return num_actions_; }
  int context_dim() const { return context_dim_; }
  /// Feature dimension A * d_x.
  int dim() const { return num_actions_ * context_dim_; }
  const Eigen::VectorXd& beta_star() const { return beta_star_; }
  double noise_half_width() const { return noise_half_width_; }
  NoiseLaw noise_law() const { return noise_law_; }
  /// Variance of one noise draw.
  double noise_variance() const;

  Context sample_context(Rng& rng) const;
  FeatureVector feature(const Context& ctx, int action) const;
  double expected_loss(const Context& ctx, int action) const;
  double realize_loss(const Context& ctx, int action, Rng& rng) const;
  double sample_noise(Rng& rng) const;

 private:
  void check_action(int action) const;

  int num_actions_;
  int context_dim_;
  Eigen::VectorXd beta_star_;
  double noise_half_width_;
  NoiseLaw noise_law_;
};

}  // namespace exp4stab
