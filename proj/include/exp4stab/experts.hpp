#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

#include "exp4stab/environment.hpp"
#include "exp4stab/rng.hpp"

namespace exp4stab {

/// Numerically stable softmax (max-subtracted). Entries whose logit trails
/// the maximum by more than 690 are exactly 0.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// pi(a | x) proportional to exp(<u_a, x>); row a of the weight matrix is u_a.
class SoftmaxExpert {
 public:
  explicit SoftmaxExpert(Eigen::MatrixXd weights);

  int num_actions() const { return static_cast<int>(weights_.rows()); }
  int input_dim() const { return static_cast<int>(weights_.cols()); }
  const Eigen::MatrixXd& weights() const { return weights_; }

 private:
  Eigen::MatrixXd weights_;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Feed-forward ReLU policy: h_i = ReLU(W_i h_{i-1} + b_i), h_0 = x, and the
/// action distribution is softmax(h_L). The rectifier is applied on every
/// layer, the last one included.
class NeuralExpert {
 public:
  explicit NeuralExpert(std::vector<DenseLayer> layers);

  int num_actions() const { return static_cast<int>(layers_.back().weight.rows()); }
  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Logits for a batch of inputs stored as columns.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& inputs) const;

 private:
  std::vector<DenseLayer> layers_;
};

class UniformExpert {
 public:
  explicit UniformExpert(int num_actions);
  int num_actions() const { return num_actions_; }

 private:
  int num_actions_;
};

using ExpertPolicy = std::variant<SoftmaxExpert, NeuralExpert, UniformExpert>;

Eigen::VectorXd softmax_probs(const SoftmaxExpert& expert, const Eigen::VectorXd& x);
Eigen::VectorXd neural_probs(const NeuralExpert& expert, const Eigen::VectorXd& x);
Eigen::VectorXd policy_probs(const ExpertPolicy& expert, const Eigen::VectorXd& x);
/// Column j holds pi(. | inputs.col(j)).
Eigen::MatrixXd policy_probs_batch(const ExpertPolicy& expert, const Eigen::MatrixXd& inputs);
int policy_num_actions(const ExpertPolicy& expert);

/// Q(a) = sum_k w_k pi_k(a | x). `per_expert` is K x A (row k = pi_k).
Eigen::VectorXd mixture_probs(const Eigen::VectorXd& w, const Eigen::MatrixXd& per_expert);

/// Ordered collection of K >= 1 expert policies sharing one action set.
class ExpertSet {
 public:
  explicit ExpertSet(std::vector<ExpertPolicy> experts);

  int size() const { return static_cast<int>(experts_.size()); }
  int num_actions() const { return num_actions_; }
  bool has_uniform() const { return has_uniform_; }
  const ExpertPolicy& operator[](int k) const { return experts_[static_cast<std::size_t>(k)]; }
  const std::vector<ExpertPolicy>& experts() const { return experts_; }

  /// K x A matrix; row k is pi_k(. | x).
  Eigen::MatrixXd probs(const Eigen::VectorXd& x) const;
  /// Entry k is A x n, column j = pi_k(. | inputs.col(j)).
  std::vector<Eigen::MatrixXd> probs_batch(const Eigen::MatrixXd& inputs) const;

 private:
  std::vector<ExpertPolicy> experts_;
  int num_actions_ = 0;
  bool has_uniform_ = false;
};

SoftmaxExpert draw_softmax_expert(Rng& rng, int num_actions, int context_dim,
                                  double weight_variance = 12.0);

struct NeuralShape {
  int hidden = 64;
  int num_layers = 6;
  double weight_variance = 1.0;
  double bias_variance = 1.0;
  /// Scale weights by 1/sqrt(fan_in) on top of weight_variance.
  bool fan_in_scaling = false;
};

NeuralExpert draw_neural_expert(Rng& rng, int context_dim, int num_actions, const NeuralShape& shape);

/// Monte-Carlo estimates of Sigma_k and gbar*.
struct PopulationMoments {
  std::vector<Eigen::MatrixXd> sigma;  // K matrices, d x d
  Eigen::VectorXd gbar;                // length K
  long n_samples = 0;
  std::uint64_t seed = 0;

  /// min_k lambda_min(Sigma_k).
  double lambda_floor() const;
};

/// (1/n) sum_i sum_a pi_k(a|x_i) z(x_i,a) z(x_i,a)^T over i.i.d. contexts.
Eigen::MatrixXd estimate_sigma_k(const ExpertPolicy& expert, const LinearEnv& env, long n_samples,
                                 Rng& rng);
/// gbar_k = mean over contexts of sum_a pi_k(a|x) E[l | x, a].
Eigen::VectorXd estimate_gbar(const ExpertSet& experts, const LinearEnv& env, long n_samples,
                              Rng& rng);

/// Both moment families from one context sample. Contexts are split into
/// fixed-size shards, shard s drawing from derive(seed, s); partial sums are
/// combined in shard order, so the result does not depend on `workers`.
PopulationMoments estimate_moments(const ExpertSet& experts, const LinearEnv& env, long n_samples,
                                   std::uint64_t seed, int workers = 1);

/// Text dump of expert parameters (see README for the grammar). Values are
/// written in shortest round-trip decimal form.
void save_experts(std::ostream& out, const ExpertSet& experts);
ExpertSet load_experts(std::istream& in);

}  // namespace exp4stab
