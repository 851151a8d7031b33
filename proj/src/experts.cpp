#include "exp4stab/experts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "exp4stab/parallel.hpp"

namespace exp4stab {

namespace {

// Gaps below this are flushed to probability 0 rather than left as
// subnormals (exp(-690) ~ 1e-300), which stall the moment GEMMs.
constexpr double kLogitGapFloor = -690.0;

Eigen::ArrayXd shifted_exp(const Eigen::ArrayXd& shifted) {
  return (shifted < kLogitGapFloor).select(0.0, shifted.exp());
}

}  // namespace

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = shifted_exp(logits.array() - logits.maxCoeff()).matrix();
  return p / p.sum();
}

namespace {

// Column-wise softmax of an A x n logit matrix.
Eigen::MatrixXd softmax_columns(Eigen::MatrixXd logits) {
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    auto col = logits.col(j);
    col = shifted_exp(col.array() - col.maxCoeff()).matrix();
    col /= col.sum();
  }
  return logits;
}

}  // namespace

SoftmaxExpert::SoftmaxExpert(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
  if (weights_.rows() < 1 || weights_.cols() < 1)
    throw std::invalid_argument("SoftmaxExpert: empty weight matrix");
}

NeuralExpert::NeuralExpert(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("NeuralExpert: no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rows() != l.bias.size())
      throw std::invalid_argument("NeuralExpert: bias length mismatch in layer " + std::to_string(i));
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
      throw std::invalid_argument("NeuralExpert: layer " + std::to_string(i) +
                                  " input width does not match previous output");
  }
}

Eigen::MatrixXd NeuralExpert::logits(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd h = inputs;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd next = layer.weight * h;
    next.colwise() += layer.bias;
    h = next.cwiseMax(0.0);
  }
  return h;
}

UniformExpert::UniformExpert(int num_actions) : num_actions_(num_actions) {
  if (num_actions_ < 1) throw std::invalid_argument("UniformExpert: need at least one action");
}

Eigen::VectorXd softmax_probs(const SoftmaxExpert& expert, const Eigen::VectorXd& x) {
  if (x.size() != expert.input_dim()) throw std::invalid_argument("softmax_probs: dimension mismatch");
  return softmax(expert.weights() * x);
}

Eigen::VectorXd neural_probs(const NeuralExpert& expert, const Eigen::VectorXd& x) {
  if (x.size() != expert.input_dim()) throw std::invalid_argument("neural_probs: dimension mismatch");
  return softmax(expert.logits(x).col(0));
}

Eigen::VectorXd policy_probs(const ExpertPolicy& expert, const Eigen::VectorXd& x) {
  struct Visitor {
    const Eigen::VectorXd& x;
    Eigen::VectorXd operator()(const SoftmaxExpert& e) const { return softmax_probs(e, x); }
    Eigen::VectorXd operator()(const NeuralExpert& e) const { return neural_probs(e, x); }
    Eigen::VectorXd operator()(const UniformExpert& e) const {
      return Eigen::VectorXd::Constant(e.num_actions(), 1.0 / e.num_actions());
    }
  };
  return std::visit(Visitor{x}, expert);
}

Eigen::MatrixXd policy_probs_batch(const ExpertPolicy& expert, const Eigen::MatrixXd& inputs) {
  struct Visitor {
    const Eigen::MatrixXd& inputs;
    Eigen::MatrixXd operator()(const SoftmaxExpert& e) const {
      if (inputs.rows() != e.input_dim()) throw std::invalid_argument("softmax expert: dimension mismatch");
      return softmax_columns(e.weights() * inputs);
    }
    Eigen::MatrixXd operator()(const NeuralExpert& e) const {
      if (inputs.rows() != e.input_dim()) throw std::invalid_argument("neural expert: dimension mismatch");
      return softmax_columns(e.logits(inputs));
    }
    Eigen::MatrixXd operator()(const UniformExpert& e) const {
      return Eigen::MatrixXd::Constant(e.num_actions(), inputs.cols(), 1.0 / e.num_actions());
    }
  };
  return std::visit(Visitor{inputs}, expert);
}

int policy_num_actions(const ExpertPolicy& expert) {
  return std::visit([](const auto& e) { return e.num_actions(); }, expert);
}

Eigen::VectorXd mixture_probs(const Eigen::VectorXd& w, const Eigen::MatrixXd& per_expert) {
  if (w.size() != per_expert.rows())
    throw std::invalid_argument("mixture_probs: weight length " + std::to_string(w.size()) +
                                " does not match expert count " + std::to_string(per_expert.rows()));
  return per_expert.transpose() * w;
}

ExpertSet::ExpertSet(std::vector<ExpertPolicy> experts) : experts_(std::move(experts)) {
  if (experts_.empty()) throw std::invalid_argument("ExpertSet: need at least one expert");
  num_actions_ = policy_num_actions(experts_.front());
  for (const auto& e : experts_) {
    if (policy_num_actions(e) != num_actions_)
      throw std::invalid_argument("ExpertSet: experts disagree on the number of actions");
    if (std::holds_alternative<UniformExpert>(e)) has_uniform_ = true;
  }
}

Eigen::MatrixXd ExpertSet::probs(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd out(size(), num_actions_);
  for (int k = 0; k < size(); ++k) out.row(k) = policy_probs((*this)[k], x).transpose();
  return out;
}

std::vector<Eigen::MatrixXd> ExpertSet::probs_batch(const Eigen::MatrixXd& inputs) const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(experts_.size());
  for (const auto& e : experts_) out.push_back(policy_probs_batch(e, inputs));
  return out;
}

SoftmaxExpert draw_softmax_expert(Rng& rng, int num_actions, int context_dim, double weight_variance) {
  std::normal_distribution<double> normal(0.0, std::sqrt(weight_variance));
  Eigen::MatrixXd u(num_actions, context_dim);
  for (int a = 0; a < num_actions; ++a)
    for (int j = 0; j < context_dim; ++j) u(a, j) = normal(rng);
  return SoftmaxExpert(std::move(u));
}

NeuralExpert draw_neural_expert(Rng& rng, int context_dim, int num_actions, const NeuralShape& shape) {
  if (shape.num_layers < 1 || shape.hidden < 1)
    throw std::invalid_argument("draw_neural_expert: need at least one layer of positive width");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<DenseLayer> layers;
  int in = context_dim;
  for (int i = 0; i < shape.num_layers; ++i) {
    const int out = (i + 1 == shape.num_layers) ? num_actions : shape.hidden;
    double w_scale = std::sqrt(shape.weight_variance);
    if (shape.fan_in_scaling) w_scale /= std::sqrt(static_cast<double>(in));
    const double b_scale = std::sqrt(shape.bias_variance);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = w_scale * normal(rng);
    for (int r = 0; r < out; ++r) layer.bias[r] = b_scale * normal(rng);
    layers.push_back(std::move(layer));
    in = out;
  }
  return NeuralExpert(std::move(layers));
}

double PopulationMoments::lambda_floor() const {
  double floor = std::numeric_limits<double>::infinity();
  for (const auto& s : sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
    floor = std::min(floor, eig.eigenvalues().minCoeff());
  }
  return floor;
}

Eigen::MatrixXd estimate_sigma_k(const ExpertPolicy& expert, const LinearEnv& env, long n_samples,
                                 Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("estimate_sigma_k: n_samples must be >= 1");
  const int d = env.dim();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
  for (long i = 0; i < n_samples; ++i) {
    const Context ctx = env.sample_context(rng);
    const Eigen::VectorXd p = policy_probs(expert, ctx.x);
    for (int a = 0; a < env.num_actions(); ++a) {
      if (p[a] == 0.0) continue;
      const FeatureVector f = env.feature(ctx, a);
      sigma.noalias() += p[a] * f.z * f.z.transpose();
    }
  }
  return sigma / static_cast<double>(n_samples);
}

Eigen::VectorXd estimate_gbar(const ExpertSet& experts, const LinearEnv& env, long n_samples, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("estimate_gbar: n_samples must be >= 1");
  Eigen::VectorXd gbar = Eigen::VectorXd::Zero(experts.size());
  Eigen::VectorXd losses(env.num_actions());
  for (long i = 0; i < n_samples; ++i) {
    const Context ctx = env.sample_context(rng);
    for (int a = 0; a < env.num_actions(); ++a) losses[a] = env.expected_loss(ctx, a);
    gbar += experts.probs(ctx.x) * losses;
  }
  return gbar / static_cast<double>(n_samples);
}

PopulationMoments estimate_moments(const ExpertSet& experts, const LinearEnv& env, long n_samples,
                                   std::uint64_t seed, int workers) {
  if (n_samples < 1) throw std::invalid_argument("estimate_moments: n_samples must be >= 1");
  if (experts.num_actions() != env.num_actions())
    throw std::invalid_argument("estimate_moments: experts and environment disagree on actions");
  constexpr long kShard = 4096;
  const int K = experts.size();
  const int A = env.num_actions();
  const int dx = env.context_dim();
  const std::size_t shards = static_cast<std::size_t>((n_samples + kShard - 1) / kShard);

  // Per-arm parameter rows theta_a.
  Eigen::MatrixXd theta(A, dx);
  for (int a = 0; a < A; ++a) theta.row(a) = env.beta_star().segment(a * dx, dx).transpose();

  struct Partial {
    std::vector<Eigen::MatrixXd> blocks;  // K*A blocks of dx x dx
    Eigen::VectorXd gbar;
  };
  std::vector<Partial> partials(shards);

  parallel_for(shards, workers, [&](std::size_t s) {
    const long begin = static_cast<long>(s) * kShard;
    const long m = std::min(kShard, n_samples - begin);
    Rng rng(derive_seed(seed, StreamPurpose::kMoments, s));
    Eigen::MatrixXd X(dx, m);
    for (long i = 0; i < m; ++i) X.col(i) = env.sample_context(rng).x;
    const Eigen::MatrixXd losses = theta * X;  // A x m
    const auto probs = experts.probs_batch(X);
    Partial part;
    part.gbar = Eigen::VectorXd::Zero(K);
    part.blocks.reserve(static_cast<std::size_t>(K * A));
    for (int k = 0; k < K; ++k) {
      part.gbar[k] = probs[k].cwiseProduct(losses).sum();
      for (int a = 0; a < A; ++a) {
        const Eigen::RowVectorXd p = probs[k].row(a);
        const Eigen::MatrixXd weighted = X.array().rowwise() * p.array();
        Eigen::MatrixXd block(dx, dx);
        block.noalias() = weighted * X.transpose();
        part.blocks.push_back(std::move(block));
      }
    }
    partials[s] = std::move(part);
  });

  PopulationMoments out;
  out.n_samples = n_samples;
  out.seed = seed;
  out.gbar = Eigen::VectorXd::Zero(K);
  out.sigma.assign(static_cast<std::size_t>(K), Eigen::MatrixXd::Zero(env.dim(), env.dim()));
  for (const auto& part : partials) {
    out.gbar += part.gbar;
    for (int k = 0; k < K; ++k)
      for (int a = 0; a < A; ++a)
        out.sigma[static_cast<std::size_t>(k)].block(a * dx, a * dx, dx, dx) +=
            part.blocks[static_cast<std::size_t>(k * A + a)];
  }
  const double n = static_cast<double>(n_samples);
  out.gbar /= n;
  for (auto& s : out.sigma) {
    s /= n;
    s = 0.5 * (s + s.transpose()).eval();
  }
  return out;
}

}  // namespace exp4stab
