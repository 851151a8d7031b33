#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "exp4stab/experts.hpp"

using namespace exp4stab;

namespace {

void expect_distribution(const Eigen::VectorXd& p) {
  EXPECT_GE(p.minCoeff(), 0.0);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
}

ExpertSet mixed_set(Rng& rng, int a, int dx) {
  std::vector<ExpertPolicy> ex;
  ex.emplace_back(draw_softmax_expert(rng, a, dx));
  ex.emplace_back(draw_neural_expert(rng, dx, a, NeuralShape{8, 3}));
  ex.emplace_back(UniformExpert(a));
  return ExpertSet(std::move(ex));
}

}  // namespace

TEST(Softmax, HandValues) {
  const Eigen::VectorXd p = softmax(Eigen::Vector2d(std::log(3.0), 0.0));
  EXPECT_NEAR(p(0), 0.75, 1e-15);
  EXPECT_NEAR(p(1), 0.25, 1e-15);
  SoftmaxExpert zero(Eigen::MatrixXd::Zero(4, 3));
  const Eigen::VectorXd u = softmax_probs(zero, Eigen::Vector3d(0.3, -0.2, 0.9));
  for (int a = 0; a < 4; ++a) EXPECT_DOUBLE_EQ(u(a), 0.25);
}

TEST(Softmax, ExtremeLogitsStayFinite) {
  const Eigen::VectorXd p = softmax(Eigen::Vector3d(1e6, 0.0, -1e6));
  EXPECT_EQ(p(0), 1.0);
  EXPECT_EQ(p(1), 0.0);
  EXPECT_EQ(p(2), 0.0);
}

TEST(Neural, ZeroNetworkIsUniformAndEvaluationIsDeterministic) {
  std::vector<DenseLayer> layers{{Eigen::MatrixXd::Zero(5, 4), Eigen::VectorXd::Zero(5)},
                                 {Eigen::MatrixXd::Zero(3, 5), Eigen::VectorXd::Zero(3)}};
  NeuralExpert zero(layers);
  const Eigen::VectorXd p = neural_probs(zero, Eigen::Vector4d(1, 2, 3, 4));
  for (int a = 0; a < 3; ++a) EXPECT_DOUBLE_EQ(p(a), 1.0 / 3.0);

  Rng rng(8);
  const NeuralExpert net = draw_neural_expert(rng, 6, 3, NeuralShape{});
  EXPECT_EQ(net.layers().size(), 6u);
  EXPECT_EQ(net.num_actions(), 3);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -1, 1).normalized();
  const Eigen::VectorXd p1 = neural_probs(net, x), p2 = neural_probs(net, x);
  EXPECT_EQ(std::memcmp(p1.data(), p2.data(), sizeof(double) * 3), 0);
}

TEST(Neural, ReluOnFinalLayer) {
  // Final-layer pre-activations (-5, 1): ReLU gives logits (0, 1).
  std::vector<DenseLayer> layers{{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(-5, 1)}};
  NeuralExpert net(layers);
  const Eigen::VectorXd p = neural_probs(net, Eigen::Vector2d(0, 0));
  EXPECT_NEAR(p(0), 1.0 / (1.0 + std::exp(1.0)), 1e-15);
}

TEST(Policies, OutputsAreDistributionsAndBatchMatchesSingle) {
  Rng rng(21);
  LinearEnv env(4, 5, make_beta_star(rng, 4, 5));
  const ExpertSet set = mixed_set(rng, 4, 5);
  Eigen::MatrixXd X(5, 50);
  for (int i = 0; i < 50; ++i) X.col(i) = env.sample_context(rng).x;
  const auto batch = set.probs_batch(X);
  for (int i = 0; i < 50; ++i) {
    const Eigen::MatrixXd single = set.probs(X.col(i));
    for (int k = 0; k < set.size(); ++k) {
      expect_distribution(single.row(k).transpose());
      EXPECT_LT((batch[static_cast<std::size_t>(k)].col(i) - single.row(k).transpose()).cwiseAbs().maxCoeff(), 1e-14);
    }
    // uniform expert present: every action has some expert with mass >= 1/A
    EXPECT_GE(single.colwise().maxCoeff().minCoeff(), 0.25);
  }
  EXPECT_TRUE(set.has_uniform());
}

TEST(Mixture, ExamplesAndLinearity) {
  Eigen::MatrixXd pi(2, 2);
  pi << 1, 0, 0, 1;
  const Eigen::VectorXd q = mixture_probs(Eigen::Vector2d(0.5, 0.5), pi);
  EXPECT_DOUBLE_EQ(q(0), 0.5);
  EXPECT_DOUBLE_EQ(q(1), 0.5);

  Eigen::MatrixXd three(3, 4);
  three << 0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25, 0.7, 0.1, 0.1, 0.1;
  EXPECT_EQ(mixture_probs(Eigen::Vector3d(0, 1, 0), three), Eigen::VectorXd(three.row(1).transpose()));
  EXPECT_EQ(mixture_probs(Eigen::VectorXd::Ones(1), three.topRows(1)), Eigen::VectorXd(three.row(0).transpose()));

  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector3d w1 = Eigen::Vector3d::Random().cwiseAbs(), w2 = Eigen::Vector3d::Random().cwiseAbs();
    w1 /= w1.sum();
    w2 /= w2.sum();
    const double t = u(rng);
    const Eigen::VectorXd lhs = mixture_probs(t * w1 + (1 - t) * w2, three);
    const Eigen::VectorXd rhs = t * mixture_probs(w1, three) + (1 - t) * mixture_probs(w2, three);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-15);
  }
  EXPECT_THROW(mixture_probs(Eigen::Vector2d(0.5, 0.5), three), std::invalid_argument);
}

TEST(ExpertSet, RejectsMismatchedActions) {
  std::vector<ExpertPolicy> ex{UniformExpert(3), UniformExpert(4)};
  EXPECT_THROW(ExpertSet(std::move(ex)), std::invalid_argument);
  EXPECT_THROW(ExpertSet(std::vector<ExpertPolicy>{}), std::invalid_argument);
}

TEST(Moments, ScalarContextGivesExactUnitSigma) {
  LinearEnv env(1, 1, Eigen::VectorXd::Ones(1));
  Rng rng(1);
  const Eigen::MatrixXd s = estimate_sigma_k(UniformExpert(1), env, 1000, rng);
  EXPECT_EQ(s(0, 0), 1.0);
  const PopulationMoments m = estimate_moments(ExpertSet({UniformExpert(1)}), env, 100000, 17);
  EXPECT_EQ(m.sigma[0](0, 0), 1.0);
}

TEST(Moments, UniformExpertIsScaledIdentity) {
  // Sigma_unif = (1/A) blockdiag(E[x x^T]) = I / (A d_x) for x uniform on the sphere.
  Rng rng(6);
  const int a = 3, dx = 4;
  LinearEnv env(a, dx, make_beta_star(rng, a, dx));
  const PopulationMoments m = estimate_moments(ExpertSet({UniformExpert(a)}), env, 100000, 5);
  const Eigen::MatrixXd expect = Eigen::MatrixXd::Identity(a * dx, a * dx) / (a * dx);
  EXPECT_LT((m.sigma[0] - expect).cwiseAbs().maxCoeff(), 0.005);
  EXPECT_NEAR(m.sigma[0].trace(), 1.0, 1e-12);
  EXPECT_NEAR(m.gbar(0), 0.0, 0.01);
}

TEST(Moments, MatchesSerialEstimatorsAndIsPsd) {
  Rng rng(31);
  const int a = 3, dx = 4;
  LinearEnv env(a, dx, make_beta_star(rng, a, dx));
  const ExpertSet set = mixed_set(rng, a, dx);
  const PopulationMoments m = estimate_moments(set, env, 100000, 99, 2);
  Rng other(1234);
  for (int k = 0; k < set.size(); ++k) {
    const Eigen::MatrixXd serial = estimate_sigma_k(set[k], env, 100000, other);
    EXPECT_LT((serial - m.sigma[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff(), 0.02);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.sigma[static_cast<std::size_t>(k)]);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  }
  const Eigen::VectorXd g = estimate_gbar(set, env, 100000, other);
  EXPECT_LT((g - m.gbar).cwiseAbs().maxCoeff(), 0.02);
  EXPECT_GE(m.lambda_floor(), -1e-10);
}

TEST(Moments, SymmetryAndZeroSignal) {
  Rng rng(2);
  LinearEnv env(2, 3, Eigen::VectorXd::Zero(6));
  const SoftmaxExpert e = draw_softmax_expert(rng, 2, 3);
  const PopulationMoments m = estimate_moments(ExpertSet({e, e}), env, 5000, 1);
  EXPECT_EQ(m.gbar(0), 0.0);
  EXPECT_EQ(m.sigma[0], m.sigma[1]);

  LinearEnv signal(2, 3, make_beta_star(rng, 2, 3));
  const PopulationMoments s = estimate_moments(ExpertSet({e, e}), signal, 5000, 1);
  EXPECT_EQ(s.gbar(0), s.gbar(1));
}

TEST(Moments, IndependentOfWorkerCount) {
  Rng rng(41);
  LinearEnv env(3, 4, make_beta_star(rng, 3, 4));
  const ExpertSet set = mixed_set(rng, 3, 4);
  const PopulationMoments one = estimate_moments(set, env, 20000, 7, 1);
  const PopulationMoments many = estimate_moments(set, env, 20000, 7, 8);
  EXPECT_EQ(one.gbar, many.gbar);
  for (std::size_t k = 0; k < one.sigma.size(); ++k) EXPECT_EQ(one.sigma[k], many.sigma[k]);
}

TEST(ExpertIo, SaveLoadRoundTrip) {
  Rng rng(13);
  const ExpertSet set = mixed_set(rng, 3, 5);
  std::stringstream buf;
  save_experts(buf, set);
  const ExpertSet back = load_experts(buf);
  ASSERT_EQ(back.size(), set.size());
  Eigen::VectorXd x(5);
  x << 0.1, -0.4, 0.3, 0.8, -0.2;
  EXPECT_EQ(back.probs(x), set.probs(x));
}

TEST(ExpertIo, MalformedInputThrows) {
  std::stringstream bad("exp4stab-experts 1\ncount 1\nsoftmax 2 2\n1 2 3\n");
  EXPECT_THROW(load_experts(bad), std::runtime_error);
  std::stringstream kind("exp4stab-experts 1\ncount 1\nlinear 2\n");
  EXPECT_THROW(load_experts(kind), std::runtime_error);
  std::stringstream version("exp4stab-experts 9\ncount 1\nuniform 2\n");
  EXPECT_THROW(load_experts(version), std::runtime_error);
}
