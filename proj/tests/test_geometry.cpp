#include <gtest/gtest.h>

#include <cmath>

#include "exp4stab/bregman.hpp"
#include "exp4stab/projection.hpp"
#include "exp4stab/rng.hpp"
#include "oracles.hpp"

using namespace exp4stab;

namespace {

struct Gen {
  Rng rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  int k(int lo = 2, int hi = 6) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
  Eigen::VectorXd positive(int n, double spread = 4.0) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = std::exp(std::uniform_real_distribution<double>(-spread, spread)(rng));
    return v;
  }
  Eigen::VectorXd simplex(int n, double eps) {
    Eigen::VectorXd v = positive(n);
    v /= v.sum();
    return (v.array() * (1.0 - n * eps) + eps).matrix();
  }
};

}  // namespace

TEST(Bregman, HandValue) {
  const double d = bregman_div_phi(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.25, 0.75));
  EXPECT_NEAR(d, 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(d, 0.14384, 1e-5);
  EXPECT_EQ(bregman_div_phi(Eigen::Vector2d(0.3, 0.7), Eigen::Vector2d(0.3, 0.7)), 0.0);
  EXPECT_THROW(bregman_div_phi(Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.5, 0.5)), std::domain_error);
}

TEST(Bregman, MatchesDirectSumAndDefinition) {
  Gen g(1);
  for (int i = 0; i < 500; ++i) {
    const int k = g.k();
    const Eigen::VectorXd u = g.positive(k), v = g.positive(k);
    const double d = bregman_div_phi(u, v);
    EXPECT_NEAR(d, oracle::kl(u, v), 1e-10 * (1 + std::abs(d)));
    const double def = mirror_phi(u) - mirror_phi(v) - grad_mirror_phi(v).dot(u - v);
    EXPECT_NEAR(d, def, 1e-9 * (1 + std::abs(d)));
    EXPECT_GE(d, -1e-12);
  }
}

TEST(Bregman, ThreePointIdentity) {
  Gen g(2);
  for (int i = 0; i < 1000; ++i) {
    const int k = g.k();
    const Eigen::VectorXd x = g.positive(k, 1.0), xp = g.positive(k, 1.0), y = g.positive(k, 1.0);
    const double lhs = (grad_mirror_phi(x) - grad_mirror_phi(xp)).dot(x - y);
    const double rhs = bregman_div_phi(y, x) - bregman_div_phi(y, xp) + bregman_div_phi(x, xp);
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(Bregman, FenchelDualIdentity) {
  Gen g(3);
  for (int i = 0; i < 1000; ++i) {
    const int k = g.k();
    const Eigen::VectorXd x = g.positive(k, 1.0), y = g.positive(k, 1.0);
    EXPECT_NEAR(bregman_div_phi(x, y), bregman_div_phi_dual(grad_mirror_phi(y), grad_mirror_phi(x)), 1e-10);
    // phi(x) + phi*(grad phi(x)) = <x, grad phi(x)>
    EXPECT_NEAR(mirror_phi(x) + mirror_phi_dual(grad_mirror_phi(x)), x.dot(grad_mirror_phi(x)), 1e-10);
  }
}

TEST(Bregman, LocalNormExamples) {
  EXPECT_EQ(local_dual_norm_sq(Eigen::Vector2d(0, 0), Eigen::Vector2d(0.5, 0.5)), 0.0);
  EXPECT_EQ(local_dual_norm_sq(Eigen::Vector2d(2, 0), Eigen::Vector2d(0.5, 0.5)), 2.0);
  EXPECT_EQ(local_dual_norm_sq(Eigen::Vector3d(1, 3, 5), Eigen::Vector3d(0, 1, 0)), 9.0);
}

TEST(Projection, HandExamples) {
  const WeightState a = kl_project_eps_simplex(Eigen::Vector2d(0.99, 0.01), 0.1);
  EXPECT_NEAR(a.w()(0), 0.9, 1e-15);
  EXPECT_NEAR(a.w()(1), 0.1, 1e-15);
  const WeightState b = kl_project_eps_simplex(Eigen::Vector2d(2, 2), 0.1);
  EXPECT_EQ(b.w(), Eigen::VectorXd(Eigen::Vector2d(0.5, 0.5)));
  const Eigen::Vector3d feasible(0.2, 0.3, 0.5);
  EXPECT_LT((kl_project_eps_simplex(feasible, 0.1).w() - feasible).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Projection, HandExampleAgreesWithOracles) {
  const Eigen::Vector2d v(0.99, 0.01);
  EXPECT_LT((oracle::kl_projection_grid2(v, 0.1) - Eigen::Vector2d(0.9, 0.1)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((oracle::kl_projection_pgd(v, 0.1) - Eigen::Vector2d(0.9, 0.1)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Projection, MatchesProjectedGradientOracle) {
  Gen g(4);
  for (int i = 0; i < 300; ++i) {
    const int k = g.k(2, 6);
    const double eps = (0.05 + 0.9 * g.unit()) / k;
    const Eigen::VectorXd v = g.positive(k, 3.0);
    const Eigen::VectorXd w = kl_project_eps_simplex(v, eps).w();
    EXPECT_LT((w - oracle::kl_projection_pgd(v, eps)).cwiseAbs().maxCoeff(), 1e-6) << "instance " << i;
    if (k == 2) EXPECT_LT((w - oracle::kl_projection_grid2(v, eps)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Projection, FeasibleAndScaleInvariant) {
  Gen g(5);
  for (int i = 0; i < 1000; ++i) {
    const int k = g.k(1, 12);
    const double eps = g.unit() / k;
    const Eigen::VectorXd v = g.positive(k, 8.0);
    const Eigen::VectorXd w = kl_project_eps_simplex(v, eps).w();
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.minCoeff(), eps - 1e-15);
    const double c = std::exp(std::uniform_real_distribution<double>(-20.0, 20.0)(g.rng));
    EXPECT_LT((kl_project_eps_simplex(c * v, eps).w() - w).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Projection, PythagoreanInequality) {
  Gen g(6);
  for (int i = 0; i < 1000; ++i) {
    const int k = g.k();
    const double eps = g.unit() / k;
    const Eigen::VectorXd x = g.simplex(k, eps);
    const Eigen::VectorXd y = g.positive(k);
    const Eigen::VectorXd p = kl_project_eps_simplex(y, eps).w();
    EXPECT_GE(bregman_div_phi(x, y), bregman_div_phi(x, p) + bregman_div_phi(p, y) - 1e-10);
  }
}

TEST(Projection, TiesAndEdgeCases) {
  // Many equal entries exercise the tie handling.
  const Eigen::VectorXd ties = Eigen::VectorXd::Constant(6, 3.0);
  EXPECT_LT((kl_project_eps_simplex(ties, 0.05).w().array() - 1.0 / 6).abs().maxCoeff(), 1e-15);
  // K eps = 1 leaves only the uniform point.
  const Eigen::VectorXd tight = kl_project_eps_simplex(Eigen::Vector4d(1, 2, 3, 4), 0.25).w();
  EXPECT_EQ(tight, Eigen::VectorXd(Eigen::Vector4d::Constant(0.25)));
  EXPECT_THROW(kl_project_eps_simplex(Eigen::Vector2d(1, 1), 0.6), std::invalid_argument);
  EXPECT_THROW(kl_project_eps_simplex(Eigen::Vector2d(1, 0), 0.1), std::domain_error);
  EXPECT_THROW(kl_project_eps_simplex(Eigen::Vector2d(1, NAN), 0.1), std::domain_error);
  // Huge dynamic range.
  const Eigen::VectorXd w = kl_project_eps_simplex(Eigen::Vector3d(1e300, 1e-300, 1.0), 0.01).w();
  EXPECT_NEAR(w(0), 0.98, 1e-12);
  EXPECT_NEAR(w(1), 0.01, 1e-15);
}

TEST(WeightState, Validation) {
  EXPECT_NO_THROW(WeightState(Eigen::Vector2d(0.5, 0.5), 0.1));
  EXPECT_THROW(WeightState(Eigen::Vector2d(0.5, 0.6), 0.1), std::invalid_argument);
  EXPECT_THROW(WeightState(Eigen::Vector2d(0.95, 0.05), 0.1), std::invalid_argument);
  const WeightState u = WeightState::uniform(4, 0.01);
  EXPECT_EQ(u.w(), Eigen::VectorXd(Eigen::Vector4d::Constant(0.25)));
}
