#include <gtest/gtest.h>

#include <cmath>

#include "exp4stab/diagnostics.hpp"
#include "oracles.hpp"

using namespace exp4stab;

namespace {

Eigen::MatrixXd random_spd(Rng& rng, int d) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = nd(rng);
  return m * m.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

// max |lambda - 1| over the (real) eigenvalues of Sigma*^{-1} S, via a
// nonsymmetric eigensolver.
double stability_oracle(const Eigen::MatrixXd& s, const Eigen::MatrixXd& sigma) {
  const Eigen::MatrixXd m = sigma.inverse() * s;
  Eigen::EigenSolver<Eigen::MatrixXd> es(m);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) worst = std::max(worst, std::abs(es.eigenvalues()(i).real() - 1.0));
  return worst;
}

}  // namespace

TEST(SigmaStar, Examples) {
  Rng rng(1);
  PopulationMoments m;
  m.sigma = {random_spd(rng, 4)};
  m.gbar = Eigen::VectorXd::Zero(1);
  EXPECT_EQ(sigma_star_T(m, WeightState(Eigen::VectorXd::Ones(1), 0.1), 50), Eigen::MatrixXd(50 * m.sigma[0]));

  const Eigen::MatrixXd s = random_spd(rng, 3);
  PopulationMoments eq;
  eq.sigma = {s, s, s};
  eq.gbar = Eigen::VectorXd::Zero(3);
  const Eigen::MatrixXd got = sigma_star_T(eq, WeightState(Eigen::Vector3d(0.2, 0.5, 0.3), 0.1), 7);
  EXPECT_LT((got - 7 * s).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SigmaStar, LinearInWeights) {
  Rng rng(2);
  PopulationMoments m;
  m.sigma = {random_spd(rng, 3), random_spd(rng, 3), random_spd(rng, 3)};
  m.gbar = Eigen::VectorXd::Zero(3);
  const Eigen::Vector3d w1(0.2, 0.3, 0.5), w2(0.6, 0.1, 0.3);
  const Eigen::MatrixXd a = sigma_star_T(m, WeightState(w1, 0.05), 10);
  const Eigen::MatrixXd b = sigma_star_T(m, WeightState(w2, 0.05), 10);
  const Eigen::MatrixXd mid = sigma_star_T(m, WeightState(0.5 * (w1 + w2), 0.05), 10);
  EXPECT_LT((mid - 0.5 * (a + b)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Stability, ExamplesAndOracle) {
  Rng rng(3);
  const Eigen::MatrixXd sigma = random_spd(rng, 5);
  EXPECT_LT(stability_error(sigma, sigma), 1e-12);
  EXPECT_NEAR(stability_error(2 * sigma, sigma), 1.0, 1e-12);
  for (int i = 0; i < 50; ++i) {
    const Eigen::MatrixXd s = random_spd(rng, 5), sg = random_spd(rng, 5);
    EXPECT_NEAR(stability_error(s, sg), stability_oracle(s, sg), 1e-8 * (1 + stability_oracle(s, sg)));
  }
  EXPECT_THROW(stability_error(sigma, Eigen::MatrixXd::Zero(5, 5)), std::domain_error);
}

TEST(Stability, OrthogonalCongruenceInvariance) {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const Eigen::MatrixXd s = random_spd(rng, 6), sg = random_spd(rng, 6);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_spd(rng, 6));
    const Eigen::MatrixXd q = qr.householderQ();
    EXPECT_NEAR(stability_error(q * s * q.transpose(), q * sg * q.transpose()), stability_error(s, sg), 1e-9);
  }
}

TEST(RegretBound, Formula) {
  const int t = 100, k = 5;
  const double g = std::sqrt(std::log(100.0));
  const double lk = std::log(500.0);
  const double expect = 8 * std::sqrt(t * k * std::log(5.0)) + g * lk * std::sqrt(100.0) +
                        4 * g * g * lk * lk * lk / (25 * std::sqrt(100.0));
  EXPECT_NEAR(regret_bound(t, k), expect, 1e-12 * expect);
  EXPECT_THROW(regret_bound(0, 5), std::invalid_argument);
}

TEST(Regret, IdenticalExpertsGiveZero) {
  Rng rng(5);
  LinearEnv env(3, 4, make_beta_star(rng, 3, 4));
  const SoftmaxExpert e = draw_softmax_expert(rng, 3, 4);
  const ExpertSet set({e, e, e});
  const Exp4Params p = Exp4Params::defaults(3, 3, 200);
  const Trajectory t = run_episode(env, set, p, rng);
  const RegretReport r = regret_trace(t, Eigen::Vector3d::Zero(), env, set);
  for (double v : r.cumulative) EXPECT_NEAR(v, 0.0, 1e-13);
  EXPECT_NEAR(weight_drift(t, WeightState::uniform(3, p.eps_floor)), 0.0, 1e-14);
}

TEST(Regret, MatchesDirectSum) {
  Rng rng(6);
  LinearEnv env(3, 4, make_beta_star(rng, 3, 4));
  std::vector<ExpertPolicy> ex;
  for (int i = 0; i < 4; ++i) ex.emplace_back(draw_softmax_expert(rng, 3, 4));
  const ExpertSet set(std::move(ex));
  const Exp4Params p = Exp4Params::defaults(4, 3, 300);
  const Trajectory t = run_episode(env, set, p, rng);
  const Eigen::Vector4d gbar(0.1, -0.3, 0.2, -0.3);  // tie: lowest index wins
  const RegretReport r = regret_trace(t, gbar, env, set);
  EXPECT_EQ(r.w_star_vertex, Eigen::VectorXd(Eigen::Vector4d(0, 1, 0, 0)));
  double cum = 0.0;
  for (int i = 0; i < t.size(); ++i) {
    const auto& rd = t.rounds[static_cast<std::size_t>(i)];
    Eigen::VectorXd g(4);
    for (int k = 0; k < 4; ++k) {
      double s = 0;
      for (int a = 0; a < 3; ++a) s += rd.per_expert_probs(k, a) * env.feature(rd.x, a).z.dot(env.beta_star());
      g(k) = s;
    }
    cum += g.dot(rd.w_before.w()) - g(1);
    EXPECT_NEAR(r.cumulative[static_cast<std::size_t>(i)], cum, 1e-12);
    EXPECT_DOUBLE_EQ(r.bound_curve[static_cast<std::size_t>(i)], regret_bound(i + 1, 4));
  }
}

TEST(Normality, Examples) {
  const std::vector<double> constant(10, 0.3);
  const NormalitySummary c = normality_summary(constant);
  EXPECT_LT(c.variance, 1e-30);
  EXPECT_GE(c.ks_distance, 0.5);

  const std::vector<double> sym{-2.5, -1.0, -0.25, 0.25, 1.0, 2.5};
  EXPECT_EQ(normality_summary(sym).mean, 0.0);
  EXPECT_THROW(normality_summary(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Normality, KsMatchesBruteForceAndIsSmallForNormalDraws) {
  Rng rng(7);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> xs(600);
  for (double& x : xs) x = nd(rng) * 1.1 + 0.05;
  EXPECT_NEAR(normality_summary(xs).ks_distance, oracle::ks_bruteforce(xs), 1e-12);

  std::vector<double> big(100000);
  for (double& x : big) x = nd(rng);
  const NormalitySummary s = normality_summary(big);
  EXPECT_LE(s.ks_distance, 0.01);
  EXPECT_NEAR(s.mean, 0.0, 0.02);
  EXPECT_NEAR(s.variance, 1.0, 0.02);
}

TEST(Coverage, ExamplesAndSubsetIndependence) {
  const std::vector<double> alphas{0.1, 0.05};
  std::vector<TrialIntervals> all;
  for (int i = 0; i < 4; ++i) {
    TrialIntervals t;
    t.wald = {{-1, 1, true}, {0, 0, true}};
    t.aps = {{-2, 2, true}, {-3, 3, true}};
    all.push_back(t);
  }
  const auto rows = coverage_table(all, alphas);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].method, "wald");
  EXPECT_EQ(rows[2].method, "aps");
  EXPECT_EQ(rows[0].coverage, 1.0);
  EXPECT_EQ(rows[1].coverage, 1.0);
  EXPECT_EQ(rows[1].mean_width, 0.0);
  EXPECT_EQ(rows[3].mean_width, 6.0);

  Rng rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<TrialIntervals> trials;
  for (int i = 0; i < 200; ++i) {
    TrialIntervals t;
    for (std::size_t j = 0; j < alphas.size(); ++j) {
      const double lo = u(rng), hi = lo + std::abs(u(rng));
      t.wald.push_back({lo, hi, lo <= 0 && 0 <= hi});
      t.aps.push_back({lo - 1, hi + 1, lo - 1 <= 0 && 0 <= hi + 1});
    }
    trials.push_back(t);
  }
  std::vector<TrialIntervals> kept;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (rng() % 3 != 0) kept.push_back(trials[i]);
  const auto sub = coverage_table(kept, alphas);
  for (std::size_t r = 0; r < sub.size(); ++r) {
    const auto& list = sub[r].method == "wald" ? &TrialIntervals::wald : &TrialIntervals::aps;
    const std::size_t j = r % alphas.size();
    double hits = 0, width = 0;
    for (const auto& t : kept) {
      hits += (t.*list)[j].contains ? 1 : 0;
      width += (t.*list)[j].upper - (t.*list)[j].lower;
    }
    const double n = static_cast<double>(kept.size());
    EXPECT_DOUBLE_EQ(sub[r].coverage, hits / n);
    EXPECT_NEAR(sub[r].mean_width, width / n, 1e-14);
    EXPECT_DOUBLE_EQ(sub[r].coverage_se, std::sqrt(sub[r].coverage * (1 - sub[r].coverage) / n));
    EXPECT_EQ(sub[r].n_trials, static_cast<int>(kept.size()));
  }
}
