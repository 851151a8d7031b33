#include "exp4stab/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "exp4stab/bregman.hpp"
#include "exp4stab/diagnostics.hpp"
#include "exp4stab/exp4.hpp"
#include "exp4stab/format.hpp"
#include "exp4stab/inference.hpp"
#include "exp4stab/projection.hpp"
#include "exp4stab/rng.hpp"

namespace exp4stab {
namespace {

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Eigen::VectorXd positive_vector(Rng& rng, int k) {
  Eigen::VectorXd v(k);
  for (int i = 0; i < k; ++i) v(i) = std::exp(std::uniform_real_distribution<double>(-4.0, 4.0)(rng));
  return v;
}

Eigen::VectorXd random_simplex(Rng& rng, int k, double eps) {
  Eigen::VectorXd v = positive_vector(rng, k);
  v /= v.sum();
  return (v.array() * (1.0 - k * eps) + eps).matrix();
}

// Plain bisection on gamma for sum max(eps, gamma v) = 1.
Eigen::VectorXd bisection_projection(const Eigen::VectorXd& v, double eps) {
  double lo = 0.0, hi = 1.0 / v.minCoeff();
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double s = (mid * v.array()).max(eps).sum();
    (s > 1.0 ? hi : lo) = mid;
  }
  return (0.5 * (lo + hi) * v.array()).max(eps).matrix();
}

SelftestResult make(const std::string& name, double worst, double tol, const char* what) {
  std::ostringstream d;
  d << what << " " << format_double(worst) << " (tolerance " << format_double(tol) << ")";
  return {name, worst <= tol, d.str()};
}

}  // namespace

std::vector<SelftestResult> run_selftest(std::uint64_t seed, int instances) {
  Rng rng = make_rng(seed, StreamPurpose::kSelftest, 0);
  std::vector<SelftestResult> out;
  std::uniform_int_distribution<int> kdist(2, 6);

  {
    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
      const int k = kdist(rng);
      const double eps = uniform01(rng) / k;
      const Eigen::VectorXd v = positive_vector(rng, k);
      worst = std::max(worst, (kl_project_eps_simplex(v, eps).w() - bisection_projection(v, eps)).cwiseAbs().maxCoeff());
    }
    out.push_back(make("projection_matches_bisection", worst, 1e-6, "max abs error"));
  }
  {
    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
      const int k = kdist(rng);
      const double eps = uniform01(rng) / k;
      const Eigen::VectorXd v = positive_vector(rng, k);
      const double c = std::exp(std::uniform_real_distribution<double>(-7.0, 7.0)(rng));
      worst = std::max(worst,
                       (kl_project_eps_simplex(c * v, eps).w() - kl_project_eps_simplex(v, eps).w()).cwiseAbs().maxCoeff());
    }
    out.push_back(make("projection_scale_invariance", worst, 1e-10, "max abs error"));
  }
  {
    double three = 0.0, pyth = 0.0, fenchel = 0.0;
    for (int i = 0; i < instances; ++i) {
      const int k = kdist(rng);
      const Eigen::VectorXd x = random_simplex(rng, k, 0.0), xp = random_simplex(rng, k, 0.0),
                            y = random_simplex(rng, k, 0.0);
      const double lhs = (grad_mirror_phi(x) - grad_mirror_phi(xp)).dot(x - y);
      const double rhs = bregman_div_phi(y, x) - bregman_div_phi(y, xp) + bregman_div_phi(x, xp);
      three = std::max(three, std::abs(lhs - rhs));
      fenchel = std::max(fenchel, std::abs(bregman_div_phi(x, y) -
                                           bregman_div_phi_dual(grad_mirror_phi(y), grad_mirror_phi(x))));
      const double eps = uniform01(rng) / k;
      const Eigen::VectorXd u = random_simplex(rng, k, eps);
      const Eigen::VectorXd wp = positive_vector(rng, k);
      const Eigen::VectorXd p = kl_project_eps_simplex(wp, eps).w();
      pyth = std::max(pyth, bregman_div_phi(u, p) + bregman_div_phi(p, wp) - bregman_div_phi(u, wp));
    }
    out.push_back(make("three_point_identity", three, 1e-10, "max abs error"));
    out.push_back(make("pythagorean_inequality", pyth, 1e-10, "max violation"));
    out.push_back(make("fenchel_dual_divergence", fenchel, 1e-10, "max abs error"));
  }
  {
    double unbiased = 0.0, local = -1e300;
    for (int i = 0; i < instances; ++i) {
      const int k = kdist(rng), a = kdist(rng);
      const double eps = uniform01(rng) / k;
      const Eigen::VectorXd w = random_simplex(rng, k, eps);
      Eigen::MatrixXd pi(k, a);
      for (int j = 0; j < k; ++j) {
        const Eigen::VectorXd row = random_simplex(rng, a, 0.0);
        pi.row(j) = row.transpose();
      }
      Eigen::VectorXd loss(a);
      for (int b = 0; b < a; ++b) loss(b) = std::uniform_real_distribution<double>(-1.1, 1.1)(rng);
      const Eigen::VectorXd q = mixture_probs(w, pi);
      Eigen::VectorXd expect = Eigen::VectorXd::Zero(k);
      double norm = 0.0;
      for (int b = 0; b < a; ++b) {
        const Eigen::VectorXd g = ips_estimate(loss(b), pi.col(b), q(b));
        expect += q(b) * g;
        norm += q(b) * local_dual_norm_sq(g, w);
      }
      unbiased = std::max(unbiased, (expect - pi * loss).cwiseAbs().maxCoeff());
      local = std::max(local, norm - a * loss.cwiseAbs2().maxCoeff());
    }
    out.push_back(make("ips_unbiased", unbiased, 1e-12, "max abs error"));
    out.push_back(make("local_norm_bound", local, 0.0, "max excess"));
  }
  {
    // Noiseless recovery on a short softmax episode.
    Rng beta_rng = make_rng(seed, StreamPurpose::kSelftest, 1);
    const int a = 3, dx = 4, k = 3, horizon = a * dx + 50;
    LinearEnv env(a, dx, make_beta_star(beta_rng, a, dx), 0.0);
    std::vector<ExpertPolicy> ex;
    for (int j = 0; j < k; ++j) ex.emplace_back(draw_softmax_expert(beta_rng, a, dx, 1.0));
    const ExpertSet experts(std::move(ex));
    const Exp4Params params = Exp4Params::defaults(k, a, horizon);
    const Trajectory traj = run_episode(env, experts, params, beta_rng);
    GramAccumulator acc(env.dim());
    for (const auto& r : traj.rounds) acc.accumulate(r.z, r.loss);
    try {
      const EstimateBundle b = ols(acc);
      const double err = std::max((b.beta_hat - env.beta_star()).cwiseAbs().maxCoeff(), b.sigma_hat);
      out.push_back(make("noiseless_recovery", err, 1e-8, "max(|beta_hat - beta*|, sigma_hat)"));
    } catch (const SingularDesign& e) {
      out.push_back({"noiseless_recovery", false, e.what()});
    }

    const Eigen::VectorXd y = smoothed_vertex(k, 0, params.eps_floor);
    const double gap = min_master_inequality_gap(traj, y, params);
    out.push_back(make("master_inequality", -gap, 1e-9, "largest violation"));
  }
  return out;
}

}  // namespace exp4stab
