#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "exp4stab/config.hpp"
#include "exp4stab/diagnostics.hpp"
#include "exp4stab/environment.hpp"
#include "exp4stab/exp4.hpp"
#include "exp4stab/experts.hpp"

namespace exp4stab {

inline constexpr const char* kVersion = "0.1.0";

/// State shared by every trial of an experiment: beta*, the experts and their
/// population moments, w*_T and Sigma*_T. Built from dedicated seed streams
/// (kBetaStar/0, kExperts/0, kMoments/0).
struct ExperimentSetup {
  ExperimentConfig config;  // resolved
  Exp4Params params;
  LinearEnv env;
  ExpertSet experts;
  PopulationMoments moments;
  WeightState w_star;
  Eigen::MatrixXd sigma_star;
};

/// Draws (or loads) the K experts for `config` (resolved) from `rng`.
ExpertSet build_experts(const ExperimentConfig& config, Rng& rng);

/// Shared state for experts drawn from stream index `expert_index`
/// (0 for the per-experiment set, i + 1 for trial i under redraw_experts).
ExperimentSetup build_setup(const ExperimentConfig& config, int workers, std::uint64_t expert_index = 0);

struct TrialSummary {
  int trial_index = 0;
  Eigen::VectorXd direction;
  Eigen::VectorXd beta_hat;
  double target = 0.0;    // a . beta*
  double estimate = 0.0;  // a . beta_hat
  double sigma_hat = 0.0;
  double pivot = 0.0;
  TrialIntervals intervals;
  double final_regret = 0.0;
  double stability_error = 0.0;  // NaN when Sigma*_T is singular
  double weight_drift = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;  // resolved
  Exp4Params params;
  Eigen::VectorXd beta_star;
  Eigen::VectorXd gbar;
  Eigen::VectorXd w_star;
  std::string moments_hash;
  std::vector<TrialSummary> trials;
  std::vector<CoverageRow> coverage;
  NormalitySummary normality;
  std::vector<double> mean_regret;  // t = 1..T
  std::vector<double> regret_bound;
};

/// Trial i: episode from make_rng(master, kTrial, i), direction from
/// make_rng(master, kDirection, i) (index 0 for every trial when
/// freeze_direction is set).
TrialSummary run_trial(const ExperimentSetup& setup, int trial_index, std::vector<double>* regret_curve = nullptr);

/// Runs config.n_runs trials on `workers` threads. The result does not depend
/// on `workers`. Throws ConfigError for T = 0 or an infeasible eps, and
/// SingularDesign when an OLS Gram matrix is singular.
ExperimentResult run_experiment(const ExperimentConfig& config, int workers);

/// Writes trials.csv, coverage.csv, histogram.csv, regret.csv, stability.csv
/// and manifest.json into `dir` (created if missing).
void write_results(const ExperimentResult& result, const std::filesystem::path& dir);

/// FNV-1a over the raw bytes of Sigma_k (k = 1..K) then gbar, as 16 hex digits.
std::string hash_moments(const PopulationMoments& moments);

/// Row-per-round CSV: t,action,loss,w_1..w_K (w_t before the update).
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);

}  // namespace exp4stab
