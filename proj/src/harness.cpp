#include "exp4stab/harness.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "exp4stab/format.hpp"
#include "exp4stab/inference.hpp"
#include "exp4stab/parallel.hpp"

namespace exp4stab {

ExpertSet build_experts(const ExperimentConfig& config, Rng& rng) {
  const int k = config.num_experts.value();
  const int a = config.num_actions.value();
  const int dx = config.context_dim.value();
  if (config.setting == Setting::kCustom) {
    std::ifstream in(config.expert_file);
    if (!in) throw ConfigError(config.expert_file + ": cannot open expert file");
    return load_experts(in);
  }
  std::vector<ExpertPolicy> experts;
  const int drawn = config.include_uniform ? k - 1 : k;
  NeuralShape shape;
  shape.hidden = config.neural_hidden;
  shape.num_layers = config.neural_layers;
  shape.weight_variance = config.neural_weight_variance.value();
  shape.bias_variance = config.neural_bias_variance;
  shape.fan_in_scaling = config.neural_fan_in_scaling;
  for (int i = 0; i < drawn; ++i) {
    if (config.setting == Setting::kSoftmax)
      experts.emplace_back(draw_softmax_expert(rng, a, dx, config.softmax_weight_variance));
    else
      experts.emplace_back(draw_neural_expert(rng, dx, a, shape));
  }
  if (config.include_uniform) experts.emplace_back(UniformExpert(a));
  return ExpertSet(std::move(experts));
}

ExperimentSetup build_setup(const ExperimentConfig& config, int workers, std::uint64_t expert_index) {
  const ExperimentConfig r = config.resolve();
  const Exp4Params params = r.exp4_params();
  Rng beta_rng = make_rng(r.master_seed, StreamPurpose::kBetaStar, 0);
  LinearEnv env(*r.num_actions, *r.context_dim, make_beta_star(beta_rng, *r.num_actions, *r.context_dim),
                r.noise_half_width, r.noise_law);
  Rng expert_rng = make_rng(r.master_seed, StreamPurpose::kExperts, expert_index);
  ExpertSet experts = build_experts(r, expert_rng);
  if (experts.size() != *r.num_experts || experts.num_actions() != *r.num_actions)
    throw ConfigError("expert set does not match K / A");
  PopulationMoments moments =
      estimate_moments(experts, env, r.n_moment_samples,
                       derive_seed(r.master_seed, StreamPurpose::kMoments, expert_index), workers);
  WeightState w_star = penalized_opt_weight(moments.gbar, params);
  Eigen::MatrixXd sigma_star = sigma_star_T(moments, w_star, params.horizon);
  return ExperimentSetup{r, params, std::move(env), std::move(experts), std::move(moments), std::move(w_star),
                         std::move(sigma_star)};
}

namespace {

Eigen::VectorXd draw_direction(Rng& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd a(dim);
  for (int i = 0; i < dim; ++i) a(i) = normal(rng);
  return a / a.norm();
}

IntervalOutcome outcome(const Interval& iv, double target) {
  IntervalOutcome o;
  o.lower = iv.lower();
  o.upper = iv.upper();
  o.contains = o.lower <= target && target <= o.upper;
  return o;
}

}  // namespace

TrialSummary run_trial(const ExperimentSetup& setup, int trial_index, std::vector<double>* regret_curve) {
  const ExperimentConfig& c = setup.config;
  Rng rng = make_rng(c.master_seed, StreamPurpose::kTrial, static_cast<std::uint64_t>(trial_index));
  const Trajectory traj = run_episode(setup.env, setup.experts, setup.params, rng);

  GramAccumulator acc(setup.env.dim());
  for (const auto& r : traj.rounds) acc.accumulate(r.z, r.loss);

  EstimateBundle bundle;
  if (c.estimator == EstimatorKind::kOls) {
    try {
      bundle = ols(acc, c.sigma_normalization);
    } catch (const SingularDesign& e) {
      throw SingularDesign("trial " + std::to_string(trial_index) + ": " + e.what());
    }
  } else {
    bundle = ridge(acc, *c.lambda_rid, c.sigma_normalization);
  }
  const EstimateBundle aps_fit = ridge(acc, c.aps_lambda, c.sigma_normalization);

  Rng dir_rng = make_rng(c.master_seed, StreamPurpose::kDirection,
                         c.freeze_direction ? 0 : static_cast<std::uint64_t>(trial_index));
  TrialSummary s;
  s.trial_index = trial_index;
  s.direction = draw_direction(dir_rng, setup.env.dim());
  s.beta_hat = bundle.beta_hat;
  s.target = s.direction.dot(setup.env.beta_star());
  s.estimate = s.direction.dot(bundle.beta_hat);
  s.sigma_hat = bundle.sigma_hat;
  s.pivot = bundle.sigma_hat > 0.0 ? standardized_stat(s.direction, bundle, acc, setup.env.beta_star())
                                   : std::numeric_limits<double>::quiet_NaN();

  const DesignSolver solver(design_matrix(acc, bundle));
  const double quad = solver.inverse_quadratic_form(s.direction);
  for (double alpha : c.alphas) {
    s.intervals.wald.push_back(outcome(wald_interval_from(s.estimate, bundle.sigma_hat, quad, alpha), s.target));
    s.intervals.aps.push_back(outcome(aps_interval(s.direction, aps_fit, acc, c.aps_lambda, alpha,
                                                   c.aps_feature_bound, c.aps_param_bound),
                                      s.target));
  }

  const RegretReport regret = regret_trace(traj, setup.moments.gbar, setup.env, setup.experts);
  s.final_regret = regret.cumulative.empty() ? 0.0 : regret.cumulative.back();
  if (regret_curve) *regret_curve = regret.cumulative;

  try {
    s.stability_error = stability_error(acc.gram(), setup.sigma_star);
  } catch (const std::domain_error&) {
    s.stability_error = std::numeric_limits<double>::quiet_NaN();
  }
  s.weight_drift = weight_drift(traj, setup.w_star);
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& config, int workers) {
  if (config.horizon < 1) throw ConfigError("T must be at least 1 (empty trajectory)");
  const ExperimentSetup shared = build_setup(config, workers, 0);
  const ExperimentConfig& r = shared.config;
  const int n = r.n_runs;
  const int horizon = r.horizon;

  std::vector<TrialSummary> trials(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> curves(static_cast<std::size_t>(n));
  // With redraw_experts each trial builds its own setup; moment estimation
  // then runs serially inside the trial.
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
    const int idx = static_cast<int>(i);
    if (r.redraw_experts) {
      const ExperimentSetup own = build_setup(r, 1, i + 1);
      trials[i] = run_trial(own, idx, &curves[i]);
    } else {
      trials[i] = run_trial(shared, idx, &curves[i]);
    }
  });

  ExperimentResult out;
  out.config = r;
  out.params = shared.params;
  out.beta_star = shared.env.beta_star();
  out.gbar = shared.moments.gbar;
  out.w_star = shared.w_star.w();
  out.moments_hash = hash_moments(shared.moments);
  out.trials = std::move(trials);

  std::vector<TrialIntervals> iv;
  std::vector<double> pivots;
  iv.reserve(out.trials.size());
  for (const auto& t : out.trials) {
    iv.push_back(t.intervals);
    pivots.push_back(t.pivot);
  }
  out.coverage = coverage_table(iv, r.alphas);
  if (pivots.size() >= 2) out.normality = normality_summary(pivots);

  out.mean_regret.assign(static_cast<std::size_t>(horizon), 0.0);
  for (const auto& c : curves)
    for (int t = 0; t < horizon; ++t) out.mean_regret[static_cast<std::size_t>(t)] += c[static_cast<std::size_t>(t)];
  for (double& v : out.mean_regret) v /= n;
  out.regret_bound.resize(static_cast<std::size_t>(horizon));
  for (int t = 1; t <= horizon; ++t) out.regret_bound[static_cast<std::size_t>(t - 1)] = regret_bound(t, r.num_experts.value());
  return out;
}

std::string hash_moments(const PopulationMoments& moments) {
  std::uint64_t h = 14695981039346656037ULL;
  auto feed = [&h](const double* data, Eigen::Index count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& s : moments.sigma) feed(s.data(), s.size());
  feed(moments.gbar.data(), moments.gbar.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  return format_double(v);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::string alpha_tag(double a) { return format_double(a); }

nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json root = nlohmann::ordered_json::object();
  std::istringstream in(serialize_config(c));
  std::string line, section;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      root[section] = nlohmann::ordered_json::object();
      continue;
    }
    const auto eq = line.find(" = ");
    std::string value = line.substr(eq + 3);
    if (value.size() >= 2 && value.front() == '"') value = value.substr(1, value.size() - 2);
    root[section][line.substr(0, eq)] = value;
  }
  return root;
}

}  // namespace

void write_results(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& alphas = result.config.alphas;

  {
    std::string s = "trial,target,estimate,sigma_hat,pivot,final_regret,op_error,weight_drift";
    for (const char* m : {"wald", "aps"})
      for (double a : alphas)
        s += std::string(",") + m + "_lower_" + alpha_tag(a) + "," + m + "_upper_" + alpha_tag(a) + "," + m +
             "_contains_" + alpha_tag(a);
    s += '\n';
    for (const auto& t : result.trials) {
      s += std::to_string(t.trial_index) + "," + fmt(t.target) + "," + fmt(t.estimate) + "," + fmt(t.sigma_hat) +
           "," + fmt(t.pivot) + "," + fmt(t.final_regret) + "," + fmt(t.stability_error) + "," +
           fmt(t.weight_drift);
      for (const auto* v : {&t.intervals.wald, &t.intervals.aps})
        for (const auto& o : *v)
          s += "," + fmt(o.lower) + "," + fmt(o.upper) + "," + (o.contains ? "1" : "0");
      s += '\n';
    }
    write_file(dir / "trials.csv", s);
  }
  {
    std::string s = "method,alpha,coverage,coverage_se,mean_width,n_trials\n";
    for (const auto& row : result.coverage)
      s += row.method + "," + fmt(row.alpha) + "," + fmt(row.coverage) + "," + fmt(row.coverage_se) + "," +
           fmt(row.mean_width) + "," + std::to_string(row.n_trials) + "\n";
    write_file(dir / "coverage.csv", s);
  }
  {
    std::string s = "trial,pivot\n";
    for (const auto& t : result.trials) s += std::to_string(t.trial_index) + "," + fmt(t.pivot) + "\n";
    write_file(dir / "histogram.csv", s);
  }
  {
    std::string s = "t,mean_regret,bound\n";
    for (std::size_t t = 0; t < result.mean_regret.size(); ++t)
      s += std::to_string(t + 1) + "," + fmt(result.mean_regret[t]) + "," + fmt(result.regret_bound[t]) + "\n";
    write_file(dir / "regret.csv", s);
  }
  {
    std::string s = "trial,op_error,weight_drift\n";
    for (const auto& t : result.trials)
      s += std::to_string(t.trial_index) + "," + fmt(t.stability_error) + "," + fmt(t.weight_drift) + "\n";
    write_file(dir / "stability.csv", s);
  }
  {
    const ExperimentConfig& c = result.config;
    nlohmann::ordered_json m;
    m["version"] = kVersion;
    m["config"] = config_json(c);
    m["config_text"] = serialize_config(c);
    nlohmann::ordered_json seeds;
    seeds["master_seed"] = c.master_seed;
    seeds["beta_star_seed"] = derive_seed(c.master_seed, StreamPurpose::kBetaStar, 0);
    seeds["experts_seed"] = derive_seed(c.master_seed, StreamPurpose::kExperts, 0);
    seeds["moments_seed"] = derive_seed(c.master_seed, StreamPurpose::kMoments, 0);
    seeds["trial_seed_rule"] = "derive_seed(master_seed, trial=4, i)";
    seeds["direction_seed_rule"] =
        c.freeze_direction ? "derive_seed(master_seed, direction=5, 0)" : "derive_seed(master_seed, direction=5, i)";
    m["seeds"] = seeds;
    nlohmann::ordered_json params;
    params["eta"] = fmt(result.params.eta);
    params["lambda_pen"] = fmt(result.params.lambda_pen);
    params["eps_floor"] = fmt(result.params.eps_floor);
    params["gamma"] = fmt(result.params.gamma);
    m["algorithm_params"] = params;
    nlohmann::ordered_json mom;
    mom["hash_fnv1a64"] = result.moments_hash;
    mom["n_samples"] = c.n_moment_samples;
    std::vector<std::string> gbar, wstar;
    for (Eigen::Index k = 0; k < result.gbar.size(); ++k) gbar.push_back(fmt(result.gbar(k)));
    for (Eigen::Index k = 0; k < result.w_star.size(); ++k) wstar.push_back(fmt(result.w_star(k)));
    mom["gbar"] = gbar;
    mom["w_star"] = wstar;
    m["moments"] = mom;
    nlohmann::ordered_json norm;
    norm["mean"] = fmt(result.normality.mean);
    norm["variance"] = fmt(result.normality.variance);
    norm["ks_distance"] = fmt(result.normality.ks_distance);
    m["pivot_summary"] = norm;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
  }
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  const int k = traj.rounds.empty() ? 0 : static_cast<int>(traj.rounds.front().w_before.size());
  out << "t,action,loss";
  for (int i = 1; i <= k; ++i) out << ",w_" << i;
  out << '\n';
  int t = 1;
  for (const auto& r : traj.rounds) {
    out << t++ << ',' << r.action << ',' << fmt(r.loss);
    for (int i = 0; i < k; ++i) out << ',' << fmt(r.w_before.w()(i));
    out << '\n';
  }
}

}  // namespace exp4stab
