#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "exp4stab/config.hpp"
#include "exp4stab/format.hpp"
#include "exp4stab/harness.hpp"
#include "exp4stab/inference.hpp"
#include "exp4stab/selftest.hpp"

using namespace exp4stab;

namespace {

std::optional<int> parse_workers(const std::string& v) {
  if (v.empty() || v == "auto") return 0;  // 0 = auto, overrides config/env
  try {
    const int n = std::stoi(v);
    if (n < 1) throw std::invalid_argument("");
    return n;
  } catch (const std::exception&) {
    throw ConfigError("--workers expects a positive integer or 'auto', got '" + v + "'");
  }
}

ExperimentConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  ExperimentConfig c = parse_config(path);
  if (seed) c.master_seed = *seed;
  return c;
}

int cmd_run(const std::string& path, const std::string& out_dir, std::optional<std::uint64_t> seed,
            const std::string& workers_arg) {
  ExperimentConfig c = load(path, seed);
  std::optional<int> override_workers;
  if (!workers_arg.empty()) override_workers = parse_workers(workers_arg);
  const int workers = resolve_workers(c, override_workers);
  const std::string dir = out_dir.empty() ? c.output_dir : out_dir;
  const ExperimentResult r = run_experiment(c, workers);
  write_results(r, dir);
  std::cout << "wrote " << r.trials.size() << " trials to " << dir << "\n";
  for (const auto& row : r.coverage)
    std::cout << row.method << " alpha=" << format_double(row.alpha) << " coverage=" << format_double(row.coverage)
              << " mean_width=" << format_double(row.mean_width) << "\n";
  std::cout << "pivot mean=" << format_double(r.normality.mean) << " var=" << format_double(r.normality.variance)
            << " ks=" << format_double(r.normality.ks_distance) << "\n";
  return 0;
}

int cmd_moments(const std::string& path, std::optional<std::uint64_t> seed, const std::string& workers_arg) {
  const ExperimentConfig c = load(path, seed);
  std::optional<int> override_workers;
  if (!workers_arg.empty()) override_workers = parse_workers(workers_arg);
  const ExperimentSetup s = build_setup(c, resolve_workers(c, override_workers));
  const Eigen::IOFormat csv(Eigen::FullPrecision, Eigen::DontAlignCols, ",", "\n");
  for (std::size_t k = 0; k < s.moments.sigma.size(); ++k) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.moments.sigma[k], Eigen::EigenvaluesOnly);
    std::cout << "# Sigma_" << k + 1 << " (" << s.moments.sigma[k].rows() << "x" << s.moments.sigma[k].cols()
              << ", lambda_min=" << format_double(es.eigenvalues()(0)) << ")\n"
              << s.moments.sigma[k].format(csv) << "\n";
  }
  std::cout << "# gbar\n";
  for (Eigen::Index k = 0; k < s.moments.gbar.size(); ++k)
    std::cout << (k ? "," : "") << format_double(s.moments.gbar(k));
  std::cout << "\n# w_star\n";
  for (Eigen::Index k = 0; k < s.w_star.w().size(); ++k)
    std::cout << (k ? "," : "") << format_double(s.w_star.w()(k));
  const double floor = s.moments.lambda_floor();
  std::cout << "\n# lambda_floor\n" << format_double(floor) << "\n";
  std::cout << "# hash\n" << hash_moments(s.moments) << "\n";
  if (floor <= 1e-6)
    std::cerr << "warning: lambda_floor " << format_double(floor)
              << " <= 1e-6; some Sigma_k is near singular, consider estimator = ridge\n";
  return 0;
}

int cmd_selftest(std::uint64_t seed) {
  int failed = 0;
  for (const auto& r : run_selftest(seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    failed += r.passed ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

int cmd_trace(const std::string& path, std::optional<std::uint64_t> seed, int trial, const std::string& out) {
  const ExperimentConfig c = load(path, seed);
  const ExperimentSetup s = build_setup(c, resolve_workers(c));
  Rng rng = make_rng(s.config.master_seed, StreamPurpose::kTrial, static_cast<std::uint64_t>(trial));
  const Trajectory traj = run_episode(s.env, s.experts, s.params, rng);
  if (out.empty() || out == "-") {
    write_trajectory_csv(traj, std::cout);
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error(out + ": cannot write");
    write_trajectory_csv(traj, f);
  }
  return 0;
}

int cmd_dump_experts(const std::string& path, std::optional<std::uint64_t> seed) {
  const ExperimentConfig r = load(path, seed).resolve();
  Rng rng = make_rng(r.master_seed, StreamPurpose::kExperts, 0);
  save_experts(std::cout, build_experts(r, rng));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exp4stab: penalized EXP4 and inference under adaptive sampling"};
  app.require_subcommand(1);

  std::string config_path, out_dir, workers_arg, trace_out;
  std::optional<std::uint64_t> seed;
  std::uint64_t selftest_seed = 1;
  int trial = 0;

  auto* run = app.add_subcommand("run", "run a Monte-Carlo experiment and write result files");
  run->add_option("--config", config_path, "config file (sectioned key = value, or JSON)")->required();
  run->add_option("--out", out_dir, "output directory (default: output_dir from config)");
  run->add_option("--seed", seed, "override master_seed");
  run->add_option("--workers", workers_arg, "worker threads: n or auto");

  auto* moments = app.add_subcommand("moments", "print Sigma_k, gbar*, w*_T and lambda_floor");
  moments->add_option("--config", config_path, "config file")->required();
  moments->add_option("--seed", seed, "override master_seed");
  moments->add_option("--workers", workers_arg, "worker threads: n or auto");

  auto* selftest = app.add_subcommand("selftest", "run the invariant suite");
  selftest->add_option("--seed", selftest_seed, "seed for the random instances");

  auto* trace = app.add_subcommand("trace", "dump one trajectory as CSV (t,action,loss,w_1..w_K)");
  trace->add_option("--config", config_path, "config file")->required();
  trace->add_option("--seed", seed, "override master_seed");
  trace->add_option("--trial", trial, "trial index")->check(CLI::NonNegativeNumber);
  trace->add_option("--out", trace_out, "output file (default stdout)");

  auto* dump = app.add_subcommand("dump-experts", "write the drawn experts in the expert-file format");
  dump->add_option("--config", config_path, "config file")->required();
  dump->add_option("--seed", seed, "override master_seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir, seed, workers_arg);
    if (*moments) return cmd_moments(config_path, seed, workers_arg);
    if (*selftest) return cmd_selftest(selftest_seed);
    if (*trace) return cmd_trace(config_path, seed, trial, trace_out);
    if (*dump) return cmd_dump_experts(config_path, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
