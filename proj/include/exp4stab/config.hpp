#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "exp4stab/environment.hpp"
#include "exp4stab/exp4.hpp"
#include "exp4stab/inference.hpp"

namespace exp4stab {

/// Parse/validation failure; `what()` carries "<source>:<line>: message"
/// for the text format.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class Setting { kSoftmax, kNeural, kCustom };

/// Experiment description. Optional fields left empty mean "derive from the
/// setting or the horizon"; resolve() fills them in.
struct ExperimentConfig {
  // [experiment]
  Setting setting = Setting::kSoftmax;
  int horizon = 3000;
  std::optional<int> num_experts;
  std::optional<int> num_actions;
  std::optional<int> context_dim;
  int n_runs = 1200;
  std::uint64_t master_seed = 20240917;
  double noise_half_width = 0.1;
  NoiseLaw noise_law = NoiseLaw::kUniform;

  // [experts]
  double softmax_weight_variance = 12.0;
  int neural_hidden = 64;
  int neural_layers = 6;
  std::optional<double> neural_weight_variance;
  double neural_bias_variance = 1.0;
  bool neural_fan_in_scaling = false;
  bool include_uniform = false;
  std::string expert_file;
  bool redraw_experts = false;

  // [algorithm]
  UpdateRule update_rule = UpdateRule::kAnalysis;
  EtaDenominator eta_denominator = EtaDenominator::kActions;
  std::optional<double> eta;
  std::optional<double> lambda_pen;
  std::optional<double> eps_floor;

  // [inference]
  std::vector<double> alphas{0.20, 0.15, 0.10, 0.05, 0.01};
  EstimatorKind estimator = EstimatorKind::kOls;
  std::optional<double> lambda_rid;
  SigmaNormalization sigma_normalization = SigmaNormalization::kN;
  double aps_lambda = 1.0;
  double aps_feature_bound = 1.0;
  double aps_param_bound = 1.0;
  bool freeze_direction = false;

  // [run]
  long n_moment_samples = 100000;
  std::optional<int> worker_count;  // empty = auto
  std::string output_dir = "results";

  bool operator==(const ExperimentConfig&) const = default;

  /// Copy with every optional populated (expert-file dimensions are read if
  /// the setting is custom). Throws ConfigError on inconsistent values.
  ExperimentConfig resolve() const;

  /// Algorithm parameters for the resolved configuration.
  Exp4Params exp4_params() const;

  int feature_dim() const { return num_actions.value() * context_dim.value(); }
};

/// Parses the sectioned `key = value` text format, or JSON when the first
/// non-blank character is '{'. Unknown keys and out-of-range values raise
/// ConfigError naming the line.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>");

/// Text form accepted by parse_config_text; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Worker count after applying, in increasing priority: config value,
/// EXP4STAB_WORKERS, explicit override. "auto" (or an override of 0) maps to
/// hardware concurrency.
int resolve_workers(const ExperimentConfig& config, std::optional<int> override_workers = std::nullopt);

std::string to_string(Setting s);
std::string to_string(UpdateRule r);
std::string to_string(EtaDenominator d);
std::string to_string(EstimatorKind k);
std::string to_string(SigmaNormalization n);
std::string to_string(NoiseLaw n);

}  // namespace exp4stab
