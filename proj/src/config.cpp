#include "exp4stab/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "exp4stab/experts.hpp"
#include "exp4stab/format.hpp"

namespace exp4stab {

std::string to_string(Setting s) {
  switch (s) {
    case Setting::kSoftmax: return "softmax";
    case Setting::kNeural: return "neural";
    case Setting::kCustom: return "custom";
  }
  return "?";
}
std::string to_string(UpdateRule r) { return r == UpdateRule::kAnalysis ? "analysis" : "algorithm1"; }
std::string to_string(EtaDenominator d) { return d == EtaDenominator::kActions ? "A" : "K"; }
std::string to_string(EstimatorKind k) { return k == EstimatorKind::kOls ? "ols" : "ridge"; }
std::string to_string(SigmaNormalization n) { return n == SigmaNormalization::kN ? "n" : "n-d"; }
std::string to_string(NoiseLaw n) { return n == NoiseLaw::kUniform ? "uniform" : "rademacher"; }

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Value parsers throw std::invalid_argument with a short reason; the caller
// prefixes the location.
long long parse_int(const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw std::invalid_argument("expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw std::invalid_argument("expected an unsigned 64-bit integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

bool is_auto(const std::string& v) { return lower(v) == "auto"; }

int positive_int(const std::string& v, const char* what) {
  const long long x = parse_int(v);
  if (x < 1 || x > 1'000'000'000) throw std::invalid_argument(std::string(what) + " must be a positive integer");
  return static_cast<int>(x);
}

double positive_real(const std::string& v, const char* what) {
  const double x = parse_double(v);
  if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be positive");
  return x;
}

double nonneg_real(const std::string& v, const char* what) {
  const double x = parse_double(v);
  if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be nonnegative");
  return x;
}

std::vector<double> parse_alphas(std::string v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](char c) { return c == '[' || c == ']'; }), v.end());
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    const double a = parse_double(t);
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("alpha " + t + " is out of range (0, 1)");
    out.push_back(a);
  }
  if (out.empty()) throw std::invalid_argument("alphas must list at least one level");
  return out;
}

template <typename T>
std::string opt_str(const std::optional<T>& v) {
  if (!v) return "auto";
  if constexpr (std::is_floating_point_v<T>) return format_double(*v);
  else return std::to_string(*v);
}

struct KeyDef {
  const char* section;
  const char* name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeyDef>& key_table() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::vector<KeyDef> table = {
      {"experiment", "setting",
       [](C& c, S v) {
         const std::string l = lower(v);
         if (l == "softmax") c.setting = Setting::kSoftmax;
         else if (l == "neural") c.setting = Setting::kNeural;
         else if (l == "custom") c.setting = Setting::kCustom;
         else throw std::invalid_argument("setting must be softmax, neural or custom");
       },
       [](const C& c) { return to_string(c.setting); }},
      {"experiment", "T",
       [](C& c, S v) {
         const long long t = parse_int(v);
         if (t < 0 || t > 100'000'000) throw std::invalid_argument("T must be a nonnegative integer");
         c.horizon = static_cast<int>(t);
       },
       [](const C& c) { return std::to_string(c.horizon); }},
      {"experiment", "K",
       [](C& c, S v) { c.num_experts = is_auto(v) ? std::nullopt : std::optional(positive_int(v, "K")); },
       [](const C& c) { return opt_str(c.num_experts); }},
      {"experiment", "A",
       [](C& c, S v) { c.num_actions = is_auto(v) ? std::nullopt : std::optional(positive_int(v, "A")); },
       [](const C& c) { return opt_str(c.num_actions); }},
      {"experiment", "d_x",
       [](C& c, S v) { c.context_dim = is_auto(v) ? std::nullopt : std::optional(positive_int(v, "d_x")); },
       [](const C& c) { return opt_str(c.context_dim); }},
      {"experiment", "n_runs", [](C& c, S v) { c.n_runs = positive_int(v, "n_runs"); },
       [](const C& c) { return std::to_string(c.n_runs); }},
      {"experiment", "master_seed", [](C& c, S v) { c.master_seed = parse_u64(v); },
       [](const C& c) { return std::to_string(c.master_seed); }},
      {"experiment", "noise_half_width",
       [](C& c, S v) { c.noise_half_width = nonneg_real(v, "noise_half_width"); },
       [](const C& c) { return format_double(c.noise_half_width); }},
      {"experiment", "noise_law",
       [](C& c, S v) {
         const std::string l = lower(v);
         if (l == "uniform") c.noise_law = NoiseLaw::kUniform;
         else if (l == "rademacher") c.noise_law = NoiseLaw::kRademacher;
         else throw std::invalid_argument("noise_law must be uniform or rademacher");
       },
       [](const C& c) { return to_string(c.noise_law); }},

      {"experts", "softmax_weight_variance",
       [](C& c, S v) { c.softmax_weight_variance = positive_real(v, "softmax_weight_variance"); },
       [](const C& c) { return format_double(c.softmax_weight_variance); }},
      {"experts", "neural_hidden", [](C& c, S v) { c.neural_hidden = positive_int(v, "neural_hidden"); },
       [](const C& c) { return std::to_string(c.neural_hidden); }},
      {"experts", "neural_layers", [](C& c, S v) { c.neural_layers = positive_int(v, "neural_layers"); },
       [](const C& c) { return std::to_string(c.neural_layers); }},
      {"experts", "neural_weight_variance",
       [](C& c, S v) {
         c.neural_weight_variance =
             is_auto(v) ? std::nullopt : std::optional(positive_real(v, "neural_weight_variance"));
       },
       [](const C& c) { return opt_str(c.neural_weight_variance); }},
      {"experts", "neural_bias_variance",
       [](C& c, S v) { c.neural_bias_variance = nonneg_real(v, "neural_bias_variance"); },
       [](const C& c) { return format_double(c.neural_bias_variance); }},
      {"experts", "neural_fan_in_scaling", [](C& c, S v) { c.neural_fan_in_scaling = parse_bool(v); },
       [](const C& c) { return std::string(c.neural_fan_in_scaling ? "true" : "false"); }},
      {"experts", "include_uniform", [](C& c, S v) { c.include_uniform = parse_bool(v); },
       [](const C& c) { return std::string(c.include_uniform ? "true" : "false"); }},
      {"experts", "expert_file", [](C& c, S v) { c.expert_file = v; },
       [](const C& c) { return c.expert_file; }},
      {"experts", "redraw_experts", [](C& c, S v) { c.redraw_experts = parse_bool(v); },
       [](const C& c) { return std::string(c.redraw_experts ? "true" : "false"); }},

      {"algorithm", "update_rule",
       [](C& c, S v) {
         const std::string l = lower(v);
         if (l == "analysis") c.update_rule = UpdateRule::kAnalysis;
         else if (l == "algorithm1") c.update_rule = UpdateRule::kAlgorithm1;
         else throw std::invalid_argument("update_rule must be analysis or algorithm1");
       },
       [](const C& c) { return to_string(c.update_rule); }},
      {"algorithm", "eta_denominator",
       [](C& c, S v) {
         if (v == "A" || v == "a") c.eta_denominator = EtaDenominator::kActions;
         else if (v == "K" || v == "k") c.eta_denominator = EtaDenominator::kExperts;
         else throw std::invalid_argument("eta_denominator must be A or K");
       },
       [](const C& c) { return to_string(c.eta_denominator); }},
      {"algorithm", "eta",
       [](C& c, S v) { c.eta = is_auto(v) ? std::nullopt : std::optional(nonneg_real(v, "eta")); },
       [](const C& c) { return opt_str(c.eta); }},
      {"algorithm", "lambda_pen",
       [](C& c, S v) { c.lambda_pen = is_auto(v) ? std::nullopt : std::optional(nonneg_real(v, "lambda_pen")); },
       [](const C& c) { return opt_str(c.lambda_pen); }},
      {"algorithm", "eps_floor",
       [](C& c, S v) { c.eps_floor = is_auto(v) ? std::nullopt : std::optional(positive_real(v, "eps_floor")); },
       [](const C& c) { return opt_str(c.eps_floor); }},

      {"inference", "alphas", [](C& c, S v) { c.alphas = parse_alphas(v); },
       [](const C& c) {
         std::string out;
         for (std::size_t i = 0; i < c.alphas.size(); ++i) out += (i ? ", " : "") + format_double(c.alphas[i]);
         return out;
       }},
      {"inference", "estimator",
       [](C& c, S v) {
         const std::string l = lower(v);
         if (l == "ols") c.estimator = EstimatorKind::kOls;
         else if (l == "ridge") c.estimator = EstimatorKind::kRidge;
         else throw std::invalid_argument("estimator must be ols or ridge");
       },
       [](const C& c) { return to_string(c.estimator); }},
      {"inference", "lambda_rid",
       [](C& c, S v) { c.lambda_rid = is_auto(v) ? std::nullopt : std::optional(positive_real(v, "lambda_rid")); },
       [](const C& c) { return opt_str(c.lambda_rid); }},
      {"inference", "sigma_normalization",
       [](C& c, S v) {
         if (v == "n") c.sigma_normalization = SigmaNormalization::kN;
         else if (v == "n-d") c.sigma_normalization = SigmaNormalization::kNMinusD;
         else throw std::invalid_argument("sigma_normalization must be n or n-d");
       },
       [](const C& c) { return to_string(c.sigma_normalization); }},
      {"inference", "aps_lambda", [](C& c, S v) { c.aps_lambda = positive_real(v, "aps_lambda"); },
       [](const C& c) { return format_double(c.aps_lambda); }},
      {"inference", "aps_L", [](C& c, S v) { c.aps_feature_bound = positive_real(v, "aps_L"); },
       [](const C& c) { return format_double(c.aps_feature_bound); }},
      {"inference", "aps_S", [](C& c, S v) { c.aps_param_bound = nonneg_real(v, "aps_S"); },
       [](const C& c) { return format_double(c.aps_param_bound); }},
      {"inference", "freeze_direction", [](C& c, S v) { c.freeze_direction = parse_bool(v); },
       [](const C& c) { return std::string(c.freeze_direction ? "true" : "false"); }},

      {"run", "n_moment_samples",
       [](C& c, S v) { c.n_moment_samples = positive_int(v, "n_moment_samples"); },
       [](const C& c) { return std::to_string(c.n_moment_samples); }},
      {"run", "worker_count",
       [](C& c, S v) { c.worker_count = is_auto(v) ? std::nullopt : std::optional(positive_int(v, "worker_count")); },
       [](const C& c) { return opt_str(c.worker_count); }},
      {"run", "output_dir", [](C& c, S v) { c.output_dir = v; }, [](const C& c) { return c.output_dir; }},
  };
  return table;
}

const KeyDef* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : key_table())
    if (k.name == name && (section.empty() || section == k.section)) return &k;
  return nullptr;
}

bool known_section(const std::string& s) {
  return s == "experiment" || s == "experts" || s == "algorithm" || s == "inference" || s == "run";
}

ExperimentConfig parse_json(const std::string& text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(source + ": top-level JSON value must be an object");
  ExperimentConfig cfg;
  auto apply = [&](const std::string& section, const std::string& key, const nlohmann::json& value) {
    const KeyDef* def = find_key(section, key);
    const std::string where = source + ": " + (section.empty() ? key : section + "." + key);
    if (!def) throw ConfigError(where + ": unknown key");
    std::string v;
    if (value.is_string()) v = value.get<std::string>();
    else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) v += (i ? "," : "") + value[i].dump();
    } else if (value.is_number_float()) v = format_double(value.get<double>());
    else v = value.dump();
    try {
      def->set(cfg, v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + e.what());
    }
  };
  for (const auto& [key, value] : doc.items()) {
    if (value.is_object()) {
      if (!known_section(key)) throw ConfigError(source + ": unknown section '" + key + "'");
      for (const auto& [inner, v] : value.items()) apply(key, inner, v);
    } else {
      apply("", key, value);
    }
  }
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return parse_json(text, source);

  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    std::string line = raw;
    if (const auto c = line.find_first_of("#;"); c != std::string::npos) line.erase(c);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    const KeyDef* def = find_key(section, key);
    if (!def)
      throw ConfigError(where + "unknown key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
    try {
      def->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& def : key_table()) {
    if (section != def.section) {
      section = def.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    std::string value = def.get(config);
    if (value.empty() || value.find_first_of("#;") != std::string::npos || value != trim(value))
      value = "\"" + value + "\"";
    out += std::string(def.name) + " = " + value + "\n";
  }
  return out;
}

ExperimentConfig ExperimentConfig::resolve() const {
  ExperimentConfig r = *this;
  auto fill = [](std::optional<int>& field, int value) {
    if (!field) field = value;
  };
  switch (setting) {
    case Setting::kSoftmax:
      fill(r.num_experts, 5);
      fill(r.num_actions, 5);
      fill(r.context_dim, 10);
      break;
    case Setting::kNeural:
      fill(r.num_experts, 5);
      fill(r.num_actions, 3);
      fill(r.context_dim, 50);
      break;
    case Setting::kCustom: {
      if (expert_file.empty()) throw ConfigError("setting = custom requires experts.expert_file");
      std::ifstream in(expert_file);
      if (!in) throw ConfigError(expert_file + ": cannot open expert file");
      const ExpertSet set = load_experts(in);
      int input_dim = 0;
      for (const auto& e : set.experts()) {
        if (const auto* s = std::get_if<SoftmaxExpert>(&e)) input_dim = s->input_dim();
        if (const auto* n = std::get_if<NeuralExpert>(&e)) input_dim = n->input_dim();
      }
      const int k = set.size();
      auto check = [](std::optional<int>& field, int value, const char* name) {
        if (field && *field != value)
          throw ConfigError(std::string(name) + " = " + std::to_string(*field) +
                            " disagrees with the expert file (" + std::to_string(value) + ")");
        field = value;
      };
      check(r.num_experts, k, "K");
      check(r.num_actions, set.num_actions(), "A");
      if (input_dim > 0) check(r.context_dim, input_dim, "d_x");
      if (!r.context_dim) throw ConfigError("d_x must be given when the expert file has only uniform experts");
      break;
    }
  }
  if (setting != Setting::kCustom && include_uniform && !num_experts)
    r.num_experts = *r.num_experts + 1;
  if (!r.neural_weight_variance)
    r.neural_weight_variance = (setting == Setting::kNeural && estimator == EstimatorKind::kRidge) ? 12.0 : 1.0;
  if (!r.lambda_rid) r.lambda_rid = horizon > 0 ? 1.0 / horizon : 1.0;
  if (horizon > 0) {
    const Exp4Params d = Exp4Params::defaults(*r.num_experts, *r.num_actions, horizon, eta_denominator);
    if (!r.eta) r.eta = d.eta;
    if (!r.lambda_pen) r.lambda_pen = d.lambda_pen;
    if (!r.eps_floor) r.eps_floor = d.eps_floor;
  }
  if (r.eps_floor && *r.eps_floor * *r.num_experts > 1.0 + 1e-12)
    throw ConfigError("infeasible eps floor: K * eps exceeds 1");
  return r;
}

Exp4Params ExperimentConfig::exp4_params() const {
  const ExperimentConfig r = resolve();
  if (horizon < 1) throw ConfigError("T must be at least 1 (empty trajectory)");
  Exp4Params p;
  p.num_experts = *r.num_experts;
  p.horizon = horizon;
  p.eta = *r.eta;
  p.lambda_pen = *r.lambda_pen;
  p.eps_floor = *r.eps_floor;
  p.gamma = std::sqrt(std::log(static_cast<double>(horizon)));
  p.update_rule = update_rule;
  p.validate();
  return p;
}

int resolve_workers(const ExperimentConfig& config, std::optional<int> override_workers) {
  int w = config.worker_count.value_or(0);  // 0 = auto
  if (const char* env = std::getenv("EXP4STAB_WORKERS"); env && *env) {
    const std::string v = trim(env);
    try {
      w = is_auto(v) ? 0 : positive_int(v, "EXP4STAB_WORKERS");
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("EXP4STAB_WORKERS: ") + e.what());
    }
  }
  if (override_workers) w = std::max(0, *override_workers);
  if (w > 0) return w;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace exp4stab
