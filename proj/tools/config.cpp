#include "config.hpp"

#include <fstream>
#include <set>
#include <string>

#include "bfl/errors.hpp"

namespace bflsim {

using nlohmann::json;

namespace {

// Reject keys we do not know about; typos otherwise silently fall back to defaults.
void check_keys(const json& obj, const std::string& path, std::set<std::string> allowed) {
  if (!obj.is_object()) throw bfl::ConfigError(path + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) {
      throw bfl::ConfigError((path.empty() ? key : path + "." + key) + ": unknown field");
    }
  }
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

template <typename T>
T read(const json& obj, const std::string& path, const std::string& key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  const auto& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw bfl::ConfigError("expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw bfl::ConfigError("expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          throw bfl::ConfigError("expected a nonnegative integer");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw bfl::ConfigError("expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw bfl::ConfigError("expected a string");
    }
    return v.get<T>();
  } catch (const bfl::ConfigError& e) {
    throw bfl::ConfigError(join(path, key) + ": " + e.what());
  } catch (const json::exception& e) {
    throw bfl::ConfigError(join(path, key) + ": " + e.what());
  }
}

std::vector<double> read_vector(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return {};
  const auto& v = obj.at(key);
  if (!v.is_array()) throw bfl::ConfigError(join(path, key) + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw bfl::ConfigError(join(path, key) + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

template <typename Fn>
auto wrap(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const bfl::ConfigError& e) {
    throw bfl::ConfigError(field + ": " + e.what());
  }
}

void parse_model(const json& j, bfl::ModelSpec& model) {
  const std::string path = "model";
  check_keys(j, path, {"layer_sizes", "activation"});
  if (j.contains("layer_sizes")) {
    const auto& sizes = j.at("layer_sizes");
    if (!sizes.is_array()) throw bfl::ConfigError("model.layer_sizes: expected an array");
    model.layer_sizes.clear();
    for (const auto& s : sizes) {
      if (!s.is_number_unsigned()) {
        throw bfl::ConfigError("model.layer_sizes: entries must be positive integers");
      }
      model.layer_sizes.push_back(s.get<std::size_t>());
    }
  }
  if (j.contains("activation")) {
    const auto name = read<std::string>(j, path, "activation", "relu");
    model.activation = wrap("model.activation", [&] { return bfl::parse_activation(name); });
  }
}

void parse_sgld(const json& j, bfl::SgldConfig& sgld) {
  const std::string path = "federation.sgld";
  check_keys(j, path, {"eta", "total_iters", "burn_in", "num_batches", "batch_size", "inject_noise"});
  sgld.eta = read(j, path, "eta", sgld.eta);
  sgld.total_iters = read(j, path, "total_iters", sgld.total_iters);
  sgld.burn_in = read(j, path, "burn_in", sgld.burn_in);
  sgld.num_batches = read(j, path, "num_batches", sgld.num_batches);
  sgld.batch_size = read(j, path, "batch_size", sgld.batch_size);
  sgld.inject_noise = read(j, path, "inject_noise", sgld.inject_noise);
}

void parse_federation(const json& j, ExperimentConfig& cfg, const std::filesystem::path& base_dir) {
  const std::string path = "federation";
  check_keys(j, path,
             {"num_nodes", "per_node_samples", "num_days", "strategies", "aggregation_weights",
              "init", "threads", "initial_posterior", "sgld"});
  auto& f = cfg.federation;
  f.num_nodes = read(j, path, "num_nodes", f.num_nodes);
  f.per_node_samples = read(j, path, "per_node_samples", f.per_node_samples);
  f.num_days = read(j, path, "num_days", f.num_days);
  f.threads = read(j, path, "threads", f.threads);
  if (j.contains("aggregation_weights")) {
    const auto name = read<std::string>(j, path, "aggregation_weights", "uniform");
    f.aggregation_weights = wrap("federation.aggregation_weights",
                                 [&] { return bfl::parse_aggregation_weights(name); });
  }
  if (j.contains("init")) {
    const auto name = read<std::string>(j, path, "init", "prior_sample");
    f.init_mode = wrap("federation.init", [&] { return bfl::parse_init_mode(name); });
  }
  if (j.contains("strategies")) {
    const auto& list = j.at("strategies");
    if (!list.is_array() || list.empty()) {
      throw bfl::ConfigError("federation.strategies: expected a nonempty array of names");
    }
    cfg.strategies.clear();
    for (const auto& s : list) {
      if (!s.is_string()) throw bfl::ConfigError("federation.strategies: entries must be strings");
      const auto name = s.get<std::string>();
      cfg.strategies.push_back(
          wrap("federation.strategies", [&] { return bfl::parse_strategy(name); }));
    }
  }
  if (j.contains("initial_posterior") && !j.at("initial_posterior").is_null()) {
    cfg.initial_posterior = base_dir / read<std::string>(j, path, "initial_posterior", "");
  }
  if (j.contains("sgld")) parse_sgld(j.at("sgld"), f.sgld);
}

void parse_generator(const json& j, bfl::ShiftSpec& s) {
  const std::string path = "data.generator";
  check_keys(j, path,
             {"num_classes", "input_dim", "class_centers", "center_radius", "rotation_per_day",
              "translation_per_day", "class_noise_std", "samples_per_day", "validation_fraction"});
  s.num_classes = read(j, path, "num_classes", s.num_classes);
  s.input_dim = read(j, path, "input_dim", s.input_dim);
  s.center_radius = read(j, path, "center_radius", s.center_radius);
  s.rotation_per_day = read(j, path, "rotation_per_day", s.rotation_per_day);
  s.translation_per_day = read_vector(j, path, "translation_per_day");
  s.class_noise_std = read(j, path, "class_noise_std", s.class_noise_std);
  s.samples_per_day = read(j, path, "samples_per_day", s.samples_per_day);
  s.validation_fraction = read(j, path, "validation_fraction", s.validation_fraction);
  if (j.contains("class_centers")) {
    const auto& cs = j.at("class_centers");
    if (!cs.is_array()) throw bfl::ConfigError(path + ".class_centers: expected an array of points");
    s.class_centers_day1.clear();
    for (const auto& c : cs) {
      if (!c.is_array()) throw bfl::ConfigError(path + ".class_centers: expected an array of points");
      bfl::Point p;
      for (const auto& x : c) {
        if (!x.is_number()) throw bfl::ConfigError(path + ".class_centers: coordinates must be numbers");
        p.push_back(x.get<double>());
      }
      s.class_centers_day1.push_back(std::move(p));
    }
  }
}

void parse_data(const json& j, DataSource& data, const std::filesystem::path& base_dir) {
  check_keys(j, "data", {"generator", "tabular"});
  if (j.contains("generator") && j.contains("tabular")) {
    throw bfl::ConfigError("data: give either generator or tabular, not both");
  }
  if (j.contains("generator")) parse_generator(j.at("generator"), data.shift);
  if (j.contains("tabular")) {
    const auto& t = j.at("tabular");
    const std::string path = "data.tabular";
    check_keys(t, path, {"days", "num_classes", "validation_fraction"});
    if (!t.contains("days") || !t.at("days").is_array() || t.at("days").empty()) {
      throw bfl::ConfigError(path + ".days: expected a nonempty array of file paths");
    }
    for (const auto& d : t.at("days")) {
      if (!d.is_string()) throw bfl::ConfigError(path + ".days: entries must be strings");
      data.tabular_days.push_back(base_dir / d.get<std::string>());
    }
    data.tabular_classes = read<std::size_t>(t, path, "num_classes", 0);
    if (data.tabular_classes < 2) {
      throw bfl::ConfigError(path + ".num_classes: required, at least 2");
    }
    data.tabular_validation_fraction =
        read(t, path, "validation_fraction", data.tabular_validation_fraction);
  }
}

void parse_metrics(const json& j, bfl::MetricsConfig& m) {
  const std::string path = "metrics";
  check_keys(j, path, {"bins", "threshold", "predictive_samples"});
  m.num_bins = read(j, path, "bins", m.num_bins);
  m.threshold = read(j, path, "threshold", m.threshold);
  m.predictive_samples = read(j, path, "predictive_samples", m.predictive_samples);
}

}  // namespace

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "", {"seed", "output_dir", "model", "federation", "data", "metrics"});
  ExperimentConfig cfg;
  cfg.strategies = {bfl::Strategy::transfer_learning, bfl::Strategy::retrain,
                    bfl::Strategy::posterior_continual};
  cfg.seed = read<std::uint64_t>(j, "", "seed", 0);
  cfg.output_dir = read<std::string>(j, "", "output_dir", cfg.output_dir.string());
  if (j.contains("data")) parse_data(j.at("data"), cfg.data, base_dir);
  if (j.contains("federation")) parse_federation(j.at("federation"), cfg, base_dir);
  if (j.contains("metrics")) parse_metrics(j.at("metrics"), cfg.metrics);

  // Default network: input dim, two hidden layers of 64, one output per class.
  const std::size_t input_dim = cfg.data.is_tabular() ? 0 : cfg.data.shift.input_dim;
  cfg.model.layer_sizes = {input_dim, 64, 64, cfg.data.num_classes()};
  cfg.model.activation = bfl::Activation::relu;
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (cfg.data.is_tabular() && cfg.model.layer_sizes.front() == 0) {
    throw bfl::ConfigError("model.layer_sizes: required with tabular data");
  }
  cfg.federation.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw bfl::ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw bfl::ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

void ExperimentConfig::validate() const {
  wrap("model", [&] { model.validate(); return 0; });
  wrap("federation", [&] { federation.validate(); return 0; });
  wrap("metrics", [&] { metrics.validate(); return 0; });
  if (!data.is_tabular()) wrap("data.generator", [&] { data.shift.validate(); return 0; });
  if (strategies.empty()) throw bfl::ConfigError("federation.strategies: nothing to run");
  if (model.num_classes() != data.num_classes()) {
    throw bfl::ConfigError("model.layer_sizes: output size " + std::to_string(model.num_classes()) +
                           " does not match " + std::to_string(data.num_classes()) + " classes");
  }
  if (!data.is_tabular() && model.input_dim() != data.shift.input_dim) {
    throw bfl::ConfigError("model.layer_sizes: input size " + std::to_string(model.input_dim()) +
                           " does not match data input_dim " +
                           std::to_string(data.shift.input_dim));
  }
  if (data.is_tabular() && data.tabular_days.size() < federation.num_days) {
    throw bfl::ConfigError("data.tabular.days: " + std::to_string(data.tabular_days.size()) +
                           " files for " + std::to_string(federation.num_days) + " days");
  }
  if (metrics.predictive_samples > federation.sgld.retained()) {
    throw bfl::ConfigError("metrics.predictive_samples: exceeds T - T_b");
  }
  if (!data.is_tabular()) {
    const auto n_val = static_cast<std::size_t>(
        std::llround(data.shift.validation_fraction * static_cast<double>(data.shift.samples_per_day)));
    if (n_val == 0) throw bfl::ConfigError("data.generator.validation_fraction: validation split is empty");
    if (data.shift.samples_per_day - n_val < federation.num_nodes * federation.per_node_samples) {
      throw bfl::ConfigError("data.generator.samples_per_day: " +
                             std::to_string(data.shift.samples_per_day - n_val) +
                             " training samples cannot fill " +
                             std::to_string(federation.num_nodes) + " shards of " +
                             std::to_string(federation.per_node_samples));
    }
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["model"] = {{"layer_sizes", c.model.layer_sizes},
                {"activation", bfl::to_string(c.model.activation)}};
  json strategies = json::array();
  for (auto s : c.strategies) strategies.push_back(bfl::to_string(s));
  const auto& f = c.federation;
  j["federation"] = {
      {"num_nodes", f.num_nodes},
      {"per_node_samples", f.per_node_samples},
      {"num_days", f.num_days},
      {"strategies", strategies},
      {"aggregation_weights", bfl::to_string(f.aggregation_weights)},
      {"init", bfl::to_string(f.init_mode)},
      {"threads", f.threads},
      {"initial_posterior",
       c.initial_posterior ? json(c.initial_posterior->string()) : json(nullptr)},
      {"sgld",
       {{"eta", f.sgld.eta},
        {"total_iters", f.sgld.total_iters},
        {"burn_in", f.sgld.burn_in},
        {"num_batches", f.sgld.num_batches},
        {"batch_size", f.sgld.batch_size},
        {"inject_noise", f.sgld.inject_noise}}}};
  if (c.data.is_tabular()) {
    json days = json::array();
    for (const auto& p : c.data.tabular_days) days.push_back(p.string());
    j["data"] = {{"tabular",
                  {{"days", days},
                   {"num_classes", c.data.tabular_classes},
                   {"validation_fraction", c.data.tabular_validation_fraction}}}};
  } else {
    const auto& s = c.data.shift;
    j["data"] = {{"generator",
                  {{"num_classes", s.num_classes},
                   {"input_dim", s.input_dim},
                   {"class_centers", s.initial_centers()},
                   {"center_radius", s.center_radius},
                   {"rotation_per_day", s.rotation_per_day},
                   {"translation_per_day", s.translation_per_day},
                   {"class_noise_std", s.class_noise_std},
                   {"samples_per_day", s.samples_per_day},
                   {"validation_fraction", s.validation_fraction}}}};
  }
  j["metrics"] = {{"bins", c.metrics.num_bins},
                  {"threshold", c.metrics.threshold},
                  {"predictive_samples", c.metrics.predictive_samples}};
  return j;
}

}  // namespace bflsim
