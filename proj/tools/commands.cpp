#include "commands.hpp"

#include <charconv>
#include <chrono>
#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "bfl/errors.hpp"
#include "bfl/io.hpp"

namespace bflsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw bfl::IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw bfl::IoError("write failed for " + path.string());
}

std::string short_name(bfl::Strategy s) {
  switch (s) {
    case bfl::Strategy::transfer_learning: return "TL";
    case bfl::Strategy::retrain: return "Retr.";
    case bfl::Strategy::posterior_continual: return "P-CL";
  }
  return "?";
}

}  // namespace

void apply_overrides(ExperimentConfig& config, const RunOptions& options) {
  if (options.seed) {
    config.seed = *options.seed;
    config.federation.seed = *options.seed;
  }
  if (options.strategies) config.strategies = *options.strategies;
  if (options.output_dir) config.output_dir = *options.output_dir;
  if (options.threads) config.federation.threads = *options.threads;
  config.validate();
}

std::vector<bfl::DayDataset> build_days(const ExperimentConfig& config) {
  const auto& f = config.federation;
  std::vector<bfl::DayDataset> days;
  for (std::uint32_t d = 1; d <= f.num_days; ++d) {
    bfl::LabeledBatch pool;
    if (config.data.is_tabular()) {
      pool = bfl::load_tabular(config.data.tabular_days[d - 1],
                               {config.model.input_dim(), config.data.tabular_classes});
    } else {
      pool = bfl::gen_day(config.data.shift, d, config.seed);
    }
    days.push_back(bfl::make_day_dataset(pool, d, config.data.validation_fraction(), f.num_nodes,
                                         f.per_node_samples, config.seed));
  }
  return days;
}

std::vector<bfl::ContinualResult> run_experiment(const ExperimentConfig& config,
                                                 std::ostream* log) {
  const auto days = build_days(config);
  std::optional<bfl::GaussianDiagPrior> initial;
  if (config.initial_posterior) {
    const auto file = bfl::load_posterior(*config.initial_posterior);
    if (file.samples.num_params() != bfl::param_count(config.model)) {
      throw bfl::ConfigError("federation.initial_posterior: " +
                             std::to_string(file.samples.num_params()) +
                             " parameters, model has " +
                             std::to_string(bfl::param_count(config.model)));
    }
    initial = bfl::fit_from_samples(file.samples);
  }

  std::vector<bfl::ContinualResult> results;
  for (auto strategy : config.strategies) {
    auto fc = config.federation;
    fc.strategy = strategy;
    auto r = bfl::run_continual(config.model, days, fc, config.metrics,
                                initial ? &*initial : nullptr);
    if (log) {
      for (const auto& d : r.days) {
        *log << "[bflsim] " << bfl::to_string(strategy) << " day " << d.day << ": accuracy "
             << std::fixed << std::setprecision(3) << d.accuracy << " ece " << d.ece;
        if (d.trained) {
          *log << " iterations "
               << (d.iterations_to_threshold ? std::to_string(*d.iterations_to_threshold)
                                             : std::string("not reached"));
        }
        *log << '\n';
      }
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::string posterior_file_name(bfl::Strategy s, std::uint32_t day) {
  return bfl::to_string(s) + "_day" + std::to_string(day) + ".bfl";
}

json make_report(const ExperimentConfig& config,
                 const std::vector<bfl::ContinualResult>& results) {
  json cells = json::array();
  for (const auto& r : results) {
    for (const auto& d : r.days) {
      json bins = json::array();
      for (const auto& b : d.bins.bins) {
        bins.push_back({{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"accuracy", b.accuracy},
                        {"confidence", b.confidence},
                        {"gap", b.gap()}});
      }
      json cell = {{"strategy", bfl::to_string(r.strategy)},
                   {"day", d.day},
                   {"trained", d.trained},
                   {"accuracy", d.accuracy},
                   {"ece", d.ece},
                   {"posterior_samples", d.posterior.num_samples()},
                   {"posterior_file", "posterior/" + posterior_file_name(r.strategy, d.day)},
                   {"reliability", bins}};
      if (d.trained) {
        cell["iterations_to_threshold"] =
            d.iterations_to_threshold ? json(*d.iterations_to_threshold) : json(nullptr);
        cell["reached"] = d.iterations_to_threshold.has_value();
        cell["final_round_accuracy"] = d.records.back().val_accuracy;
        cell["final_round_train_loss"] = d.records.back().train_loss;
      } else {
        cell["iterations_to_threshold"] = nullptr;
        cell["reached"] = nullptr;
      }
      cells.push_back(std::move(cell));
    }
  }
  json seeds = json::object();
  seeds["master"] = config.seed;
  json day_seeds = json::array();
  for (std::uint32_t d = 1; d <= config.federation.num_days; ++d) {
    day_seeds.push_back({{"day", d}, {"init", bfl::init_stream_seed(config.seed, d)},
                         {"node_0", bfl::node_stream_seed(config.seed, d, 0)}});
  }
  seeds["days"] = day_seeds;
  return {{"format", "bflsim-report"},
          {"version", 1},
          {"config", to_json(config)},
          {"seeds", seeds},
          {"num_params", bfl::param_count(config.model)},
          {"cells", cells}};
}

void write_artifacts(const ExperimentConfig& config,
                     const std::vector<bfl::ContinualResult>& results) {
  const fs::path out = config.output_dir;
  std::error_code ec;
  fs::create_directories(out / "posterior", ec);
  if (ec) throw bfl::IoError("cannot create " + (out / "posterior").string() + ": " + ec.message());

  std::ostringstream curves;
  curves << "day,strategy,iteration,train_loss,val_accuracy\n";
  std::ostringstream reliability;
  reliability << "strategy,day,bin,lower,upper,count,accuracy,confidence,gap\n";
  for (const auto& r : results) {
    const auto name = bfl::to_string(r.strategy);
    for (const auto& d : r.days) {
      for (const auto& rec : d.records) {
        curves << rec.day << ',' << name << ',' << rec.iteration << ','
               << fmt_double(rec.train_loss) << ',' << fmt_double(rec.val_accuracy) << '\n';
      }
      for (std::size_t j = 0; j < d.bins.bins.size(); ++j) {
        const auto& b = d.bins.bins[j];
        reliability << name << ',' << d.day << ',' << j + 1 << ',' << fmt_double(b.lower) << ','
                    << fmt_double(b.upper) << ',' << b.count << ',' << fmt_double(b.accuracy)
                    << ',' << fmt_double(b.confidence) << ',' << fmt_double(b.gap()) << '\n';
      }
      bfl::save_posterior(out / "posterior" / posterior_file_name(r.strategy, d.day),
                          {d.posterior, r.strategy});
    }
  }
  write_text(out / "curves.csv", curves.str());
  write_text(out / "reliability.csv", reliability.str());
  write_text(out / "report.json", make_report(config, results).dump(2) + "\n");

  // Timestamps live only here so every other artifact is reproducible byte for byte.
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  const json meta = {{"created_utc", stamp.str()}, {"tool", "bflsim"}, {"version", "0.1.0"}};
  write_text(out / "metadata.json", meta.dump(2) + "\n");
}

int cmd_run(const fs::path& config_path, const RunOptions& options, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
    apply_overrides(config, options);
  } catch (const bfl::Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    const auto results = run_experiment(config, options.quiet ? nullptr : &err);
    write_artifacts(config, results);
  } catch (const bfl::DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const bfl::ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const bfl::IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const bfl::ParseError& e) {
    err << "input error: " << e.what() << '\n';
    return kConfigError;
  } catch (const bfl::Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  if (!options.quiet) err << "[bflsim] wrote " << config.output_dir.string() << '\n';
  return kOk;
}

int cmd_gen_data(const fs::path& config_path, const fs::path& out_dir, const RunOptions& options,
                 std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
    apply_overrides(config, options);
    if (config.data.is_tabular()) {
      throw bfl::ConfigError("data: gen-data needs a generator section, not tabular input");
    }
  } catch (const bfl::Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw bfl::IoError("cannot create " + out_dir.string() + ": " + ec.message());
    for (std::uint32_t d = 1; d <= config.federation.num_days; ++d) {
      const auto pool = bfl::gen_day(config.data.shift, d, config.seed);
      bfl::save_tabular(out_dir / ("day_" + std::to_string(d) + ".csv"), pool);
    }
  } catch (const bfl::Error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  }
  if (!options.quiet) {
    err << "[bflsim] wrote " << config.federation.num_days << " day files to " << out_dir.string()
        << '\n';
  }
  return kOk;
}

long iteration_reduction_percent(std::size_t retrain, std::size_t pcl) {
  const double r = static_cast<double>(retrain);
  return std::lround(100.0 * (r - static_cast<double>(pcl)) / r);
}

namespace {

// Display width of a UTF-8 string (code points; fine for the glyphs used here).
std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string pad(const std::string& s, std::size_t width) {
  const auto w = display_width(s);
  return w >= width ? s + " " : s + std::string(width - w, ' ');
}

const std::string kMissing = "—";

struct Cell {
  double accuracy = 0.0;
  double ece = 0.0;
  bool trained = false;
  std::optional<std::size_t> iterations;
};

}  // namespace

int cmd_report(const fs::path& run_dir, std::ostream& out, std::ostream& err) {
  json report;
  {
    std::ifstream in(run_dir / "report.json");
    if (!in) {
      err << "error: " << (run_dir / "report.json").string() << " not found\n";
      return kBadArtifacts;
    }
    try {
      report = json::parse(in);
    } catch (const json::exception& e) {
      err << "error: corrupt report.json: " << e.what() << '\n';
      return kBadArtifacts;
    }
  }

  std::vector<bfl::Strategy> strategies;
  std::size_t num_days = 0;
  double threshold = 0.0;
  std::map<std::pair<bfl::Strategy, std::uint32_t>, Cell> cells;
  try {
    if (report.value("format", "") != "bflsim-report") throw bfl::ParseError("not a bflsim report");
    const auto& cfg = report.at("config");
    num_days = cfg.at("federation").at("num_days").get<std::size_t>();
    threshold = cfg.at("metrics").at("threshold").get<double>();
    for (const auto& s : cfg.at("federation").at("strategies")) {
      strategies.push_back(bfl::parse_strategy(s.get<std::string>()));
    }
    for (const auto& c : report.at("cells")) {
      Cell cell;
      cell.accuracy = c.at("accuracy").get<double>();
      cell.ece = c.at("ece").get<double>();
      cell.trained = c.at("trained").get<bool>();
      if (!c.at("iterations_to_threshold").is_null()) {
        cell.iterations = c.at("iterations_to_threshold").get<std::size_t>();
      }
      cells[{bfl::parse_strategy(c.at("strategy").get<std::string>()),
             c.at("day").get<std::uint32_t>()}] = cell;
    }
  } catch (const std::exception& e) {
    err << "error: corrupt report.json: " << e.what() << '\n';
    return kBadArtifacts;
  }

  std::size_t warnings = 0;
  for (auto s : strategies) {
    for (std::uint32_t d = 1; d <= num_days; ++d) warnings += !cells.contains({s, d});
  }
  auto find = [&](bfl::Strategy s, std::uint32_t d) -> const Cell* {
    const auto it = cells.find({s, d});
    return it == cells.end() ? nullptr : &it->second;
  };

  constexpr std::size_t kLabel = 24;
  constexpr std::size_t kCol = 14;
  std::ostringstream table;
  table << pad("", kLabel);
  for (std::uint32_t d = 1; d <= num_days; ++d) table << pad("Day " + std::to_string(d), kCol);
  table << "Total\n";

  auto fixed = [](double v, int prec) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
  };

  table << "Acc., %\n";
  for (auto s : strategies) {
    table << pad("  " + short_name(s), kLabel);
    for (std::uint32_t d = 1; d <= num_days; ++d) {
      const auto* c = find(s, d);
      table << pad(c ? fixed(100.0 * c->accuracy, 1) : kMissing, kCol);
    }
    table << '\n';
  }
  table << "ECE\n";
  for (auto s : strategies) {
    table << pad("  " + short_name(s), kLabel);
    for (std::uint32_t d = 1; d <= num_days; ++d) {
      const auto* c = find(s, d);
      table << pad(c ? fixed(c->ece, 3) : kMissing, kCol);
    }
    table << '\n';
  }

  const bool has_retrain = std::find(strategies.begin(), strategies.end(),
                                     bfl::Strategy::retrain) != strategies.end();
  table << "Num. Iter. (Acc.=" << fixed(100.0 * threshold, 0) << "%)\n";
  std::map<std::uint32_t, std::size_t> retrain_iters;
  for (auto s : strategies) {
    if (s == bfl::Strategy::transfer_learning) continue;
    table << pad("  " + short_name(s), kLabel);
    std::size_t total = 0;
    bool total_ok = true;
    for (std::uint32_t d = 1; d <= num_days; ++d) {
      const auto it = cells.find({s, d});
      if (it == cells.end()) {
        table << pad(kMissing, kCol);
        total_ok = false;
        continue;
      }
      const auto& c = it->second;
      if (!c.iterations) {
        table << pad("n/r", kCol);
        total_ok = false;
        continue;
      }
      total += *c.iterations;
      std::string text = std::to_string(*c.iterations);
      if (s == bfl::Strategy::retrain) retrain_iters[d] = *c.iterations;
      if (s == bfl::Strategy::posterior_continual && has_retrain && d > 1 &&
          retrain_iters.contains(d)) {
        const auto pct = iteration_reduction_percent(retrain_iters[d], *c.iterations);
        text += pct >= 0 ? " (-" + std::to_string(pct) + "%)" : " (+" + std::to_string(-pct) + "%)";
      }
      table << pad(text, kCol);
    }
    if (total_ok) {
      std::string text = std::to_string(total);
      if (s == bfl::Strategy::posterior_continual && has_retrain &&
          retrain_iters.size() == num_days) {
        std::size_t rt = 0;
        for (const auto& [_, v] : retrain_iters) rt += v;
        const auto pct = iteration_reduction_percent(rt, total);
        text += pct >= 0 ? " (-" + std::to_string(pct) + "%)" : " (+" + std::to_string(-pct) + "%)";
      }
      table << text;
    } else {
      table << kMissing;
    }
    table << '\n';
  }
  table << "n/r = threshold not reached; TL is trained on day 1 only\n";

  out << table.str();
  if (warnings > 0) err << "warning: " << warnings << " missing (strategy, day) cells\n";
  return kOk;
}

}  // namespace bflsim
