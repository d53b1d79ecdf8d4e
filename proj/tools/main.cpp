#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bfl/errors.hpp"
#include "commands.hpp"

namespace {

std::vector<bfl::Strategy> parse_strategy_list(const std::string& list) {
  std::vector<bfl::Strategy> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(bfl::parse_strategy(item));
  }
  if (out.empty()) throw bfl::ConfigError("--strategies: empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bflsim: Bayesian federated continual-learning simulator (SGLD)"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string strategies;
  bool quiet = false;
  std::string out_dir;
  std::size_t threads = 0;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Master seed (overrides the config)");
    cmd->add_flag("--quiet", quiet, "Suppress progress output");
  };

  std::string run_config;
  auto* run = app.add_subcommand("run", "Run the configured strategies over all days");
  run->add_option("config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--strategies", strategies,
                  "Comma-separated: transfer_learning,retrain,posterior_continual");
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--threads", threads, "Worker threads per federated round");
  add_common(run);

  std::string gen_config;
  std::string gen_dir;
  auto* gen = app.add_subcommand("gen-data", "Write one tabular file per day from the generator");
  gen->add_option("config", gen_config, "Experiment config (JSON)")->required();
  gen->add_option("dir", gen_dir, "Output directory")->required();
  add_common(gen);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize a finished run as a per-day table");
  report->add_option("dir", report_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? bflsim::kOk : bflsim::kUsage;
  }

  bflsim::RunOptions options;
  options.quiet = quiet;
  auto* active = app.get_subcommands().front();
  if (active != report && active->count("--seed") > 0) options.seed = seed;
  try {
    if (active == run) {
      if (!strategies.empty()) options.strategies = parse_strategy_list(strategies);
      if (!out_dir.empty()) options.output_dir = out_dir;
      if (threads > 0) options.threads = threads;
      return bflsim::cmd_run(run_config, options, std::cerr);
    }
  } catch (const bfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return bflsim::kConfigError;
  }
  if (active == gen) return bflsim::cmd_gen_data(gen_config, gen_dir, options, std::cerr);
  return bflsim::cmd_report(report_dir, std::cout, std::cerr);
}
