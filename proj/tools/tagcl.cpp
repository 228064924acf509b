#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tagopt/errors.hpp"
#include "tagopt/experiment.hpp"

namespace {

void add_common(CLI::App* cmd, tagopt::CommandOptions& opts, std::string& alpha) {
  cmd->add_option("--config", opts.config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed", opts.seeds, "Run seed (repeatable; replaces the config's seeds)");
  cmd->add_option("--set", opts.overrides, "key=value override (repeatable)");
  cmd->add_option("--alpha-trace", alpha, "Alpha trace recording: mean, full or off")
      ->check(CLI::IsMember({"mean", "full", "off"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-incremental continual learning with task-based accumulated gradients"};
  app.require_subcommand(1);

  std::map<std::string, std::pair<tagopt::CommandOptions, std::string>> opts;
  auto* run = app.add_subcommand("run", "Train the configured method for every seed");
  auto* grid = app.add_subcommand("grid", "Grid search over list values on a 90/10 validation split");
  auto* compare = app.add_subcommand("compare", "Run several methods on the same stream and seeds");
  auto* exp = app.add_subcommand("export", "Write the configured task stream as CSV files");
  for (auto* cmd : {run, grid, compare, exp}) {
    auto& [o, alpha] = opts[cmd->get_name()];
    add_common(cmd, o, alpha);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto* cmd : {run, grid, compare, exp}) {
      if (!cmd->parsed()) continue;
      auto& [o, alpha] = opts[cmd->get_name()];
      if (!alpha.empty()) o.alpha_trace = tagopt::parse_alpha_trace_mode(alpha);
      if (cmd == run) tagopt::cmd_run(o, std::cout);
      if (cmd == grid) tagopt::cmd_grid(o, std::cout);
      if (cmd == compare) tagopt::cmd_compare(o, std::cout);
      if (cmd == exp) tagopt::cmd_export(o, std::cout);
    }
  } catch (const tagopt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
