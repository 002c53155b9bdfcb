// Experiment harness entry point. Subcommands mirror the library layers:
//   run <config>           solver experiment -> CSV / JSON / optional SVG
//   check <kind> <config>  admissibility | mvi | identities report
//   list-presets           built-in configurations
//   at-train <config>      adversarial training -> model + learning curve
//   at-eval <model> <config>  attack a saved model
// <config> is a file path or a preset name. Output dir: --output-dir flag,
// else $SIHG_OUTPUT_DIR, else the working directory.
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "sihg/experiment.hpp"

namespace {

std::string default_output_dir() {
  const char* env = std::getenv("SIHG_OUTPUT_DIR");
  return env != nullptr && *env != '\0' ? env : ".";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"minimax solver experiments"};
  app.require_subcommand(1);
  app.fallthrough();  // --output-dir may follow the subcommand
  std::string output_dir = default_output_dir();
  app.add_option("--output-dir", output_dir,
                 "directory for generated files (overrides $SIHG_OUTPUT_DIR)");

  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "run a configured experiment");
  run->add_option("config", run_config, "config file or preset name")->required();

  std::string check_kind, check_config;
  CLI::App* check = app.add_subcommand("check", "verify conditions for a configured problem");
  check->add_option("kind", check_kind, "admissibility | mvi | identities")->required();
  check->add_option("config", check_config, "config file or preset name")->required();

  CLI::App* list = app.add_subcommand("list-presets", "show built-in configurations");

  std::string train_config;
  CLI::App* at_train = app.add_subcommand("at-train", "train the toy classifier");
  at_train->add_option("config", train_config, "config file or preset name")->required();

  std::string eval_model, eval_config;
  CLI::App* at_eval = app.add_subcommand("at-eval", "evaluate a saved model under attack");
  at_eval->add_option("model", eval_model, "saved parameter file")->required();
  at_eval->add_option("config", eval_config, "config file or preset name")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return sihg::run_experiment(run_config, output_dir);
  if (check->parsed()) return sihg::check_command(check_kind, check_config);
  if (list->parsed()) {
    for (const sihg::PresetInfo& p : sihg::preset_registry())
      std::cout << p.name << "\t" << p.description << "\n";
    return sihg::kExitOk;
  }
  if (at_train->parsed()) return sihg::at_train_command(train_config, output_dir);
  if (at_eval->parsed()) return sihg::at_eval_command(eval_model, eval_config);
  return sihg::kExitError;
}
