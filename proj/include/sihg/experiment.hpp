#pragma once

#include <string>
#include <vector>

#include "sihg/at.hpp"
#include "sihg/config.hpp"
#include "sihg/solvers.hpp"
#include "sihg/zoo.hpp"

namespace sihg {

// Exit-code contract shared by every command: 0 done, 1 config or execution
// error, 2 a check ran cleanly and failed.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;

struct PresetInfo {
  std::string name;
  std::string description;
};

const std::vector<PresetInfo>& preset_registry();
std::string preset_text(const std::string& name);  // throws ConfigError on unknown names

// A config argument is a path when such a file exists, otherwise a preset
// name. The name field is the experiment.name key, the preset name, or the
// file stem, in that order.
struct LoadedConfig {
  ConfigFile file;
  std::string name;
};
LoadedConfig load_config_or_preset(const std::string& arg);

// [problem] section -> problem instance. For the bilinear families the
// explicit reference spec is filled too when a slot is passed.
MinimaxProblem build_problem(const ConfigFile& config, BilinearSpec* bilinear = nullptr);
SolverConfig build_solver_config(const ConfigFile& config);

void write_trace_csv(const std::string& path, const Trace& trace, const std::string& hash);
void write_truncated_csv(const std::string& path, std::uint64_t seed, const std::string& hash);
std::string render_residual_svg(const Trace& trace);

int run_experiment(const std::string& config_arg, const std::string& output_dir);
int check_command(const std::string& kind, const std::string& config_arg);
int at_train_command(const std::string& config_arg, const std::string& output_dir);
int at_eval_command(const std::string& model_path, const std::string& config_arg);

}  // namespace sihg
