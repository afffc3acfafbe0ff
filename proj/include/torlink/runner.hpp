#pragma once

#include "torlink/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace torlink {

inline constexpr std::string_view kToolkitName = "torlink";
inline constexpr std::string_view kToolkitVersion = "0.1.0";

struct RunOptions {
  std::filesystem::path out_dir = ".";
  /// Worker threads for grid and mesh loops; 0 uses the config value.
  int jobs = 0;
  /// Overrides the flow and crossing tolerances when set.
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  bool write_files = true;
};

struct ExperimentResult {
  std::string label;
  std::string op;
  bool asserted = true;
  bool passed = false;
  std::string error;
  nlohmann::ordered_json results;
  double wall_time_s = 0.0;
};

struct RunReport {
  nlohmann::ordered_json json;
  std::vector<ExperimentResult> experiments;
  /// True iff every asserted experiment passed.
  bool all_passed = true;
  std::vector<std::filesystem::path> written;
};

/// Runs the experiment list in order.  Failures are captured per experiment.
RunReport run(const ScenarioConfig& config, const RunOptions& options = {});

/// Runs a single experiment (used by tests and the Python bindings).
ExperimentResult run_experiment(const ScenarioConfig& config, const ExperimentSpec& spec, std::uint64_t seed,
                                int jobs, const std::filesystem::path* csv_path = nullptr);

/// Built-in scenario configs shipped with the binary.
struct BuiltinScenario {
  std::string_view name;
  std::string_view text;
};
const std::vector<BuiltinScenario>& builtin_scenarios();
const BuiltinScenario* find_builtin(std::string_view name);

/// Writes `content` to a temporary sibling file and renames it over `path`.
void write_atomically(const std::filesystem::path& path, std::string_view content);

/// Deterministic per-experiment seed derived from the run seed and position.
std::uint64_t experiment_seed(std::uint64_t run_seed, std::size_t index);

}  // namespace torlink
