#pragma once

// JSON scenario configuration: per-kind defaults, merging of user input,
// and resolution into validated model objects.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dlambda/physical_model.hpp"
#include "dlambda/propagation_solver.hpp"
#include "dlambda/pulse_shapes.hpp"

namespace dlambda {

using json = nlohmann::json;

enum class ScenarioKind {
  smoothing,
  transmission,
  phase_control,
  storage_phase_scan,
  storage_profile,
  custom,
};

ScenarioKind parse_scenario_kind(std::string_view name);
std::string_view to_string(ScenarioKind kind);

/// Fully resolved run description. `resolved` holds the merged JSON the
/// objects were built from; `hash` digests it without the output block, so
/// the same physics written to another directory keeps its hash.
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::custom;
  SolverMode mode = SolverMode::reduced;
  PhysicalConstants constants;
  LevelScheme scheme;
  Detunings detunings;
  MediumSpec medium;
  DriveFields drive;
  Grid grid;
  SolverOptions solver;
  std::vector<double> phase3_values;
  std::map<std::string, double> tolerances;
  std::filesystem::path output_dir;
  bool write_histories = true;
  json resolved;
  std::uint64_t hash = 0;

  double tolerance(const std::string& key) const;
};

/// Defaults for one scenario kind, every key present.
json default_config(ScenarioKind kind);

/// Default tolerances keyed by observable family.
const std::map<std::string, double>& default_tolerances();

/// Merges `user` over the defaults of its scenario kind.
json merge_with_defaults(const json& user);

/// Merges, resolves derived values and validates. Throws ConfigError.
ScenarioConfig load_config(const json& user);
json read_json_file(const std::filesystem::path& path);

/// FNV-1a 64 of the compact dump, ignoring the top-level "output" block.
std::uint64_t config_hash(const json& j);
std::string hash_hex(std::uint64_t h);

/// Parameter addressing for scans: "a.b.c" or a JSON pointer "/a/b/c".
json::json_pointer parameter_pointer(const std::string& path);
/// Sets a scalar at `path`; the key must already exist in the merged config
/// and hold a number (or be null/"auto"). Throws ConfigError otherwise.
void set_parameter(json& merged, const std::string& path, double value);

}  // namespace dlambda
