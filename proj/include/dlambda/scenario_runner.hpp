#pragma once

// Configuration-driven experiments: run the solver, compute the matching
// closed-form predictions, compare, and write plot-ready CSV files.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dlambda/config.hpp"
#include "dlambda/polariton_analysis.hpp"
#include "dlambda/propagation_solver.hpp"
#include "dlambda/report.hpp"

namespace dlambda {

/// Normalized inputs and controls of a configuration as functions of the
/// local time.
struct DriveFunctions {
  std::function<cplx(double)> R1;
  std::function<cplx(double)> R3;
  ControlHistory controls;
};
DriveFunctions drive_functions(const ScenarioConfig& cfg, const DriveFields& drive);

/// Runs the configured solver mode on `drive`.
FieldHistory simulate(const ScenarioConfig& cfg, const DriveFields& drive);

struct ScenarioResult {
  ComparisonReport report;
  std::vector<std::filesystem::path> files;
};

/// Solver run plus comparison. Files go to cfg.output_dir when `write` is set.
ScenarioResult run_scenario(const ScenarioConfig& cfg, bool write = true);

/// Closed-form predictions only; never calls the solver.
struct PredictionResult {
  std::map<std::string, double> values;
  std::vector<std::filesystem::path> files;
};
PredictionResult run_prediction(const ScenarioConfig& cfg, bool write = true);

/// Susceptibility curves for the configured scheme and control amplitudes,
/// with the algebraic identities reported as rows.
ScenarioResult run_susceptibility(const ScenarioConfig& cfg, bool write = true);

struct ScanEntry {
  double value = 0.0;
  std::optional<ComparisonReport> report;
  std::string error;  // non-empty when the run failed
};

/// One independent run per value with `path` set to that value, executed
/// concurrently. A failing run is recorded and the scan continues. Writes
/// scan.csv into `out_root` when `write` is set.
std::vector<ScanEntry> scan(const json& user_config, const std::string& path,
                            const std::vector<double>& values,
                            const std::filesystem::path& out_root, bool write = true);

// --- measurement helpers ------------------------------------------------------

/// Maximum of |v| refined by a parabola through the neighbouring samples.
struct Peak {
  std::size_t index = 0;
  double position = 0.0;  // refined abscissa
  double value = 0.0;     // refined magnitude
};
Peak find_peak(const std::vector<double>& x, const std::vector<cplx>& v);

/// Full width at half maximum of |v| around its peak, by linear
/// interpolation of the half-level crossings.
double fwhm(const std::vector<double>& x, const std::vector<cplx>& v);

/// Sum of |v[k+1]| - |v[k]| in absolute value.
double total_variation(const std::vector<cplx>& v);

/// Sum of sigma_bc over the back half of the sample. The stored phase is read
/// from it, away from the entrance cells that absorb the signal still
/// arriving after switch-off.
cplx stored_coherence_sum(const std::vector<cplx>& profile);

/// CSV helpers; every file starts with a '#' metadata line.
std::string csv_header(const ScenarioConfig& cfg, const std::string& extra = {});
void write_history_csv(const std::filesystem::path& file, const ScenarioConfig& cfg,
                       const RecordedSlice& slice);

/// Parses "0.5", "pi", "-pi/2", "7*pi/6", "2pi/3" and comma-separated lists.
double parse_value(const std::string& text);
std::vector<double> parse_value_list(const std::string& text);

/// Command-line entry point; returns the process exit code
/// (0 pass, 1 comparison failure, 2 configuration or usage error).
int cli_main(int argc, char** argv);

}  // namespace dlambda
