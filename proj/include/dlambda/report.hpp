#pragma once

// Observed-versus-predicted comparison tables.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace dlambda {

enum class Criterion {
  relative,     // |obs - pred| <= tol * |pred|
  absolute,     // |obs - pred| <= tol
  angle,        // |obs - pred| wrapped into (-pi, pi] <= tol
  below,        // obs < pred, tolerance unused
};

struct ComparisonRow {
  std::string observable;
  double observed = 0.0;
  double predicted = 0.0;
  double abs_deviation = 0.0;
  double rel_deviation = 0.0;
  double tolerance = 0.0;
  Criterion criterion = Criterion::relative;
  bool pass = false;
  std::string anchor;  // what the prediction is taken from
};

ComparisonRow make_row(std::string observable, double observed, double predicted,
                       double tolerance, Criterion criterion, std::string anchor = {});

struct ComparisonReport {
  std::string scenario;
  std::string config_hash;
  std::vector<ComparisonRow> rows;
  std::vector<std::string> notes;

  /// True iff every row passes (and there is at least one row).
  bool pass() const;
  void add(ComparisonRow row) { rows.push_back(std::move(row)); }

  nlohmann::json to_json() const;
  static ComparisonReport from_json(const nlohmann::json& j);
  void write_csv(std::ostream& os) const;
  /// Human-readable table.
  void print(std::ostream& os) const;
};

/// report.json and report.csv inside `dir`.
void write_report(const ComparisonReport& report, const std::filesystem::path& dir);
ComparisonReport read_report(const std::filesystem::path& dir);

}  // namespace dlambda
