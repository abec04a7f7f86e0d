#include "dlambda/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "dlambda/errors.hpp"
#include "dlambda/physical_model.hpp"

namespace dlambda {

namespace {

std::string_view criterion_name(Criterion c) {
  switch (c) {
    case Criterion::relative: return "relative";
    case Criterion::absolute: return "absolute";
    case Criterion::angle: return "angle";
    case Criterion::below: return "below";
  }
  return "relative";
}

Criterion parse_criterion(const std::string& s) {
  if (s == "relative") return Criterion::relative;
  if (s == "absolute") return Criterion::absolute;
  if (s == "angle") return Criterion::angle;
  if (s == "below") return Criterion::below;
  throw ConfigError(fmt::format("unknown comparison criterion '{}'", s));
}

// JSON has no NaN; non-finite numbers travel as null.
nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double num(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

}  // namespace

ComparisonRow make_row(std::string observable, double observed, double predicted,
                       double tolerance, Criterion criterion, std::string anchor) {
  ComparisonRow r;
  r.observable = std::move(observable);
  r.observed = observed;
  r.predicted = predicted;
  r.tolerance = tolerance;
  r.criterion = criterion;
  r.anchor = std::move(anchor);
  double diff = observed - predicted;
  if (criterion == Criterion::angle) diff = std::remainder(diff, 2.0 * kPi);
  r.abs_deviation = criterion == Criterion::below ? diff : std::abs(diff);
  r.rel_deviation = predicted != 0.0 ? std::abs(diff) / std::abs(predicted)
                                     : std::numeric_limits<double>::infinity();
  switch (criterion) {
    case Criterion::relative: r.pass = r.rel_deviation <= tolerance; break;
    case Criterion::absolute:
    case Criterion::angle: r.pass = r.abs_deviation <= tolerance; break;
    case Criterion::below: r.pass = observed < predicted; break;
  }
  if (!std::isfinite(observed) || !std::isfinite(predicted)) r.pass = false;
  return r;
}

bool ComparisonReport::pass() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
}

nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["config_hash"] = config_hash;
  j["pass"] = pass();
  j["notes"] = notes;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"observable", r.observable},
                         {"observed", num(r.observed)},
                         {"predicted", num(r.predicted)},
                         {"abs_deviation", num(r.abs_deviation)},
                         {"rel_deviation", num(r.rel_deviation)},
                         {"tolerance", num(r.tolerance)},
                         {"criterion", criterion_name(r.criterion)},
                         {"pass", r.pass},
                         {"anchor", r.anchor}});
  return j;
}

ComparisonReport ComparisonReport::from_json(const nlohmann::json& j) {
  ComparisonReport rep;
  try {
    rep.scenario = j.at("scenario").get<std::string>();
    rep.config_hash = j.at("config_hash").get<std::string>();
    rep.notes = j.at("notes").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
      ComparisonRow row;
      row.observable = r.at("observable").get<std::string>();
      row.observed = num(r.at("observed"));
      row.predicted = num(r.at("predicted"));
      row.abs_deviation = num(r.at("abs_deviation"));
      row.rel_deviation = num(r.at("rel_deviation"));
      row.tolerance = num(r.at("tolerance"));
      row.criterion = parse_criterion(r.at("criterion").get<std::string>());
      row.pass = r.at("pass").get<bool>();
      row.anchor = r.at("anchor").get<std::string>();
      rep.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("malformed report: {}", e.what()));
  }
  return rep;
}

void ComparisonReport::write_csv(std::ostream& os) const {
  fmt::print(os, "# scenario={} config_hash={} pass={}\n", scenario, config_hash, pass() ? 1 : 0);
  os << "observable,observed,predicted,abs_deviation,rel_deviation,tolerance,criterion,pass,anchor\n";
  for (const auto& r : rows)
    fmt::print(os, "{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},\"{}\"\n", r.observable,
               r.observed, r.predicted, r.abs_deviation, r.rel_deviation, r.tolerance,
               criterion_name(r.criterion), r.pass ? 1 : 0, r.anchor);
}

void ComparisonReport::print(std::ostream& os) const {
  fmt::print(os, "scenario {} (config {})\n", scenario, config_hash);
  for (const auto& r : rows) {
    fmt::print(os, "  [{}] {:<34} observed {:>14.7g}  predicted {:>14.7g}  dev {:>10.3e}  tol {:.3g} ({})\n",
               r.pass ? "PASS" : "FAIL", r.observable, r.observed, r.predicted,
               r.criterion == Criterion::relative ? r.rel_deviation : r.abs_deviation, r.tolerance,
               criterion_name(r.criterion));
  }
  for (const auto& n : notes) fmt::print(os, "  note: {}\n", n);
  fmt::print(os, "  verdict: {}\n", pass() ? "PASS" : "FAIL");
}

void write_report(const ComparisonReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream js(dir / "report.json");
  js << report.to_json().dump(2) << '\n';
  std::ofstream csv(dir / "report.csv");
  report.write_csv(csv);
  if (!js || !csv) throw std::runtime_error(fmt::format("cannot write report into '{}'", dir.string()));
}

ComparisonReport read_report(const std::filesystem::path& dir) {
  const auto path = dir / "report.json";
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("no report found at '{}'", path.string()));
  try {
    return ComparisonReport::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

}  // namespace dlambda
