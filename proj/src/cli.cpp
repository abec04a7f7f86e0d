#include <cstdlib>
#include <iostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "dlambda/errors.hpp"
#include "dlambda/scenario_runner.hpp"

namespace dlambda {

namespace {

// --output wins over DLAMBDA_OUTPUT_DIR, which wins over the config file.
void apply_output_override(json& user, const std::string& flag) {
  std::string dir = flag;
  if (dir.empty())
    if (const char* env = std::getenv("DLAMBDA_OUTPUT_DIR"); env && *env) dir = env;
  if (!dir.empty()) user["output"]["directory"] = dir;
}

ScenarioConfig load(const std::string& path, const std::string& output) {
  json user = read_json_file(path);
  if (!user.is_object()) throw ConfigError(fmt::format("'{}' must hold a JSON object", path));
  apply_output_override(user, output);
  return load_config(user);
}

void list_files(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) fmt::print("  wrote {}\n", f.string());
}

int report_command(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "report.json")) {
    const ComparisonReport rep = read_report(dir);
    rep.print(std::cout);
    return rep.pass() ? 0 : 1;
  }
  const auto scan_file = dir / "scan.json";
  if (!std::filesystem::exists(scan_file))
    throw ConfigError(fmt::format("no report.json or scan.json in '{}'", dir.string()));
  const json j = read_json_file(scan_file);
  bool all = true;
  try {
    fmt::print("scan over {}\n", j.at("parameter").get<std::string>());
    for (const auto& r : j.at("runs")) {
      const auto status = r.at("status").get<std::string>();
      all = all && status == "pass";
      fmt::print("  [{}] value {:.10g} {}\n", status, r.at("value").get<double>(),
                 r.at("error").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed scan summary: {}", e.what()));
  }
  return all ? 0 : 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Double-Lambda light propagation and storage simulator"};
  app.require_subcommand(1);

  std::string config_path, output, param, values, report_dir;
  bool quiet = false;

  auto* sim = app.add_subcommand("simulate", "run the solver and compare with closed-form predictions");
  sim->add_option("config", config_path, "scenario JSON file")->required();
  sim->add_option("-o,--output", output, "output directory");
  sim->add_flag("-q,--quiet", quiet, "print only the verdict");

  auto* pred = app.add_subcommand("predict", "closed-form predictions only");
  pred->add_option("config", config_path, "scenario JSON file")->required();
  pred->add_option("-o,--output", output, "output directory");

  auto* sus = app.add_subcommand("susceptibility", "susceptibility curves and identities");
  sus->add_option("config", config_path, "scenario JSON file")->required();
  sus->add_option("-o,--output", output, "output directory");

  auto* scn = app.add_subcommand("scan", "repeat a scenario over parameter values");
  scn->add_option("config", config_path, "scenario JSON file")->required();
  scn->add_option("--param", param, "dotted path or JSON pointer of a numeric parameter")->required();
  scn->add_option("--values", values, "comma-separated values, 'pi' expressions allowed")->required();
  scn->add_option("-o,--output", output, "output directory");

  auto* rep = app.add_subcommand("report", "print a stored report and return its verdict");
  rep->add_option("directory", report_dir, "directory holding report.json or scan.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) {
      const ScenarioConfig cfg = load(config_path, output);
      const ScenarioResult res = run_scenario(cfg);
      if (quiet)
        fmt::print("{} {}\n", res.report.scenario, res.report.pass() ? "PASS" : "FAIL");
      else {
        res.report.print(std::cout);
        list_files(res.files);
      }
      return res.report.pass() ? 0 : 1;
    }
    if (*pred) {
      const ScenarioConfig cfg = load(config_path, output);
      const PredictionResult res = run_prediction(cfg);
      for (const auto& [name, v] : res.values) fmt::print("  {:<32} {:.12g}\n", name, v);
      list_files(res.files);
      return 0;
    }
    if (*sus) {
      const ScenarioConfig cfg = load(config_path, output);
      const ScenarioResult res = run_susceptibility(cfg);
      res.report.print(std::cout);
      list_files(res.files);
      return res.report.pass() ? 0 : 1;
    }
    if (*scn) {
      json user = read_json_file(config_path);
      if (!user.is_object()) throw ConfigError(fmt::format("'{}' must hold a JSON object", config_path));
      apply_output_override(user, output);
      const auto list = parse_value_list(values);
      const std::filesystem::path root = load_config(user).output_dir;
      const auto entries = scan(user, param, list, root);
      bool all = true;
      for (const auto& e : entries) {
        const std::string status = !e.error.empty() ? "ERROR" : e.report->pass() ? "PASS" : "FAIL";
        all = all && status == "PASS";
        fmt::print("  {} = {:<14.10g} {} {}\n", param, e.value, status, e.error);
      }
      fmt::print("  wrote {}\n", (root / "scan.csv").string());
      return all ? 0 : 1;
    }
    if (*rep) return report_command(report_dir);
  } catch (const ConfigError& e) {
    fmt::print(std::cerr, "configuration error: {}\n", e.what());
    return 2;
  } catch (const UsageError& e) {
    fmt::print(std::cerr, "usage error: {}\n", e.what());
    return 2;
  } catch (const DomainError& e) {
    fmt::print(std::cerr, "invalid parameter: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace dlambda
