#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dlambda/errors.hpp"
#include "dlambda/scenario_runner.hpp"

using namespace dlambda;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "dlambda-tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_json(const fs::path& file, const json& j) {
  std::ofstream(file) << j.dump(2);
  return file;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dlambda");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

json kind(const std::string& k) { return {{"scenario", {{"kind", k}}}}; }

}  // namespace

TEST_CASE("every scenario kind loads from defaults") {
  for (const char* k : {"smoothing", "transmission", "phase-control", "storage-phase-scan", "storage-profile", "custom"}) {
    const ScenarioConfig cfg = load_config(kind(k));
    CHECK(to_string(cfg.kind) == k);
    CHECK(cfg.grid.nz == 400);
    CHECK(cfg.grid.nt == 4000);
  }
  CHECK(load_config(kind("smoothing")).mode == SolverMode::full);
  CHECK(load_config(kind("transmission")).mode == SolverMode::reduced);
  CHECK(load_config(kind("storage-phase-scan")).phase3_values.size() == 12);
}

TEST_CASE("section IV defaults") {
  const ScenarioConfig cfg = load_config(kind("transmission"));
  CHECK(cfg.medium.density_N == 3e-13);
  CHECK(cfg.medium.length_L == 1e7);
  CHECK(cfg.drive.control2.base_amplitude == 1.2e-9);
  CHECK(cfg.drive.control4.base_amplitude == 1.8e-9);
  CHECK(cfg.drive.signal1.duration == 1e11);
  const MixingAngles a = mixing_angles(normalize_control(1.2e-9, cfg.scheme.d2, cfg.medium.kappa1),
                                       normalize_control(1.8e-9, cfg.scheme.d4, cfg.medium.kappa3));
  CHECK(cfg.grid.t_max == doctest::Approx(3e11 + 1e7 / group_velocity(a)));
}

TEST_CASE("equal storage inputs resolve to equal normalized amplitudes") {
  const ScenarioConfig cfg = load_config(kind("storage-phase-scan"));
  const DriveFunctions f = drive_functions(cfg, cfg.drive);
  CHECK(std::abs(f.controls.U4(0.0)) == doctest::Approx(std::abs(f.controls.U2(0.0))).epsilon(1e-14));
  CHECK(std::abs(f.R3(5e10)) == doctest::Approx(std::abs(f.R1(5e10))).epsilon(1e-14));
  CHECK(f.controls.angles(0.0).phi == doctest::Approx(kPi / 4));
}

TEST_CASE("configuration errors") {
  CHECK_THROWS_AS(load_config(json{{"scenario", {{"kind", "nope"}}}}), ConfigError);
  CHECK_THROWS_AS(load_config(json{{"medium", {{"densty", 1.0}}}}), ConfigError);
  CHECK_THROWS_AS(load_config(json{{"medium", {{"length", -1.0}}}}), ConfigError);
  CHECK_THROWS_AS(load_config(json{{"grid", {{"nz", 1}}}}), ConfigError);
  CHECK_THROWS_AS(load_config(json{{"scheme", {{"gamma_bc", 1e-10}}}}), ConfigError);
  CHECK_NOTHROW(load_config(json{{"scheme", {{"gamma_bc", 1e-10}}}, {"scenario", {{"mode", "full"}}}}));
  CHECK_THROWS_AS(load_config(json{{"signals", {{"signal1", {{"R", -1.0}}}}}}), ConfigError);
  CHECK_THROWS_AS(load_config(json{{"scenario", {{"tolerances", {{"bogus", 1.0}}}}}}), ConfigError);
  CHECK_THROWS_AS(read_json_file("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("normalized amplitudes in the config") {
  const ScenarioConfig cfg = load_config(json{{"signals", {{"signal1", {{"R", 2e-4}}}}}});
  const DriveFunctions f = drive_functions(cfg, cfg.drive);
  CHECK(std::abs(f.R1(5e10)) == doctest::Approx(2e-4).epsilon(1e-12));
}

TEST_CASE("config hash is stable and sensitive") {
  const ScenarioConfig a = load_config(kind("transmission"));
  const ScenarioConfig b = load_config(kind("transmission"));
  const ScenarioConfig c = load_config(json{{"scenario", {{"kind", "transmission"}}}, {"medium", {{"length", 2e7}}}});
  CHECK(a.hash == b.hash);
  CHECK(a.hash != c.hash);
  const ScenarioConfig d = load_config(json{{"scenario", {{"kind", "transmission"}}}, {"output", {{"directory", "elsewhere"}}}});
  CHECK(a.hash == d.hash);
  CHECK(hash_hex(a.hash).size() == 16);
}

TEST_CASE("parameter paths") {
  json merged = merge_with_defaults(kind("transmission"));
  set_parameter(merged, "controls.control4.phase", 1.5);
  CHECK(merged["controls"]["control4"]["phase"] == 1.5);
  set_parameter(merged, "/medium/length", 2e7);
  CHECK(merged["medium"]["length"] == 2e7);
  CHECK_THROWS_AS(set_parameter(merged, "controls.control9.phase", 1.0), ConfigError);
  CHECK_THROWS_AS(set_parameter(merged, "controls.control4", 1.0), ConfigError);
  CHECK_THROWS_AS(set_parameter(merged, "", 1.0), ConfigError);
}

TEST_CASE("value parsing") {
  CHECK(parse_value("0.5") == 0.5);
  CHECK(parse_value("pi") == doctest::Approx(kPi));
  CHECK(parse_value("-pi/2") == doctest::Approx(-kPi / 2));
  CHECK(parse_value("7*pi/6") == doctest::Approx(7 * kPi / 6));
  CHECK(parse_value("2pi/3") == doctest::Approx(2 * kPi / 3));
  CHECK(parse_value(" 1e-9 ") == 1e-9);
  CHECK_THROWS_AS(parse_value("abc"), UsageError);
  CHECK_THROWS_AS(parse_value("pi/0"), UsageError);
  CHECK_THROWS_AS(parse_value("1.5x"), UsageError);
  CHECK(parse_value_list("7pi/6, pi/6").size() == 2);
  CHECK(parse_value_list("").empty());
}

TEST_CASE("comparison rows") {
  CHECK(make_row("a", 1.01, 1.0, 0.02, Criterion::relative).pass);
  CHECK_FALSE(make_row("a", 1.03, 1.0, 0.02, Criterion::relative).pass);
  CHECK(make_row("a", kPi - 0.001, -kPi + 0.001, 0.01, Criterion::angle).pass);
  CHECK(make_row("a", 0.5, 1.0, 0.0, Criterion::below).pass);
  CHECK_FALSE(make_row("a", 1.0, 1.0, 0.0, Criterion::below).pass);
  CHECK_FALSE(make_row("a", std::nan(""), 1.0, 1.0, Criterion::absolute).pass);
  ComparisonReport empty;
  CHECK_FALSE(empty.pass());
}

TEST_CASE("report JSON round trip keeps verdicts and non-finite values") {
  ComparisonReport rep;
  rep.scenario = "transmission";
  rep.config_hash = "0123456789abcdef";
  rep.add(make_row("x", 1.0, 1.0, 0.1, Criterion::relative, "anchor"));
  rep.add(make_row("y", std::nan(""), 1.0, 0.1, Criterion::absolute));
  rep.notes.push_back("note");
  const ComparisonReport back = ComparisonReport::from_json(rep.to_json());
  CHECK(back.rows.size() == 2);
  CHECK(back.rows[0].pass);
  CHECK(std::isnan(back.rows[1].observed));
  CHECK(back.pass() == rep.pass());
  CHECK(back.notes == rep.notes);
  CHECK_THROWS_AS(ComparisonReport::from_json(json{{"rows", 1}}), ConfigError);
}

TEST_CASE("measurement helpers") {
  std::vector<double> x;
  std::vector<cplx> v;
  for (int i = 0; i <= 100; ++i) {
    x.push_back(0.1 * i);
    v.emplace_back(100.0 - std::pow(0.1 * i - 4.23, 2), 0.0);
  }
  const Peak p = find_peak(x, v);
  CHECK(p.position == doctest::Approx(4.23).epsilon(1e-12));
  CHECK(p.value == doctest::Approx(100.0).epsilon(1e-12));

  std::vector<cplx> s;
  x.clear();
  for (int i = 0; i <= 1000; ++i) {
    x.push_back(i * 1e-3);
    s.emplace_back(std::pow(std::sin(kPi * i * 1e-3), 2), 0.0);
  }
  CHECK(fwhm(x, s) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(total_variation(s) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::isnan(fwhm(x, std::vector<cplx>(x.size(), cplx(1.0, 0.0)))));
}

TEST_CASE("predictions never call the solver") {
  const std::size_t before = solver_invocations();
  const auto start = std::chrono::steady_clock::now();
  const PredictionResult res = run_prediction(load_config(kind("transmission")), false);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(solver_invocations() == before);
  CHECK(seconds < 1.0);
  CHECK(res.values.at("R1_peak") > 0);
  for (const char* k : {"storage-profile", "storage-phase-scan", "smoothing"}) {
    run_prediction(load_config(kind(k)), false);
    CHECK(solver_invocations() == before);
  }
}

TEST_CASE("group velocity grows with control amplitude") {
  json merged = merge_with_defaults(kind("transmission"));
  double prev = 0.0;
  for (double amp : {0.6e-9, 1.2e-9, 2.4e-9, 4.8e-9}) {
    set_parameter(merged, "controls.control2.amplitude", amp);
    const double v = run_prediction(load_config(merged), false).values.at("group_velocity_entry");
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("transmission scenario passes and writes tagged CSVs") {
  const fs::path out = scratch("transmission");
  ScenarioConfig cfg = load_config(json{{"scenario", {{"kind", "transmission"}}}, {"output", {{"directory", out.string()}}}});
  const ScenarioResult res = run_scenario(cfg);
  CHECK(res.report.pass());
  bool anchored = false;
  for (const auto& r : res.report.rows) anchored = anchored || !r.anchor.empty();
  CHECK(anchored);
  for (const auto& f : res.files) {
    REQUIRE(fs::exists(f));
    if (f.extension() == ".csv") CHECK(slurp(f).rfind("# ", 0) == 0);
  }
  CHECK(slurp(out / "prediction_exit.csv").find(hash_hex(cfg.hash)) != std::string::npos);
  CHECK(read_report(out).pass() == res.report.pass());
}

TEST_CASE("identical configs give bit-identical outputs") {
  const fs::path a = scratch("det-a"), b = scratch("det-b");
  const json base = {{"scenario", {{"kind", "transmission"}}}, {"grid", {{"nz", 100}, {"nt", 3000}}}};
  json ja = base, jb = base;
  ja["output"]["directory"] = a.string();
  jb["output"]["directory"] = b.string();
  run_scenario(load_config(ja));
  run_scenario(load_config(jb));
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    std::string sa = slurp(e.path()), sb = slurp(b / e.path().filename());
    CHECK(sa == sb);
    ++compared;
  }
  CHECK(compared > 3);
}

TEST_CASE("scan over the control-4 phase reproduces the case a/b ordering") {
  const fs::path out = scratch("scan");
  const auto entries = scan(kind("phase-control"), "controls.control4.phase", {7 * kPi / 6, kPi / 6}, out);
  REQUIRE(entries.size() == 2);
  auto row = [](const ScanEntry& e, const std::string& name) {
    for (const auto& r : e.report->rows)
      if (r.observable == name) return r;
    throw std::runtime_error("missing row " + name);
  };
  for (const char* name : {"R1 transmitted peak height", "R3 transmitted peak height"}) {
    const ComparisonRow a = row(entries[0], name), b = row(entries[1], name);
    CHECK(a.predicted > b.predicted);
    CHECK(a.observed > b.observed);
  }
  CHECK(entries[0].report->pass());
  CHECK(fs::exists(out / "scan.csv"));
  CHECK(fs::exists(out / "scan_000" / "report.json"));
  CHECK_THROWS_AS(scan(kind("phase-control"), "controls.control4.phase", {}, out), UsageError);
  CHECK_THROWS_AS(scan(kind("phase-control"), "controls.nothing", {1.0}, out, false), ConfigError);
}

TEST_CASE("scan records failing runs and continues") {
  const fs::path out = scratch("scan-errors");
  const auto entries = scan(json{{"scenario", {{"kind", "transmission"}}}, {"grid", {{"nz", 60}, {"nt", 3000}}}},
                            "medium.length", {-1.0, 1e7}, out);
  CHECK_FALSE(entries[0].error.empty());
  CHECK(entries[1].error.empty());
  CHECK(entries[1].report.has_value());
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  const fs::path transmission = write_json(dir / "transmission.json", kind("transmission"));
  const fs::path bad_key = write_json(dir / "bad.json", json{{"medium", {{"densty", 1.0}}}});
  {
    std::ofstream(dir / "broken.json") << "{ not json";
  }

  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"simulate"}) == 2);
  CHECK(run_cli({"simulate", transmission.string(), "--bogus"}) == 2);
  CHECK(run_cli({"simulate", (dir / "missing.json").string()}) == 2);
  CHECK(run_cli({"simulate", (dir / "broken.json").string()}) == 2);
  CHECK(run_cli({"predict", bad_key.string()}) == 2);
  CHECK(run_cli({"report", (dir / "nowhere").string()}) == 2);
  CHECK(run_cli({"scan", transmission.string(), "--param", "controls.control4.phase", "--values", ""}) == 2);

  const std::size_t before = solver_invocations();
  CHECK(run_cli({"predict", transmission.string(), "-o", (dir / "pred").string()}) == 0);
  CHECK(solver_invocations() == before);
  CHECK(fs::exists(dir / "pred" / "predictions.json"));

  CHECK(run_cli({"simulate", transmission.string(), "-q", "-o", (dir / "sim").string()}) == 0);
  CHECK(run_cli({"report", (dir / "sim").string()}) == 0);
  CHECK(run_cli({"susceptibility", transmission.string(), "-o", (dir / "chi").string()}) == 0);
  CHECK(fs::exists(dir / "chi" / "susceptibility.csv"));
}

TEST_CASE("a failing comparison gives exit code 1 and report repeats it") {
  const fs::path dir = scratch("cli-fail");
  const fs::path cfg = write_json(dir / "strict.json", json{{"scenario", {{"kind", "transmission"}, {"tolerances", {{"height_rel", 1e-9}}}}}});
  CHECK(run_cli({"simulate", cfg.string(), "-q", "-o", (dir / "out").string()}) == 1);
  CHECK(run_cli({"report", (dir / "out").string()}) == 1);
}

TEST_CASE("output directory precedence") {
  const fs::path dir = scratch("cli-env");
  const fs::path cfg = write_json(dir / "t.json", json{{"scenario", {{"kind", "transmission"}}},
                                                      {"output", {{"directory", (dir / "from-config").string()}}}});
  ::setenv("DLAMBDA_OUTPUT_DIR", (dir / "from-env").string().c_str(), 1);
  CHECK(run_cli({"predict", cfg.string()}) == 0);
  CHECK(run_cli({"predict", cfg.string(), "-o", (dir / "from-flag").string()}) == 0);
  ::unsetenv("DLAMBDA_OUTPUT_DIR");
  CHECK(run_cli({"predict", cfg.string()}) == 0);
  CHECK(fs::exists(dir / "from-env" / "predictions.json"));
  CHECK(fs::exists(dir / "from-flag" / "predictions.json"));
  CHECK(fs::exists(dir / "from-config" / "predictions.json"));
}
