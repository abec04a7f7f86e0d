#include "dlambda/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/core.h>

#include "dlambda/errors.hpp"
#include "dlambda/polariton_analysis.hpp"

namespace dlambda {

namespace {

constexpr double kPulseDuration = 1e11;

json signal_block(double amplitude) {
  return {{"shape", "sine-square"}, {"amplitude", amplitude}, {"duration", kPulseDuration},
          {"phase", 0.0},           {"start_time", 0.0}};
}

json control_block(double amplitude) {
  return {{"amplitude", amplitude}, {"phase", 0.0},         {"off_time", nullptr},
          {"on_time", nullptr},     {"ramp_width", "auto"}};
}

// Objects merge key by key; any other value (null included) replaces.
void deep_merge(json& target, const json& patch) {
  if (!patch.is_object() || !target.is_object()) {
    target = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (target.contains(it.key()))
      deep_merge(target[it.key()], it.value());
    else
      target[it.key()] = it.value();
  }
}

// Keys that may appear in place of a default key.
const std::map<std::string, std::string>& alternate_keys() {
  static const std::map<std::string, std::string> alt{{"R", "amplitude"}, {"U", "amplitude"}};
  return alt;
}

void check_known_keys(const json& user, const json& defaults, const std::string& where) {
  if (!user.is_object() || !defaults.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = where + "/" + it.key();
    if (path == "/scenario/tolerances") {
      if (!it->is_object()) throw ConfigError("/scenario/tolerances must be an object");
      for (auto t = it->begin(); t != it->end(); ++t)
        if (!default_tolerances().count(t.key()))
          throw ConfigError(fmt::format("unknown tolerance key '{}'", t.key()));
      continue;
    }
    if (path == "/scheme/carriers") continue;
    const auto alt = alternate_keys().find(it.key());
    if (defaults.contains(it.key()))
      check_known_keys(*it, defaults[it.key()], path);
    else if (alt == alternate_keys().end())
      throw ConfigError(fmt::format("unknown configuration key '{}'", path));
  }
}

const json& at(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(fmt::format("missing configuration key '{}/{}'", where, key));
  return j.at(key);
}

double number(const json& j, const char* key, const std::string& where) {
  const json& v = at(j, key, where);
  if (!v.is_number()) throw ConfigError(fmt::format("'{}/{}' must be a number", where, key));
  return v.get<double>();
}

std::optional<double> optional_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return number(j, key, where);
}

std::size_t count(const json& j, const char* key, const std::string& where) {
  const json& v = at(j, key, where);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(fmt::format("'{}/{}' must be a non-negative integer", where, key));
  return v.get<std::size_t>();
}

std::string text(const json& j, const char* key, const std::string& where) {
  const json& v = at(j, key, where);
  if (!v.is_string()) throw ConfigError(fmt::format("'{}/{}' must be a string", where, key));
  return v.get<std::string>();
}

bool is_auto(const json& v) { return v.is_string() && v.get<std::string>() == "auto"; }

template <class F>
auto rethrow_as_config(F&& f, const std::string& where) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", where, e.what()));
  }
}

LevelScheme build_scheme(const json& s, const PhysicalConstants& k) {
  const std::string w = "/scheme";
  SchemeParameters p;
  p.E_a = number(s, "E_a", w);
  p.E_b = number(s, "E_b", w);
  p.E_c = number(s, "E_c", w);
  p.E_d = number(s, "E_d", w);
  p.Gamma_a = number(s, "Gamma_a", w);
  p.Gamma_d = number(s, "Gamma_d", w);
  p.gamma_bc = number(s, "gamma_bc", w);
  p.resonance_tolerance = number(s, "resonance_tolerance", w);
  const json& cw = at(s, "channel_widths", w);
  p.channels.ab = optional_number(cw, "ab", w + "/channel_widths");
  p.channels.ac = optional_number(cw, "ac", w + "/channel_widths");
  p.channels.db = optional_number(cw, "db", w + "/channel_widths");
  p.channels.dc = optional_number(cw, "dc", w + "/channel_widths");
  const json& ph = at(s, "dipole_phases", w);
  if (!ph.is_array() || ph.size() != 4)
    throw ConfigError("/scheme/dipole_phases must hold four numbers");
  for (const auto& v : ph)
    if (!v.is_number()) throw ConfigError("/scheme/dipole_phases must hold four numbers");
  p.phase1 = ph[0].get<double>();
  p.phase2 = ph[1].get<double>();
  p.phase3 = ph[2].get<double>();
  p.phase4 = ph[3].get<double>();

  LevelScheme scheme = rethrow_as_config([&] { return make_resonant_scheme(p, k); }, "/scheme");
  const json& carriers = at(s, "carriers", w);
  if (!carriers.is_null()) {
    const std::string cwh = w + "/carriers";
    scheme.omega1 = number(carriers, "omega1", cwh);
    scheme.omega2 = number(carriers, "omega2", cwh);
    scheme.omega3 = number(carriers, "omega3", cwh);
    scheme.omega4 = number(carriers, "omega4", cwh);
    scheme.validate();
  }
  return scheme;
}

PulseSpec build_signal(const json& j, const std::string& w, cplx d, double kappa,
                       std::optional<double> equal_R, const PhysicalConstants& k) {
  PulseSpec p;
  p.shape = rethrow_as_config([&] { return parse_pulse_shape(text(j, "shape", w)); }, w);
  p.duration = number(j, "duration", w);
  p.phase = number(j, "phase", w);
  p.start_time = number(j, "start_time", w);
  const bool has_amp = j.contains("amplitude"), has_R = j.contains("R");
  if (has_amp == has_R)
    throw ConfigError(fmt::format("'{}' needs exactly one of 'amplitude' or 'R'", w));
  if (has_amp) {
    p.amplitude = number(j, "amplitude", w);
  } else {
    const json& R = j.at("R");
    double r = 0.0;
    if (R.is_string() && R.get<std::string>() == "equal" && equal_R)
      r = *equal_R;
    else if (R.is_number())
      r = R.get<double>();
    else
      throw ConfigError(fmt::format("'{}/R' must be a number{}", w, equal_R ? " or \"equal\"" : ""));
    if (r < 0) throw ConfigError(fmt::format("'{}/R' must be non-negative", w));
    p.amplitude = std::abs(denormalize_signal(r, d, kappa, k));
  }
  p.validate();
  return p;
}

ControlSchedule build_control(const json& j, const std::string& w, cplx d, double kappa,
                              std::optional<double> equal_U, double default_ramp,
                              const PhysicalConstants& k) {
  ControlSchedule c;
  c.phase = number(j, "phase", w);
  c.off_time = optional_number(j, "off_time", w);
  c.on_time = optional_number(j, "on_time", w);
  const json& ramp = at(j, "ramp_width", w);
  c.ramp_width = is_auto(ramp) ? default_ramp : number(j, "ramp_width", w);
  const bool has_amp = j.contains("amplitude"), has_U = j.contains("U");
  if (has_amp == has_U)
    throw ConfigError(fmt::format("'{}' needs exactly one of 'amplitude' or 'U'", w));
  if (has_amp) {
    c.base_amplitude = number(j, "amplitude", w);
  } else {
    const json& U = j.at("U");
    double u = 0.0;
    if (U.is_string() && U.get<std::string>() == "equal" && equal_U)
      u = *equal_U;
    else if (U.is_number())
      u = U.get<double>();
    else
      throw ConfigError(fmt::format("'{}/U' must be a number{}", w, equal_U ? " or \"equal\"" : ""));
    if (u < 0) throw ConfigError(fmt::format("'{}/U' must be non-negative", w));
    c.base_amplitude = std::abs(denormalize_signal(u, d, kappa, k));
  }
  c.validate();
  return c;
}

}  // namespace

ScenarioKind parse_scenario_kind(std::string_view name) {
  if (name == "smoothing") return ScenarioKind::smoothing;
  if (name == "transmission") return ScenarioKind::transmission;
  if (name == "phase-control") return ScenarioKind::phase_control;
  if (name == "storage-phase-scan") return ScenarioKind::storage_phase_scan;
  if (name == "storage-profile") return ScenarioKind::storage_profile;
  if (name == "custom") return ScenarioKind::custom;
  throw ConfigError(fmt::format("unknown scenario kind '{}'", name));
}

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::smoothing: return "smoothing";
    case ScenarioKind::transmission: return "transmission";
    case ScenarioKind::phase_control: return "phase-control";
    case ScenarioKind::storage_phase_scan: return "storage-phase-scan";
    case ScenarioKind::storage_profile: return "storage-profile";
    case ScenarioKind::custom: return "custom";
  }
  return "custom";
}

const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> tol{
      {"height_rel", 0.02},           // transmitted peak heights
      {"phase_abs", 1e-2},            // transmitted and stored phases, rad
      {"delay_rel", 0.05},            // pulse delay inside the medium
      {"bright_ratio", 0.10},         // bright-polariton norm, deepest / entry
      {"energy_rel", 0.01},           // transmitted energy fraction
      {"profile_width_rel", 0.05},    // stored profile width
      {"profile_amplitude_rel", 0.03},
      {"profile_position_cells", 2.0},
  };
  return tol;
}

double ScenarioConfig::tolerance(const std::string& key) const {
  const auto it = tolerances.find(key);
  if (it != tolerances.end()) return it->second;
  return default_tolerances().at(key);
}

json default_config(ScenarioKind kind) {
  json j;
  const PhysicalConstants k;
  j["constants"] = {{"c", k.c}, {"hbar", k.hbar}, {"eps0", k.eps0}};
  j["scheme"] = {{"E_a", -0.10},
                 {"E_b", -0.20},
                 {"E_c", -0.18},
                 {"E_d", -0.05},
                 {"Gamma_a", 2.4e-9},
                 {"Gamma_d", 2.4e-9},
                 {"gamma_bc", 0.0},
                 {"channel_widths", {{"ab", nullptr}, {"ac", nullptr}, {"db", nullptr}, {"dc", nullptr}}},
                 {"dipole_phases", {0.0, 0.0, 0.0, 0.0}},
                 {"resonance_tolerance", 1e-15},
                 {"carriers", nullptr}};
  j["medium"] = {{"density", 3e-13}, {"length", 1e7}};
  j["signals"] = {{"signal1", signal_block(1e-10)}, {"signal3", signal_block(1e-10)}};
  j["controls"] = {{"control2", control_block(1.2e-9)}, {"control4", control_block(1.8e-9)}};
  j["grid"] = {{"nz", 400}, {"nt", 4000}, {"t_max", "auto"}};
  j["scenario"] = {{"kind", std::string(to_string(kind))},
                   {"mode", "reduced"},
                   {"z_scheme", "trapezoidal"},
                   {"record_depths", json::array()},
                   {"record_stride", 0},
                   {"enforce_resolution", true},
                   {"resolution_factor", 20.0},
                   {"phase3_values", json::array()},
                   {"tolerances", json::object()}};
  j["output"] = {{"directory", fmt::format("dlambda-output/{}", to_string(kind))},
                 {"write_histories", true}};

  auto equal_controls = [&](double off_time) {
    j["controls"]["control4"].erase("amplitude");
    j["controls"]["control4"]["U"] = "equal";
    j["signals"]["signal3"].erase("amplitude");
    j["signals"]["signal3"]["R"] = "equal";
    j["controls"]["control2"]["off_time"] = off_time;
    j["controls"]["control4"]["off_time"] = off_time;
  };

  switch (kind) {
    case ScenarioKind::smoothing:
      j["scenario"]["mode"] = "full";
      j["medium"]["length"] = 3e7;
      j["signals"]["signal1"]["shape"] = "rectangular";
      j["signals"]["signal1"]["start_time"] = 0.1 * kPulseDuration;
      j["signals"]["signal3"]["amplitude"] = 0.0;
      j["controls"]["control4"]["amplitude"] = 0.0;
      j["scenario"]["record_depths"] = {0.0, 3e6, 1.5e7, 3e7};
      break;
    case ScenarioKind::phase_control:
      j["controls"]["control2"]["phase"] = kPi / 2;
      j["signals"]["signal3"]["phase"] = 2 * kPi / 3;
      j["controls"]["control4"]["phase"] = 7 * kPi / 6;
      break;
    case ScenarioKind::storage_phase_scan: {
      equal_controls(0.5 * kPulseDuration);
      json phases = json::array();
      for (int i = 0; i <= 12; ++i)
        if (i != 6) phases.push_back(i * kPi / 6);
      j["scenario"]["phase3_values"] = phases;
      break;
    }
    case ScenarioKind::storage_profile:
      equal_controls(1.25 * kPulseDuration);
      j["medium"]["length"] = 3.5e8;
      break;
    case ScenarioKind::transmission:
    case ScenarioKind::custom:
      break;
  }
  return j;
}

json merge_with_defaults(const json& user) {
  if (!user.is_object()) throw ConfigError("configuration must be a JSON object");
  ScenarioKind kind = ScenarioKind::custom;
  if (user.contains("scenario") && user["scenario"].contains("kind")) {
    const json& k = user["scenario"]["kind"];
    if (!k.is_string()) throw ConfigError("/scenario/kind must be a string");
    kind = parse_scenario_kind(k.get<std::string>());
  }
  json merged = default_config(kind);
  // a user-supplied normalized amplitude replaces the default field amplitude
  // and vice versa
  for (const auto& [block, alt] : {std::pair{"signals", "R"}, std::pair{"controls", "U"}}) {
    if (!user.contains(block) || !user[block].is_object()) continue;
    for (auto it = user[block].begin(); it != user[block].end(); ++it) {
      if (!merged[block].contains(it.key()) || !it->is_object()) continue;
      json& target = merged[block][it.key()];
      if (it->contains(alt)) target.erase("amplitude");
      if (it->contains("amplitude")) target.erase(alt);
    }
  }
  check_known_keys(user, default_config(kind), "");
  deep_merge(merged, user);
  return merged;
}

ScenarioConfig load_config(const json& user) {
  ScenarioConfig cfg;
  cfg.resolved = merge_with_defaults(user);
  const json& j = cfg.resolved;

  const json& sc = at(j, "scenario", "");
  cfg.kind = parse_scenario_kind(text(sc, "kind", "/scenario"));
  cfg.mode = rethrow_as_config([&] { return parse_solver_mode(text(sc, "mode", "/scenario")); }, "/scenario/mode");
  cfg.solver.z_scheme = parse_z_scheme(text(sc, "z_scheme", "/scenario"));
  for (const auto& d : at(sc, "record_depths", "/scenario")) {
    if (!d.is_number()) throw ConfigError("/scenario/record_depths must hold numbers");
    cfg.solver.record_depths.push_back(d.get<double>());
  }
  cfg.solver.record_stride = count(sc, "record_stride", "/scenario");
  const json& enforce = at(sc, "enforce_resolution", "/scenario");
  if (!enforce.is_boolean()) throw ConfigError("/scenario/enforce_resolution must be a boolean");
  cfg.solver.enforce_resolution = enforce.get<bool>();
  cfg.solver.resolution_factor = number(sc, "resolution_factor", "/scenario");
  if (!(cfg.solver.resolution_factor > 0))
    throw ConfigError("/scenario/resolution_factor must be positive");
  for (const auto& p : at(sc, "phase3_values", "/scenario")) {
    if (!p.is_number()) throw ConfigError("/scenario/phase3_values must hold numbers");
    cfg.phase3_values.push_back(p.get<double>());
  }
  if (cfg.kind == ScenarioKind::storage_phase_scan && cfg.phase3_values.empty())
    throw ConfigError("storage-phase-scan needs a non-empty /scenario/phase3_values");
  for (auto it = sc["tolerances"].begin(); it != sc["tolerances"].end(); ++it) {
    if (!it->is_number() || it->get<double>() < 0)
      throw ConfigError(fmt::format("tolerance '{}' must be a non-negative number", it.key()));
    cfg.tolerances[it.key()] = it->get<double>();
  }

  const json& kc = at(j, "constants", "");
  cfg.constants = {number(kc, "c", "/constants"), number(kc, "hbar", "/constants"),
                   number(kc, "eps0", "/constants")};
  cfg.constants.validate();
  const PhysicalConstants& k = cfg.constants;

  cfg.scheme = build_scheme(at(j, "scheme", ""), k);
  cfg.detunings = compute_detunings(cfg.scheme, k);
  if (cfg.mode == SolverMode::reduced &&
      (cfg.detunings.Delta1.real() != 0 || cfg.detunings.Delta3.real() != 0 ||
       cfg.detunings.delta.real() != 0 || cfg.scheme.gamma_bc != 0))
    throw ConfigError("reduced mode is resonant and lossless in the lower coherence; use mode \"full\" "
                      "for detuned carriers or gamma_bc > 0");

  const json& m = at(j, "medium", "");
  cfg.medium = make_medium(cfg.scheme, number(m, "density", "/medium"), number(m, "length", "/medium"), k);

  const json& sig = at(j, "signals", "");
  cfg.drive.signal1 = build_signal(at(sig, "signal1", "/signals"), "/signals/signal1", cfg.scheme.d1,
                                   cfg.medium.kappa1, std::nullopt, k);
  const double R1 = std::abs(normalize_signal(cfg.drive.signal1.amplitude, cfg.scheme.d1, cfg.medium.kappa1, k));
  cfg.drive.signal3 = build_signal(at(sig, "signal3", "/signals"), "/signals/signal3", cfg.scheme.d3,
                                   cfg.medium.kappa3, R1, k);

  const double T = std::max(cfg.drive.signal1.duration, cfg.drive.signal3.duration);
  const json& ctl = at(j, "controls", "");
  cfg.drive.control2 = build_control(at(ctl, "control2", "/controls"), "/controls/control2",
                                     cfg.scheme.d2, cfg.medium.kappa1, std::nullopt, T / 20, k);
  const double U2 = std::abs(normalize_control(cfg.drive.control2.base_amplitude, cfg.scheme.d2, cfg.medium.kappa1, k));
  cfg.drive.control4 = build_control(at(ctl, "control4", "/controls"), "/controls/control4",
                                     cfg.scheme.d4, cfg.medium.kappa3, U2, T / 20, k);

  const json& g = at(j, "grid", "");
  double t_max = 0.0;
  if (is_auto(at(g, "t_max", "/grid"))) {
    const double U4 = std::abs(normalize_control(cfg.drive.control4.base_amplitude, cfg.scheme.d4, cfg.medium.kappa3, k));
    const double v0 = group_velocity(mixing_angles(U2, U4), k);
    if (!(v0 > 0)) throw ConfigError("/grid/t_max \"auto\" needs a non-zero control; give t_max explicitly");
    const double end = std::max(cfg.drive.signal1.end_time(), cfg.drive.signal3.end_time());
    t_max = 3.0 * end + cfg.medium.length_L / v0;
  } else {
    t_max = number(g, "t_max", "/grid");
  }
  cfg.grid = Grid::make(count(g, "nz", "/grid"), count(g, "nt", "/grid"), cfg.medium.length_L, t_max);

  const json& out = at(j, "output", "");
  cfg.output_dir = text(out, "directory", "/output");
  const json& wh = at(out, "write_histories", "/output");
  if (!wh.is_boolean()) throw ConfigError("/output/write_histories must be a boolean");
  cfg.write_histories = wh.get<bool>();

  cfg.hash = config_hash(cfg.resolved);
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open configuration file '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

std::uint64_t config_hash(const json& j) {
  json physics = j;
  if (physics.is_object()) physics.erase("output");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : physics.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

json::json_pointer parameter_pointer(const std::string& path) {
  if (path.empty()) throw ConfigError("empty parameter path");
  if (path.front() == '/') {
    try {
      return json::json_pointer(path);
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("bad JSON pointer '{}': {}", path, e.what()));
    }
  }
  std::string pointer;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(fmt::format("bad parameter path '{}'", path));
    pointer += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(pointer);
}

void set_parameter(json& merged, const std::string& path, double value) {
  const json::json_pointer ptr = parameter_pointer(path);
  if (!merged.contains(ptr))
    throw ConfigError(fmt::format("parameter path '{}' does not exist in the configuration", path));
  json& slot = merged[ptr];
  if (!(slot.is_number() || slot.is_null() || is_auto(slot)))
    throw ConfigError(fmt::format("parameter path '{}' does not address a scalar", path));
  if (slot.is_number_integer() && std::floor(value) == value)
    slot = static_cast<long long>(value);
  else
    slot = value;
}

}  // namespace dlambda
