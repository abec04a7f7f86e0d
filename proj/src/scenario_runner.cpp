#include "dlambda/scenario_runner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "dlambda/errors.hpp"
#include "dlambda/susceptibility.hpp"

namespace dlambda {

namespace {

constexpr const char* kDarkAnchor = "dark-state asymptotics";
const double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class F>
auto parallel_map(std::size_t n, F f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> out;
  out.reserve(n);
  const std::size_t width = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t begin = 0; begin < n; begin += width) {
    std::vector<std::future<R>> wave;
    for (std::size_t i = begin; i < std::min(n, begin + width); ++i)
      wave.push_back(std::async(std::launch::async, f, i));
    for (auto& fut : wave) out.push_back(fut.get());
  }
  return out;
}

std::vector<double> time_axis(const Grid& g) {
  std::vector<double> t(g.nt);
  for (std::size_t k = 0; k < g.nt; ++k) t[k] = g.t(k);
  return t;
}

std::vector<double> depth_axis(const Grid& g) {
  std::vector<double> z(g.nz);
  for (std::size_t i = 0; i < g.nz; ++i) z[i] = g.z(i);
  return z;
}

double earliest_input(const DriveFields& d) {
  return std::min({0.0, d.signal1.start_time, d.signal3.start_time});
}

TransitMap make_transit(const ScenarioConfig& cfg, const DriveFunctions& f) {
  return TransitMap(f.controls, earliest_input(cfg.drive), cfg.grid.t_max, 1024, cfg.constants);
}

double trapezoid(const std::vector<double>& y, double h) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * h;
}

template <class Get>
std::vector<cplx> column(const std::vector<PredictionRow>& rows, Get get) {
  std::vector<cplx> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = get(rows[i].fields);
  return out;
}

std::vector<cplx> column(const std::vector<SignalTriple>& rows, cplx SignalTriple::*member) {
  std::vector<cplx> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i].*member;
  return out;
}

double max_abs(const std::vector<cplx>& v) {
  double m = 0.0;
  for (const cplx& x : v) m = std::max(m, std::abs(x));
  return m;
}

std::ofstream open_output(const std::filesystem::path& file) {
  std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file);
  if (!os) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
  return os;
}

void write_prediction_file(const std::filesystem::path& file, const ScenarioConfig& cfg,
                           const std::vector<PredictionRow>& rows, double z) {
  auto os = open_output(file);
  write_prediction_csv(os, rows, csv_header(cfg, fmt::format("depth={:.17g}", z)).substr(2));
}

void write_profile_file(const std::filesystem::path& file, const ScenarioConfig& cfg,
                        const std::vector<double>& z, const std::vector<cplx>* simulated,
                        const std::vector<cplx>& predicted) {
  auto os = open_output(file);
  os << csv_header(cfg, fmt::format("t_prime={:.17g}", cfg.grid.t_max)) << '\n';
  os << "z,abs_sigma_bc,arg_sigma_bc,abs_sigma_bc_predicted,arg_sigma_bc_predicted\n";
  for (std::size_t i = 0; i < z.size(); ++i) {
    const cplx s = simulated ? (*simulated)[i] : cplx(kNaN, kNaN);
    fmt::print(os, "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", z[i], std::abs(s), std::arg(s),
               std::abs(predicted[i]), std::arg(predicted[i]));
  }
}

void write_histories(const ScenarioConfig& cfg, const FieldHistory& h, const std::filesystem::path& dir,
                     std::vector<std::filesystem::path>& files) {
  for (const auto& s : h.slices) {
    const auto file = dir / fmt::format("history_iz{:04d}.csv", s.iz);
    write_history_csv(file, cfg, s);
    files.push_back(file);
  }
}

ComparisonReport new_report(const ScenarioConfig& cfg) {
  ComparisonReport rep;
  rep.scenario = std::string(to_string(cfg.kind));
  rep.config_hash = hash_hex(cfg.hash);
  return rep;
}

void weak_probe_note(const FieldHistory& h, ComparisonReport& rep) {
  if (!h.weak_probe_ok())
    rep.notes.push_back(fmt::format(
        "largest atomic coherence {:.3g} exceeds 1: outside the weak-probe regime", h.max_coherence));
}

// --- transmission-like scenarios ----------------------------------------------

struct ChannelPrediction {
  Peak input;
  Peak predicted;
  std::vector<cplx> values;
};

ScenarioResult run_transmission(const ScenarioConfig& cfg, bool write) {
  ScenarioResult res;
  res.report = new_report(cfg);
  ComparisonReport& rep = res.report;

  const FieldHistory h = simulate(cfg, cfg.drive);
  weak_probe_note(h, rep);
  const DriveFunctions f = drive_functions(cfg, cfg.drive);
  const TransitMap transit = make_transit(cfg, f);
  const std::vector<double> t = time_axis(cfg.grid);
  const auto pred = predict_at_depth(cfg.medium.length_L, t, f.R1, f.R3, f.controls, transit);

  const RecordedSlice& in = h.entrance();
  const RecordedSlice& out = h.exit();
  const std::vector<cplx> pred_R1 = column(pred, [](const SignalTriple& s) { return s.R1; });
  const std::vector<cplx> pred_R3 = column(pred, [](const SignalTriple& s) { return s.R3; });

  struct Channel {
    const char* name;
    const std::vector<cplx>& in;
    const std::vector<cplx>& out;
    const std::vector<cplx>& pred;
  };
  for (const Channel& ch : {Channel{"R1", in.R1, out.R1, pred_R1}, Channel{"R3", in.R3, out.R3, pred_R3}}) {
    if (max_abs(ch.pred) == 0.0 && max_abs(ch.out) == 0.0) {
      rep.notes.push_back(fmt::format("{} is zero at the exit and predicted zero", ch.name));
      continue;
    }
    const Peak p_in = find_peak(t, ch.in.empty() ? ch.out : ch.in);
    const Peak p_out = find_peak(t, ch.out);
    const Peak p_pred = find_peak(t, ch.pred);
    rep.add(make_row(fmt::format("{} transmitted peak height", ch.name), p_out.value, p_pred.value,
                     cfg.tolerance("height_rel"), Criterion::relative, kDarkAnchor));
    rep.add(make_row(fmt::format("{} transmitted phase at peak", ch.name), std::arg(ch.out[p_out.index]),
                     std::arg(ch.pred[p_out.index]), cfg.tolerance("phase_abs"), Criterion::angle,
                     kDarkAnchor));
    if (max_abs(ch.in) > 0.0)
      rep.add(make_row(fmt::format("{} peak delay", ch.name), p_out.position - p_in.position,
                       p_pred.position - p_in.position, cfg.tolerance("delay_rel"),
                       Criterion::relative, "transit integral of c cos^2 theta"));
  }

  std::vector<double> e_pred(t.size());
  for (std::size_t k = 0; k < t.size(); ++k)
    e_pred[k] = std::norm(pred[k].fields.R1) + std::norm(pred[k].fields.R3);
  const double e_in = slice_energy(in, cfg.grid.dt());
  if (e_in > 0.0)
    rep.add(make_row("transmitted energy fraction", slice_energy(out, cfg.grid.dt()) / e_in,
                     trapezoid(e_pred, cfg.grid.dt()) / e_in, cfg.tolerance("energy_rel"),
                     Criterion::relative, kDarkAnchor));

  if (write) {
    if (cfg.write_histories) write_histories(cfg, h, cfg.output_dir, res.files);
    const auto file = cfg.output_dir / "prediction_exit.csv";
    write_prediction_file(file, cfg, pred, cfg.medium.length_L);
    res.files.push_back(file);
  }
  return res;
}

// --- smoothing ------------------------------------------------------------------

double bright_norm(const RecordedSlice& s, const ControlHistory& controls, const Grid& g) {
  std::vector<double> phi2(s.R1.size());
  for (std::size_t k = 0; k < s.R1.size(); ++k) {
    const PolaritonState p = to_polaritons(s.R1[k], s.R3[k], s.sigma_bc[k], controls.angles(g.t(k)));
    phi2[k] = std::norm(p.Phi);
  }
  return std::sqrt(trapezoid(phi2, g.dt()));
}

ScenarioResult run_smoothing(const ScenarioConfig& cfg, bool write) {
  ScenarioResult res;
  res.report = new_report(cfg);
  ComparisonReport& rep = res.report;

  const FieldHistory h = simulate(cfg, cfg.drive);
  weak_probe_note(h, rep);
  const DriveFunctions f = drive_functions(cfg, cfg.drive);
  const std::vector<double> t = time_axis(cfg.grid);

  std::vector<double> tv;
  for (std::size_t i = 0; i < h.slices.size(); ++i) {
    const RecordedSlice& s = h.slices[i];
    tv.push_back(total_variation(s.R1));
    const Peak p = find_peak(t, s.R1);
    rep.notes.push_back(fmt::format("z={:.4g}: TV |R1| = {:.6e}, peak |R1| = {:.6e} at t'={:.6e}",
                                    s.z, tv.back(), p.value, p.position));
    if (i > 0)
      rep.add(make_row(fmt::format("TV |R1| at z={:.4g} below z={:.4g}", s.z, h.slices[i - 1].z),
                       tv[i], tv[i - 1], 0.0, Criterion::below, "smoothing with depth"));
  }
  const double b0 = bright_norm(h.entrance(), f.controls, cfg.grid);
  const double b1 = bright_norm(h.exit(), f.controls, cfg.grid);
  rep.add(make_row("bright polariton norm, deepest/entry", b0 > 0 ? b1 / b0 : kNaN, 0.0,
                   cfg.tolerance("bright_ratio"), Criterion::absolute, "bright polariton absorption"));

  if (write && cfg.write_histories) write_histories(cfg, h, cfg.output_dir, res.files);
  return res;
}

// --- storage --------------------------------------------------------------------

bool equal_storage_inputs(const ScenarioConfig& cfg) {
  const DriveFunctions f = drive_functions(cfg, cfg.drive);
  const double u2 = std::abs(normalize_control(cfg.drive.control2.base_amplitude, cfg.scheme.d2, cfg.medium.kappa1, cfg.constants));
  const double u4 = std::abs(normalize_control(cfg.drive.control4.base_amplitude, cfg.scheme.d4, cfg.medium.kappa3, cfg.constants));
  const double r1 = std::abs(normalize_signal(cfg.drive.signal1.amplitude, cfg.scheme.d1, cfg.medium.kappa1, cfg.constants));
  const double r3 = std::abs(normalize_signal(cfg.drive.signal3.amplitude, cfg.scheme.d3, cfg.medium.kappa3, cfg.constants));
  auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); };
  return same(u2, u4) && same(r1, r3) && r1 > 0 && cfg.drive.control2.phase == 0.0 &&
         cfg.drive.control4.phase == 0.0 && cfg.drive.signal1.phase == 0.0 &&
         cfg.drive.signal1.duration == cfg.drive.signal3.duration &&
         cfg.drive.signal1.start_time == cfg.drive.signal3.start_time &&
         cfg.drive.signal1.shape == cfg.drive.signal3.shape;
}

double back_half_abs_sum(const std::vector<cplx>& v) {
  double s = 0.0;
  for (std::size_t i = v.size() / 2; i < v.size(); ++i) s += std::abs(v[i]);
  return s;
}

ScenarioResult run_storage_phase_scan(const ScenarioConfig& cfg, bool write) {
  ScenarioResult res;
  res.report = new_report(cfg);
  ComparisonReport& rep = res.report;
  const std::vector<double> z = depth_axis(cfg.grid);
  const bool line = equal_storage_inputs(cfg);
  if (!line)
    rep.notes.push_back("inputs or controls are not equal: the pi + phi3/2 line is not applicable");

  struct Point {
    double phi3;
    std::vector<cplx> simulated, predicted;
    bool weak_ok;
  };
  const auto points = parallel_map(cfg.phase3_values.size(), [&](std::size_t i) {
    DriveFields drive = cfg.drive;
    drive.signal3.phase = cfg.phase3_values[i];
    const FieldHistory h = simulate(cfg, drive);
    const DriveFunctions f = drive_functions(cfg, drive);
    const TransitMap transit = make_transit(cfg, f);
    const auto pred = predict_profile(z, cfg.grid.t_max, f.R1, f.R3, f.controls, transit);
    return Point{cfg.phase3_values[i], h.final_profile.sigma_bc, column(pred, &SignalTriple::sigma_bc),
                 h.weak_probe_ok()};
  });

  std::vector<std::array<double, 4>> table;
  std::size_t strong = 0;
  for (const Point& p : points) strong += p.weak_ok ? 0 : 1;
  if (strong > 0)
    rep.notes.push_back(fmt::format("{} of {} runs leave the weak-probe regime (largest coherence above 1)",
                                    strong, points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& p = points[i];
    const cplx sim = stored_coherence_sum(p.simulated);
    const cplx pred = stored_coherence_sum(p.predicted);
    const double wrapped = std::remainder(p.phi3, 2.0 * kPi);
    const double line_value = kPi + 0.5 * wrapped;
    table.push_back({p.phi3, std::arg(sim), std::arg(pred), line_value});
    if (std::abs(pred) < 1e-6 * back_half_abs_sum(p.predicted) || std::abs(pred) == 0.0) {
      rep.notes.push_back(fmt::format(
          "phi3={:.4f}: predicted stored coherence cancels, phase undefined; skipped", p.phi3));
      continue;
    }
    rep.add(make_row(fmt::format("arg sigma_bc, phi3={:.4f}", p.phi3), std::arg(sim), std::arg(pred),
                     cfg.tolerance("phase_abs"), Criterion::angle, "stored coherence, dark-state asymptotics"));
    if (line && wrapped >= 0.0 && wrapped < kPi)
      rep.add(make_row(fmt::format("arg sigma_bc vs pi+phi3/2, phi3={:.4f}", p.phi3), std::arg(sim),
                       line_value, cfg.tolerance("phase_abs"), Criterion::angle, "pi + phi3/2 line"));
  }

  if (write) {
    const auto file = cfg.output_dir / "storage_phase.csv";
    auto os = open_output(file);
    os << csv_header(cfg, "readout=back-half sum of sigma_bc") << '\n';
    os << "phi3,arg_sigma_bc,arg_sigma_bc_predicted,pi_plus_half_phi3\n";
    for (const auto& r : table) fmt::print(os, "{:.17g},{:.17g},{:.17g},{:.17g}\n", r[0], r[1], r[2], r[3]);
    res.files.push_back(file);
    if (cfg.write_histories)
      for (std::size_t i = 0; i < points.size(); ++i) {
        const auto pf = cfg.output_dir / fmt::format("profile_phi3_{:02d}.csv", i);
        write_profile_file(pf, cfg, z, &points[i].simulated, points[i].predicted);
        res.files.push_back(pf);
      }
  }
  return res;
}

struct ProfilePrediction {
  double amplitude, position, width, phase;
  std::vector<cplx> profile;
};

ProfilePrediction predict_storage_profile(const ScenarioConfig& cfg) {
  const DriveFunctions f = drive_functions(cfg, cfg.drive);
  const TransitMap transit = make_transit(cfg, f);
  const double t_peak = cfg.drive.signal1.peak_time();
  const MixingAngles a0 = f.controls.angles(t_peak);
  const SignalTriple s =
      asymptotic_prediction(f.R1(t_peak), f.R3(t_peak), a0, f.controls.angles(cfg.grid.t_max));
  ProfilePrediction p;
  p.amplitude = std::abs(s.sigma_bc);
  p.phase = std::arg(s.sigma_bc);
  p.position = transit.depth(t_peak, cfg.grid.t_max);
  const double base = cfg.drive.signal1.duration * cfg.constants.c * compression_factor(a0);
  p.width = cfg.drive.signal1.shape == PulseShape::sine_square ? 0.5 * base : base;
  p.profile = column(predict_profile(depth_axis(cfg.grid), cfg.grid.t_max, f.R1, f.R3, f.controls, transit),
                     &SignalTriple::sigma_bc);
  return p;
}

ScenarioResult run_storage_profile(const ScenarioConfig& cfg, bool write) {
  ScenarioResult res;
  res.report = new_report(cfg);
  ComparisonReport& rep = res.report;
  const FieldHistory h = simulate(cfg, cfg.drive);
  weak_probe_note(h, rep);
  const std::vector<double> z = depth_axis(cfg.grid);
  const ProfilePrediction p = predict_storage_profile(cfg);
  const std::vector<cplx>& sigma = h.final_profile.sigma_bc;
  const Peak peak = find_peak(z, sigma);

  rep.add(make_row("stored |sigma_bc| amplitude", peak.value, p.amplitude,
                   cfg.tolerance("profile_amplitude_rel"), Criterion::relative, kDarkAnchor));
  rep.add(make_row("stored profile FWHM", fwhm(z, sigma), p.width, cfg.tolerance("profile_width_rel"),
                   Criterion::relative, "input width times cos^2 theta0"));
  rep.add(make_row("stored peak position", peak.position, p.position,
                   cfg.tolerance("profile_position_cells") * cfg.grid.dz(), Criterion::absolute,
                   "transit integral of c cos^2 theta"));
  rep.add(make_row("stored phase at peak", std::arg(sigma[peak.index]), p.phase, cfg.tolerance("phase_abs"),
                   Criterion::angle, kDarkAnchor));
  const double tail = std::max(std::abs(sigma.front()), std::abs(sigma.back()));
  if (tail > 0.05 * peak.value)
    rep.notes.push_back(fmt::format("stored profile touches a sample boundary (edge/peak = {:.3f})",
                                    tail / peak.value));

  if (write) {
    const auto file = cfg.output_dir / "profile.csv";
    write_profile_file(file, cfg, z, &sigma, p.profile);
    res.files.push_back(file);
    if (cfg.write_histories) write_histories(cfg, h, cfg.output_dir, res.files);
  }
  return res;
}

}  // namespace

// --- public helpers -------------------------------------------------------------

cplx stored_coherence_sum(const std::vector<cplx>& profile) {
  cplx s = 0.0;
  for (std::size_t i = profile.size() / 2; i < profile.size(); ++i) s += profile[i];
  return s;
}

DriveFunctions drive_functions(const ScenarioConfig& cfg, const DriveFields& drive) {
  const LevelScheme s = cfg.scheme;
  const double k1 = cfg.medium.kappa1, k3 = cfg.medium.kappa3;
  const PhysicalConstants k = cfg.constants;
  DriveFunctions f;
  f.R1 = [=](double t) { return normalize_signal(eval_pulse(drive.signal1, t), s.d1, k1, k); };
  f.R3 = [=](double t) { return normalize_signal(eval_pulse(drive.signal3, t), s.d3, k3, k); };
  f.controls.U2 = [=](double t) { return normalize_control(eval_control(drive.control2, t), s.d2, k1, k); };
  f.controls.U4 = [=](double t) { return normalize_control(eval_control(drive.control4, t), s.d4, k3, k); };
  return f;
}

FieldHistory simulate(const ScenarioConfig& cfg, const DriveFields& drive) {
  if (cfg.mode == SolverMode::reduced)
    return simulate_reduced(cfg.medium, cfg.scheme, drive, cfg.grid, cfg.solver, cfg.constants);
  return simulate_full(cfg.medium, cfg.scheme, cfg.detunings, drive, cfg.grid, cfg.solver, cfg.constants);
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, bool write) {
  ScenarioResult res;
  try {
    switch (cfg.kind) {
      case ScenarioKind::smoothing: res = run_smoothing(cfg, write); break;
      case ScenarioKind::storage_phase_scan: res = run_storage_phase_scan(cfg, write); break;
      case ScenarioKind::storage_profile: res = run_storage_profile(cfg, write); break;
      case ScenarioKind::transmission:
      case ScenarioKind::phase_control:
      case ScenarioKind::custom: res = run_transmission(cfg, write); break;
    }
  } catch (const SolverError& e) {
    throw SolverError(fmt::format("scenario {}: {}", to_string(cfg.kind), e.what()));
  }
  if (write) {
    write_report(res.report, cfg.output_dir);
    res.files.push_back(cfg.output_dir / "report.json");
    res.files.push_back(cfg.output_dir / "report.csv");
  }
  return res;
}

PredictionResult run_prediction(const ScenarioConfig& cfg, bool write) {
  PredictionResult res;
  const DriveFunctions f = drive_functions(cfg, cfg.drive);
  const MixingAngles a0 = f.controls.angles(cfg.drive.signal1.peak_time());
  res.values["group_velocity_entry"] = group_velocity(a0, cfg.constants);
  res.values["cos2_theta0"] = a0.cos2_theta();
  res.values["phi0"] = a0.phi;

  switch (cfg.kind) {
    case ScenarioKind::storage_profile: {
      const ProfilePrediction p = predict_storage_profile(cfg);
      res.values["stored_amplitude"] = p.amplitude;
      res.values["stored_peak_position"] = p.position;
      res.values["stored_fwhm"] = p.width;
      res.values["stored_phase"] = p.phase;
      if (write) {
        const auto file = cfg.output_dir / "profile_prediction.csv";
        write_profile_file(file, cfg, depth_axis(cfg.grid), nullptr, p.profile);
        res.files.push_back(file);
      }
      break;
    }
    case ScenarioKind::storage_phase_scan: {
      const std::vector<double> z = depth_axis(cfg.grid);
      std::vector<std::array<double, 2>> table;
      for (double phi3 : cfg.phase3_values) {
        DriveFields drive = cfg.drive;
        drive.signal3.phase = phi3;
        const DriveFunctions g = drive_functions(cfg, drive);
        const TransitMap transit = make_transit(cfg, g);
        const auto pred = predict_profile(z, cfg.grid.t_max, g.R1, g.R3, g.controls, transit);
        const double arg = std::arg(stored_coherence_sum(column(pred, &SignalTriple::sigma_bc)));
        res.values[fmt::format("arg_sigma_bc_phi3_{:.4f}", phi3)] = arg;
        table.push_back({phi3, arg});
      }
      if (write) {
        const auto file = cfg.output_dir / "storage_phase_prediction.csv";
        auto os = open_output(file);
        os << csv_header(cfg) << '\n' << "phi3,arg_sigma_bc_predicted\n";
        for (const auto& r : table) fmt::print(os, "{:.17g},{:.17g}\n", r[0], r[1]);
        res.files.push_back(file);
      }
      break;
    }
    default: {
      const TransitMap transit = make_transit(cfg, f);
      const std::vector<double> t = time_axis(cfg.grid);
      const auto pred = predict_at_depth(cfg.medium.length_L, t, f.R1, f.R3, f.controls, transit);
      std::vector<cplx> in1(t.size()), in3(t.size());
      for (std::size_t k = 0; k < t.size(); ++k) {
        in1[k] = f.R1(t[k]);
        in3[k] = f.R3(t[k]);
      }
      const auto p1 = column(pred, [](const SignalTriple& s) { return s.R1; });
      const auto p3 = column(pred, [](const SignalTriple& s) { return s.R3; });
      if (max_abs(p1) > 0) {
        const Peak pk = find_peak(t, p1);
        res.values["R1_peak"] = pk.value;
        res.values["R1_phase_at_peak"] = std::arg(p1[pk.index]);
        if (max_abs(in1) > 0) res.values["R1_delay"] = pk.position - find_peak(t, in1).position;
      }
      if (max_abs(p3) > 0) {
        const Peak pk = find_peak(t, p3);
        res.values["R3_peak"] = pk.value;
        res.values["R3_phase_at_peak"] = std::arg(p3[pk.index]);
        if (max_abs(in3) > 0) res.values["R3_delay"] = pk.position - find_peak(t, in3).position;
      }
      if (a0.theta < 0.5 * kPi) {
        const cplx r1 = f.R1(cfg.drive.signal1.peak_time()), r3 = f.R3(cfg.drive.signal1.peak_time());
        const double norm = std::norm(r1) + std::norm(r3);
        if (norm > 0) res.values["bright_fraction_entry"] = std::norm(initial_decomposition(r1, r3, a0).X) / norm;
      }
      if (write) {
        const auto file = cfg.output_dir / "prediction_exit.csv";
        write_prediction_file(file, cfg, pred, cfg.medium.length_L);
        res.files.push_back(file);
      }
      break;
    }
  }
  if (write) {
    const auto file = cfg.output_dir / "predictions.json";
    auto os = open_output(file);
    json j;
    j["scenario"] = std::string(to_string(cfg.kind));
    j["config_hash"] = hash_hex(cfg.hash);
    j["values"] = res.values;
    os << j.dump(2) << '\n';
    res.files.push_back(file);
  }
  return res;
}

ScenarioResult run_susceptibility(const ScenarioConfig& cfg, bool write) {
  ScenarioResult res;
  res.report = new_report(cfg);
  res.report.scenario = "susceptibility";
  ComparisonReport& rep = res.report;
  const PhysicalConstants& k = cfg.constants;
  const double N = cfg.medium.density_N;
  const cplx O2 = rabi_frequency(std::polar(cfg.drive.control2.base_amplitude, cfg.drive.control2.phase), cfg.scheme.d2, k);
  const cplx O4 = rabi_frequency(std::polar(cfg.drive.control4.base_amplitude, cfg.drive.control4.phase), cfg.scheme.d4, k);
  const double omega_eff = std::hypot(std::abs(O2), std::abs(O4));
  if (!(omega_eff > 0)) throw ConfigError("susceptibility needs at least one non-zero control");
  const std::vector<double> w = default_omega_grid(omega_eff);

  const SusceptibilityMatrix general = chi_matrix(w, cfg.detunings, O2, O4, cfg.scheme, N, PoleMode::flag, k);
  const SusceptibilityMatrix lossless = chi_matrix(w, Detunings{}, O2, O4, cfg.scheme, N, PoleMode::flag, k);
  const SusceptibilityMatrix resonant = chi_resonant(w, O2, O4, cfg.scheme, N, PoleMode::flag, k);

  double worst = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (lossless.flagged[i] || resonant.flagged[i]) continue;
    const std::pair<cplx, cplx> pairs[] = {{lossless.chi11[i], resonant.chi11[i]},
                                           {lossless.chi13[i], resonant.chi13[i]},
                                           {lossless.chi31[i], resonant.chi31[i]},
                                           {lossless.chi33[i], resonant.chi33[i]}};
    for (const auto& [a, b] : pairs)
      if (std::abs(b) > 0) worst = std::max(worst, std::abs(a - b) / std::abs(b));
  }
  rep.add(make_row("general vs resonant form, max rel deviation", worst, 0.0, 1e-12, Criterion::absolute,
                   "resonant lossless limit"));
  rep.notes.push_back(fmt::format("{} grid points flagged on poles", resonant.flagged_count()));

  if (std::abs(O2) > 0) {
    const std::vector<cplx> adiabatic = chi_adiabatic(w, O2, O4, cfg.scheme, N, k);
    const std::vector<cplx> at_zero = chi_adiabatic({0.0}, O2, O4, cfg.scheme, N, k);
    rep.add(make_row("adiabatic chi at omega=0", std::abs(at_zero[0]), 0.0, 0.0, Criterion::absolute,
                     "line-centre transparency"));
    const cplx ratio = adiabatic_field_ratio(O2, O4, cfg.scheme);
    // Deviation scaled by the size of the two summands, which cancel near omega = 0.
    double worst_combo = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (resonant.flagged[i] || std::isnan(adiabatic[i].real())) continue;
      const cplx a = resonant.chi11[i], b = resonant.chi13[i] * ratio;
      const double scale = std::abs(a) + std::abs(b);
      if (scale > 0) worst_combo = std::max(worst_combo, std::abs(a + b - adiabatic[i]) / scale);
    }
    rep.add(make_row("chi11 + chi13 ratio vs adiabatic, max scaled deviation", worst_combo, 0.0, 1e-12,
                     Criterion::absolute, "adiabatic field ratio"));

    const double C = std::abs(chi_prefactors(cfg.scheme, N, k).c11);
    const double threshold = 0.1 * C / omega_eff;
    const std::vector<cplx> single = chi_adiabatic(w, O2, 0.0, cfg.scheme, N, k);
    const auto win_double = transparency_window(w, adiabatic, threshold, WindowMetric::magnitude);
    const auto win_single = transparency_window(w, single, threshold, WindowMetric::magnitude);
    rep.add(make_row("single-Lambda window half-width below double", win_single.half_width,
                     win_double.half_width, 0.0, Criterion::below, "widened transparency window"));

    if (write) {
      const auto file = cfg.output_dir / "susceptibility_adiabatic.csv";
      auto os = open_output(file);
      os << csv_header(cfg) << '\n' << "omega,re_chi11_eff,im_chi11_eff\n";
      for (std::size_t i = 0; i < w.size(); ++i)
        fmt::print(os, "{:.17g},{:.17g},{:.17g}\n", w[i], adiabatic[i].real(), adiabatic[i].imag());
      res.files.push_back(file);
    }
  }

  if (write) {
    for (const auto& [name, m] : {std::pair{"susceptibility.csv", &general},
                                  std::pair{"susceptibility_resonant.csv", &resonant}}) {
      const auto file = cfg.output_dir / name;
      auto os = open_output(file);
      os << csv_header(cfg) << '\n';
      write_susceptibility_csv(os, *m);
      res.files.push_back(file);
    }
    write_report(rep, cfg.output_dir);
    res.files.push_back(cfg.output_dir / "report.json");
  }
  return res;
}

std::vector<ScanEntry> scan(const json& user_config, const std::string& path,
                            const std::vector<double>& values, const std::filesystem::path& out_root,
                            bool write) {
  if (values.empty()) throw UsageError("scan needs at least one value");
  const json merged = merge_with_defaults(user_config);
  {
    json probe = merged;
    set_parameter(probe, path, values.front());
  }
  auto entries = parallel_map(values.size(), [&](std::size_t i) {
    ScanEntry e;
    e.value = values[i];
    try {
      json j = merged;
      set_parameter(j, path, values[i]);
      j["output"]["directory"] = (out_root / fmt::format("scan_{:03d}", i)).string();
      const ScenarioConfig cfg = load_config(j);
      e.report = run_scenario(cfg, write).report;
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    return e;
  });

  if (write) {
    std::vector<std::string> observables;
    for (const auto& e : entries)
      if (e.report)
        for (const auto& r : e.report->rows)
          if (std::find(observables.begin(), observables.end(), r.observable) == observables.end())
            observables.push_back(r.observable);
    auto os = open_output(out_root / "scan.csv");
    fmt::print(os, "# parameter={} runs={}\n", path, entries.size());
    os << "index,value,status";
    for (const auto& o : observables) os << ",\"" << o << "\"";
    os << ",error\n";
    json summary = json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const ScanEntry& e = entries[i];
      const std::string status = !e.error.empty() ? "error" : e.report->pass() ? "pass" : "fail";
      fmt::print(os, "{},{:.17g},{}", i, e.value, status);
      for (const auto& o : observables) {
        double v = kNaN;
        if (e.report)
          for (const auto& r : e.report->rows)
            if (r.observable == o) v = r.observed;
        fmt::print(os, ",{:.17g}", v);
      }
      os << ",\"" << e.error << "\"\n";
      summary.push_back({{"index", i}, {"value", e.value}, {"status", status}, {"error", e.error}});
    }
    auto js = open_output(out_root / "scan.json");
    js << json{{"parameter", path}, {"runs", summary}}.dump(2) << '\n';
  }
  return entries;
}

Peak find_peak(const std::vector<double>& x, const std::vector<cplx>& v) {
  Peak p;
  if (v.empty()) return p;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[p.index])) p.index = i;
  p.position = x[p.index];
  p.value = std::abs(v[p.index]);
  if (p.index == 0 || p.index + 1 == v.size()) return p;
  const double y0 = std::abs(v[p.index - 1]), y1 = p.value, y2 = std::abs(v[p.index + 1]);
  const double curvature = y0 - 2.0 * y1 + y2;
  if (curvature >= 0.0) return p;
  const double shift = std::clamp(0.5 * (y0 - y2) / curvature, -0.5, 0.5);
  const double h = shift >= 0 ? x[p.index + 1] - x[p.index] : x[p.index] - x[p.index - 1];
  p.position = x[p.index] + shift * h;
  p.value = y1 - 0.25 * (y0 - y2) * shift;
  return p;
}

double fwhm(const std::vector<double>& x, const std::vector<cplx>& v) {
  if (v.size() < 3) return kNaN;
  std::size_t ip = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[ip])) ip = i;
  const double half = 0.5 * std::abs(v[ip]);
  if (!(half > 0)) return kNaN;
  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double a = std::abs(v[inside]), b = std::abs(v[outside]);
    return x[inside] + (half - a) / (b - a) * (x[outside] - x[inside]);
  };
  std::size_t l = ip;
  while (l > 0 && std::abs(v[l - 1]) >= half) --l;
  std::size_t r = ip;
  while (r + 1 < v.size() && std::abs(v[r + 1]) >= half) ++r;
  if (l == 0 || r + 1 == v.size()) return kNaN;
  return crossing(r, r + 1) - crossing(l, l - 1);
}

double total_variation(const std::vector<cplx>& v) {
  double tv = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) tv += std::abs(std::abs(v[i]) - std::abs(v[i - 1]));
  return tv;
}

std::string csv_header(const ScenarioConfig& cfg, const std::string& extra) {
  std::string s = fmt::format("# config_hash={} scenario={} mode={} nz={} nt={} L={:.17g} t_max={:.17g}",
                              hash_hex(cfg.hash), to_string(cfg.kind), to_string(cfg.mode), cfg.grid.nz,
                              cfg.grid.nt, cfg.grid.length_L, cfg.grid.t_max);
  if (!extra.empty()) s += " " + extra;
  return s;
}

void write_history_csv(const std::filesystem::path& file, const ScenarioConfig& cfg, const RecordedSlice& slice) {
  auto os = open_output(file);
  os << csv_header(cfg, fmt::format("z={:.17g}", slice.z)) << '\n';
  os << "t_prime,re_R1,im_R1,re_R3,im_R3,re_sigma_bc,im_sigma_bc\n";
  for (std::size_t k = 0; k < slice.R1.size(); ++k)
    fmt::print(os, "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", cfg.grid.t(k),
               slice.R1[k].real(), slice.R1[k].imag(), slice.R3[k].real(), slice.R3[k].imag(),
               slice.sigma_bc[k].real(), slice.sigma_bc[k].imag());
}

double parse_value(const std::string& raw) {
  std::string s;
  for (char c : raw)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw UsageError("empty scan value");
  auto to_double = [&](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("cannot parse value '{}'", raw));
    }
    if (used != t.size()) throw UsageError(fmt::format("cannot parse value '{}'", raw));
    return v;
  };
  const std::size_t pi = s.find("pi");
  if (pi == std::string::npos) return to_double(s);
  std::string coef = s.substr(0, pi);
  const std::string rest = s.substr(pi + 2);
  if (!coef.empty() && coef.back() == '*') coef.pop_back();
  double value = kPi;
  if (coef == "-")
    value = -kPi;
  else if (!coef.empty() && coef != "+")
    value = to_double(coef) * kPi;
  if (!rest.empty()) {
    if (rest.front() != '/') throw UsageError(fmt::format("cannot parse value '{}'", raw));
    const double d = to_double(rest.substr(1));
    if (d == 0.0) throw UsageError(fmt::format("division by zero in '{}'", raw));
    value /= d;
  }
  return value;
}

std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (item.find_first_not_of(" \t") != std::string::npos) out.push_back(parse_value(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace dlambda
