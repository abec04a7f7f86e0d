#include "dlambda/propagation_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/core.h>

#include "dlambda/errors.hpp"

namespace dlambda {

namespace {

std::atomic<std::size_t> g_invocations{0};

constexpr cplx kI{0.0, 1.0};

template <class M>
M rk4_generic(const Mat3& A0, const Mat3& Am, const Mat3& A1, const M& y, const M& f0,
              const M& fm, const M& f1, double h) {
  const M k1 = A0 * y + f0;
  const M k2 = Am * (y + (0.5 * h) * k1) + fm;
  const M k3 = Am * (y + (0.5 * h) * k2) + fm;
  const M k4 = A1 * (y + h * k3) + f1;
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Weights of F[k-1], F[k], F[k+1] in the half-step field value.
struct InterpWeights {
  double prev, cur, next;
};

InterpWeights interp_weights(std::size_t k) {
  if (k == 0) return {0.0, 0.5, 0.5};
  return {-0.125, 0.75, 0.375};
}

// RK4 over one t' step written as an affine map:
//   y[k+1] = Phi y[k] + Qprev F[k-1] + Qcur F[k] + Qnext F[k+1]
struct StepOperator {
  Mat3 Phi;
  Mat32 Qprev, Qcur, Qnext;
};

class Marcher {
 public:
  Marcher(const LinearModel& model, std::size_t nt, double dt, double dz)
      : P_(model.P), dz_(dz) {
    ops_.resize(nt > 0 ? nt - 1 : 0);
    solve_.resize(ops_.size());
    const Mat3 I = Mat3::Identity();
    const Mat32 Z = Mat32::Zero();
    for (std::size_t k = 0; k < ops_.size(); ++k) {
      const double t = dt * static_cast<double>(k);
      const Mat3 A0 = model.A(t);
      const Mat3 Am = model.A(t + 0.5 * dt);
      const Mat3 A1 = model.A(t + dt);
      const InterpWeights w = interp_weights(k);
      StepOperator& op = ops_[k];
      op.Phi = rk4_generic<Mat3>(A0, Am, A1, I, Mat3::Zero(), Mat3::Zero(), Mat3::Zero(), dt);
      op.Qprev = rk4_generic<Mat32>(A0, Am, A1, Z, Z, w.prev * model.B, Z, dt);
      op.Qcur = rk4_generic<Mat32>(A0, Am, A1, Z, model.B, w.cur * model.B, Z, dt);
      op.Qnext = rk4_generic<Mat32>(A0, Am, A1, Z, Z, w.next * model.B, model.B, dt);
      const Eigen::Matrix<cplx, 2, 2> M =
          Eigen::Matrix<cplx, 2, 2>::Identity() - (0.5 * dz_) * (P_ * op.Qnext);
      solve_[k] = M.inverse();
    }
  }

  std::vector<Vec3> integrate(const std::vector<Vec2>& F) const {
    std::vector<Vec3> y(F.size(), Vec3::Zero());
    for (std::size_t k = 0; k < ops_.size(); ++k) {
      const StepOperator& op = ops_[k];
      Vec3 next = op.Phi * y[k] + op.Qcur * F[k] + op.Qnext * F[k + 1];
      if (k > 0) next += op.Qprev * F[k - 1];
      y[k + 1] = next;
    }
    return y;
  }

  // Implicit trapezoid in z, solved exactly one t' sample at a time: the
  // atoms at t'[k+1] depend affinely on F[k+1], leaving a 2x2 system.
  void advance_trapezoid(const std::vector<Vec2>& F_cur, const std::vector<Vec3>& y_cur,
                         std::vector<Vec2>& F_next, std::vector<Vec3>& y_next) const {
    const double half = 0.5 * dz_;
    F_next[0] = F_cur[0] + half * (P_ * (y_cur[0] + y_next[0]));
    y_next[0].setZero();
    for (std::size_t k = 0; k < ops_.size(); ++k) {
      const StepOperator& op = ops_[k];
      Vec3 base = op.Phi * y_next[k] + op.Qcur * F_next[k];
      if (k > 0) base += op.Qprev * F_next[k - 1];
      const Vec2 rhs = F_cur[k + 1] + half * (P_ * (y_cur[k + 1] + base));
      F_next[k + 1] = solve_[k] * rhs;
      y_next[k + 1] = base + op.Qnext * F_next[k + 1];
    }
  }

  // Explicit predictor-corrector (Heun) in z.
  void advance_heun(const std::vector<Vec2>& F_cur, const std::vector<Vec3>& y_cur,
                    std::vector<Vec2>& F_next, std::vector<Vec3>& y_next) const {
    std::vector<Vec2> F_pred(F_cur.size());
    for (std::size_t k = 0; k < F_cur.size(); ++k) F_pred[k] = F_cur[k] + dz_ * (P_ * y_cur[k]);
    const std::vector<Vec3> y_pred = integrate(F_pred);
    for (std::size_t k = 0; k < F_cur.size(); ++k)
      F_next[k] = F_cur[k] + (0.5 * dz_) * (P_ * (y_cur[k] + y_pred[k]));
    y_next = integrate(F_next);
  }

 private:
  std::vector<StepOperator> ops_;
  std::vector<Eigen::Matrix<cplx, 2, 2>> solve_;
  Mat23 P_;
  double dz_;
};

// Maps the marched variables (F, y) onto (R1, R3, S1, S3, sigma_bc).
struct Observables {
  std::function<void(const Vec2&, const Vec3&, cplx*)> convert;
  std::function<double(const Vec3&)> coherence;
};

std::set<std::size_t> recorded_indices(const Grid& grid, const SolverOptions& opt) {
  std::set<std::size_t> out{0, grid.nz - 1};
  for (double z : opt.record_depths) {
    if (!(z >= 0.0 && z <= grid.length_L * (1.0 + 1e-12)))
      throw ConfigError(fmt::format("record depth {} lies outside the medium [0, {}]", z,
                                    grid.length_L));
    const auto iz = static_cast<std::size_t>(std::llround(z / grid.dz()));
    out.insert(std::min(iz, grid.nz - 1));
  }
  if (opt.record_stride > 0)
    for (std::size_t iz = 0; iz < grid.nz; iz += opt.record_stride) out.insert(iz);
  return out;
}

void check_finite(const std::vector<Vec2>& F, const std::vector<Vec3>& y, std::size_t iz,
                  const Grid& grid) {
  auto finite = [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); };
  for (std::size_t k = 0; k < F.size(); ++k) {
    const bool ok = finite(F[k](0)) && finite(F[k](1)) && finite(y[k](0)) && finite(y[k](1)) &&
                    finite(y[k](2));
    if (!ok)
      throw SolverError(fmt::format(
          "non-finite value at grid cell (iz={}, it={}) i.e. z={:.6e}, t'={:.6e}", iz, k,
          grid.z(iz), grid.t(k)));
  }
}

FieldHistory march(const LinearModel& model, SolverMode mode, const Grid& grid,
                   const SolverOptions& opt, const std::vector<Vec2>& boundary,
                   const Observables& obs) {
  const std::set<std::size_t> keep = recorded_indices(grid, opt);
  const Marcher marcher(model, grid.nt, grid.dt(), grid.dz());

  FieldHistory hist;
  hist.grid = grid;
  hist.mode = mode;
  FinalProfile& fin = hist.final_profile;
  for (auto* v : {&fin.R1, &fin.R3, &fin.S1, &fin.S3, &fin.sigma_bc}) v->resize(grid.nz);

  std::vector<Vec2> F = boundary;
  std::vector<Vec3> y = marcher.integrate(F);
  std::vector<Vec2> F_next(grid.nt, Vec2::Zero());
  std::vector<Vec3> y_next(grid.nt, Vec3::Zero());

  cplx buf[5];
  for (std::size_t iz = 0;; ++iz) {
    check_finite(F, y, iz, grid);
    for (std::size_t k = 0; k < grid.nt; ++k)
      hist.max_coherence = std::max(hist.max_coherence, obs.coherence(y[k]));
    if (keep.count(iz)) {
      RecordedSlice s;
      s.iz = iz;
      s.z = grid.z(iz);
      for (auto* v : {&s.R1, &s.R3, &s.S1, &s.S3, &s.sigma_bc}) v->resize(grid.nt);
      for (std::size_t k = 0; k < grid.nt; ++k) {
        obs.convert(F[k], y[k], buf);
        s.R1[k] = buf[0];
        s.R3[k] = buf[1];
        s.S1[k] = buf[2];
        s.S3[k] = buf[3];
        s.sigma_bc[k] = buf[4];
      }
      hist.slices.push_back(std::move(s));
    }
    obs.convert(F.back(), y.back(), buf);
    fin.R1[iz] = buf[0];
    fin.R3[iz] = buf[1];
    fin.S1[iz] = buf[2];
    fin.S3[iz] = buf[3];
    fin.sigma_bc[iz] = buf[4];

    if (iz + 1 == grid.nz) break;
    if (opt.z_scheme == ZScheme::trapezoidal)
      marcher.advance_trapezoid(F, y, F_next, y_next);
    else
      marcher.advance_heun(F, y, F_next, y_next);
    std::swap(F, F_next);
    std::swap(y, y_next);
  }
  return hist;
}

void check_resolution(const Grid& grid, const SolverOptions& opt, double omega_eff,
                      const Detunings& det) {
  if (!opt.enforce_resolution) return;
  const double limit = max_time_step(omega_eff, det, opt.resolution_factor);
  if (grid.dt() > limit)
    throw ConfigError(fmt::format(
        "time step {:.4e} a.u. exceeds the resolution limit {:.4e} a.u. (1/{} of the shortest "
        "oscillation period); increase nt",
        grid.dt(), limit, opt.resolution_factor));
}

}  // namespace

SolverMode parse_solver_mode(std::string_view name) {
  if (name == "reduced") return SolverMode::reduced;
  if (name == "full") return SolverMode::full;
  throw ConfigError(fmt::format("unknown solver mode '{}'", name));
}

std::string_view to_string(SolverMode mode) {
  return mode == SolverMode::reduced ? "reduced" : "full";
}

ZScheme parse_z_scheme(std::string_view name) {
  if (name == "trapezoidal") return ZScheme::trapezoidal;
  if (name == "heun") return ZScheme::heun;
  throw ConfigError(fmt::format("unknown z scheme '{}'", name));
}

Grid Grid::make(std::size_t nz, std::size_t nt, double length, double t_max) {
  Grid g{nz, nt, length, t_max};
  g.validate();
  return g;
}

void Grid::validate() const {
  if (nz < 2 || nt < 2) throw ConfigError("grid needs nz >= 2 and nt >= 2");
  if (!(length_L > 0) || !(t_max > 0))
    throw ConfigError("grid length and t_max must be positive");
}

double max_time_step(double omega_eff, const Detunings& det, double factor) {
  const double fastest =
      std::max({omega_eff, std::abs(det.Delta1), std::abs(det.Delta3), std::abs(det.delta)});
  if (!(fastest > 0)) return std::numeric_limits<double>::infinity();
  return 2.0 * kPi / fastest / factor;
}

const RecordedSlice& FieldHistory::nearest(double z) const {
  auto best = slices.begin();
  for (auto it = slices.begin(); it != slices.end(); ++it)
    if (std::abs(it->z - z) < std::abs(best->z - z)) best = it;
  return *best;
}

std::size_t solver_invocations() { return g_invocations.load(); }

double slice_energy(const RecordedSlice& slice, double dt) {
  double sum = 0.0;
  const std::size_t n = slice.R1.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double w = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
    sum += w * (std::norm(slice.R1[k]) + std::norm(slice.R3[k]));
  }
  return sum * dt;
}

LinearModel reduced_model(const MediumSpec& medium, std::function<cplx(double)> U2,
                          std::function<cplx(double)> U4, const Detunings& det,
                          const PhysicalConstants& k) {
  const double k1 = medium.kappa1 * medium.kappa1;
  const double k3 = medium.kappa3 * medium.kappa3;
  LinearModel m;
  m.A = [=](double t) {
    const cplx u2 = U2(t);
    const cplx u4 = U4(t);
    Mat3 A;
    A << -kI * det.Delta1, 0.0, -k1 * u2,
         0.0, -kI * det.Delta3, -k3 * u4,
         std::conj(u2), std::conj(u4), -kI * det.delta;
    return A;
  };
  m.B.setZero();
  m.B(0, 0) = -k1;
  m.B(1, 1) = -k3;
  m.P.setZero();
  m.P(0, 0) = 1.0 / k.c;
  m.P(1, 1) = 1.0 / k.c;
  return m;
}

LinearModel full_model(const MediumSpec& medium, const LevelScheme& scheme,
                       std::function<cplx(double)> Omega2, std::function<cplx(double)> Omega4,
                       const Detunings& det, const PhysicalConstants& k) {
  LinearModel m;
  m.A = [=](double t) {
    const cplx o2 = Omega2(t);
    const cplx o4 = Omega4(t);
    Mat3 A;
    A << -kI * det.Delta1, 0.0, -kI * o2,
         0.0, -kI * det.Delta3, -kI * o4,
         -kI * std::conj(o2), -kI * std::conj(o4), -kI * det.delta;
    return A;
  };
  m.B.setZero();
  m.B(0, 0) = -kI * std::conj(scheme.d1) / (2.0 * k.hbar);
  m.B(1, 1) = -kI * std::conj(scheme.d3) / (2.0 * k.hbar);
  m.P.setZero();
  m.P(0, 0) = -kI * 2.0 * k.hbar * medium.kappa1 * medium.kappa1 / (k.c * std::conj(scheme.d1));
  m.P(1, 1) = -kI * 2.0 * k.hbar * medium.kappa3 * medium.kappa3 / (k.c * std::conj(scheme.d3));
  return m;
}

Vec3 rk4_step(const LinearModel& model, const Vec3& y, double t, double h, const Vec3& f0,
              const Vec3& fm, const Vec3& f1) {
  return rk4_generic<Vec3>(model.A(t), model.A(t + 0.5 * h), model.A(t + h), y, f0, fm, f1, h);
}

std::vector<Vec3> integrate_atoms(const LinearModel& model, const std::vector<Vec2>& fields,
                                  double dt) {
  if (fields.size() < 2) return std::vector<Vec3>(fields.size(), Vec3::Zero());
  return Marcher(model, fields.size(), dt, 0.0).integrate(fields);
}

FieldHistory simulate_reduced(const MediumSpec& medium, const LevelScheme& scheme,
                              const DriveFields& drive, const Grid& grid,
                              const SolverOptions& options, const PhysicalConstants& k) {
  ++g_invocations;
  grid.validate();
  if (std::abs(grid.length_L - medium.length_L) > 1e-12 * medium.length_L)
    throw ConfigError("grid length differs from the medium length");
  drive.signal1.validate();
  drive.signal3.validate();
  drive.control2.validate();
  drive.control4.validate();

  const double k1 = medium.kappa1;
  const double k3 = medium.kappa3;
  auto U2 = [=](double t) { return normalize_control(eval_control(drive.control2, t), scheme.d2, k1, k); };
  auto U4 = [=](double t) { return normalize_control(eval_control(drive.control4, t), scheme.d4, k3, k); };
  const double omega_eff =
      std::hypot(std::abs(rabi_frequency(drive.control2.base_amplitude, scheme.d2, k)),
                 std::abs(rabi_frequency(drive.control4.base_amplitude, scheme.d4, k)));
  check_resolution(grid, options, omega_eff, Detunings{});

  std::vector<Vec2> boundary(grid.nt);
  for (std::size_t i = 0; i < grid.nt; ++i) {
    const double t = grid.t(i);
    boundary[i] << normalize_signal(eval_pulse(drive.signal1, t), scheme.d1, k1, k),
        normalize_signal(eval_pulse(drive.signal3, t), scheme.d3, k3, k);
  }

  Observables obs;
  obs.convert = [](const Vec2& F, const Vec3& y, cplx* out) {
    out[0] = F(0);
    out[1] = F(1);
    out[2] = y(0);
    out[3] = y(1);
    out[4] = y(2);
  };
  obs.coherence = [k1, k3](const Vec3& y) {
    return std::max({std::abs(y(0)) / k1, std::abs(y(1)) / k3, std::abs(y(2))});
  };
  return march(reduced_model(medium, U2, U4, Detunings{}, k), SolverMode::reduced, grid, options,
               boundary, obs);
}

FieldHistory simulate_full(const MediumSpec& medium, const LevelScheme& scheme,
                           const Detunings& detunings, const DriveFields& drive,
                           const Grid& grid, const SolverOptions& options,
                           const PhysicalConstants& k) {
  ++g_invocations;
  grid.validate();
  scheme.validate();
  if (std::abs(grid.length_L - medium.length_L) > 1e-12 * medium.length_L)
    throw ConfigError("grid length differs from the medium length");
  if (detunings.Delta1.imag() > 0 || detunings.Delta3.imag() > 0 || detunings.delta.imag() > 0)
    throw ConfigError("relaxation must damp: detunings need non-positive imaginary parts");
  drive.signal1.validate();
  drive.signal3.validate();
  drive.control2.validate();
  drive.control4.validate();

  auto Omega2 = [=](double t) { return rabi_frequency(eval_control(drive.control2, t), scheme.d2, k); };
  auto Omega4 = [=](double t) { return rabi_frequency(eval_control(drive.control4, t), scheme.d4, k); };
  const double omega_eff =
      std::hypot(std::abs(rabi_frequency(drive.control2.base_amplitude, scheme.d2, k)),
                 std::abs(rabi_frequency(drive.control4.base_amplitude, scheme.d4, k)));
  check_resolution(grid, options, omega_eff, detunings);

  std::vector<Vec2> boundary(grid.nt);
  for (std::size_t i = 0; i < grid.nt; ++i) {
    const double t = grid.t(i);
    boundary[i] << eval_pulse(drive.signal1, t), eval_pulse(drive.signal3, t);
  }

  const double k1 = medium.kappa1;
  const double k3 = medium.kappa3;
  const cplx d1 = scheme.d1;
  const cplx d3 = scheme.d3;
  Observables obs;
  obs.convert = [=](const Vec2& F, const Vec3& y, cplx* out) {
    out[0] = normalize_signal(F(0), d1, k1, k);
    out[1] = normalize_signal(F(1), d3, k3, k);
    out[2] = -kI * k1 * y(0);
    out[3] = -kI * k3 * y(1);
    out[4] = y(2);
  };
  obs.coherence = [](const Vec3& y) {
    return std::max({std::abs(y(0)), std::abs(y(1)), std::abs(y(2))});
  };
  return march(full_model(medium, scheme, Omega2, Omega4, detunings, k), SolverMode::full, grid,
               options, boundary, obs);
}

ConvergenceReport convergence_report(
    const std::function<std::vector<double>(const Grid&)>& scenario,
    const std::vector<Grid>& grids) {
  if (grids.size() < 3) throw ConfigError("convergence study needs at least three grids");
  ConvergenceReport rep;
  rep.grids = grids;

  auto ratio_of = [](std::size_t coarse, std::size_t fine) -> double {
    if (fine == coarse) return 1.0;
    if (fine < coarse || (fine - 1) % (coarse - 1) != 0) return -1.0;
    return static_cast<double>((fine - 1) / (coarse - 1));
  };
  for (std::size_t i = 0; i + 1 < grids.size(); ++i) {
    const Grid& a = grids[i];
    const Grid& b = grids[i + 1];
    a.validate();
    b.validate();
    if (a.length_L != b.length_L || a.t_max != b.t_max)
      throw ConfigError("convergence grids must cover the same domain");
    const double rz = ratio_of(a.nz, b.nz);
    const double rt = ratio_of(a.nt, b.nt);
    if (rz < 0 || rt < 0) throw ConfigError("convergence grids are not nested");
    if (rz == 1.0 && rt == 1.0) throw ConfigError("degenerate convergence study: identical grids");
    if (rz != 1.0 && rt != 1.0 && rz != rt)
      throw ConfigError("convergence grids refine z and t' by different ratios");
    const double r = std::max(rz, rt);
    if (i == 0)
      rep.refinement_ratio = r;
    else if (r != rep.refinement_ratio)
      throw ConfigError("convergence grids must share one refinement ratio");
  }

  for (const Grid& g : grids) rep.values.push_back(scenario(g));
  const std::size_t nobs = rep.values.front().size();
  for (const auto& v : rep.values)
    if (v.size() != nobs) throw ConfigError("scenario returned a varying number of observables");

  const std::size_t n = grids.size();
  const double r = rep.refinement_ratio;
  for (std::size_t j = 0; j < nobs; ++j) {
    const double q1 = rep.values[n - 3][j];
    const double q2 = rep.values[n - 2][j];
    const double q3 = rep.values[n - 1][j];
    const double e12 = std::abs(q1 - q2);
    const double e23 = std::abs(q2 - q3);
    double p = std::numeric_limits<double>::quiet_NaN();
    if (e12 > 0 && e23 > 0) p = std::log(e12 / e23) / std::log(r);
    rep.order.push_back(p);
    rep.extrapolated.push_back(std::isfinite(p) && p > 0 ? q3 + (q3 - q2) / (std::pow(r, p) - 1.0)
                                                         : q3);
  }
  return rep;
}

}  // namespace dlambda
