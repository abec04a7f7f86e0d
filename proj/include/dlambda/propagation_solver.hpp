#pragma once

// Unidirectional Maxwell-Bloch march in co-moving coordinates (z, t' = t - z/c).
//
// At fixed z the atomic variables obey a linear ODE in t' driven by the
// signal fields; the fields obey dF/dz = P y. The outer loop marches in z,
// the inner loop integrates the atoms in t' with classical RK4. Signals are
// injected as boundary data at z = 0 and the atoms start in b with no
// coherences. Controls are undepleted and co-propagating, i.e. functions of
// t' only.

#include <complex>
#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dlambda/physical_model.hpp"
#include "dlambda/pulse_shapes.hpp"

namespace dlambda {

enum class SolverMode { reduced, full };
enum class ZScheme { trapezoidal, heun };

SolverMode parse_solver_mode(std::string_view name);
std::string_view to_string(SolverMode mode);
ZScheme parse_z_scheme(std::string_view name);

struct Grid {
  std::size_t nz = 2;
  std::size_t nt = 2;
  double length_L = 1.0;
  double t_max = 1.0;

  static Grid make(std::size_t nz, std::size_t nt, double length, double t_max);
  void validate() const;
  double dz() const { return length_L / static_cast<double>(nz - 1); }
  double dt() const { return t_max / static_cast<double>(nt - 1); }
  double z(std::size_t i) const { return dz() * static_cast<double>(i); }
  double t(std::size_t k) const { return dt() * static_cast<double>(k); }
};

/// Largest time step the atomic integrator accepts: the shortest oscillation
/// period among the control Rabi frequency and the detunings, divided by
/// `factor`. Returns +inf when nothing oscillates.
double max_time_step(double omega_eff, const Detunings& det, double factor = 20.0);

/// The two signals and two controls driving the medium.
struct DriveFields {
  PulseSpec signal1;
  PulseSpec signal3;
  ControlSchedule control2;
  ControlSchedule control4;
};

struct SolverOptions {
  ZScheme z_scheme = ZScheme::trapezoidal;
  /// Depths (a.u.) whose full t' history is kept; snapped to the nearest
  /// slice. The entrance and exit slices are always kept.
  std::vector<double> record_depths;
  /// Additionally keep every n-th slice; 0 disables.
  std::size_t record_stride = 0;
  bool enforce_resolution = true;
  double resolution_factor = 20.0;
};

/// S1 = -i kappa1 sigma_ba, S3 = -i kappa3 sigma_bd.
struct AtomicState {
  cplx S1;
  cplx S3;
  cplx sigma_bc;
};

struct RecordedSlice {
  std::size_t iz = 0;
  double z = 0.0;
  std::vector<cplx> R1, R3, S1, S3, sigma_bc;  // indexed by t'

  AtomicState atoms(std::size_t k) const { return {S1[k], S3[k], sigma_bc[k]}; }
};

/// Every z at the last local time t' = t_max.
struct FinalProfile {
  std::vector<cplx> R1, R3, S1, S3, sigma_bc;  // indexed by z
};

struct FieldHistory {
  Grid grid;
  SolverMode mode = SolverMode::reduced;
  std::vector<RecordedSlice> slices;  // ascending iz
  FinalProfile final_profile;
  /// Largest |sigma_ba|, |sigma_bd| or |sigma_bc| seen anywhere; above 1
  /// the first-order (weak-probe) treatment is no longer valid.
  double max_coherence = 0.0;

  const RecordedSlice& entrance() const { return slices.front(); }
  const RecordedSlice& exit() const { return slices.back(); }
  const RecordedSlice& nearest(double z) const;
  bool weak_probe_ok() const { return max_coherence <= 1.0; }
};

FieldHistory simulate_reduced(const MediumSpec& medium, const LevelScheme& scheme,
                              const DriveFields& drive, const Grid& grid,
                              const SolverOptions& options = {},
                              const PhysicalConstants& k = {});

FieldHistory simulate_full(const MediumSpec& medium, const LevelScheme& scheme,
                           const Detunings& detunings, const DriveFields& drive,
                           const Grid& grid, const SolverOptions& options = {},
                           const PhysicalConstants& k = {});

/// Number of simulate_* calls made by this process.
std::size_t solver_invocations();

/// Integral over t' of |R1|^2 + |R3|^2 (trapezoid rule).
double slice_energy(const RecordedSlice& slice, double dt);

// --- single-step machinery ---------------------------------------------------

using Vec3 = Eigen::Matrix<cplx, 3, 1>;
using Vec2 = Eigen::Matrix<cplx, 2, 1>;
using Mat3 = Eigen::Matrix<cplx, 3, 3>;
using Mat32 = Eigen::Matrix<cplx, 3, 2>;
using Mat23 = Eigen::Matrix<cplx, 2, 3>;

/// Linear atom-field model: dy/dt' = A(t') y + B F,  dF/dz = P y.
struct LinearModel {
  std::function<Mat3(double)> A;
  Mat32 B;
  Mat23 P;
};

/// Reduced model in (S1, S3, sigma_bc) driven by (R1, R3), with optional
/// complex detunings (zero for the resonant lossless system).
LinearModel reduced_model(const MediumSpec& medium, std::function<cplx(double)> U2,
                          std::function<cplx(double)> U4, const Detunings& det,
                          const PhysicalConstants& k = {});

/// Primitive-variable model in (sigma_ba, sigma_bd, sigma_bc) driven by the
/// physical fields (epsilon1, epsilon3).
LinearModel full_model(const MediumSpec& medium, const LevelScheme& scheme,
                       std::function<cplx(double)> Omega2, std::function<cplx(double)> Omega4,
                       const Detunings& det, const PhysicalConstants& k = {});

/// One classical RK4 step of dy/dt' = A(t') y + f(t') where the forcing is
/// supplied at the start, midpoint and end of the step.
Vec3 rk4_step(const LinearModel& model, const Vec3& y, double t, double h, const Vec3& f0,
              const Vec3& fm, const Vec3& f1);

/// Atomic response along t' to a given field series at one depth. The field
/// at each half step comes from quadratic interpolation through the
/// previous, current and next samples (linear on the first step).
std::vector<Vec3> integrate_atoms(const LinearModel& model, const std::vector<Vec2>& fields,
                                  double dt);

// --- grid convergence ----------------------------------------------------------

struct ConvergenceReport {
  std::vector<Grid> grids;
  std::vector<std::vector<double>> values;  // [grid][observable]
  std::vector<double> order;                // per observable, from the finest three grids
  std::vector<double> extrapolated;         // Richardson-extrapolated observables
  double refinement_ratio = 0.0;
};

/// Runs `scenario` on each grid (at least three, nested by a constant ratio)
/// and estimates the observed order of every observable.
ConvergenceReport convergence_report(
    const std::function<std::vector<double>(const Grid&)>& scenario,
    const std::vector<Grid>& grids);

}  // namespace dlambda
