#pragma once

// Four-level double-Lambda atom: levels b (ground), c (metastable), a and d
// (upper). Signal 1 drives a-b, control 2 drives a-c, signal 3 drives d-b,
// control 4 drives d-c. All quantities are in Hartree atomic units.

#include <complex>
#include <optional>
#include <string_view>

namespace dlambda {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

struct PhysicalConstants {
  double c = 137.035999;
  double hbar = 1.0;
  double eps0 = 1.0 / (4.0 * kPi);

  static PhysicalConstants atomic_units() { return {}; }
  /// Throws ConfigError unless all constants are strictly positive.
  void validate() const;
};

struct LevelScheme {
  double E_a = 0, E_b = 0, E_c = 0, E_d = 0;
  // transitions ab, ac, db, dc
  cplx d1, d2, d3, d4;
  // upper-level total widths and the lower-coherence relaxation rate
  double Gamma_a = 0, Gamma_d = 0, gamma_bc = 0;
  // carrier frequencies of fields 1..4
  double omega1 = 0, omega2 = 0, omega3 = 0, omega4 = 0;
  // relative slack of the four-photon resonance check
  double resonance_tolerance = 1e-15;

  /// Level ordering, non-negative rates and omega1 - omega2 = omega3 - omega4.
  void validate() const;
};

/// Per-channel spontaneous widths. Unset channels take half of the total
/// width of their upper level.
struct ChannelWidths {
  std::optional<double> ab, ac, db, dc;
};

/// Inputs from which a resonant LevelScheme is built: dipoles follow from
/// the channel widths, carriers sit on the bare transition frequencies.
struct SchemeParameters {
  double E_a = -0.10, E_b = -0.20, E_c = -0.18, E_d = -0.05;
  double Gamma_a = 2.4e-9, Gamma_d = 2.4e-9;
  double gamma_bc = 0.0;
  ChannelWidths channels;
  // dipole phases in radians for d1..d4
  double phase1 = 0, phase2 = 0, phase3 = 0, phase4 = 0;
  double resonance_tolerance = 1e-15;
};

LevelScheme make_resonant_scheme(const SchemeParameters& p,
                                 const PhysicalConstants& k = {});

struct Detunings {
  cplx Delta1, Delta3, delta;
};

/// Complex detunings with the relaxation rates folded into the imaginary
/// parts. Real parts smaller than resonance_tolerance times the largest
/// carrier are snapped to exactly zero.
Detunings compute_detunings(const LevelScheme& s, const PhysicalConstants& k = {});

struct MediumSpec {
  double density_N = 0;
  double length_L = 0;
  double kappa1 = 0;
  double kappa3 = 0;
};

MediumSpec make_medium(const LevelScheme& s, double density, double length,
                       const PhysicalConstants& k = {});

// --- spontaneous emission -------------------------------------------------

/// d = sqrt(3 pi eps0 hbar c^3 Gamma / omega^3).
double dipole_from_linewidth(double Gamma, double omega, const PhysicalConstants& k = {});
/// Gamma = omega^3 d^2 / (3 pi eps0 hbar c^3).
double linewidth_from_dipole(double d, double omega, const PhysicalConstants& k = {});

// --- couplings and normalized variables ------------------------------------

/// kappa = sqrt(|d|^2 omega N / (4 eps0 hbar)).
double coupling_constant(cplx d, double omega, double N, const PhysicalConstants& k = {});

/// R = epsilon conj(d) / (2 hbar kappa).
cplx normalize_signal(cplx epsilon, cplx d, double kappa, const PhysicalConstants& k = {});
cplx denormalize_signal(cplx R, cplx d, double kappa, const PhysicalConstants& k = {});

/// U = epsilon conj(d) / (2 hbar kappa_signal). The control on transition 2
/// is normalized by kappa1 and the control on transition 4 by kappa3.
cplx normalize_control(cplx epsilon, cplx d, double kappa_signal,
                       const PhysicalConstants& k = {});

/// Omega = epsilon conj(d) / (2 hbar).
cplx rabi_frequency(cplx epsilon, cplx d, const PhysicalConstants& k = {});

// --- unit conversion --------------------------------------------------------

enum class QuantityKind { length, time, energy, electric_field, density, power_density };

/// Accepts "length", "time", "energy", "electric-field", "density",
/// "power-density". Throws UsageError otherwise.
QuantityKind parse_quantity_kind(std::string_view name);

/// Atomic units to SI (m, s, J, V/m, m^-3, W/m^2).
double si_conversion(double value, QuantityKind kind);
double from_si(double value, QuantityKind kind);

/// Cycle-averaged intensity c |E|^2 / (8 pi) of a field amplitude, in a.u.
double field_intensity(double amplitude, const PhysicalConstants& k = {});

}  // namespace dlambda
