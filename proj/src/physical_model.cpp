#include "dlambda/physical_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/core.h>

#include "dlambda/errors.hpp"

namespace dlambda {

namespace {

// CODATA 2018
constexpr double kBohrRadius = 5.29177210903e-11;       // m
constexpr double kAtomicTime = 2.4188843265857e-17;     // s
constexpr double kHartree = 4.3597447222071e-18;        // J
constexpr double kAtomicField = 5.14220674763e11;       // V/m

double si_factor(QuantityKind kind) {
  switch (kind) {
    case QuantityKind::length:
      return kBohrRadius;
    case QuantityKind::time:
      return kAtomicTime;
    case QuantityKind::energy:
      return kHartree;
    case QuantityKind::electric_field:
      return kAtomicField;
    case QuantityKind::density:
      return 1.0 / (kBohrRadius * kBohrRadius * kBohrRadius);
    case QuantityKind::power_density:
      return kHartree / (kAtomicTime * kBohrRadius * kBohrRadius);
  }
  throw UsageError("unknown quantity kind");
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw DomainError(fmt::format("{} must be positive, got {}", what, v));
}

}  // namespace

void PhysicalConstants::validate() const {
  if (!(c > 0 && hbar > 0 && eps0 > 0))
    throw ConfigError("physical constants must be strictly positive");
}

void LevelScheme::validate() const {
  if (!(E_b < E_c && E_c < E_a && E_c < E_d))
    throw ConfigError(fmt::format(
        "level ordering violated: need E_b < E_c < E_a and E_c < E_d (got a={}, b={}, c={}, d={})",
        E_a, E_b, E_c, E_d));
  if (Gamma_a < 0 || Gamma_d < 0 || gamma_bc < 0)
    throw ConfigError("relaxation rates must be non-negative");
  if (!(omega1 > 0 && omega2 > 0 && omega3 > 0 && omega4 > 0))
    throw ConfigError("carrier frequencies must be positive");
  if (!(resonance_tolerance >= 0)) throw ConfigError("resonance tolerance must be non-negative");
  const double scale = std::max({omega1, omega2, omega3, omega4});
  const double mismatch = (omega1 - omega2) - (omega3 - omega4);
  if (std::abs(mismatch) > resonance_tolerance * scale)
    throw ConfigError(fmt::format(
        "four-photon resonance violated: (omega1-omega2)-(omega3-omega4) = {:.3e}", mismatch));
}

LevelScheme make_resonant_scheme(const SchemeParameters& p, const PhysicalConstants& k) {
  LevelScheme s;
  s.E_a = p.E_a;
  s.E_b = p.E_b;
  s.E_c = p.E_c;
  s.E_d = p.E_d;
  s.Gamma_a = p.Gamma_a;
  s.Gamma_d = p.Gamma_d;
  s.gamma_bc = p.gamma_bc;
  s.resonance_tolerance = p.resonance_tolerance;
  s.omega1 = (p.E_a - p.E_b) / k.hbar;
  s.omega2 = (p.E_a - p.E_c) / k.hbar;
  s.omega3 = (p.E_d - p.E_b) / k.hbar;
  s.omega4 = (p.E_d - p.E_c) / k.hbar;
  s.validate();

  const double g_ab = p.channels.ab.value_or(0.5 * p.Gamma_a);
  const double g_ac = p.channels.ac.value_or(0.5 * p.Gamma_a);
  const double g_db = p.channels.db.value_or(0.5 * p.Gamma_d);
  const double g_dc = p.channels.dc.value_or(0.5 * p.Gamma_d);
  s.d1 = std::polar(dipole_from_linewidth(g_ab, s.omega1, k), p.phase1);
  s.d2 = std::polar(dipole_from_linewidth(g_ac, s.omega2, k), p.phase2);
  s.d3 = std::polar(dipole_from_linewidth(g_db, s.omega3, k), p.phase3);
  s.d4 = std::polar(dipole_from_linewidth(g_dc, s.omega4, k), p.phase4);
  return s;
}

Detunings compute_detunings(const LevelScheme& s, const PhysicalConstants& k) {
  const double scale = std::max({s.omega1, s.omega2, s.omega3, s.omega4});
  const double snap = s.resonance_tolerance * scale;
  auto snapped = [snap](double x) { return std::abs(x) <= snap ? 0.0 : x; };

  const double d1 = snapped((s.E_a - s.E_b) / k.hbar - s.omega1);
  const double d3 = snapped((s.E_d - s.E_b) / k.hbar - s.omega3);
  const double two_photon = snapped((s.E_b - s.E_c) / k.hbar + s.omega1 - s.omega2);
  return Detunings{cplx(d1, -0.5 * s.Gamma_a / k.hbar), cplx(d3, -0.5 * s.Gamma_d / k.hbar),
                   cplx(two_photon, -s.gamma_bc / k.hbar)};
}

MediumSpec make_medium(const LevelScheme& s, double density, double length,
                       const PhysicalConstants& k) {
  if (!(length > 0)) throw ConfigError("medium length must be positive");
  if (!(density > 0)) throw ConfigError("medium density must be positive");
  MediumSpec m;
  m.density_N = density;
  m.length_L = length;
  m.kappa1 = coupling_constant(s.d1, s.omega1, density, k);
  m.kappa3 = coupling_constant(s.d3, s.omega3, density, k);
  return m;
}

double dipole_from_linewidth(double Gamma, double omega, const PhysicalConstants& k) {
  require_positive(Gamma, "linewidth");
  require_positive(omega, "transition frequency");
  return std::sqrt(3.0 * kPi * k.eps0 * k.hbar * k.c * k.c * k.c * Gamma /
                   (omega * omega * omega));
}

double linewidth_from_dipole(double d, double omega, const PhysicalConstants& k) {
  require_positive(d, "dipole");
  require_positive(omega, "transition frequency");
  return omega * omega * omega * d * d / (3.0 * kPi * k.eps0 * k.hbar * k.c * k.c * k.c);
}

double coupling_constant(cplx d, double omega, double N, const PhysicalConstants& k) {
  require_positive(std::abs(d), "dipole magnitude");
  require_positive(omega, "transition frequency");
  require_positive(N, "density");
  return std::sqrt(std::norm(d) * omega * N / (4.0 * k.eps0 * k.hbar));
}

cplx normalize_signal(cplx epsilon, cplx d, double kappa, const PhysicalConstants& k) {
  require_positive(kappa, "kappa");
  return epsilon * std::conj(d) / (2.0 * k.hbar * kappa);
}

cplx denormalize_signal(cplx R, cplx d, double kappa, const PhysicalConstants& k) {
  require_positive(kappa, "kappa");
  require_positive(std::abs(d), "dipole magnitude");
  return R * 2.0 * k.hbar * kappa / std::conj(d);
}

cplx normalize_control(cplx epsilon, cplx d, double kappa_signal, const PhysicalConstants& k) {
  return normalize_signal(epsilon, d, kappa_signal, k);
}

cplx rabi_frequency(cplx epsilon, cplx d, const PhysicalConstants& k) {
  return epsilon * std::conj(d) / (2.0 * k.hbar);
}

QuantityKind parse_quantity_kind(std::string_view name) {
  if (name == "length") return QuantityKind::length;
  if (name == "time") return QuantityKind::time;
  if (name == "energy") return QuantityKind::energy;
  if (name == "electric-field") return QuantityKind::electric_field;
  if (name == "density") return QuantityKind::density;
  if (name == "power-density") return QuantityKind::power_density;
  throw UsageError(fmt::format("unknown quantity kind '{}'", name));
}

double si_conversion(double value, QuantityKind kind) { return value * si_factor(kind); }

double from_si(double value, QuantityKind kind) { return value / si_factor(kind); }

double field_intensity(double amplitude, const PhysicalConstants& k) {
  return 0.5 * k.c * k.eps0 * amplitude * amplitude;
}

}  // namespace dlambda
