#pragma once

// Linear response of the double-Lambda medium to weak probe sidebands at
// frequency omega measured from the carriers.

#include <iosfwd>
#include <vector>

#include "dlambda/physical_model.hpp"

namespace dlambda {

enum class PoleMode {
  flag,    // points at a pole are marked and left as NaN
  strict,  // points at a pole throw SingularityError
};

struct SusceptibilityMatrix {
  std::vector<double> omega;
  std::vector<cplx> chi11, chi13, chi31, chi33;
  std::vector<cplx> poles;   // roots of the shared cubic denominator
  std::vector<bool> flagged; // true where omega sits on a pole

  std::size_t flagged_count() const;
};

/// Prefactors N d_i d_j^* / (4 pi hbar eps0) for (i, j) = (1, 1), (1, 3),
/// (3, 1), (3, 3).
struct ChiPrefactors {
  cplx c11, c13, c31, c33;
};
ChiPrefactors chi_prefactors(const LevelScheme& scheme, double N, const PhysicalConstants& k = {});

/// (Delta1 - w)(Delta3 - w)(delta - w) - (Delta1 - w)|Omega4|^2 - (Delta3 - w)|Omega2|^2.
cplx chi_denominator(double omega, const Detunings& det, cplx Omega2, cplx Omega4);

/// The three roots of chi_denominator in the complex omega plane.
std::vector<cplx> denominator_roots(const Detunings& det, cplx Omega2, cplx Omega4);

/// General susceptibilities with detunings and relaxation.
SusceptibilityMatrix chi_matrix(const std::vector<double>& omega, const Detunings& det,
                                cplx Omega2, cplx Omega4, const LevelScheme& scheme, double N,
                                PoleMode mode = PoleMode::flag, const PhysicalConstants& k = {});

/// Resonant lossless forms with the common denominator w^3 - w(|Omega2|^2 + |Omega4|^2);
/// poles at 0 and +-sqrt(|Omega2|^2 + |Omega4|^2).
SusceptibilityMatrix chi_resonant(const std::vector<double>& omega, cplx Omega2, cplx Omega4,
                                  const LevelScheme& scheme, double N,
                                  PoleMode mode = PoleMode::flag,
                                  const PhysicalConstants& k = {});

/// epsilon3 / epsilon1 = d1^* Omega4 / (d3^* Omega2) keeping the two Lambda
/// systems in their common dark state. Throws DomainError when Omega2 = 0.
cplx adiabatic_field_ratio(cplx Omega2, cplx Omega4, const LevelScheme& scheme);

/// Effective chi11 seen by signal 1 when signal 3 follows the adiabatic
/// ratio: C w / (w^2 - |Omega2|^2 - |Omega4|^2). Vanishes at w = 0; points
/// on the side poles are NaN. Throws DomainError when Omega2 = 0.
std::vector<cplx> chi_adiabatic(const std::vector<double>& omega, cplx Omega2, cplx Omega4,
                                const LevelScheme& scheme, double N,
                                const PhysicalConstants& k = {});

/// Symmetric grid over [-span, span] * omega_eff with an odd point count,
/// containing 0 exactly and denser near 0 and +-omega_eff.
std::vector<double> default_omega_grid(double omega_eff, std::size_t points = 2001,
                                       double span = 5.0);

enum class WindowMetric {
  absorption,  // |Im chi|
  magnitude,   // |chi|, for the lossless model
};

struct TransparencyWindow {
  double half_width = 0.0;
  bool exceeds_grid = false;  // the metric never crossed the threshold on one side
};

/// Half-width of the region around omega = 0 where the metric stays at or
/// below `threshold` (absolute, in units of chi). Linear interpolation
/// locates the crossing on each side; the narrower side is returned.
TransparencyWindow transparency_window(const std::vector<double>& omega,
                                       const std::vector<cplx>& chi, double threshold,
                                       WindowMetric metric = WindowMetric::absorption);

/// CSV with omega and Re/Im of every component; poles listed in the header.
void write_susceptibility_csv(std::ostream& os, const SusceptibilityMatrix& m);

}  // namespace dlambda
