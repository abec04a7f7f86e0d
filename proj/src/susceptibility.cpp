#include "dlambda/susceptibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "dlambda/errors.hpp"

namespace dlambda {

namespace {

constexpr double kPoleTolerance = 1e-14;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Sum of the magnitudes of the denominator's terms; the pole test compares
// |D| against this.
double denominator_scale(double w, const Detunings& det, double p2, double p4) {
  const double a = std::abs(det.Delta1 - w);
  const double b = std::abs(det.Delta3 - w);
  const double c = std::abs(det.delta - w);
  return a * b * c + a * p4 + b * p2;
}

bool lossless(const Detunings& det) {
  return det.Delta1.imag() == 0.0 && det.Delta3.imag() == 0.0 && det.delta.imag() == 0.0;
}

void reserve(SusceptibilityMatrix& m, std::size_t n) {
  m.chi11.reserve(n);
  m.chi13.reserve(n);
  m.chi31.reserve(n);
  m.chi33.reserve(n);
  m.flagged.reserve(n);
}

void push_flagged(SusceptibilityMatrix& m) {
  const cplx nan(kNaN, kNaN);
  m.chi11.push_back(nan);
  m.chi13.push_back(nan);
  m.chi31.push_back(nan);
  m.chi33.push_back(nan);
  m.flagged.push_back(true);
}

cplx nearest_pole(double w, const std::vector<cplx>& poles) {
  cplx best(kNaN, kNaN);
  for (const cplx& p : poles)
    if (std::isnan(best.real()) || std::abs(p - w) < std::abs(best - w)) best = p;
  return best;
}

}  // namespace

std::size_t SusceptibilityMatrix::flagged_count() const {
  return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), true));
}

ChiPrefactors chi_prefactors(const LevelScheme& s, double N, const PhysicalConstants& k) {
  const double scale = N / (4.0 * kPi * k.hbar * k.eps0);
  return {scale * s.d1 * std::conj(s.d1), scale * s.d1 * std::conj(s.d3),
          scale * std::conj(s.d1) * s.d3, scale * s.d3 * std::conj(s.d3)};
}

cplx chi_denominator(double w, const Detunings& det, cplx Omega2, cplx Omega4) {
  const cplx a = det.Delta1 - w;
  const cplx b = det.Delta3 - w;
  const cplx c = det.delta - w;
  return a * b * c - a * std::norm(Omega4) - b * std::norm(Omega2);
}

std::vector<cplx> denominator_roots(const Detunings& det, cplx Omega2, cplx Omega4) {
  const cplx a = det.Delta1, b = det.Delta3, c = det.delta;
  const double p2 = std::norm(Omega2), p4 = std::norm(Omega4);
  // -D as a monic cubic: x^3 + c2 x^2 + c1 x + c0
  const cplx c2 = -(a + b + c);
  const cplx c1 = a * b + b * c + c * a - p2 - p4;
  const cplx c0 = -(a * b * c - a * p4 - b * p2);
  // x = scale * y brings the coefficients to order one before the eigen solve.
  const double scale = std::max({std::abs(c2), std::sqrt(std::abs(c1)), std::cbrt(std::abs(c0)),
                                 std::numeric_limits<double>::min()});
  const cplx s2 = c2 / scale, s1 = c1 / (scale * scale), s0 = c0 / (scale * scale * scale);
  Eigen::Matrix3cd companion = Eigen::Matrix3cd::Zero();
  companion(1, 0) = 1.0;
  companion(2, 1) = 1.0;
  companion(0, 2) = -s0;
  companion(1, 2) = -s1;
  companion(2, 2) = -s2;
  Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(companion, false);
  std::vector<cplx> roots(3);
  for (int r = 0; r < 3; ++r) {
    cplx y = es.eigenvalues()(r);
    for (int it = 0; it < 50; ++it) {
      const cplx f = ((y + s2) * y + s1) * y + s0;
      const cplx df = (3.0 * y + 2.0 * s2) * y + s1;
      if (df == 0.0) break;
      const cplx step = f / df;
      y -= step;
      if (std::abs(step) <= 1e-16 * std::max(std::abs(y), 1e-300)) break;
    }
    roots[r] = scale * y;
  }
  std::sort(roots.begin(), roots.end(),
            [](cplx l, cplx r) { return l.real() != r.real() ? l.real() < r.real() : l.imag() < r.imag(); });
  return roots;
}

SusceptibilityMatrix chi_matrix(const std::vector<double>& omega, const Detunings& det,
                                cplx Omega2, cplx Omega4, const LevelScheme& scheme, double N,
                                PoleMode mode, const PhysicalConstants& k) {
  const ChiPrefactors C = chi_prefactors(scheme, N, k);
  const double p2 = std::norm(Omega2), p4 = std::norm(Omega4);
  SusceptibilityMatrix m;
  m.omega = omega;
  m.poles = denominator_roots(det, Omega2, Omega4);
  reserve(m, omega.size());
  const bool strict = mode == PoleMode::strict && lossless(det);
  for (double w : omega) {
    const cplx D = chi_denominator(w, det, Omega2, Omega4);
    if (std::abs(D) <= kPoleTolerance * denominator_scale(w, det, p2, p4)) {
      if (strict)
        throw SingularityError(fmt::format("omega = {:.6e} lies on the pole {:.6e}{:+.6e}i", w,
                                           nearest_pole(w, m.poles).real(),
                                           nearest_pole(w, m.poles).imag()));
      push_flagged(m);
      continue;
    }
    const cplx a = det.Delta1 - w, b = det.Delta3 - w, c = det.delta - w;
    m.chi11.push_back(C.c11 * (-b * c + p4) / D);
    m.chi13.push_back(C.c13 * (-Omega2 * std::conj(Omega4)) / D);
    m.chi31.push_back(C.c31 * (-std::conj(Omega2) * Omega4) / D);
    m.chi33.push_back(C.c33 * (-a * c + p2) / D);
    m.flagged.push_back(false);
  }
  return m;
}

SusceptibilityMatrix chi_resonant(const std::vector<double>& omega, cplx Omega2, cplx Omega4,
                                  const LevelScheme& scheme, double N, PoleMode mode,
                                  const PhysicalConstants& k) {
  const ChiPrefactors C = chi_prefactors(scheme, N, k);
  const double p2 = std::norm(Omega2), p4 = std::norm(Omega4);
  const double p = p2 + p4;
  SusceptibilityMatrix m;
  m.omega = omega;
  m.poles = {cplx(-std::sqrt(p), 0.0), cplx(0.0, 0.0), cplx(std::sqrt(p), 0.0)};
  reserve(m, omega.size());
  for (double w : omega) {
    const double D = w * (w * w - p);
    if (std::abs(D) <= kPoleTolerance * (std::abs(w) * (w * w + p))) {
      if (mode == PoleMode::strict)
        throw SingularityError(fmt::format("omega = {:.6e} lies on the pole {:.6e}", w,
                                           nearest_pole(w, m.poles).real()));
      push_flagged(m);
      continue;
    }
    m.chi11.push_back(C.c11 * (w * w - p4) / D);
    m.chi13.push_back(C.c13 * Omega2 * std::conj(Omega4) / D);
    m.chi31.push_back(C.c31 * std::conj(Omega2) * Omega4 / D);
    m.chi33.push_back(C.c33 * (w * w - p2) / D);
    m.flagged.push_back(false);
  }
  return m;
}

cplx adiabatic_field_ratio(cplx Omega2, cplx Omega4, const LevelScheme& scheme) {
  if (Omega2 == 0.0)
    throw DomainError("adiabatic field ratio undefined: Omega2 = 0");
  if (scheme.d3 == 0.0) throw DomainError("adiabatic field ratio undefined: d3 = 0");
  return std::conj(scheme.d1) * Omega4 / (std::conj(scheme.d3) * Omega2);
}

std::vector<cplx> chi_adiabatic(const std::vector<double>& omega, cplx Omega2, cplx Omega4,
                                const LevelScheme& scheme, double N, const PhysicalConstants& k) {
  if (Omega2 == 0.0)
    throw DomainError("adiabatic susceptibility undefined: Omega2 = 0");
  const cplx C = chi_prefactors(scheme, N, k).c11;
  const double p = std::norm(Omega2) + std::norm(Omega4);
  std::vector<cplx> out;
  out.reserve(omega.size());
  for (double w : omega) {
    const double D = w * w - p;
    if (std::abs(D) <= kPoleTolerance * (w * w + p))
      out.emplace_back(kNaN, kNaN);
    else
      out.push_back(C * w / D);
  }
  return out;
}

std::vector<double> default_omega_grid(double omega_eff, std::size_t points, double span) {
  if (!(omega_eff > 0)) throw DomainError("omega grid needs a positive effective Rabi frequency");
  if (!(span > 0)) throw DomainError("omega grid span must be positive");
  if (points < 3) points = 3;
  if (points % 2 == 0) ++points;
  const std::size_t half = points / 2;
  const double top = span * omega_eff;

  // density 1 + 4w/(x+w) + 4w/(|x-1|+w) in units of omega_eff, inverted
  // through its tabulated cumulative integral
  const double w = 0.01;
  auto rho = [w](double x) { return 1.0 + 4.0 * w / (x + w) + 4.0 * w / (std::abs(x - 1.0) + w); };
  const std::size_t fine = 200000;
  std::vector<double> xs(fine + 1), cdf(fine + 1, 0.0);
  for (std::size_t i = 0; i <= fine; ++i) xs[i] = span * static_cast<double>(i) / fine;
  for (std::size_t i = 1; i <= fine; ++i)
    cdf[i] = cdf[i - 1] + 0.5 * (rho(xs[i - 1]) + rho(xs[i])) * (xs[i] - xs[i - 1]);

  std::vector<double> pos(half);
  for (std::size_t j = 1; j <= half; ++j) {
    const double target = cdf.back() * static_cast<double>(j) / static_cast<double>(half);
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    const std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), 1, fine);
    const double f = (target - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
    pos[j - 1] = (xs[i - 1] + f * (xs[i] - xs[i - 1])) * omega_eff;
  }
  pos.back() = top;

  std::vector<double> grid;
  grid.reserve(points);
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) grid.push_back(-*it);
  grid.push_back(0.0);
  grid.insert(grid.end(), pos.begin(), pos.end());
  return grid;
}

TransparencyWindow transparency_window(const std::vector<double>& omega,
                                       const std::vector<cplx>& chi, double threshold,
                                       WindowMetric metric) {
  if (omega.size() != chi.size() || omega.empty())
    throw DomainError("transparency window needs matching, non-empty omega and chi arrays");
  if (!(threshold > 0)) return {0.0, false};
  auto value = [&](std::size_t i) {
    const cplx c = chi[i];
    if (std::isnan(c.real()) || std::isnan(c.imag())) return std::numeric_limits<double>::infinity();
    return metric == WindowMetric::absorption ? std::abs(c.imag()) : std::abs(c);
  };
  std::size_t i0 = 0;
  for (std::size_t i = 1; i < omega.size(); ++i)
    if (std::abs(omega[i]) < std::abs(omega[i0])) i0 = i;
  if (value(i0) > threshold) return {0.0, false};

  TransparencyWindow out;
  auto edge = [&](int dir) -> double {
    std::size_t i = i0;
    while (true) {
      if ((dir < 0 && i == 0) || (dir > 0 && i + 1 == omega.size())) {
        out.exceeds_grid = true;
        return std::abs(omega[i] - omega[i0]);
      }
      const std::size_t j = dir > 0 ? i + 1 : i - 1;
      const double vj = value(j);
      if (vj > threshold) {
        const double vi = value(i);
        double f = std::isfinite(vj) ? (threshold - vi) / (vj - vi) : 0.0;
        f = std::clamp(f, 0.0, 1.0);
        return std::abs(omega[i] + f * (omega[j] - omega[i]) - omega[i0]);
      }
      i = j;
    }
  };
  out.half_width = std::min(edge(-1), edge(+1));
  return out;
}

void write_susceptibility_csv(std::ostream& os, const SusceptibilityMatrix& m) {
  os << "# poles:";
  for (const cplx& p : m.poles) fmt::print(os, " ({:.17g},{:.17g})", p.real(), p.imag());
  os << '\n';
  os << "omega,re_chi11,im_chi11,re_chi13,im_chi13,re_chi31,im_chi31,re_chi33,im_chi33,flagged\n";
  for (std::size_t i = 0; i < m.omega.size(); ++i) {
    fmt::print(os, "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n",
               m.omega[i], m.chi11[i].real(), m.chi11[i].imag(), m.chi13[i].real(),
               m.chi13[i].imag(), m.chi31[i].real(), m.chi31[i].imag(), m.chi33[i].real(),
               m.chi33[i].imag(), m.flagged[i] ? 1 : 0);
  }
}

}  // namespace dlambda
