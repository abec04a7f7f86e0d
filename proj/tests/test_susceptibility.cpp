#include <cmath>

#include "doctest.h"
#include "dlambda/errors.hpp"
#include "dlambda/susceptibility.hpp"

using namespace dlambda;

namespace {

struct Setup {
  LevelScheme scheme = make_resonant_scheme({});
  double N = 3e-13;
  cplx O2 = rabi_frequency(1.2e-9, scheme.d2);
  cplx O4 = rabi_frequency(1.8e-9, scheme.d4);
  double omega_eff() const { return std::hypot(std::abs(O2), std::abs(O4)); }
};

}  // namespace

TEST_CASE("relaxed susceptibility at line centre matches goldens") {
  const Setup s;
  const SusceptibilityMatrix m =
      chi_matrix({0.0}, compute_detunings(s.scheme), s.O2, s.O4, s.scheme, s.N, PoleMode::strict);
  CHECK(std::abs(m.chi11[0].real()) < 1e-16);
  CHECK(m.chi11[0].imag() == doctest::Approx(-1.991699710219417401e-4).epsilon(1e-12));
  CHECK(m.chi13[0].imag() == doctest::Approx(1.4971860106342787798e-4).epsilon(1e-12));
  CHECK(m.chi33[0].imag() == doctest::Approx(-1.1254537714382870447e-4).epsilon(1e-12));
}

TEST_CASE("adiabatic combination matches high-precision goldens") {
  const Setup s;
  const std::vector<double> w{1e-10, -3.3e-10, 2.5e-9};
  const double golden[] = {-2.810325879829937164751481e-5, 9.660518576701230639626891e-5,
                           4.610393344813712649068299e-4};
  const auto chi = chi_adiabatic(w, s.O2, s.O4, s.scheme, s.N);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(chi[i].real() == doctest::Approx(golden[i]).epsilon(1e-12));
    CHECK(std::abs(chi[i].imag()) <= 1e-12 * std::abs(golden[i]));
  }
}

TEST_CASE("general form reduces to the resonant form without relaxation") {
  const Setup s;
  const auto w = default_omega_grid(s.omega_eff());
  const auto g = chi_matrix(w, Detunings{}, s.O2, s.O4, s.scheme, s.N);
  const auto r = chi_resonant(w, s.O2, s.O4, s.scheme, s.N);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (r.flagged[i]) continue;
    ++compared;
    CHECK(std::abs(g.chi11[i] - r.chi11[i]) <= 1e-12 * std::abs(r.chi11[i]));
    CHECK(std::abs(g.chi13[i] - r.chi13[i]) <= 1e-12 * std::abs(r.chi13[i]));
    CHECK(std::abs(g.chi31[i] - r.chi31[i]) <= 1e-12 * std::abs(r.chi31[i]));
    CHECK(std::abs(g.chi33[i] - r.chi33[i]) <= 1e-12 * std::abs(r.chi33[i]));
  }
  CHECK(compared + r.flagged_count() == w.size());
}

TEST_CASE("resonant poles and residue") {
  const Setup s;
  const auto r = chi_resonant({1e-3 * s.omega_eff()}, s.O2, s.O4, s.scheme, s.N);
  REQUIRE(r.poles.size() == 3);
  CHECK(std::abs(r.poles[0] + s.omega_eff()) < 1e-12 * s.omega_eff());
  CHECK(std::abs(r.poles[1]) < 1e-12 * s.omega_eff());
  CHECK(std::abs(r.poles[2] - s.omega_eff()) < 1e-12 * s.omega_eff());
  const double w = 1e-9 * s.omega_eff();
  const auto near = chi_resonant({w}, s.O2, s.O4, s.scheme, s.N);
  const cplx C = chi_prefactors(s.scheme, s.N).c11;
  const double residue = std::abs(C) * std::norm(s.O4) / std::pow(s.omega_eff(), 2);
  CHECK(std::abs(w * near.chi11[0]) == doctest::Approx(residue).epsilon(1e-6));
}

TEST_CASE("denominator roots match the cubic") {
  const Setup s;
  const Detunings det = compute_detunings(s.scheme);
  for (const cplx& root : denominator_roots(det, s.O2, s.O4)) {
    const double scale = std::pow(s.omega_eff(), 3);
    const cplx a = det.Delta1 - root, b = det.Delta3 - root, c = det.delta - root;
    CHECK(std::abs(a * b * c - a * std::norm(s.O4) - b * std::norm(s.O2)) <= 1e-10 * scale);
  }
}

TEST_CASE("pole handling modes") {
  const Setup s;
  const auto flagged = chi_resonant({0.0, s.omega_eff()}, s.O2, s.O4, s.scheme, s.N, PoleMode::flag);
  CHECK(flagged.flagged_count() == 2);
  CHECK(std::isnan(flagged.chi11[0].real()));
  CHECK_THROWS_AS(chi_resonant({0.0}, s.O2, s.O4, s.scheme, s.N, PoleMode::strict), SingularityError);
  // relaxation moves poles off the real axis, so strict mode never throws
  CHECK_NOTHROW(chi_matrix({0.0}, compute_detunings(s.scheme), s.O2, s.O4, s.scheme, s.N, PoleMode::strict));
}

TEST_CASE("single-Lambda limit decouples the cross terms") {
  const Setup s;
  const auto r = chi_resonant({0.3 * s.omega_eff(), 1.7 * s.omega_eff()}, s.O2, 0.0, s.scheme, s.N);
  for (const cplx& x : r.chi13) CHECK(x == cplx(0.0, 0.0));
  for (const cplx& x : r.chi31) CHECK(x == cplx(0.0, 0.0));
}

TEST_CASE("adiabatic susceptibility properties") {
  const Setup s;
  const auto at_zero = chi_adiabatic({0.0}, s.O2, s.O4, s.scheme, s.N);
  CHECK(at_zero[0] == cplx(0.0, 0.0));
  const auto side = chi_adiabatic({s.omega_eff()}, s.O2, s.O4, s.scheme, s.N);
  CHECK(std::isnan(side[0].real()));
  CHECK_THROWS_AS(chi_adiabatic({0.1}, 0.0, s.O4, s.scheme, s.N), DomainError);
  const cplx ratio = adiabatic_field_ratio(s.O2, s.O4, s.scheme);
  CHECK(ratio == cplx(std::conj(s.scheme.d1) * s.O4 / (std::conj(s.scheme.d3) * s.O2)));
}

TEST_CASE("omega grid") {
  const auto w = default_omega_grid(2.0, 2001, 5.0);
  CHECK(w.size() == 2001);
  CHECK(w.front() == doctest::Approx(-10.0));
  CHECK(w.back() == doctest::Approx(10.0));
  CHECK(w[1000] == 0.0);
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] > w[i - 1]);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == doctest::Approx(-w[w.size() - 1 - i]));
  // denser near the side pole than in between
  auto spacing_at = [&](double x) {
    std::size_t i = 0;
    while (w[i + 1] < x) ++i;
    return w[i + 1] - w[i];
  };
  CHECK(spacing_at(2.0) < spacing_at(6.0));
}

TEST_CASE("transparency window") {
  const Setup s;
  const double C = std::abs(chi_prefactors(s.scheme, s.N).c11);
  const double threshold = 0.1 * C / s.omega_eff();
  const auto w = default_omega_grid(2.0 * s.omega_eff());
  const auto chi1 = chi_adiabatic(w, s.O2, s.O4, s.scheme, s.N);
  const auto chi2 = chi_adiabatic(w, 2.0 * s.O2, 2.0 * s.O4, s.scheme, s.N);
  const auto win1 = transparency_window(w, chi1, threshold, WindowMetric::magnitude);
  const auto win2 = transparency_window(w, chi2, 0.5 * threshold, WindowMetric::magnitude);
  CHECK(win2.half_width == doctest::Approx(2.0 * win1.half_width).epsilon(1e-3));

  const auto single = chi_adiabatic(w, s.O2, 0.0, s.scheme, s.N);
  CHECK(transparency_window(w, single, threshold, WindowMetric::magnitude).half_width < win1.half_width);
  CHECK(transparency_window(w, chi1, 0.0, WindowMetric::magnitude).half_width == 0.0);
}

TEST_CASE("relaxed line centre shows a transparency dip") {
  const Setup s;
  const Detunings det = compute_detunings(s.scheme);
  const double h = 1e-3 * s.omega_eff();
  const auto m = chi_matrix({-h, 0.0, h}, det, s.O2, s.O4, s.scheme, s.N);
  const cplx ratio = adiabatic_field_ratio(s.O2, s.O4, s.scheme);
  auto absorption = [&](std::size_t i) { return std::abs((m.chi11[i] + m.chi13[i] * ratio).imag()); };
  CHECK(absorption(1) < absorption(0));
  CHECK(absorption(1) < absorption(2));
}
