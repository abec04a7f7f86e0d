#include <cmath>

#include "doctest.h"
#include "dlambda/errors.hpp"
#include "dlambda/physical_model.hpp"

using namespace dlambda;

// Goldens frozen from tests/oracles/golden_values.py (mpmath, 30 digits).

TEST_CASE("dipole from linewidth matches golden") {
  CHECK(dipole_from_linewidth(2.4e-9, 0.1) == doctest::Approx(2.1522279040703168389).epsilon(1e-13));
  const double d = 2.1522279040703168389;
  CHECK(linewidth_from_dipole(d, 0.1) == doctest::Approx(2.4e-9).epsilon(1e-13));
  CHECK(coupling_constant(d, 0.1, 3e-13) == doctest::Approx(6.6072968874685444889e-7).epsilon(1e-13));
}

TEST_CASE("default scheme dipoles and couplings") {
  const LevelScheme s = make_resonant_scheme({});
  CHECK(std::abs(s.d1) == doctest::Approx(1.5218549456270313251).epsilon(1e-13));
  CHECK(std::abs(s.d2) == doctest::Approx(2.1268569439476802205).epsilon(1e-13));
  CHECK(std::abs(s.d3) == doctest::Approx(0.82839290651494765571).epsilon(1e-13));
  CHECK(std::abs(s.d4) == doctest::Approx(1.0267346802186544121).epsilon(1e-13));
  const MediumSpec m = make_medium(s, 3e-13, 1e7);
  CHECK(m.kappa1 == doctest::Approx(4.6720644344417766097e-7).epsilon(1e-13));
  CHECK(m.kappa3 == doctest::Approx(3.1147096229611844064e-7).epsilon(1e-13));
}

TEST_CASE("normalized fields match goldens") {
  const LevelScheme s = make_resonant_scheme({});
  const MediumSpec m = make_medium(s, 3e-13, 1e7);
  CHECK(std::abs(normalize_signal(1e-10, s.d1, m.kappa1)) ==
        doctest::Approx(1.6286750396763997386e-4).epsilon(1e-13));
  CHECK(std::abs(normalize_control(1.2e-9, s.d2, m.kappa1)) ==
        doctest::Approx(2.7313710764801976764e-3).epsilon(1e-13));
  CHECK(std::abs(normalize_control(1.8e-9, s.d4, m.kappa3)) ==
        doctest::Approx(2.9667652014324053927e-3).epsilon(1e-13));
  CHECK(std::abs(rabi_frequency(1.2e-9, s.d2)) == doctest::Approx(1.2761141663686081323e-9).epsilon(1e-13));
}

TEST_CASE("signal normalization round trip") {
  const cplx d(0.7, -0.4);
  const cplx eps(3e-10, 1e-10);
  CHECK(std::abs(denormalize_signal(normalize_signal(eps, d, 2e-7), d, 2e-7) - eps) < 1e-24);
}

TEST_CASE("detunings vanish at resonance apart from relaxation") {
  const LevelScheme s = make_resonant_scheme({});
  const Detunings det = compute_detunings(s);
  CHECK(det.Delta1.real() == 0.0);
  CHECK(det.Delta3.real() == 0.0);
  CHECK(det.delta.real() == 0.0);
  CHECK(det.Delta1.imag() == doctest::Approx(-1.2e-9));
  CHECK(det.Delta3.imag() == doctest::Approx(-1.2e-9));
  CHECK(det.delta.imag() == 0.0);
}

TEST_CASE("detuned carriers give non-zero detunings") {
  LevelScheme s = make_resonant_scheme({});
  s.omega1 += 1e-8;
  s.omega2 += 1e-8;
  const Detunings det = compute_detunings(s);
  CHECK(det.Delta1.real() == doctest::Approx(-1e-8));
  CHECK(det.delta.real() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("scheme validation") {
  SchemeParameters p;
  p.E_c = -0.25;  // below E_b
  CHECK_THROWS_AS(make_resonant_scheme(p), ConfigError);
  LevelScheme s = make_resonant_scheme({});
  s.omega4 += 1e-6;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = make_resonant_scheme({});
  s.gamma_bc = -1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  PhysicalConstants k;
  k.c = 0.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);
}

TEST_CASE("medium validation") {
  const LevelScheme s = make_resonant_scheme({});
  CHECK_THROWS_AS(make_medium(s, 3e-13, 0.0), ConfigError);
  CHECK_THROWS_AS(make_medium(s, -1.0, 1e7), ConfigError);
}

TEST_CASE("channel widths override the equal split") {
  SchemeParameters p;
  p.channels.ab = 2.4e-9;
  const LevelScheme s = make_resonant_scheme(p);
  CHECK(std::abs(s.d1) == doctest::Approx(1.5218549456270313251 * std::sqrt(2.0)).epsilon(1e-13));
}

TEST_CASE("SI conversion round trips and known values") {
  for (QuantityKind k : {QuantityKind::length, QuantityKind::time, QuantityKind::energy,
                         QuantityKind::electric_field, QuantityKind::density, QuantityKind::power_density})
    CHECK(from_si(si_conversion(1.2345, k), k) == doctest::Approx(1.2345).epsilon(1e-15));
  CHECK(si_conversion(1.0, QuantityKind::length) == doctest::Approx(5.29177210903e-11).epsilon(1e-12));
  CHECK(si_conversion(1.0, QuantityKind::time) == doctest::Approx(2.4188843265857e-17).epsilon(1e-12));
  CHECK(si_conversion(1.0, QuantityKind::energy) == doctest::Approx(4.3597447222071e-18).epsilon(1e-12));
  CHECK(parse_quantity_kind("time") == QuantityKind::time);
  CHECK_THROWS_AS(parse_quantity_kind("mass"), UsageError);
}

TEST_CASE("field intensity") {
  const PhysicalConstants k;
  CHECK(field_intensity(2.0) == doctest::Approx(0.5 * k.c * k.eps0 * 4.0));
}
