#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "dlambda/errors.hpp"
#include "dlambda/pulse_shapes.hpp"

using namespace dlambda;

TEST_CASE("sine-square envelope") {
  const PulseSpec p{PulseShape::sine_square, 2.0, 10.0, 0.5, 3.0};
  CHECK(std::abs(eval_pulse(p, 8.0)) == doctest::Approx(2.0));
  CHECK(std::arg(eval_pulse(p, 8.0)) == doctest::Approx(0.5));
  CHECK(std::abs(eval_pulse(p, 3.0)) == doctest::Approx(0.0).epsilon(1e-30));
  CHECK(eval_pulse(p, 2.999) == cplx(0.0, 0.0));
  CHECK(eval_pulse(p, 13.001) == cplx(0.0, 0.0));
  CHECK(std::abs(eval_pulse(p, 5.5)) == doctest::Approx(2.0 * 0.5));
  CHECK(p.peak_time() == 8.0);
  CHECK(p.end_time() == 13.0);
}

TEST_CASE("rectangular envelope") {
  const PulseSpec p{PulseShape::rectangular, 1.5, 4.0, 0.0, 1.0};
  CHECK(eval_pulse(p, 1.0) == cplx(1.5, 0.0));
  CHECK(eval_pulse(p, 3.0) == cplx(1.5, 0.0));
  CHECK(eval_pulse(p, 5.1) == cplx(0.0, 0.0));
}

TEST_CASE("pulse energy matches quadrature") {
  for (PulseShape shape : {PulseShape::sine_square, PulseShape::rectangular}) {
    const PulseSpec p{shape, 1.7, 3.0, 1.0, 0.0};
    const double q = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double t) { return std::norm(eval_pulse(p, t)); }, 0.0, 3.0, 10, 1e-13);
    CHECK(pulse_l2_norm(p) == doctest::Approx(q).epsilon(1e-10));
  }
}

TEST_CASE("control switch-off and switch-on") {
  ControlSchedule off{1.0, 0.3, 100.0, std::nullopt, 2.0};
  CHECK(control_profile(off, 0.0) == doctest::Approx(1.0));
  CHECK(control_profile(off, 100.0) == doctest::Approx(0.5));
  CHECK(control_profile(off, 200.0) == doctest::Approx(0.0));
  CHECK(std::arg(eval_control(off, 0.0)) == doctest::Approx(0.3));

  ControlSchedule both{2.0, 0.0, 100.0, 300.0, 2.0};
  CHECK(control_profile(both, 0.0) == doctest::Approx(1.0));
  CHECK(control_profile(both, 200.0) == doctest::Approx(0.0));
  CHECK(control_profile(both, 400.0) == doctest::Approx(1.0));
  CHECK(std::abs(eval_control(both, 400.0)) == doctest::Approx(2.0));

  ControlSchedule constant{1.0, 0.0, std::nullopt, std::nullopt, 1.0};
  CHECK(constant.is_constant());
  CHECK(control_profile(constant, 1e20) == 1.0);
}

TEST_CASE("switch-off is monotone") {
  const ControlSchedule off{1.0, 0.0, 50.0, std::nullopt, 5.0};
  double prev = 2.0;
  for (double t = 0; t < 100; t += 0.5) {
    const double v = control_profile(off, t);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("pulse and control validation") {
  CHECK_THROWS_AS((PulseSpec{PulseShape::sine_square, -1.0, 1.0, 0.0, 0.0}).validate(), ConfigError);
  CHECK_THROWS_AS((PulseSpec{PulseShape::sine_square, 1.0, 0.0, 0.0, 0.0}).validate(), ConfigError);
  CHECK_THROWS_AS((ControlSchedule{1.0, 0.0, 10.0, 5.0, 1.0}).validate(), ConfigError);
  CHECK_THROWS_AS((ControlSchedule{1.0, 0.0, std::nullopt, std::nullopt, 0.0}).validate(), ConfigError);
  CHECK(parse_pulse_shape("rectangular") == PulseShape::rectangular);
  CHECK_THROWS_AS(parse_pulse_shape("gauss"), ConfigError);
}
