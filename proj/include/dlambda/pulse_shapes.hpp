#pragma once

#include <optional>
#include <string_view>

#include "dlambda/physical_model.hpp"

namespace dlambda {

enum class PulseShape { sine_square, rectangular };

PulseShape parse_pulse_shape(std::string_view name);
std::string_view to_string(PulseShape shape);

/// Signal envelope, zero outside [start_time, start_time + duration].
struct PulseSpec {
  PulseShape shape = PulseShape::sine_square;
  double amplitude = 0.0;
  double duration = 1.0;
  double phase = 0.0;
  double start_time = 0.0;

  void validate() const;
  double end_time() const { return start_time + duration; }
  double peak_time() const { return start_time + 0.5 * duration; }
};

/// Control amplitude with optional tanh switch-off and/or switch-on.
struct ControlSchedule {
  double base_amplitude = 0.0;
  double phase = 0.0;
  std::optional<double> off_time;
  std::optional<double> on_time;
  double ramp_width = 1.0;

  void validate() const;
  bool is_constant() const { return !off_time && !on_time; }
};

cplx eval_pulse(const PulseSpec& spec, double t);

/// Real switching profile in [0, 1] multiplying base_amplitude.
double control_profile(const ControlSchedule& schedule, double t);
cplx eval_control(const ControlSchedule& schedule, double t);

/// Closed-form integral of |envelope|^2 over all time.
double pulse_l2_norm(const PulseSpec& spec);

}  // namespace dlambda
