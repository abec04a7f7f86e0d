#include "dlambda/pulse_shapes.hpp"

#include <cmath>

#include <fmt/core.h>

#include "dlambda/errors.hpp"

namespace dlambda {

PulseShape parse_pulse_shape(std::string_view name) {
  if (name == "sine-square") return PulseShape::sine_square;
  if (name == "rectangular") return PulseShape::rectangular;
  throw ConfigError(fmt::format("unknown pulse shape '{}'", name));
}

std::string_view to_string(PulseShape shape) {
  return shape == PulseShape::sine_square ? "sine-square" : "rectangular";
}

void PulseSpec::validate() const {
  if (!(amplitude >= 0)) throw ConfigError("pulse amplitude must be non-negative");
  if (!(duration > 0)) throw ConfigError("pulse duration must be positive");
  if (!std::isfinite(phase) || !std::isfinite(start_time))
    throw ConfigError("pulse phase and start time must be finite");
}

void ControlSchedule::validate() const {
  if (!(base_amplitude >= 0)) throw ConfigError("control amplitude must be non-negative");
  if (!(ramp_width > 0)) throw ConfigError("control ramp width must be positive");
  if (off_time && on_time && !(*on_time > *off_time))
    throw ConfigError(fmt::format("control on_time ({}) must follow off_time ({})", *on_time,
                                  *off_time));
}

cplx eval_pulse(const PulseSpec& spec, double t) {
  const double s = t - spec.start_time;
  if (s < 0.0 || s > spec.duration) return {0.0, 0.0};
  double envelope = spec.amplitude;
  if (spec.shape == PulseShape::sine_square) {
    const double x = std::sin(kPi * s / spec.duration);
    envelope *= x * x;
  }
  return std::polar(envelope, spec.phase);
}

double control_profile(const ControlSchedule& schedule, double t) {
  const double w = schedule.ramp_width;
  if (schedule.off_time && schedule.on_time) {
    return 1.0 + 0.5 * (std::tanh((t - *schedule.on_time) / w) -
                        std::tanh((t - *schedule.off_time) / w));
  }
  if (schedule.off_time) return 0.5 * (1.0 - std::tanh((t - *schedule.off_time) / w));
  if (schedule.on_time) return 0.5 * (1.0 + std::tanh((t - *schedule.on_time) / w));
  return 1.0;
}

cplx eval_control(const ControlSchedule& schedule, double t) {
  return std::polar(schedule.base_amplitude * control_profile(schedule, t), schedule.phase);
}

double pulse_l2_norm(const PulseSpec& spec) {
  const double a2 = spec.amplitude * spec.amplitude;
  return spec.shape == PulseShape::sine_square ? 0.375 * a2 * spec.duration : a2 * spec.duration;
}

}  // namespace dlambda
