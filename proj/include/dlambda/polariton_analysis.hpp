#pragma once

// Dark/bright polariton variables and the closed-form predictions built on
// them: mixing angles, entry decomposition, asymptotic fields, stored
// coherence, group velocity, peak position and compression.

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dlambda/physical_model.hpp"

namespace dlambda {

/// theta in (0, pi/2], phi in [0, pi/2]. At zero controls theta = pi/2 and
/// phi is set to 0 by convention.
struct MixingAngles {
  double theta = 0.5 * kPi;
  double phi = 0.0;
  double arg_U2 = 0.0;
  double arg_U4 = 0.0;

  double sin_theta() const;
  double cos_theta() const;
  /// cos^2 theta = (|U2|^2 + |U4|^2) / (|U2|^2 + |U4|^2 + 1).
  double cos2_theta() const;
};

MixingAngles mixing_angles(cplx U2, cplx U4);

/// v = c cos^2 theta.
double group_velocity(const MixingAngles& a, const PhysicalConstants& k = {});

struct PolaritonState {
  cplx Psi;  // dark
  cplx Phi;  // bright, coupled to the upper levels through sigma_bc
  cplx X;    // bright, the antisymmetric signal combination
};

struct SignalTriple {
  cplx R1;
  cplx R3;
  cplx sigma_bc;
};

/// Orthogonal map from (R1 e^{-i arg U2}, R3 e^{-i arg U4}, sigma_bc) to
/// (Psi, Phi, X) and its inverse.
PolaritonState to_polaritons(cplx R1, cplx R3, cplx sigma_bc, const MixingAngles& a);
SignalTriple from_polaritons(const PolaritonState& p, const MixingAngles& a);

/// Rows of the real matrix taking (Psi, Phi, X) to the phase-stripped
/// (R1, R3, sigma_bc).
std::array<std::array<double, 3>, 3> polariton_matrix(const MixingAngles& a);

/// Splits incoming signals into the dark polariton and X, assuming Phi = 0.
/// Throws SingularityError when the controls vanish at entry.
struct EntryDecomposition {
  cplx Psi;
  cplx X;
};
EntryDecomposition initial_decomposition(cplx R1_0, cplx R3_0, const MixingAngles& a0);

/// Fields left once X has decayed: the dark part of the entry decomposition
/// carried to the angles `af` of a later instant.
SignalTriple asymptotic_prediction(cplx R1_0, cplx R3_0, const MixingAngles& a0,
                                   const MixingAngles& af);

/// cos^2 theta0: ratio of the stored spatial width to the free-space pulse
/// length. Throws SingularityError when theta0 = pi/2.
double compression_factor(const MixingAngles& a0);

/// Lab-frame position at time t of a feature that reaches the sample at
/// `entry_time`: vacuum flight at c before entry, then the integral of
/// c cos^2 theta(tau) from entry_time to t (adaptive Gauss-Kronrod).
/// Measured from the sample entrance, so it is negative before entry.
double peak_position(double t, double entry_time, const std::function<double(double)>& theta_of_t,
                     const PhysicalConstants& k = {});

/// Normalized controls as functions of the local time t' = t - z/c.
struct ControlHistory {
  std::function<cplx(double)> U2;
  std::function<cplx(double)> U4;

  MixingAngles angles(double t_local) const { return mixing_angles(U2(t_local), U4(t_local)); }
};

/// Depth map in the co-moving frame. Along a dark-polariton trajectory
/// dz/dt' = c (|U2|^2 + |U4|^2) = c cot^2 theta, which is the lab-frame
/// c cos^2 theta rewritten in local time. The cumulative integral is
/// tabulated on `knots` subintervals of [t_begin, t_end].
class TransitMap {
 public:
  TransitMap(const ControlHistory& controls, double t_begin, double t_end,
             std::size_t knots = 1024, const PhysicalConstants& k = {});

  /// c times the integral of |U2|^2 + |U4|^2 over [t_begin, t].
  double cumulative(double t) const;
  /// Depth at local time t_local of the feature that entered at t_entry.
  double depth(double t_entry, double t_local) const { return cumulative(t_local) - cumulative(t_entry); }
  /// Entry time of the feature found at depth z at local time t_local, or
  /// nullopt if nothing that entered after t_begin has travelled that far.
  std::optional<double> entry_time(double z, double t_local) const;

 private:
  double partial(double a, double b) const;

  ControlHistory controls_;
  double t_begin_, t_end_;
  std::vector<double> knots_;
  std::vector<double> cumulative_;
  double c_;
};

/// Asymptotic prediction along t' at depth z. Each local time is traced
/// back to its entry time; the inputs evaluated there are projected onto
/// the dark state with the entry angles and carried to the current angles.
/// Samples whose trajectory starts before the transit map begins are zero.
struct PredictionRow {
  double t = 0.0;
  SignalTriple fields;
};

std::vector<PredictionRow> predict_at_depth(double z, const std::vector<double>& t_local,
                                            const std::function<cplx(double)>& R1_in,
                                            const std::function<cplx(double)>& R3_in,
                                            const ControlHistory& controls,
                                            const TransitMap& transit);

/// Stored profile over depth at a fixed local time.
std::vector<SignalTriple> predict_profile(const std::vector<double>& z, double t_local,
                                          const std::function<cplx(double)>& R1_in,
                                          const std::function<cplx(double)>& R3_in,
                                          const ControlHistory& controls,
                                          const TransitMap& transit);

/// CSV with columns t, |R1|, arg R1, |R3|, arg R3, |sigma_bc|, arg sigma_bc.
void write_prediction_csv(std::ostream& os, const std::vector<PredictionRow>& rows,
                          const std::string& header_comment = {});

}  // namespace dlambda
