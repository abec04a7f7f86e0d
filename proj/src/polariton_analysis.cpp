#include "dlambda/polariton_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "dlambda/errors.hpp"

namespace dlambda {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kQuadTolerance = 1e-10;

double control_strength(const ControlHistory& c, double t) {
  return std::norm(c.U2(t)) + std::norm(c.U4(t));
}

cplx phase(double a) { return std::polar(1.0, a); }

}  // namespace

double MixingAngles::sin_theta() const { return std::sin(theta); }
double MixingAngles::cos_theta() const { return std::cos(theta); }
double MixingAngles::cos2_theta() const {
  const double c = std::cos(theta);
  return c * c;
}

MixingAngles mixing_angles(cplx U2, cplx U4) {
  const double a2 = std::abs(U2);
  const double a4 = std::abs(U4);
  MixingAngles m;
  // tan(theta) = 1 / sqrt(|U2|^2 + |U4|^2) keeps full relative accuracy of
  // cos(theta) for weak controls.
  m.theta = std::atan2(1.0, std::hypot(a2, a4));
  m.phi = (a2 == 0.0 && a4 == 0.0) ? 0.0 : std::atan2(a4, a2);
  m.arg_U2 = std::arg(U2);
  m.arg_U4 = std::arg(U4);
  return m;
}

double group_velocity(const MixingAngles& a, const PhysicalConstants& k) {
  return k.c * a.cos2_theta();
}

std::array<std::array<double, 3>, 3> polariton_matrix(const MixingAngles& a) {
  const double st = std::sin(a.theta), ct = std::cos(a.theta);
  const double sp = std::sin(a.phi), cp = std::cos(a.phi);
  return {{{ct * cp, st * cp, sp}, {ct * sp, st * sp, -cp}, {-st, ct, 0.0}}};
}

PolaritonState to_polaritons(cplx R1, cplx R3, cplx sigma_bc, const MixingAngles& a) {
  const auto M = polariton_matrix(a);
  const cplx v[3] = {R1 * phase(-a.arg_U2), R3 * phase(-a.arg_U4), sigma_bc};
  cplx out[3];
  for (int j = 0; j < 3; ++j) out[j] = M[0][j] * v[0] + M[1][j] * v[1] + M[2][j] * v[2];
  return {out[0], out[1], out[2]};
}

SignalTriple from_polaritons(const PolaritonState& p, const MixingAngles& a) {
  const auto M = polariton_matrix(a);
  const cplx v[3] = {p.Psi, p.Phi, p.X};
  cplx out[3];
  for (int i = 0; i < 3; ++i) out[i] = M[i][0] * v[0] + M[i][1] * v[1] + M[i][2] * v[2];
  return {out[0] * phase(a.arg_U2), out[1] * phase(a.arg_U4), out[2]};
}

EntryDecomposition initial_decomposition(cplx R1_0, cplx R3_0, const MixingAngles& a0) {
  const double ct = a0.cos_theta();
  if (!(ct > 0.0) || a0.theta >= 0.5 * kPi)
    throw SingularityError("entry decomposition is singular: both controls vanish at entry");
  const double sp = std::sin(a0.phi), cp = std::cos(a0.phi);
  const cplx r1 = R1_0 * phase(-a0.arg_U2);
  const cplx r3 = R3_0 * phase(-a0.arg_U4);
  return {(cp * r1 + sp * r3) / ct, sp * r1 - cp * r3};
}

SignalTriple asymptotic_prediction(cplx R1_0, cplx R3_0, const MixingAngles& a0,
                                   const MixingAngles& af) {
  const EntryDecomposition e = initial_decomposition(R1_0, R3_0, a0);
  return from_polaritons({e.Psi, 0.0, 0.0}, af);
}

double compression_factor(const MixingAngles& a0) {
  const double c2 = a0.cos2_theta();
  if (!(c2 > 0.0) || a0.theta >= 0.5 * kPi)
    throw SingularityError("compression factor is singular: both controls vanish at entry");
  return c2;
}

double peak_position(double t, double entry_time, const std::function<double(double)>& theta_of_t,
                     const PhysicalConstants& k) {
  if (t <= entry_time) return -k.c * (entry_time - t);
  auto v = [&](double tau) {
    const double c = std::cos(theta_of_t(tau));
    return k.c * c * c;
  };
  return gauss_kronrod<double, 31>::integrate(v, entry_time, t, 15, kQuadTolerance);
}

TransitMap::TransitMap(const ControlHistory& controls, double t_begin, double t_end,
                       std::size_t knots, const PhysicalConstants& k)
    : controls_(controls), t_begin_(t_begin), t_end_(t_end), c_(k.c) {
  if (!(t_end > t_begin)) throw ConfigError("transit map needs t_end > t_begin");
  if (knots < 1) knots = 1;
  knots_.resize(knots + 1);
  cumulative_.resize(knots + 1);
  for (std::size_t i = 0; i <= knots; ++i)
    knots_[i] = t_begin + (t_end - t_begin) * static_cast<double>(i) / static_cast<double>(knots);
  cumulative_[0] = 0.0;
  auto f = [this](double t) { return c_ * control_strength(controls_, t); };
  for (std::size_t i = 0; i < knots; ++i)
    cumulative_[i + 1] = cumulative_[i] + gauss_kronrod<double, 31>::integrate(
                                              f, knots_[i], knots_[i + 1], 15, 1e-13);
}

double TransitMap::partial(double a, double b) const {
  if (b <= a) return 0.0;
  auto f = [this](double t) { return c_ * control_strength(controls_, t); };
  return gauss_kronrod<double, 31>::integrate(f, a, b, 10, 1e-13);
}

double TransitMap::cumulative(double t) const {
  if (t <= t_begin_) return 0.0;
  if (t >= t_end_) return cumulative_.back() + partial(t_end_, t);
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  return cumulative_[i] + partial(knots_[i], t);
}

std::optional<double> TransitMap::entry_time(double z, double t_local) const {
  if (z <= 0.0) return t_local;
  const double total = cumulative(t_local);
  if (total < z || t_local <= t_begin_) return std::nullopt;
  // cumulative(t_local) - cumulative(t_e) decreases from total to 0 on [t_begin, t_local]
  double lo = t_begin_, hi = t_local;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(std::abs(lo), std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (total - cumulative(mid) > z)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

SignalTriple retarded_prediction(double z, double t, const std::function<cplx(double)>& R1_in,
                                 const std::function<cplx(double)>& R3_in,
                                 const ControlHistory& controls, const TransitMap& transit) {
  const auto te = transit.entry_time(z, t);
  if (!te) return {};
  const cplx r1 = R1_in(*te);
  const cplx r3 = R3_in(*te);
  if (r1 == 0.0 && r3 == 0.0) return {};
  return asymptotic_prediction(r1, r3, controls.angles(*te), controls.angles(t));
}

}  // namespace

std::vector<PredictionRow> predict_at_depth(double z, const std::vector<double>& t_local,
                                            const std::function<cplx(double)>& R1_in,
                                            const std::function<cplx(double)>& R3_in,
                                            const ControlHistory& controls,
                                            const TransitMap& transit) {
  std::vector<PredictionRow> rows;
  rows.reserve(t_local.size());
  for (double t : t_local)
    rows.push_back({t, retarded_prediction(z, t, R1_in, R3_in, controls, transit)});
  return rows;
}

std::vector<SignalTriple> predict_profile(const std::vector<double>& z, double t_local,
                                          const std::function<cplx(double)>& R1_in,
                                          const std::function<cplx(double)>& R3_in,
                                          const ControlHistory& controls,
                                          const TransitMap& transit) {
  std::vector<SignalTriple> out;
  out.reserve(z.size());
  for (double zi : z) out.push_back(retarded_prediction(zi, t_local, R1_in, R3_in, controls, transit));
  return out;
}

void write_prediction_csv(std::ostream& os, const std::vector<PredictionRow>& rows,
                          const std::string& header_comment) {
  if (!header_comment.empty()) os << "# " << header_comment << '\n';
  os << "t,abs_R1,arg_R1,abs_R3,arg_R3,abs_sigma_bc,arg_sigma_bc\n";
  for (const auto& r : rows) {
    const SignalTriple& f = r.fields;
    fmt::print(os, "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.t,
               std::abs(f.R1), std::arg(f.R1), std::abs(f.R3), std::arg(f.R3),
               std::abs(f.sigma_bc), std::arg(f.sigma_bc));
  }
}

}  // namespace dlambda
