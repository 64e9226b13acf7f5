#include "canal/hydraulics.hpp"

#include <sstream>

namespace canal {

void PoolParams::validate() const {
  auto fail = [&](const char* what) {
    std::ostringstream os;
    os << "pool " << index << ": " << what;
    throw DomainError(os.str());
  };
  if (!(length > 0)) fail("length must be positive");
  if (!(bed_width > 0)) fail("bed_width must be positive");
  if (!(side_slope >= 0)) fail("side_slope must be non-negative");
  if (!(bed_slope > 0)) fail("bed_slope must be positive");
  if (!(manning_n > 0)) fail("manning_n must be positive");
  if (!(h_ref > 0)) fail("h_ref must be positive");
}

double froude_squared(double A, double Q, const PoolParams& p) {
  const double V = Q / A;
  return V * V / (kGravity * pressure_coefficient(A, p));
}

double backwater_slope(double A, double Q, const PoolParams& p) {
  const double k = pressure_coefficient(A, p);
  const double V = Q / A;
  const double denom = kGravity * k - V * V;
  if (!(denom > 0)) throw NumericalError("backwater_slope: flow is not subcritical");
  return kGravity * A * (p.bed_slope - friction_slope(A, Q, p)) / denom;
}

double trapezoid_volume(const Eigen::VectorXd& area, double dx) {
  const Eigen::Index n = area.size();
  if (n < 2) return 0.0;
  return dx * (area.sum() - 0.5 * (area(0) + area(n - 1)));
}

SteadyProfile solve_steady_profile(const PoolParams& p, double flow, int intervals) {
  return solve_steady_profile(p, flow, intervals, p.h_ref);
}

SteadyProfile solve_steady_profile(const PoolParams& p, double flow, int intervals,
                                   double downstream_level) {
  p.validate();
  if (!(flow >= 0)) throw DomainError("solve_steady_profile: negative flow");
  if (intervals < 1) throw DomainError("solve_steady_profile: need at least one interval");
  if (!(downstream_level > 0)) throw DomainError("solve_steady_profile: non-positive level");

  SteadyProfile prof;
  prof.flow = flow;
  prof.x = Eigen::VectorXd::LinSpaced(intervals + 1, 0.0, p.length);
  prof.area.resize(intervals + 1);

  const double dx = p.length / intervals;
  auto rhs = [&](double A, double x) {
    if (!(A > 0)) {
      std::ostringstream os;
      os << "pool " << p.index << ": steady profile dries out near x = " << x << " m";
      throw NumericalError(os.str());
    }
    try {
      return backwater_slope(A, flow, p);
    } catch (const NumericalError&) {
      std::ostringstream os;
      os << "pool " << p.index << ": transcritical steady flow near x = " << x
         << " m (Q0 = " << flow << " m^3/s)";
      throw NumericalError(os.str());
    }
  };

  // March upstream: x decreases, so the step is -dx.
  double A = area_from_level(downstream_level, p);
  prof.area(intervals) = A;
  for (int i = intervals; i > 0; --i) {
    const double x = prof.x(i);
    const double k1 = rhs(A, x);
    const double k2 = rhs(A - 0.5 * dx * k1, x - 0.5 * dx);
    const double k3 = rhs(A - 0.5 * dx * k2, x - 0.5 * dx);
    const double k4 = rhs(A - dx * k3, x - dx);
    A -= dx / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!std::isfinite(A)) throw NumericalError("solve_steady_profile: non-finite area");
    rhs(A, x - dx);  // subcriticality at the new node
    prof.area(i - 1) = A;
  }
  prof.volume = trapezoid_volume(prof.area, dx);
  return prof;
}

}  // namespace canal
