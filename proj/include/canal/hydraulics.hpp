#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "canal/error.hpp"

namespace canal {

inline constexpr double kGravity = 9.81;

/// Static description of one pool: a prismatic trapezoidal reach between two gates.
/// Lengths in metres, side slope as horizontal run per unit rise.
struct PoolParams {
  double length = 5000.0;
  double bed_width = 10.0;
  double side_slope = 2.0 / 3.0;
  double bed_slope = 1e-4;
  double manning_n = 0.0225;
  double h_ref = 1.9;
  int index = 1;

  bool operator==(const PoolParams&) const = default;

  /// Throws DomainError naming the offending field.
  void validate() const;
};

/// Derived geometry of a wetted cross-section.
template <typename Scalar>
struct CrossSectionT {
  Scalar area;
  Scalar level;
  Scalar top_width;
  Scalar wetted_perimeter;
  Scalar hydraulic_radius;
};
using CrossSection = CrossSectionT<double>;

template <typename Scalar>
Scalar area_from_level(Scalar h, const PoolParams& p) {
  if (h < Scalar(0)) throw DomainError("area_from_level: negative level");
  return h * (Scalar(p.bed_width) + Scalar(p.side_slope) * h);
}

/// Inverse of area_from_level. Uses the cancellation-free root of
/// s*h^2 + w*h - A = 0, which degrades gracefully to A/w as s -> 0.
template <typename Scalar>
Scalar level_from_area(Scalar A, const PoolParams& p) {
  using std::sqrt;
  if (A < Scalar(0)) throw DomainError("level_from_area: negative area");
  const Scalar w = Scalar(p.bed_width);
  if (p.side_slope == 0.0) return A / w;
  return Scalar(2) * A / (w + sqrt(w * w + Scalar(4 * p.side_slope) * A));
}

template <typename Scalar>
Scalar top_width(Scalar h, const PoolParams& p) {
  return Scalar(p.bed_width) + Scalar(2 * p.side_slope) * h;
}

template <typename Scalar>
CrossSectionT<Scalar> cross_section(Scalar A, const PoolParams& p) {
  using std::sqrt;
  CrossSectionT<Scalar> xs;
  xs.area = A;
  xs.level = level_from_area(A, p);
  xs.top_width = top_width(xs.level, p);
  xs.wetted_perimeter =
      Scalar(p.bed_width) + Scalar(2 * std::sqrt(1.0 + p.side_slope * p.side_slope)) * xs.level;
  xs.hydraulic_radius = A / xs.wetted_perimeter;
  return xs;
}

/// Manning friction slope n^2 Q^2 / (A^2 R^{4/3}); even in Q.
template <typename Scalar>
Scalar friction_slope(Scalar A, Scalar Q, const PoolParams& p) {
  using std::pow;
  if (!(A > Scalar(0))) throw DomainError("friction_slope: non-positive area");
  const Scalar R = cross_section(A, p).hydraulic_radius;
  return Scalar(p.manning_n * p.manning_n) * Q * Q / (A * A * pow(R, Scalar(4.0 / 3.0)));
}

/// dP/dA = A / w(h(A)), the coefficient multiplying dA/dx in the pressure term.
template <typename Scalar>
Scalar pressure_coefficient(Scalar A, const PoolParams& p) {
  if (!(A > Scalar(0))) throw DomainError("pressure_coefficient: non-positive area");
  return A / top_width(level_from_area(A, p), p);
}

/// Steady backwater profile A0(x) on a uniform grid, x_0 = 0 upstream, x_M = L.
struct SteadyProfile {
  Eigen::VectorXd x;
  Eigen::VectorXd area;
  double flow = 0.0;
  double volume = 0.0;

  Eigen::Index intervals() const { return x.size() - 1; }
  double spacing() const { return x(1) - x(0); }
};

/// Right-hand side dA0/dx of the steady backwater ODE. Throws NumericalError
/// if the flow is not subcritical at A.
double backwater_slope(double A, double Q, const PoolParams& p);

/// Squared Froude number V^2 / (g A / w).
double froude_squared(double A, double Q, const PoolParams& p);

/// Integrates the backwater ODE upstream from A(L) = area(h_ref) with classical RK4
/// on `intervals` equal steps.
SteadyProfile solve_steady_profile(const PoolParams& p, double flow, int intervals);

/// Same as above with an explicit downstream level (used for shifted equilibria).
SteadyProfile solve_steady_profile(const PoolParams& p, double flow, int intervals,
                                   double downstream_level);

/// Composite trapezoid rule for a uniformly sampled area profile.
double trapezoid_volume(const Eigen::VectorXd& area, double dx);

}  // namespace canal
