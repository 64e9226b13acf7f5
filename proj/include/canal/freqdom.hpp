#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "canal/hydraulics.hpp"

namespace canal {

using Complex = std::complex<double>;

/// Strictly increasing angular frequencies, rad/s.
struct FrequencyGrid {
  Eigen::VectorXd omega;

  static FrequencyGrid log_spaced(double lo = 1e-6, double hi = 1e-1, int count = 240);

  Eigen::Index size() const { return omega.size(); }
  double min() const { return omega(0); }
  double max() const { return omega(omega.size() - 1); }
  bool operator==(const FrequencyGrid& o) const {
    return omega.size() == o.omega.size() && omega == o.omega;
  }
  /// Throws DomainError unless positive, sorted and duplicate-free.
  void validate() const;
};

/// Samples of a SISO transfer function on a frequency grid.
struct FrequencyResponse {
  FrequencyGrid grid;
  Eigen::VectorXcd values;
  double integrator_gain = 0.0;

  FrequencyResponse() = default;
  FrequencyResponse(FrequencyGrid g, Eigen::VectorXcd v, double gain = 0.0)
      : grid(std::move(g)), values(std::move(v)), integrator_gain(gain) {}

  Eigen::Index size() const { return values.size(); }
  Complex operator()(Eigen::Index k) const { return values(k); }

  /// Value at an off-grid frequency: log-magnitude and unwrapped phase are
  /// interpolated linearly in log(omega). Clamped to the grid ends.
  Complex interpolate(double omega) const;
};

/// Integrator gain lim s*G(s) from the two lowest grid frequencies: the real
/// part of s*G extrapolated to omega = 0. Throws NumericalError if the real
/// parts differ by more than `max_imag_ratio` of the gain or the imaginary part
/// is not small (no clean single integrator there).
double integrator_gain(const FrequencyGrid& grid, const Eigen::VectorXcd& values,
                       double max_imag_ratio = 0.05);

struct BodeData {
  Eigen::VectorXd omega;
  Eigen::VectorXd magnitude_db;
  Eigen::VectorXd phase_deg;  // unwrapped
};

BodeData phase_and_magnitude(const FrequencyResponse& fr);

/// Unwrap a phase sequence in degrees so adjacent samples differ by < 180.
Eigen::VectorXd unwrap_degrees(const Eigen::VectorXd& wrapped);

/// Coefficients of the linearized Saint-Venant system
///   d/dt (A~, Q~) + B(x) d/dx (A~, Q~) = C(x) (A~, Q~)
/// at one point of the steady profile.
struct LinearCoefficients {
  Eigen::Matrix2d B;
  Eigen::Matrix2d C;
};

/// Taylor expansion of the mass and momentum equations about (A0, Q0), with
/// dA0/dx taken from the backwater ODE.
LinearCoefficients linear_coefficients(double A0, double Q0, const PoolParams& p);

/// Coefficients at every node of the steady profile.
std::vector<LinearCoefficients> linearize_pool(const SteadyProfile& profile,
                                               const PoolParams& p);

struct PoolTransfer {
  Complex g_in;
  Complex g_out;
};

/// G_in(s), G_out(s) at an arbitrary complex s. The spatial transition matrix is
/// a product of per-cell matrix exponentials with cell-averaged coefficients;
/// each profile cell is split into `substeps` pieces.
PoolTransfer pool_transfer(const SteadyProfile& profile, const PoolParams& p, Complex s,
                           int substeps = 1);

struct PoolLinearModel {
  int pool_index = 1;
  FrequencyResponse g_in;   // m per m^3/s
  FrequencyResponse g_out;  // m per m^3/s
  double capacity = 0.0;    // c_n, m^2
};

PoolLinearModel pool_frequency_response(const SteadyProfile& profile, const PoolParams& p,
                                        const FrequencyGrid& grid, int substeps = 1);

/// Frequency response of Laplace-domain callable F on a grid (s = i omega).
template <typename F>
Eigen::VectorXcd sample(const FrequencyGrid& grid, F&& f) {
  Eigen::VectorXcd v(grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k) v(k) = f(Complex(0.0, grid.omega(k)));
  return v;
}

}  // namespace canal
