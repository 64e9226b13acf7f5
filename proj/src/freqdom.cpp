#include "canal/freqdom.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace canal {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Spatial ODE matrix d/dx (A^, Q^) = Phi (A^, Q^), Phi = B^{-1} (C - s I).
Eigen::Matrix2cd spatial_matrix(const LinearCoefficients& lc, Complex s) {
  Eigen::Matrix2cd rhs = lc.C.cast<Complex>();
  rhs(0, 0) -= s;
  rhs(1, 1) -= s;
  return lc.B.cast<Complex>().inverse() * rhs;
}

}  // namespace

FrequencyGrid FrequencyGrid::log_spaced(double lo, double hi, int count) {
  if (!(lo > 0) || !(hi > lo) || count < 2)
    throw DomainError("FrequencyGrid: need 0 < lo < hi and at least two points");
  FrequencyGrid g;
  g.omega = Eigen::VectorXd::LinSpaced(count, std::log10(lo), std::log10(hi))
                .unaryExpr([](double e) { return std::pow(10.0, e); });
  return g;
}

void FrequencyGrid::validate() const {
  if (omega.size() < 2) throw DomainError("FrequencyGrid: fewer than two frequencies");
  for (Eigen::Index k = 0; k < omega.size(); ++k) {
    if (!(omega(k) > 0)) throw DomainError("FrequencyGrid: non-positive frequency");
    if (k > 0 && !(omega(k) > omega(k - 1)))
      throw DomainError("FrequencyGrid: frequencies not strictly increasing");
  }
}

Complex FrequencyResponse::interpolate(double w) const {
  const Eigen::VectorXd& om = grid.omega;
  const Eigen::Index n = om.size();
  if (w <= om(0)) return values(0);
  if (w >= om(n - 1)) return values(n - 1);
  const Eigen::Index hi =
      std::upper_bound(om.data(), om.data() + n, w) - om.data();
  const Eigen::Index lo = hi - 1;
  const double t = std::log(w / om(lo)) / std::log(om(hi) / om(lo));
  const Complex a = values(lo), b = values(hi);
  double dphi = std::arg(b) - std::arg(a);
  dphi -= 2 * std::numbers::pi * std::round(dphi / (2 * std::numbers::pi));
  const double logmag = (1 - t) * std::log(std::abs(a)) + t * std::log(std::abs(b));
  return std::polar(std::exp(logmag), std::arg(a) + t * dphi);
}

double integrator_gain(const FrequencyGrid& grid, const Eigen::VectorXcd& values,
                       double max_imag_ratio) {
  if (grid.size() < 2 || values.size() != grid.size())
    throw DomainError("integrator_gain: need at least two samples");
  const double w0 = grid.omega(0), w1 = grid.omega(1);
  const Complex a = Complex(0.0, w0) * values(0), b = Complex(0.0, w1) * values(1);
  // Re(sG) = k + O(w^2) and Im(sG) = O(w): extrapolate the real part in w^2.
  const double gain = (w1 * w1 * a.real() - w0 * w0 * b.real()) / (w1 * w1 - w0 * w0);
  const double spread = std::abs(a.real() - b.real());
  const double residual = std::max(std::abs(a.imag()), std::abs(b.imag()));
  if (!(spread <= max_imag_ratio * std::abs(gain)) || !(residual <= 0.5 * std::abs(gain))) {
    std::ostringstream os;
    os << "integrator_gain: s*G does not settle to a real limit at omega_min (Re = " << gain
       << ", |Im| = " << residual << ", spread = " << spread << ")";
    throw NumericalError(os.str());
  }
  return gain;
}

Eigen::VectorXd unwrap_degrees(const Eigen::VectorXd& wrapped) {
  Eigen::VectorXd out = wrapped;
  for (Eigen::Index k = 1; k < out.size(); ++k) {
    double d = wrapped(k) - wrapped(k - 1);
    d -= 360.0 * std::round(d / 360.0);
    out(k) = out(k - 1) + d;
  }
  return out;
}

BodeData phase_and_magnitude(const FrequencyResponse& fr) {
  BodeData b;
  b.omega = fr.grid.omega;
  b.magnitude_db.resize(fr.size());
  Eigen::VectorXd wrapped(fr.size());
  for (Eigen::Index k = 0; k < fr.size(); ++k) {
    const double mag = std::abs(fr.values(k));
    if (!(mag > 0)) {
      std::ostringstream os;
      os << "phase_and_magnitude: zero magnitude at omega = " << fr.grid.omega(k);
      throw NumericalError(os.str());
    }
    b.magnitude_db(k) = 20.0 * std::log10(mag);
    wrapped(k) = std::arg(fr.values(k)) * kRadToDeg;
  }
  b.phase_deg = unwrap_degrees(wrapped);
  return b;
}

LinearCoefficients linear_coefficients(double A0, double Q0, const PoolParams& p) {
  const double g = kGravity;
  const CrossSection xs = cross_section(A0, p);
  const double w = xs.top_width;
  const double P = xs.wetted_perimeter;
  const double R = xs.hydraulic_radius;
  const double k = A0 / w;
  const double V = Q0 / A0;
  const double alpha = g * k - V * V;
  if (!(alpha > 0)) throw NumericalError("linear_coefficients: flow is not subcritical");

  const double dA0dx = backwater_slope(A0, Q0, p);
  const double sf = friction_slope(A0, Q0, p);
  // d(A/w)/dA with dh/dA = 1/w and dw/dh = 2 s.
  const double dk = 1.0 / w - 2.0 * p.side_slope * A0 / (w * w * w);
  const double dP = 2.0 * std::sqrt(1.0 + p.side_slope * p.side_slope) / w;
  const double dR = (P - A0 * dP) / (P * P);
  const double dsf_dA = sf * (-2.0 / A0 - (4.0 / 3.0) * dR / R);
  const double dsf_dQ = Q0 == 0.0 ? 0.0 : 2.0 * sf / Q0;

  LinearCoefficients lc;
  lc.B << 0.0, 1.0, alpha, 2.0 * V;
  lc.C.setZero();
  lc.C(1, 0) = -(g * dk + 2.0 * Q0 * Q0 / (A0 * A0 * A0)) * dA0dx + g * (p.bed_slope - sf) -
               g * A0 * dsf_dA;
  lc.C(1, 1) = 2.0 * Q0 / (A0 * A0) * dA0dx - g * A0 * dsf_dQ;
  return lc;
}

std::vector<LinearCoefficients> linearize_pool(const SteadyProfile& profile,
                                               const PoolParams& p) {
  std::vector<LinearCoefficients> out;
  out.reserve(static_cast<std::size_t>(profile.area.size()));
  for (Eigen::Index i = 0; i < profile.area.size(); ++i)
    out.push_back(linear_coefficients(profile.area(i), profile.flow, p));
  return out;
}

PoolTransfer pool_transfer(const SteadyProfile& profile, const PoolParams& p, Complex s,
                           int substeps) {
  if (substeps < 1) throw DomainError("pool_transfer: substeps must be >= 1");
  const Eigen::Index M = profile.intervals();
  const double h = profile.spacing() / substeps;

  Eigen::Matrix2cd psi = Eigen::Matrix2cd::Identity();
  Complex log_det = 0.0;
  Eigen::Matrix2cd phi_a = spatial_matrix(linear_coefficients(profile.area(0), profile.flow, p), s);
  for (Eigen::Index i = 0; i < M; ++i) {
    for (int j = 1; j <= substeps; ++j) {
      const double t = static_cast<double>(j) / substeps;
      const double A = (1 - t) * profile.area(i) + t * profile.area(i + 1);
      const Eigen::Matrix2cd phi_b = spatial_matrix(linear_coefficients(A, profile.flow, p), s);
      const Eigen::Matrix2cd cell = 0.5 * h * (phi_a + phi_b);
      psi = cell.exp() * psi;
      log_det += cell.trace();
      phi_a = phi_b;
    }
  }

  if (!(std::abs(psi(1, 0)) >= 1e-14)) {
    std::ostringstream os;
    os << "pool " << p.index << ": singular boundary problem at s = " << s;
    throw NumericalError(os.str());
  }
  const double w_ref = top_width(level_from_area(profile.area(M), p), p);
  PoolTransfer tf;
  // psi12 - psi11 psi22 / psi21 == -det(psi) / psi21, without cancellation.
  tf.g_in = -std::exp(log_det) / (psi(1, 0) * w_ref);
  tf.g_out = psi(0, 0) / (psi(1, 0) * w_ref);
  return tf;
}

PoolLinearModel pool_frequency_response(const SteadyProfile& profile, const PoolParams& p,
                                        const FrequencyGrid& grid, int substeps) {
  grid.validate();
  PoolLinearModel m;
  m.pool_index = p.index;
  Eigen::VectorXcd gin(grid.size()), gout(grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const PoolTransfer tf = pool_transfer(profile, p, Complex(0.0, grid.omega(k)), substeps);
    gin(k) = tf.g_in;
    gout(k) = tf.g_out;
  }
  const double kin = integrator_gain(grid, gin);
  const double kout = integrator_gain(grid, gout);
  m.g_in = FrequencyResponse(grid, std::move(gin), kin);
  m.g_out = FrequencyResponse(grid, std::move(gout), kout);
  m.capacity = 1.0 / kin;
  return m;
}

}  // namespace canal
