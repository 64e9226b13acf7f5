#pragma once

#include <complex>

namespace canal {

/// PI with first-order low-pass roll-off, negative leading sign:
///   C(s) = -K_p (1 + 1/(T_I s)) / (1 + T_F s)
/// Units: K_p in m^3/s per m, time constants in seconds.
struct CompensatorParams {
  int gate = 0;  // 0-based
  double kp = 0.0;
  double ti = 1.0;
  double tf = 1.0;

  template <typename T>
  std::complex<T> operator()(std::complex<T> s) const {
    return -T(kp) * (T(1) + T(1) / (T(ti) * s)) / (T(1) + T(tf) * s);
  }

  /// Throws DomainError unless all parameters are positive and finite.
  void validate() const;
};

}  // namespace canal
