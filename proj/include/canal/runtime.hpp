#pragma once

#include <vector>

#include <Eigen/Core>

#include "canal/compensator.hpp"
#include "canal/freqdom.hpp"
#include "canal/svsim.hpp"

namespace canal {

/// Feedforward of the measured boundary flows d_0 and d_{N+1} onto each gate.
struct FeedforwardGains {
  Eigen::VectorXd d_in;   // gate n (0-based) gets base^(n+1)
  Eigen::VectorXd d_out;  // gate n gets base^(N-n-1)

  static FeedforwardGains geometric(int pools, double base = 0.85);
  static FeedforwardGains none(int pools);
};

/// Per-gate state of a sampled PI + low-pass controller.
struct GateState {
  double integrator = 0.0;  // m^3/s
  double filter = 0.0;      // filtered y, m
  double input = 0.0;       // previous y sample, m
  double output = 0.0;      // last clamped command, m^3/s
  double u_min = 0.0;
  double u_max = 0.0;
  double nominal = 0.0;     // steady gate flow added as a bias
};

struct ControllerState {
  std::vector<GateState> gates;
};

/// Bilinear (Tustin) realization of C(s) at sample time dt.
class DiscreteCompensator {
 public:
  DiscreteCompensator(const CompensatorParams& c, double dt);

  /// Advances one sample. Output is nominal + C y + feedforward, clamped to the
  /// gate limits, with back-calculation anti-windup (tracking time T_I).
  double step(GateState& s, double y, double feedforward) const;

  /// Frequency response of the discrete controller at omega, rad/s.
  Complex response(double omega) const;

  const CompensatorParams& params() const { return c_; }
  double sample_time() const { return dt_; }

 private:
  CompensatorParams c_;
  double dt_;
  double alpha_, beta_;  // low-pass recursion
};

/// One controller update for gate n: returns u_n and updates the state.
double controller_step(const DiscreteCompensator& dc, GateState& s, double y, double ff);

/// y_n = w_n e_n - w_{n+1} e_{n+1} with e_n = h_ref_n - h_n.
Eigen::VectorXd weighted_outputs(const Eigen::VectorXd& levels, const Eigen::VectorXd& refs,
                                 const Eigen::VectorXd& weights);

/// Piecewise-constant disturbance schedule. Segment k holds from its start time
/// until the next segment starts.
struct ScenarioSegment {
  double start = 0.0;           // s
  double inflow = 0.0;          // d_0
  Eigen::VectorXd offtakes;     // d_1..d_N
  double outflow = 0.0;         // d_{N+1}
};

struct Scenario {
  double horizon = 0.0;         // s
  double sample_time = 60.0;    // controller period, s
  std::vector<ScenarioSegment> segments;

  int pools() const { return static_cast<int>(segments.front().offtakes.size()); }
  const ScenarioSegment& at(double t) const;
  /// Integral of d_0 - sum_{n=1}^{N+1} d_n over [0, horizon], m^3.
  double net_volume() const;
  /// Throws DomainError on unsorted segments, negative flows or size mismatch.
  void validate() const;
};

struct ClosedLoopSetup {
  std::vector<PoolParams> params;
  ChannelState initial;                       // equilibrium, also the volume reference
  Eigen::VectorXd nominal_gates;              // u_n at equilibrium
  std::vector<CompensatorParams> compensators;
  Eigen::VectorXd weights;                    // empty = all ones
  FeedforwardGains feedforward;               // zero vectors disable it
  double nominal_inflow = 0.0;                // d_0 bias for feedforward
  double nominal_outflow = 0.0;               // d_{N+1} bias for feedforward
  double u_max_factor = 1.5;                  // gate limit as multiple of nominal
  SimulatorOptions sim;
};

/// Samples at the controller period; row k is time k * dt.
struct Trajectory {
  Eigen::VectorXd time;
  Eigen::MatrixXd levels;     // h_ds_n
  Eigen::MatrixXd outputs;    // y_n
  Eigen::MatrixXd gates;      // u_n
  Eigen::MatrixXd disturbances;  // d_0..d_{N+1}
  Eigen::VectorXd volume_mismatch;
  Eigen::VectorXd h_ref;

  Eigen::Index samples() const { return time.size(); }
  /// Level errors e_n = h_ref_n - h_ds_n.
  Eigen::MatrixXd errors() const;
};

/// Sampled-data closed loop against the nonlinear simulator. Simulator
/// failures are rethrown as NumericalError with the simulated time.
Trajectory run_closed_loop(const ClosedLoopSetup& setup, const Scenario& scenario);

}  // namespace canal
