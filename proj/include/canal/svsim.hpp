#pragma once

#include <vector>

#include <Eigen/Core>

#include "canal/hydraulics.hpp"

namespace canal {

/// Discretized state of one pool. Areas live on the nodes x_0..x_M of the steady
/// profile grid; flows live on the M interior faces x_{i+1/2}. The boundary flows
/// at x_0 and x_M are not state: they are imposed each stage.
struct FlowField {
  int pool_index = 1;
  double dx = 0.0;
  Eigen::VectorXd area;  // size M+1
  Eigen::VectorXd flow;  // size M, face i sits between nodes i and i+1
  double time = 0.0;

  Eigen::Index nodes() const { return area.size(); }
  double downstream_area() const { return area(area.size() - 1); }
  double volume() const { return trapezoid_volume(area, dx); }
};

/// Time derivative of a FlowField.
struct FlowFieldRate {
  Eigen::VectorXd area;
  Eigen::VectorXd flow;
};

struct ChannelState {
  std::vector<FlowField> pools;
  double time = 0.0;

  std::size_t size() const { return pools.size(); }
  /// Downstream levels h_ds_n, metres.
  Eigen::VectorXd downstream_levels(const std::vector<PoolParams>& params) const;
  double volume() const;
};

/// d_0, gate flows u_1..u_{N-1}, offtakes d_1..d_N, bottom outflow d_{N+1}.
struct BoundaryFlows {
  double inflow = 0.0;           // d_0
  Eigen::VectorXd gates;         // u_n, size N-1
  Eigen::VectorXd offtakes;      // d_n, size N
  double outflow = 0.0;          // d_{N+1}

  /// Upstream inflow of pool n (0-based).
  double pool_inflow(std::size_t n) const;
  /// Downstream outflow of pool n (0-based).
  double pool_outflow(std::size_t n) const;
};

/// Spatial semi-discretization of the Saint-Venant equations for one pool with
/// imposed boundary flows. Throws NumericalError on supercritical or dry cells.
FlowFieldRate semidiscrete_rhs(const FlowField& f, double q_in, double q_out,
                               const PoolParams& p);

/// Fixed point of the semi-discrete scheme with uniform flow Q0 and the
/// downstream area pinned to the profile's downstream value. Newton iteration
/// started from the continuous backwater profile on the same grid.
FlowField discrete_equilibrium(const SteadyProfile& profile, const PoolParams& p);

struct SimulatorOptions {
  double cfl = 0.5;
};

/// Largest stable step: cfl * dx / max(|V| + sqrt(gA/w)) over all pools.
double max_stable_step(const ChannelState& s, const std::vector<PoolParams>& params,
                       const SimulatorOptions& opts = {});

/// One classical RK4 step of the whole channel. Boundary flows are held fixed
/// over the step. Throws NumericalError if dt exceeds the CFL bound.
ChannelState step_channel(const ChannelState& s, const BoundaryFlows& b, double dt,
                          const std::vector<PoolParams>& params,
                          const SimulatorOptions& opts = {});

/// Advance by `duration`, splitting into equal CFL-respecting steps.
ChannelState advance_channel(const ChannelState& s, const BoundaryFlows& b, double duration,
                             const std::vector<PoolParams>& params,
                             const SimulatorOptions& opts = {});

/// Sum over pools of current volume minus reference volume, m^3.
double volume_mismatch(const ChannelState& s, const std::vector<FlowField>& reference);

/// Equilibrium channel state built from per-pool steady profiles.
ChannelState equilibrium_state(const std::vector<SteadyProfile>& profiles,
                               const std::vector<PoolParams>& params);

}  // namespace canal
