#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "canal/freqdom.hpp"
#include "canal/hydraulics.hpp"
#include "canal/runtime.hpp"
#include "canal/scenarios.hpp"
#include "canal/tuner.hpp"

namespace canal {

// Plain-text exports. CSVs carry a single header row and full double precision.

/// pool,x_m,area_m2,level_m,flow_m3s
void write_profiles_csv(std::ostream& os, const std::vector<PoolParams>& params,
                        const std::vector<SteadyProfile>& profiles);

/// omega_rad_s, then magnitude_db / phase_deg for G_in and G_out.
void write_bode_csv(std::ostream& os, const PoolLinearModel& pool);

/// omega_rad_s, loop_db, loop_phase_deg for the loop -G C of one design step.
void write_loop_bode_csv(std::ostream& os, const FrequencyResponse& g, const CompensatorParams& c);

/// time_s, h_ds_1..N, y_1..N-1, u_1..N-1, d_0..d_{N+1}, volume_mismatch_m3
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

/// delta_volume_m3, dh_1..N
void write_equilibrium_csv(std::ostream& os, const BalancedEquilibriumCurve& curve);

/// Compensator parameters as JSON (1-based gate numbers).
std::string compensators_json(const std::vector<CompensatorParams>& comps);

/// Human-readable design ledger: per step the gate, crossover, margins,
/// predicted and measured integrator gains; then the closed-loop d -> h gains.
void write_design_ledger(std::ostream& os, const DesignLedger& ledger,
                         const Eigen::VectorXd& capacities, const Eigen::VectorXd& weights);

}  // namespace canal
