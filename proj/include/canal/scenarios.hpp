#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "canal/freqdom.hpp"
#include "canal/hydraulics.hpp"
#include "canal/network.hpp"
#include "canal/runtime.hpp"
#include "canal/svsim.hpp"
#include "canal/tuner.hpp"

namespace canal {

/// Everything needed to rebuild a channel, its design and its simulation.
/// All quantities SI. See README for the file format and defaults.
struct ChannelConfig {
  std::vector<PoolParams> pools;
  double inflow = 10.0;               // nominal d_0, m^3/s
  std::vector<double> offtakes;       // nominal d_1..d_N; empty = all zero
  std::vector<double> weights;        // empty = all ones
  std::vector<int> order;             // 1-based gates; empty = 1..N-1
  double phase_margin = 50.0;         // degrees
  bool feedforward = true;
  double feedforward_base = 0.85;
  double sample_time = 60.0;          // s
  double horizon = 144 * 3600.0;      // s
  double u_max_factor = 1.5;
  int cells = 50;                     // simulator cells per pool
  double cfl = 0.5;
  double omega_min = 1e-8;            // rad/s
  double omega_max = 1e-1;
  int omega_points = 336;
  int substeps = 1;
  std::uint64_t seed = 1;

  bool operator==(const ChannelConfig&) const = default;

  int pool_count() const { return static_cast<int>(pools.size()); }
  Eigen::VectorXd offtake_vector() const;
  Eigen::VectorXd weight_vector() const;
  /// Flow carried by each pool at equilibrium (its upstream inflow).
  Eigen::VectorXd pool_flows() const;
  /// Nominal gate flows u_1..u_{N-1}.
  Eigen::VectorXd nominal_gates() const;
  /// Nominal d_{N+1}: what is left after all offtakes.
  double outflow() const;
  DesignOrder design_order() const;
  FrequencyGrid grid() const;
  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

/// JSON text <-> config. Unknown keys are rejected; missing keys take defaults.
ChannelConfig parse_config(const std::string& text);
ChannelConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ChannelConfig& cfg);

/// Synthetic reference channels. "uniform": identical 5 km pools. "tapered":
/// narrower, shallower, steeper and shorter-flow pools downstream.
ChannelConfig make_synthetic_channel(int pools, const std::string& profile);

/// Design order drawn uniformly from all permutations.
DesignOrder random_design_order(int gates, std::uint64_t seed);

/// Per-pool steady profiles at the configured grid, ending at h_ref.
std::vector<SteadyProfile> steady_profiles(const ChannelConfig& cfg);

ChannelLinearModel linear_channel(const ChannelConfig& cfg,
                                  const std::vector<SteadyProfile>& profiles);

/// Closed-loop simulation setup for a finished design.
ClosedLoopSetup closed_loop_setup(const ChannelConfig& cfg,
                                  const std::vector<SteadyProfile>& profiles,
                                  const std::vector<CompensatorParams>& compensators);

/// Nominal, constant boundary flows of the config.
ScenarioSegment nominal_segment(const ChannelConfig& cfg);

/// Supply-demand scenario on top of the nominal flows: matched for 12 h,
/// under-supply of 5% Q0 until 48 h, over-supply of 4% Q0 until 108 h, matched
/// afterwards. Offtake steps of a few percent of Q0 switch on and off between
/// 24 h and 72 h. Net volume is 0.6 h of Q0.
Scenario make_standard_scenario(const ScenarioSegment& nominal, double horizon,
                                double sample_time = 60.0);
/// Same with zero nominal offtakes and d_{N+1} = Q0.
Scenario make_standard_scenario(int pools, double q0, double horizon);

/// Keeps the first `pools` offtakes and adds the rest to d_{N+1}.
Scenario fold_scenario(const Scenario& s, int pools);

/// Level deviations h_n - h_ref_n of the balanced equilibrium holding an extra
/// volume dV (m^3): w_n (h_n - h_ref_n) equal for all n, volumes recomputed from
/// steady profiles at the shifted downstream levels. Throws DomainError if dV
/// lies outside the operating range.
Eigen::VectorXd balanced_equilibrium_map(const ChannelConfig& cfg, const Eigen::VectorXd& weights,
                                         double dV);

struct BalancedEquilibriumCurve {
  Eigen::VectorXd volume;  // m^3
  Eigen::MatrixXd level;   // rows match volume, one column per pool
};

BalancedEquilibriumCurve balanced_equilibrium_curve(const ChannelConfig& cfg,
                                                    const Eigen::VectorXd& weights,
                                                    double max_volume, int points);

std::string sha256_hex(const std::string& data);

/// Writes manifest.json into `dir`: command, config hash, module versions, seeds.
void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const std::string& config_text,
                    const std::map<std::string, std::uint64_t>& seeds);

/// Version string per module, recorded in manifests.
const std::map<std::string, std::string>& module_versions();

}  // namespace canal
