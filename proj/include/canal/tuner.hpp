#pragma once

#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "canal/compensator.hpp"
#include "canal/freqdom.hpp"
#include "canal/network.hpp"

namespace canal {

/// Frequency-domain assessment of the loop L = -G C.
struct LoopReport {
  double crossover = 0.0;         // rad/s, |G C| = 1
  double phase_margin = 0.0;      // degrees, 180 + angle(L) at crossover
  double gain_margin = std::numeric_limits<double>::infinity();  // dB
  bool unique_crossover = false;
  bool rolloff_ok = false;        // |GC| falls monotonically to -20 dB and stays below
  bool sector_ok = false;         // angle(L) in (-180, 0) for all omega below crossover
  int encirclements = 0;          // net clockwise encirclements of (-1, 0)

  bool stable() const { return encirclements == 0; }
};

/// Evaluates the loop on the response grid, closes the Nyquist contour with the
/// mirrored branch and the double-integrator indentation arc, and counts
/// encirclements of -1. Throws NumericalError if the curve passes within 1e-9
/// of -1.
LoopReport nyquist_report(const FrequencyResponse& g, const CompensatorParams& comp);

struct TunerOptions {
  /// Dead time of the downstream pool's inflow response, seconds; <= 0 if unknown.
  double delay = 0.0;
  int candidates = 40;
  /// Low-pass pole placed this factor above crossover.
  double filter_ratio = 5.0;
  /// Times T_F is halved when the roll-off criterion fails.
  int filter_halvings = 4;
  /// Use leftover phase to move the PI zero toward crossover so the achieved
  /// margin equals the required one.
  bool trim_phase_margin = true;
  /// Relative slack on the phase-margin check, degrees.
  double margin_tolerance = 1e-6;
};

struct TuneResult {
  CompensatorParams comp;
  LoopReport report;
  double cap = 0.0;  // upper crossover bound used by the sweep
};

/// Crossover cap: min(1/delay, 0.3 * first resonance of |g|), or grid max / 10
/// when no resonance is visible. A resonance is a local peak of |s g| at least
/// 6 dB above both the integrator asymptote and the valleys on either side.
double crossover_cap(const FrequencyResponse& g, double delay);

/// PI + low-pass with the given crossover: T_F from the filter ratio, T_I from
/// the PI-zero phase rule, K_p for unit loop gain at omega_c.
CompensatorParams shape_compensator(const FrequencyResponse& g, int gate, double omega_c,
                                    double phase_margin_deg, double tf);

/// Sweeps crossover candidates downward from the cap and returns the first loop
/// satisfying the phase-margin, uniqueness, roll-off and Nyquist criteria.
/// Throws NumericalError when nothing above the grid minimum is feasible.
TuneResult tune_step(const FrequencyResponse& g, int gate, double phase_margin_deg,
                     const TunerOptions& opts = {});

/// Delay estimate from the high-frequency phase slope (top decade of the grid).
double estimate_delay(const FrequencyResponse& g_in);

struct DesignStep {
  int step = 0;
  int gate = 0;  // 0-based
  FrequencyResponse plant;  // G^[m]
  TuneResult tuning;
  double predicted_gain = 0.0;  // from closed-run capacities
  double measured_gain = 0.0;   // real part of s G^[m] at the lowest frequencies
};

struct DesignLedger {
  DesignOrder order;
  double phase_margin = 50.0;
  std::vector<DesignStep> steps;
  PartialClosedLoop final_loop;         // J^[N]
  FrequencyResponseMatrix levels;       // d -> h with all loops closed
  Eigen::MatrixXd disturbance_gains;    // N x (N+2) integrator gains of `levels`
};

struct Design {
  std::vector<CompensatorParams> compensators;  // indexed by gate
  DesignLedger ledger;
};

/// Sequential loop shaping over the design order.
Design design_all(const ChannelLinearModel& channel, const DesignOrder& order,
                  double phase_margin_deg, const TunerOptions& opts = {});

/// Loop response -G(iw) C(iw) on the grid of g.
Eigen::VectorXcd loop_response(const FrequencyResponse& g, const CompensatorParams& comp);

}  // namespace canal
