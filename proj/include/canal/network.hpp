#pragma once

#include <vector>

#include <Eigen/Core>

#include "canal/freqdom.hpp"

namespace canal {

struct CompensatorParams;

/// A transfer matrix sampled on a shared frequency grid: one dense complex
/// matrix per frequency.
class FrequencyResponseMatrix {
 public:
  FrequencyResponseMatrix() = default;
  FrequencyResponseMatrix(FrequencyGrid grid, Eigen::Index rows, Eigen::Index cols);

  const FrequencyGrid& grid() const { return grid_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  Eigen::Index frequencies() const { return grid_.size(); }

  Eigen::MatrixXcd& at(Eigen::Index k) { return samples_[static_cast<std::size_t>(k)]; }
  const Eigen::MatrixXcd& at(Eigen::Index k) const {
    return samples_[static_cast<std::size_t>(k)];
  }

  /// Entry (i, j) as a SISO response (0-based indices).
  FrequencyResponse entry(Eigen::Index i, Eigen::Index j) const;
  void set_entry(Eigen::Index i, Eigen::Index j, const Eigen::VectorXcd& v);
  /// True if entry (i, j) is exactly zero at every frequency.
  bool entry_is_zero(Eigen::Index i, Eigen::Index j) const;

 private:
  FrequencyGrid grid_;
  Eigen::Index rows_ = 0, cols_ = 0;
  std::vector<Eigen::MatrixXcd> samples_;
};

/// MIMO balancing plant y = G u + G_d d for N pools, N-1 gates. Gate n and pool n
/// are stored 0-based; disturbance column l is d_l (l = 0..N+1).
struct ChannelLinearModel {
  std::vector<PoolLinearModel> pools;
  Eigen::VectorXd weights;
  FrequencyResponseMatrix G;   // (N-1) x (N-1)
  FrequencyResponseMatrix Gd;  // (N-1) x (N+2)

  Eigen::Index pool_count() const { return static_cast<Eigen::Index>(pools.size()); }
  Eigen::Index gate_count() const { return pool_count() - 1; }
  const FrequencyGrid& grid() const { return G.grid(); }
  Eigen::VectorXd capacities() const;
};

/// Tri-diagonal G and sparse G_d from per-pool responses, with output weights
/// y_n = w_n e_n - w_{n+1} e_{n+1}. Empty weights mean all ones.
ChannelLinearModel assemble_channel(std::vector<PoolLinearModel> pools,
                                    Eigen::VectorXd weights = {});

/// Design order: a permutation of the gate indices, stored 0-based.
struct DesignOrder {
  std::vector<int> nu;

  /// From 1-based gate numbers as written by users (e.g. {4,3,5,2,6,1}).
  static DesignOrder from_one_based(const std::vector<int>& gates);
  static DesignOrder sequential(int gates);

  int gates() const { return static_cast<int>(nu.size()); }
  int target(int m) const { return nu[static_cast<std::size_t>(m - 1)]; }  // m is 1-based
  std::vector<int> antecedents(int m) const;
  std::vector<int> subsequents(int m) const;
  /// Throws DomainError unless nu is a permutation of 0..gates-1.
  void validate() const;
};

/// Plant seen at design step m with loops nu_1..nu_{m-1} closed.
struct PartialClosedLoop {
  int step = 1;  // m, 1-based; step == gates+1 once all loops are closed
  DesignOrder order;
  FrequencyResponseMatrix H;  // (N-1) x (N-1), antecedent columns zero
  FrequencyResponseMatrix J;  // (N-1) x (N+2)

  bool complete() const { return step > order.gates(); }
  int target_gate() const { return order.target(step); }
  /// G^[m] = H(nu_m, nu_m), with its integrator gain filled in.
  FrequencyResponse target() const;
};

PartialClosedLoop open_loop(const ChannelLinearModel& channel, const DesignOrder& order);

/// Closes the loop u_{nu_m} = C y_{nu_m} with a rank-one update of H and J.
/// Throws NumericalError if 1 - G^[m] C nearly vanishes on the grid.
PartialClosedLoop close_one_loop(const PartialClosedLoop& pcl, const CompensatorParams& comp);

/// Integrator gain of G^[m] predicted from the capacities of the pools that the
/// already-closed contiguous loops around nu_m tie together. `capacities` holds
/// c_n for pools 1..N (0-based). For weighted outputs pass c_n / w_n.
double lemma1_gain(const DesignOrder& order, int step, const Eigen::VectorXd& capacities);

/// Contiguous closed-gate run bounds around nu_m: (mu_us, mu_ds), 0-based gates.
std::pair<int, int> contiguous_run(const DesignOrder& order, int step);

/// Transfer matrix from disturbances d_0..d_{N+1} to downstream levels h_1..h_N
/// with all loops closed: u = C y, y = J^[N] d.
FrequencyResponseMatrix closed_loop_levels(const ChannelLinearModel& channel,
                                           const PartialClosedLoop& final_loop,
                                           const std::vector<CompensatorParams>& comps);

/// Integrator gain of d_l -> h_k (0-based pool k, disturbance column l), read at
/// the lowest grid frequency.
double closed_loop_disturbance_gain(const FrequencyResponseMatrix& levels, Eigen::Index l,
                                    Eigen::Index k);

/// Predicted value of the above: +-1 / sum_n (c_n / w_n) / w_k, positive for d_0.
double balanced_disturbance_gain(const Eigen::VectorXd& capacities, const Eigen::VectorXd& weights,
                                 Eigen::Index l, Eigen::Index k);

}  // namespace canal
