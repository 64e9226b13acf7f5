#include "canal/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "canal/compensator.hpp"

namespace canal {

void CompensatorParams::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v > 0; };
  if (!ok(kp) || !ok(ti) || !ok(tf))
    throw DomainError("CompensatorParams: K_p, T_I and T_F must be positive and finite");
}

FrequencyResponseMatrix::FrequencyResponseMatrix(FrequencyGrid grid, Eigen::Index rows,
                                                 Eigen::Index cols)
    : grid_(std::move(grid)),
      rows_(rows),
      cols_(cols),
      samples_(static_cast<std::size_t>(grid_.size()), Eigen::MatrixXcd::Zero(rows, cols)) {}

FrequencyResponse FrequencyResponseMatrix::entry(Eigen::Index i, Eigen::Index j) const {
  Eigen::VectorXcd v(frequencies());
  for (Eigen::Index k = 0; k < frequencies(); ++k) v(k) = at(k)(i, j);
  return FrequencyResponse(grid_, std::move(v));
}

void FrequencyResponseMatrix::set_entry(Eigen::Index i, Eigen::Index j, const Eigen::VectorXcd& v) {
  for (Eigen::Index k = 0; k < frequencies(); ++k) at(k)(i, j) = v(k);
}

bool FrequencyResponseMatrix::entry_is_zero(Eigen::Index i, Eigen::Index j) const {
  for (Eigen::Index k = 0; k < frequencies(); ++k)
    if (at(k)(i, j) != Complex(0.0, 0.0)) return false;
  return true;
}

Eigen::VectorXd ChannelLinearModel::capacities() const {
  Eigen::VectorXd c(pool_count());
  for (Eigen::Index n = 0; n < pool_count(); ++n) c(n) = pools[static_cast<std::size_t>(n)].capacity;
  return c;
}

ChannelLinearModel assemble_channel(std::vector<PoolLinearModel> pools, Eigen::VectorXd weights) {
  const auto N = static_cast<Eigen::Index>(pools.size());
  if (N < 2) throw DomainError("assemble_channel: need at least two pools");
  if (weights.size() == 0) weights = Eigen::VectorXd::Ones(N);
  if (weights.size() != N) throw DomainError("assemble_channel: one weight per pool required");
  if (!(weights.minCoeff() > 0)) throw DomainError("assemble_channel: weights must be positive");
  const FrequencyGrid& grid = pools.front().g_in.grid;
  for (const auto& p : pools)
    if (!(p.g_in.grid == grid) || !(p.g_out.grid == grid))
      throw DomainError("assemble_channel: pool responses use different frequency grids");

  ChannelLinearModel ch;
  ch.weights = weights;
  ch.G = FrequencyResponseMatrix(grid, N - 1, N - 1);
  ch.Gd = FrequencyResponseMatrix(grid, N - 1, N + 2);
  auto gin = [&](Eigen::Index n, Eigen::Index k) {
    return weights(n) * pools[static_cast<std::size_t>(n)].g_in.values(k);
  };
  auto gout = [&](Eigen::Index n, Eigen::Index k) {
    return weights(n) * pools[static_cast<std::size_t>(n)].g_out.values(k);
  };
  // Row n (gate n, 0-based) measures y_n = w_n e_n - w_{n+1} e_{n+1} between pools n, n+1.
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    Eigen::MatrixXcd& G = ch.G.at(k);
    Eigen::MatrixXcd& Gd = ch.Gd.at(k);
    for (Eigen::Index n = 0; n < N - 1; ++n) {
      G(n, n) = gin(n + 1, k) - gout(n, k);
      if (n + 1 < N - 1) G(n, n + 1) = gout(n + 1, k);
      if (n > 0) G(n, n - 1) = -gin(n, k);
      if (n == 0) Gd(0, 0) = -gin(0, k);
      Gd(n, n + 1) = -gout(n, k);
      Gd(n, n + 2) = gout(n + 1, k);
    }
    Gd(N - 2, N + 1) = gout(N - 1, k);
  }
  ch.pools = std::move(pools);
  return ch;
}

DesignOrder DesignOrder::from_one_based(const std::vector<int>& gates) {
  DesignOrder o;
  for (int g : gates) o.nu.push_back(g - 1);
  o.validate();
  return o;
}

DesignOrder DesignOrder::sequential(int gates) {
  DesignOrder o;
  for (int g = 0; g < gates; ++g) o.nu.push_back(g);
  return o;
}

std::vector<int> DesignOrder::antecedents(int m) const {
  return {nu.begin(), nu.begin() + (m - 1)};
}

std::vector<int> DesignOrder::subsequents(int m) const { return {nu.begin() + m, nu.end()}; }

void DesignOrder::validate() const {
  std::vector<int> sorted = nu;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != static_cast<int>(i))
      throw DomainError("DesignOrder: order is not a permutation of the gates");
}

FrequencyResponse PartialClosedLoop::target() const {
  const int g = target_gate();
  FrequencyResponse fr = H.entry(g, g);
  fr.integrator_gain = integrator_gain(fr.grid, fr.values);
  return fr;
}

PartialClosedLoop open_loop(const ChannelLinearModel& channel, const DesignOrder& order) {
  order.validate();
  if (order.gates() != channel.gate_count())
    throw DomainError("open_loop: design order does not match the number of gates");
  PartialClosedLoop pcl;
  pcl.step = 1;
  pcl.order = order;
  pcl.H = channel.G;
  pcl.J = channel.Gd;
  return pcl;
}

PartialClosedLoop close_one_loop(const PartialClosedLoop& pcl, const CompensatorParams& comp) {
  if (pcl.complete()) throw DomainError("close_one_loop: all loops are already closed");
  const int g = pcl.target_gate();
  if (comp.gate != g) throw DomainError("close_one_loop: compensator is for a different gate");
  PartialClosedLoop next = pcl;
  const FrequencyGrid& grid = pcl.H.grid();
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const Complex s(0.0, grid.omega(k));
    const Complex c = comp(s);
    Eigen::MatrixXcd& H = next.H.at(k);
    Eigen::MatrixXcd& J = next.J.at(k);
    const Complex den = 1.0 - H(g, g) * c;
    if (!(std::abs(den) >= 1e-12)) {
      std::ostringstream os;
      os << "close_one_loop: 1 - G C nearly singular at omega = " << grid.omega(k);
      throw NumericalError(os.str());
    }
    const Complex S = 1.0 / den;
    Eigen::RowVectorXcd h_row = S * H.row(g);
    h_row(g) = 0.0;
    const Eigen::RowVectorXcd j_row = S * J.row(g);
    const Eigen::VectorXcd coupling = H.col(g) * c;
    for (Eigen::Index r = 0; r < H.rows(); ++r) {
      if (r == g) continue;
      H.row(r) += coupling(r) * h_row;
      J.row(r) += coupling(r) * j_row;
    }
    H.row(g) = h_row;
    J.row(g) = j_row;
    H.col(g).setZero();
  }
  ++next.step;
  return next;
}

std::pair<int, int> contiguous_run(const DesignOrder& order, int step) {
  const int g = order.target(step);
  std::set<int> closed(order.nu.begin(), order.nu.begin() + step);
  int us = g, ds = g;
  while (closed.count(us - 1)) --us;
  while (closed.count(ds + 1)) ++ds;
  return {us, ds};
}

double lemma1_gain(const DesignOrder& order, int step, const Eigen::VectorXd& capacities) {
  const int g = order.target(step);
  const auto [us, ds] = contiguous_run(order, step);
  // Gate i sits between pools i and i+1 (0-based).
  const double upstream = capacities.segment(us, g - us + 1).sum();
  const double downstream = capacities.segment(g + 1, ds - g + 1).sum();
  return 1.0 / upstream + 1.0 / downstream;
}

FrequencyResponseMatrix closed_loop_levels(const ChannelLinearModel& channel,
                                           const PartialClosedLoop& final_loop,
                                           const std::vector<CompensatorParams>& comps) {
  if (!final_loop.complete())
    throw DomainError("closed_loop_levels: not all loops are closed");
  const Eigen::Index N = channel.pool_count();
  std::vector<const CompensatorParams*> by_gate(static_cast<std::size_t>(N - 1), nullptr);
  for (const auto& c : comps) by_gate.at(static_cast<std::size_t>(c.gate)) = &c;
  for (auto* c : by_gate)
    if (!c) throw DomainError("closed_loop_levels: missing compensator");

  const FrequencyGrid& grid = channel.grid();
  FrequencyResponseMatrix T(grid, N, N + 2);
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const Complex s(0.0, grid.omega(k));
    // Gate flows per unit disturbance: u = diag(C) J d.
    Eigen::MatrixXcd U = final_loop.J.at(k);
    for (Eigen::Index g = 0; g < N - 1; ++g) U.row(g) *= (*by_gate[static_cast<std::size_t>(g)])(s);

    Eigen::MatrixXcd& out = T.at(k);
    for (Eigen::Index n = 0; n < N; ++n) {
      const auto& pool = channel.pools[static_cast<std::size_t>(n)];
      Eigen::RowVectorXcd inflow = Eigen::RowVectorXcd::Zero(N + 2);
      Eigen::RowVectorXcd outflow = Eigen::RowVectorXcd::Zero(N + 2);
      if (n == 0) inflow(0) = 1.0;
      else inflow = U.row(n - 1);
      if (n < N - 1) {
        outflow = U.row(n);
        outflow(n + 1) += 1.0;
      } else {
        outflow(N) = 1.0;
        outflow(N + 1) = 1.0;
      }
      out.row(n) = pool.g_in.values(k) * inflow + pool.g_out.values(k) * outflow;
    }
  }
  return T;
}

double closed_loop_disturbance_gain(const FrequencyResponseMatrix& levels, Eigen::Index l,
                                    Eigen::Index k) {
  const FrequencyResponse fr = levels.entry(k, l);
  return integrator_gain(fr.grid, fr.values);
}

double balanced_disturbance_gain(const Eigen::VectorXd& capacities, const Eigen::VectorXd& weights,
                                 Eigen::Index l, Eigen::Index k) {
  const Eigen::VectorXd w =
      weights.size() ? weights : Eigen::VectorXd::Ones(capacities.size());
  const double effective = (capacities.array() / w.array()).sum();
  const double sign = l == 0 ? 1.0 : -1.0;
  return sign / (w(k) * effective);
}

}  // namespace canal
