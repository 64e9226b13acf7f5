#pragma once

// Analytic pool models shared by the network and tuner tests: an integrator in
// each path plus a pure delay on the inflow side.

#include <cmath>
#include <random>
#include <vector>

#include "canal/network.hpp"

namespace fixture {

inline canal::PoolLinearModel integrator_pool(double c, double delay,
                                              const canal::FrequencyGrid& grid) {
  using canal::Complex;
  canal::PoolLinearModel m;
  m.capacity = c;
  m.g_in = canal::FrequencyResponse(
      grid, canal::sample(grid, [&](Complex s) { return std::exp(-delay * s) / (c * s); }), 1.0 / c);
  m.g_out = canal::FrequencyResponse(
      grid, canal::sample(grid, [&](Complex s) { return -1.0 / (c * s); }), -1.0 / c);
  return m;
}

inline canal::ChannelLinearModel integrator_channel(const std::vector<double>& caps,
                                                    double delay = 600.0,
                                                    Eigen::VectorXd weights = {}) {
  const canal::FrequencyGrid grid = canal::FrequencyGrid::log_spaced(1e-6, 1e-1, 160);
  std::vector<canal::PoolLinearModel> pools;
  for (std::size_t n = 0; n < caps.size(); ++n) {
    pools.push_back(integrator_pool(caps[n], delay, grid));
    pools.back().pool_index = static_cast<int>(n + 1);
  }
  return canal::assemble_channel(std::move(pools), std::move(weights));
}

inline std::vector<double> random_capacities(std::mt19937_64& rng, int pools) {
  std::uniform_real_distribution<double> u(2e4, 2e5);
  std::vector<double> c;
  for (int n = 0; n < pools; ++n) c.push_back(u(rng));
  return c;
}

inline canal::DesignOrder random_order(std::mt19937_64& rng, int gates) {
  canal::DesignOrder o = canal::DesignOrder::sequential(gates);
  for (int i = gates - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(o.nu[static_cast<std::size_t>(i)], o.nu[static_cast<std::size_t>(pick(rng))]);
  }
  return o;
}

}  // namespace fixture
