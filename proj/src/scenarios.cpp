#include "canal/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "canal/error.hpp"

namespace canal {

using json = nlohmann::json;

Eigen::VectorXd ChannelConfig::offtake_vector() const {
  if (offtakes.empty()) return Eigen::VectorXd::Zero(pool_count());
  return Eigen::Map<const Eigen::VectorXd>(offtakes.data(), static_cast<Eigen::Index>(offtakes.size()));
}

Eigen::VectorXd ChannelConfig::weight_vector() const {
  if (weights.empty()) return Eigen::VectorXd::Ones(pool_count());
  return Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
}

Eigen::VectorXd ChannelConfig::pool_flows() const {
  const Eigen::VectorXd d = offtake_vector();
  Eigen::VectorXd q(pool_count());
  double carried = inflow;
  for (int n = 0; n < pool_count(); ++n) {
    q(n) = carried;
    carried -= d(n);
  }
  return q;
}

Eigen::VectorXd ChannelConfig::nominal_gates() const { return pool_flows().tail(pool_count() - 1); }

double ChannelConfig::outflow() const { return inflow - offtake_vector().sum(); }

DesignOrder ChannelConfig::design_order() const {
  if (order.empty()) return DesignOrder::sequential(pool_count() - 1);
  return DesignOrder::from_one_based(order);
}

FrequencyGrid ChannelConfig::grid() const {
  return FrequencyGrid::log_spaced(omega_min, omega_max, omega_points);
}

void ChannelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  const int N = pool_count();
  if (N < 2) fail("at least two pools are required");
  try {
    for (const auto& p : pools) p.validate();
  } catch (const DomainError& e) {
    fail(e.what());
  }
  if (!offtakes.empty() && static_cast<int>(offtakes.size()) != N)
    fail("offtakes must list one flow per pool");
  for (double d : offtakes)
    if (!(d >= 0)) fail("offtakes must be non-negative");
  if (!(inflow > 0)) fail("inflow must be positive");
  if (!(outflow() >= 0)) fail("offtakes exceed the inflow");
  if (!(pool_flows().minCoeff() > 0)) fail("every pool must carry a positive flow");
  if (!weights.empty() && static_cast<int>(weights.size()) != N)
    fail("weights must list one value per pool");
  for (double w : weights)
    if (!(w > 0)) fail("weights must be positive");
  if (!order.empty()) {
    std::vector<int> s = order;
    std::sort(s.begin(), s.end());
    if (static_cast<int>(s.size()) != N - 1) fail("order must list every gate once");
    for (int i = 0; i < N - 1; ++i)
      if (s[static_cast<std::size_t>(i)] != i + 1) fail("order must be a permutation of 1..N-1");
  }
  if (!(phase_margin > 0 && phase_margin < 90)) fail("phase_margin must lie in (0, 90)");
  if (!(feedforward_base > 0 && feedforward_base < 1)) fail("feedforward_base must lie in (0, 1)");
  if (!(sample_time > 0)) fail("sample_time must be positive");
  if (!(horizon > 0)) fail("horizon must be positive");
  if (!(u_max_factor > 1)) fail("u_max_factor must exceed 1");
  if (cells < 2) fail("cells must be at least 2");
  if (!(cfl > 0 && cfl <= 1)) fail("cfl must lie in (0, 1]");
  if (!(omega_min > 0 && omega_max > omega_min) || omega_points < 8)
    fail("frequency grid needs 0 < omega_min < omega_max and at least 8 points");
  if (substeps < 1) fail("substeps must be at least 1");
}

namespace {

json pool_to_json(const PoolParams& p) {
  return {{"length", p.length},       {"bed_width", p.bed_width}, {"side_slope", p.side_slope},
          {"bed_slope", p.bed_slope}, {"manning_n", p.manning_n}, {"h_ref", p.h_ref}};
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

}  // namespace

ChannelConfig parse_config(const std::string& text) {
  ChannelConfig cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(j,
                   {"pools", "inflow", "offtakes", "weights", "order", "phase_margin",
                    "feedforward", "feedforward_base", "sample_time", "horizon", "u_max_factor",
                    "cells", "cfl", "omega_min", "omega_max", "omega_points", "substeps", "seed"},
                   "top level");
    if (!j.contains("pools")) throw ConfigError("config: 'pools' is required");
    int index = 1;
    for (const auto& pj : j.at("pools")) {
      reject_unknown(pj, {"length", "bed_width", "side_slope", "bed_slope", "manning_n", "h_ref"},
                     "pool " + std::to_string(index));
      PoolParams p;
      take(pj, "length", p.length);
      take(pj, "bed_width", p.bed_width);
      take(pj, "side_slope", p.side_slope);
      take(pj, "bed_slope", p.bed_slope);
      take(pj, "manning_n", p.manning_n);
      take(pj, "h_ref", p.h_ref);
      p.index = index++;
      cfg.pools.push_back(p);
    }
    take(j, "inflow", cfg.inflow);
    take(j, "offtakes", cfg.offtakes);
    take(j, "weights", cfg.weights);
    take(j, "order", cfg.order);
    take(j, "phase_margin", cfg.phase_margin);
    take(j, "feedforward", cfg.feedforward);
    take(j, "feedforward_base", cfg.feedforward_base);
    take(j, "sample_time", cfg.sample_time);
    take(j, "horizon", cfg.horizon);
    take(j, "u_max_factor", cfg.u_max_factor);
    take(j, "cells", cfg.cells);
    take(j, "cfl", cfg.cfl);
    take(j, "omega_min", cfg.omega_min);
    take(j, "omega_max", cfg.omega_max);
    take(j, "omega_points", cfg.omega_points);
    take(j, "substeps", cfg.substeps);
    take(j, "seed", cfg.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ChannelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ChannelConfig& cfg) {
  json pools = json::array();
  for (const auto& p : cfg.pools) pools.push_back(pool_to_json(p));
  json j = {{"pools", pools},
            {"inflow", cfg.inflow},
            {"offtakes", cfg.offtakes},
            {"weights", cfg.weights},
            {"order", cfg.order},
            {"phase_margin", cfg.phase_margin},
            {"feedforward", cfg.feedforward},
            {"feedforward_base", cfg.feedforward_base},
            {"sample_time", cfg.sample_time},
            {"horizon", cfg.horizon},
            {"u_max_factor", cfg.u_max_factor},
            {"cells", cfg.cells},
            {"cfl", cfg.cfl},
            {"omega_min", cfg.omega_min},
            {"omega_max", cfg.omega_max},
            {"omega_points", cfg.omega_points},
            {"substeps", cfg.substeps},
            {"seed", cfg.seed}};
  return j.dump(2) + "\n";
}

ChannelConfig make_synthetic_channel(int pools, const std::string& profile) {
  if (pools < 2) throw DomainError("make_synthetic_channel: need at least two pools");
  ChannelConfig cfg;
  if (profile == "uniform") {
    for (int n = 0; n < pools; ++n) {
      PoolParams p;
      p.index = n + 1;
      cfg.pools.push_back(p);
    }
    cfg.inflow = 10.0;
    return cfg;
  }
  if (profile == "tapered") {
    static constexpr double lengths_km[] = {9.0, 12.0, 16.0, 4.5, 10.5, 14.0, 8.8};
    for (int n = 0; n < pools; ++n) {
      const double t = static_cast<double>(n) / (pools - 1);
      PoolParams p;
      p.index = n + 1;
      p.length = 1000.0 * lengths_km[n % 7];
      p.bed_width = 13.0 - 4.0 * t;
      p.h_ref = 1.9 - 1.1 * t;
      p.bed_slope = 1e-4 + 2e-4 * t;
      cfg.pools.push_back(p);
    }
    cfg.inflow = 8.0;
    cfg.offtakes.assign(static_cast<std::size_t>(pools), 0.4 * cfg.inflow / pools);
    return cfg;
  }
  throw DomainError("make_synthetic_channel: profile must be 'uniform' or 'tapered'");
}

DesignOrder random_design_order(int gates, std::uint64_t seed) {
  DesignOrder o = DesignOrder::sequential(gates);
  std::mt19937_64 rng(seed);
  std::shuffle(o.nu.begin(), o.nu.end(), rng);
  return o;
}

std::vector<SteadyProfile> steady_profiles(const ChannelConfig& cfg) {
  const Eigen::VectorXd q = cfg.pool_flows();
  std::vector<SteadyProfile> out;
  for (int n = 0; n < cfg.pool_count(); ++n)
    out.push_back(solve_steady_profile(cfg.pools[static_cast<std::size_t>(n)], q(n), cfg.cells));
  return out;
}

ChannelLinearModel linear_channel(const ChannelConfig& cfg,
                                  const std::vector<SteadyProfile>& profiles) {
  const FrequencyGrid grid = cfg.grid();
  std::vector<PoolLinearModel> pools;
  for (std::size_t n = 0; n < profiles.size(); ++n)
    pools.push_back(pool_frequency_response(profiles[n], cfg.pools[n], grid, cfg.substeps));
  return assemble_channel(std::move(pools), cfg.weights.empty() ? Eigen::VectorXd()
                                                                : cfg.weight_vector());
}

ClosedLoopSetup closed_loop_setup(const ChannelConfig& cfg,
                                  const std::vector<SteadyProfile>& profiles,
                                  const std::vector<CompensatorParams>& compensators) {
  ClosedLoopSetup s;
  s.params = cfg.pools;
  s.initial = equilibrium_state(profiles, cfg.pools);
  s.nominal_gates = cfg.nominal_gates();
  s.compensators = compensators;
  s.weights = cfg.weights.empty() ? Eigen::VectorXd() : cfg.weight_vector();
  s.feedforward = cfg.feedforward ? FeedforwardGains::geometric(cfg.pool_count(), cfg.feedforward_base)
                                  : FeedforwardGains::none(cfg.pool_count());
  s.nominal_inflow = cfg.inflow;
  s.nominal_outflow = cfg.outflow();
  s.u_max_factor = cfg.u_max_factor;
  s.sim.cfl = cfg.cfl;
  return s;
}

ScenarioSegment nominal_segment(const ChannelConfig& cfg) {
  ScenarioSegment s;
  s.inflow = cfg.inflow;
  s.offtakes = cfg.offtake_vector();
  s.outflow = cfg.outflow();
  return s;
}

Scenario make_standard_scenario(const ScenarioSegment& nominal, double horizon,
                                double sample_time) {
  const double hour = 3600.0;
  const double q0 = nominal.inflow;
  const auto N = static_cast<int>(nominal.offtakes.size());
  const int a = N / 3;
  const int b = std::min(N - 1, (2 * N) / 3);

  auto mismatch = [&](double h) {
    if (h >= 12 && h < 48) return -0.05 * q0;
    if (h >= 48 && h < 108) return 0.04 * q0;
    return 0.0;
  };
  Scenario sc;
  sc.horizon = horizon;
  sc.sample_time = sample_time;
  for (double h : {0.0, 12.0, 24.0, 36.0, 48.0, 60.0, 72.0, 108.0}) {
    ScenarioSegment s = nominal;
    s.start = h * hour;
    double extra = 0.0;
    if (h >= 24 && h < 60) {
      s.offtakes(a) += 0.04 * q0;
      extra += 0.04 * q0;
    }
    if (h >= 36 && h < 72) {
      s.offtakes(b) += 0.03 * q0;
      extra += 0.03 * q0;
    }
    s.inflow = nominal.inflow + extra + mismatch(h);
    sc.segments.push_back(s);
  }
  return sc;
}

Scenario make_standard_scenario(int pools, double q0, double horizon) {
  ScenarioSegment nominal;
  nominal.inflow = q0;
  nominal.offtakes = Eigen::VectorXd::Zero(pools);
  nominal.outflow = q0;
  return make_standard_scenario(nominal, horizon);
}

Scenario fold_scenario(const Scenario& s, int pools) {
  Scenario out = s;
  for (auto& seg : out.segments) {
    const Eigen::Index N = seg.offtakes.size();
    if (pools > N) throw DomainError("fold_scenario: scenario has too few pools");
    seg.outflow += seg.offtakes.tail(N - pools).sum();
    seg.offtakes = Eigen::VectorXd(seg.offtakes.head(pools));
  }
  return out;
}

Eigen::VectorXd balanced_equilibrium_map(const ChannelConfig& cfg, const Eigen::VectorXd& weights,
                                         double dV) {
  const int N = cfg.pool_count();
  const Eigen::VectorXd w = weights.size() ? weights : Eigen::VectorXd::Ones(N);
  if (w.size() != N || !(w.minCoeff() > 0))
    throw DomainError("balanced_equilibrium_map: one positive weight per pool required");
  const Eigen::VectorXd q = cfg.pool_flows();
  std::vector<double> base(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    const auto& p = cfg.pools[static_cast<std::size_t>(n)];
    base[static_cast<std::size_t>(n)] = solve_steady_profile(p, q(n), cfg.cells).volume;
  }
  auto shift = [&](double z) -> Eigen::VectorXd { return z * w.cwiseInverse(); };
  auto extra = [&](double z) {
    const Eigen::VectorXd dh = shift(z);
    double v = 0.0;
    for (int n = 0; n < N; ++n) {
      const auto& p = cfg.pools[static_cast<std::size_t>(n)];
      try {
        v += solve_steady_profile(p, q(n), cfg.cells, p.h_ref + dh(n)).volume -
             base[static_cast<std::size_t>(n)];
      } catch (const std::exception&) {
        std::ostringstream os;
        os << "balanced_equilibrium_map: volume change " << dV
           << " m^3 is outside the operating range of pool " << p.index;
        throw DomainError(os.str());
      }
    }
    return v;
  };
  if (dV == 0.0) return Eigen::VectorXd::Zero(N);

  // Bracket, then bisect on the common scaled offset.
  double lo = 0.0, hi = dV > 0 ? 0.05 : -0.05;
  while ((extra(hi) - dV) * (dV > 0 ? 1 : -1) < 0) {
    lo = hi;
    hi *= 2;
    if (std::abs(hi) > 100.0) throw DomainError("balanced_equilibrium_map: no bracket found");
  }
  for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((extra(mid) - dV) * (dV > 0 ? 1 : -1) < 0) lo = mid;
    else hi = mid;
  }
  return shift(0.5 * (lo + hi));
}

BalancedEquilibriumCurve balanced_equilibrium_curve(const ChannelConfig& cfg,
                                                    const Eigen::VectorXd& weights,
                                                    double max_volume, int points) {
  if (points < 2) throw DomainError("balanced_equilibrium_curve: need at least two points");
  BalancedEquilibriumCurve c;
  c.volume = Eigen::VectorXd::LinSpaced(points, -max_volume, max_volume);
  c.level.resize(points, cfg.pool_count());
  for (int i = 0; i < points; ++i)
    c.level.row(i) = balanced_equilibrium_map(cfg, weights, c.volume(i)).transpose();
  return c;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
    throw NumericalError("sha256_hex: digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

const std::map<std::string, std::string>& module_versions() {
  static const std::map<std::string, std::string> v = {
      {"hydraulics", "1.0.0"}, {"svsim", "1.0.0"},   {"freqdom", "1.0.0"},
      {"network", "1.0.0"},    {"tuner", "1.0.0"},   {"runtime", "1.0.0"},
      {"scenarios", "1.0.0"}};
  return v;
}

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const std::string& config_text,
                    const std::map<std::string, std::uint64_t>& seeds) {
  std::filesystem::create_directories(dir);
  json j = {{"command", command},
            {"config_sha256", sha256_hex(config_text)},
            {"module_versions", module_versions()},
            {"seeds", seeds}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in " + dir.string());
  out << j.dump(2) << "\n";
}

}  // namespace canal
