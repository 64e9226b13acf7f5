// Command-line front end: steady, linearize, design, simulate, verify, equilibrium.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "canal/csv.hpp"
#include "canal/error.hpp"
#include "canal/scenarios.hpp"

namespace fs = std::filesystem;
using namespace canal;

namespace {

struct Options {
  std::string config;
  std::string out = "out";
  std::string order;
  std::string weights;
  std::string profile = "uniform";
  double phase_margin = std::nan("");
  bool no_feedforward = false;
  int pools = 0;
  double max_volume = 0.0;
};

std::vector<double> split_numbers(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(std::string("--") + what + ": cannot parse '" + tok + "'");
    }
  }
  return v;
}

ChannelConfig effective_config(const Options& o) {
  ChannelConfig cfg;
  if (!o.config.empty()) {
    if (o.pools > 0) throw ConfigError("--pools cannot be combined with --config");
    cfg = load_config(o.config);
  } else {
    cfg = make_synthetic_channel(o.pools > 0 ? o.pools : 5, o.profile);
  }
  if (!o.order.empty()) {
    if (o.order == "random") {
      const DesignOrder r = random_design_order(cfg.pool_count() - 1, cfg.seed);
      cfg.order.clear();
      for (int g : r.nu) cfg.order.push_back(g + 1);
    } else {
      cfg.order.clear();
      for (double g : split_numbers(o.order, "order")) cfg.order.push_back(static_cast<int>(g));
    }
  }
  if (!o.weights.empty()) cfg.weights = split_numbers(o.weights, "weights");
  if (!std::isnan(o.phase_margin)) cfg.phase_margin = o.phase_margin;
  if (o.no_feedforward) cfg.feedforward = false;
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  return f;
}

Design run_design(const ChannelConfig& cfg, const std::vector<SteadyProfile>& profiles,
                  ChannelLinearModel& channel) {
  channel = linear_channel(cfg, profiles);
  return design_all(channel, cfg.design_order(), cfg.phase_margin);
}

int cmd_steady(const ChannelConfig& cfg, const fs::path& out) {
  const auto profiles = steady_profiles(cfg);
  auto f = open_out(out / "profiles.csv");
  write_profiles_csv(f, cfg.pools, profiles);
  for (std::size_t n = 0; n < profiles.size(); ++n)
    std::cout << "pool " << n + 1 << ": flow " << profiles[n].flow << " m3/s, upstream level "
              << level_from_area(profiles[n].area(0), cfg.pools[n]) << " m, volume "
              << profiles[n].volume << " m3\n";
  return 0;
}

int cmd_linearize(const ChannelConfig& cfg, const fs::path& out) {
  const auto profiles = steady_profiles(cfg);
  const FrequencyGrid grid = cfg.grid();
  auto caps = open_out(out / "capacities.csv");
  caps << "pool,capacity_m2,delay_s\n";
  for (std::size_t n = 0; n < profiles.size(); ++n) {
    const PoolLinearModel m = pool_frequency_response(profiles[n], cfg.pools[n], grid, cfg.substeps);
    auto f = open_out(out / ("bode_pool_" + std::to_string(n + 1) + ".csv"));
    write_bode_csv(f, m);
    const double delay = estimate_delay(m.g_in);
    caps << n + 1 << ',' << m.capacity << ',' << delay << '\n';
    std::cout << "pool " << n + 1 << ": c = " << m.capacity << " m2, delay ~ " << delay << " s\n";
  }
  return 0;
}

int cmd_design(const ChannelConfig& cfg, const fs::path& out) {
  const auto profiles = steady_profiles(cfg);
  ChannelLinearModel channel;
  const Design d = run_design(cfg, profiles, channel);
  auto ledger = open_out(out / "design_ledger.txt");
  write_design_ledger(ledger, d.ledger, channel.capacities(), channel.weights);
  auto comps = open_out(out / "compensators.json");
  comps << compensators_json(d.compensators);
  for (const auto& s : d.ledger.steps) {
    auto f = open_out(out / ("loop_step_" + std::to_string(s.step) + ".csv"));
    write_loop_bode_csv(f, s.plant, s.tuning.comp);
  }
  write_design_ledger(std::cout, d.ledger, channel.capacities(), channel.weights);
  return 0;
}

int cmd_simulate(const ChannelConfig& cfg, const fs::path& out) {
  const auto profiles = steady_profiles(cfg);
  ChannelLinearModel channel;
  const Design d = run_design(cfg, profiles, channel);
  const ClosedLoopSetup setup = closed_loop_setup(cfg, profiles, d.compensators);
  const Scenario sc = make_standard_scenario(nominal_segment(cfg), cfg.horizon, cfg.sample_time);
  const Trajectory tr = run_closed_loop(setup, sc);
  auto f = open_out(out / "trajectory.csv");
  write_trajectory_csv(f, tr);
  auto comps = open_out(out / "compensators.json");
  comps << compensators_json(d.compensators);
  const Eigen::Index last = tr.samples() - 1;
  std::cout << "scenario net volume " << sc.net_volume() << " m3, final volume mismatch "
            << tr.volume_mismatch(last) << " m3\n";
  std::cout << "final level errors (m):";
  for (Eigen::Index n = 0; n < tr.levels.cols(); ++n) std::cout << ' ' << tr.errors()(last, n);
  std::cout << "\nmax |y| over last sample: " << tr.outputs.row(last).cwiseAbs().maxCoeff()
            << " m\n";
  return 0;
}

int cmd_verify(const ChannelConfig& cfg, const fs::path& out) {
  const auto profiles = steady_profiles(cfg);
  ChannelLinearModel channel;
  const Design d = run_design(cfg, profiles, channel);
  const Eigen::VectorXd caps = channel.capacities();
  auto f = open_out(out / "verify.txt");
  bool ok = true;
  auto line = [&](bool pass, const std::string& text) {
    ok = ok && pass;
    const std::string s = std::string(pass ? "PASS " : "FAIL ") + text + "\n";
    f << s;
    std::cout << s;
  };
  for (const auto& s : d.ledger.steps) {
    const double rel = std::abs(s.measured_gain - s.predicted_gain) / s.predicted_gain;
    std::ostringstream os;
    os << "integrator gain step " << s.step << " (gate " << s.gate + 1 << "): measured "
       << s.measured_gain << " predicted " << s.predicted_gain << " rel " << rel;
    line(rel < 0.01, os.str());
  }
  for (Eigen::Index k = 0; k < d.ledger.disturbance_gains.rows(); ++k)
    for (Eigen::Index l = 0; l < d.ledger.disturbance_gains.cols(); ++l) {
      const double pred = balanced_disturbance_gain(caps, channel.weights, l, k);
      const double meas = d.ledger.disturbance_gains(k, l);
      std::ostringstream os;
      os << "disturbance gain d_" << l << " -> h_" << k + 1 << ": " << meas << " vs " << pred;
      line(std::abs(meas - pred) <= 0.01 * std::abs(pred), os.str());
    }
  for (const auto& s : d.ledger.steps) {
    const auto& r = s.tuning.report;
    std::ostringstream os;
    os << "loop gate " << s.gate + 1 << ": crossover " << r.crossover << " rad/s, PM "
       << r.phase_margin << " deg, GM " << r.gain_margin << " dB, encirclements "
       << r.encirclements << ", roll-off " << (r.rolloff_ok ? "ok" : "violated");
    line(r.stable() && r.rolloff_ok && r.phase_margin >= cfg.phase_margin - 1.0, os.str());
  }
  return ok ? 0 : 3;
}

int cmd_equilibrium(const ChannelConfig& cfg, const fs::path& out, double max_volume) {
  const auto profiles = steady_profiles(cfg);
  if (max_volume <= 0) {
    double c = 0.0;
    for (std::size_t n = 0; n < profiles.size(); ++n)
      c += cfg.pools[n].length * top_width(cfg.pools[n].h_ref, cfg.pools[n]);
    max_volume = 0.2 * c;  // about 20 cm of storage
  }
  const auto curve = balanced_equilibrium_curve(
      cfg, cfg.weights.empty() ? Eigen::VectorXd() : cfg.weight_vector(), max_volume, 41);
  auto f = open_out(out / "equilibrium.csv");
  write_equilibrium_csv(f, curve);
  std::cout << "wrote " << curve.volume.size() << " points to " << (out / "equilibrium.csv")
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Water-level balancing design and simulation for irrigation channels"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "channel config (JSON)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--order", o.order, "design order, e.g. 4,3,5,2,6,1, or 'random'");
    sub->add_option("--weights", o.weights, "per-pool output weights, comma separated");
    sub->add_option("--phase-margin", o.phase_margin, "required phase margin, degrees");
    sub->add_flag("--no-feedforward", o.no_feedforward, "disable boundary-flow feedforward");
    sub->add_option("--pools", o.pools, "synthetic channel with N pools (no --config)");
    sub->add_option("--profile", o.profile, "synthetic channel shape: uniform or tapered");
  };
  std::vector<CLI::App*> subs;
  for (const char* name : {"steady", "linearize", "design", "simulate", "verify", "equilibrium"}) {
    auto* s = app.add_subcommand(name);
    add_common(s);
    subs.push_back(s);
  }
  subs[0]->description("steady backwater profiles -> profiles.csv");
  subs[1]->description("pool frequency responses -> bode_pool_N.csv, capacities.csv");
  subs[2]->description("sequential loop shaping -> design_ledger.txt, compensators.json");
  subs[3]->description("closed-loop standard scenario -> trajectory.csv");
  subs[4]->description("integrator-gain, disturbance-gain and Nyquist checks -> verify.txt");
  subs[5]->description("balanced equilibrium level vs volume curve -> equilibrium.csv");
  subs[5]->add_option("--max-volume", o.max_volume, "largest |volume mismatch|, m^3");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const ChannelConfig cfg = effective_config(o);
    const fs::path out(o.out);
    fs::create_directories(out);
    const std::string text = serialize_config(cfg);
    std::string name;
    for (auto* s : subs)
      if (s->parsed()) name = s->get_name();
    write_manifest(out, name, text, {{"seed", cfg.seed}});
    open_out(out / "config.json") << text;

    if (name == "steady") return cmd_steady(cfg, out);
    if (name == "linearize") return cmd_linearize(cfg, out);
    if (name == "design") return cmd_design(cfg, out);
    if (name == "simulate") return cmd_simulate(cfg, out);
    if (name == "verify") return cmd_verify(cfg, out);
    return cmd_equilibrium(cfg, out, o.max_volume);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
