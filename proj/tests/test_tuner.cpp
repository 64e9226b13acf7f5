#include <doctest.h>

#include "canal/scenarios.hpp"
#include "canal/tuner.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace canal;

namespace {

constexpr double kDegPerRad = 180.0 / M_PI;

FrequencyResponse integrator(double c, double delay = 0.0) {
  const FrequencyGrid grid = FrequencyGrid::log_spaced(1e-6, 1e-1, 240);
  return FrequencyResponse(
      grid, sample(grid, [&](Complex s) { return std::exp(-delay * s) / (c * s); }), 1.0 / c);
}

// Crossover and margin of kp (1 + 1/(ti s)) / (c s (1 + tf s)) by bisection on
// the analytic loop, no grid involved.
std::pair<double, double> analytic_margin(double c, const CompensatorParams& k, double delay) {
  auto L = [&](double w) {
    const Complex s(0.0, w);
    return -k(s) * std::exp(-delay * s) / (c * s);
  };
  double lo = 1e-8, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (std::abs(L(mid)) > 1 ? lo : hi) = mid;
  }
  const double wc = std::sqrt(lo * hi);
  // Phase of the factors separately so no branch ambiguity arises.
  const double phase = -180.0 + std::atan(wc * k.ti) * kDegPerRad - std::atan(wc * k.tf) * kDegPerRad -
                       delay * wc * kDegPerRad;
  return {wc, 180.0 + phase};
}

const ChannelConfig& uniform4() {
  static const ChannelConfig cfg = make_synthetic_channel(4, "uniform");
  return cfg;
}

ChannelLinearModel channel_for(const ChannelConfig& cfg) {
  return linear_channel(cfg, steady_profiles(cfg));
}

}  // namespace

TEST_SUITE("tuner") {

TEST_CASE("pure integrator: margin met, crossover on the candidate ladder") {
  const FrequencyResponse g = integrator(1000.0);
  const TuneResult r = tune_step(g, 0, 50.0);
  CHECK(r.report.phase_margin == doctest::Approx(50.0).epsilon(0.02));
  CHECK(r.report.stable());
  CHECK(r.report.unique_crossover);
  CHECK(r.report.rolloff_ok);
  CHECK(r.report.sector_ok);
  const double cap = crossover_cap(g, 0.0);
  CHECK(cap == doctest::Approx(1e-2));
  const double lo = 10.0 * g.grid.min();
  const double i = 39.0 * std::log(r.report.crossover / cap) / std::log(lo / cap);
  CHECK(std::abs(i - std::round(i)) < 0.02);
  const auto [wc, pm] = analytic_margin(1000.0, r.comp, 0.0);
  CHECK(r.report.crossover == doctest::Approx(wc).epsilon(5e-3));
  CHECK(r.report.phase_margin == doctest::Approx(pm).epsilon(5e-3));
}

TEST_CASE("margins agree with the analytic loop for delayed integrators") {
  for (double delay : {120.0, 600.0, 1800.0}) {
    const FrequencyResponse g = integrator(5e4, delay);
    TunerOptions o;
    o.delay = delay;
    const TuneResult r = tune_step(g, 0, 50.0, o);
    CHECK(r.report.crossover <= 1.0 / delay * 1.0001);
    const auto [wc, pm] = analytic_margin(5e4, r.comp, delay);
    CHECK(r.report.crossover == doctest::Approx(wc).epsilon(5e-3));
    CHECK(r.report.phase_margin == doctest::Approx(pm).epsilon(0.01));
    CHECK(r.report.phase_margin >= 50.0 - 1e-6);
  }
}

TEST_CASE("Nyquist count: weak loops are stable, positive feedback is not") {
  const FrequencyResponse g = integrator(5e4, 300.0);
  CompensatorParams weak;
  weak.kp = 1e-6;
  weak.ti = 1e4;
  weak.tf = 100.0;
  const LoopReport r = nyquist_report(g, weak);
  CHECK(r.encirclements == 0);

  FrequencyResponse flipped = g;
  flipped.values = -g.values;
  const TuneResult good = tune_step(g, 0, 50.0);
  CHECK(nyquist_report(flipped, good.comp).encirclements != 0);

  // Excess gain through the delay: crossover pushed well past 1/delay.
  CompensatorParams hot = good.comp;
  hot.kp *= 40.0;
  CHECK(nyquist_report(g, hot).encirclements != 0);
}

TEST_CASE("sector and roll-off flags match independent evaluations") {
  const auto ch = channel_for(uniform4());
  const Design d = design_all(ch, DesignOrder::from_one_based({2, 3, 1}), 50.0);
  for (const auto& s : d.ledger.steps) {
    const LoopReport& r = s.tuning.report;
    Eigen::VectorXd mag(s.plant.size());
    Eigen::Index kc = 0;
    for (Eigen::Index k = 0; k < s.plant.size(); ++k) {
      const Complex L = -s.plant(k) * s.tuning.comp(Complex(0.0, s.plant.grid.omega(k)));
      mag(k) = std::abs(L);
      if (s.plant.grid.omega(k) < r.crossover) {
        kc = k;
        // Phase below crossover lies strictly in (-180, 0).
        CHECK(L.imag() < 0.0);
      }
    }
    CHECK(oracle::rolloff(mag, kc) == r.rolloff_ok);
    CHECK(r.rolloff_ok);
    CHECK(r.phase_margin >= 50.0 - 1e-6);
    CHECK(r.stable());
  }
}

TEST_CASE("closing neighbours on both sides lowers the achievable crossover") {
  const auto ch = channel_for(uniform4());
  const Design seq = design_all(ch, DesignOrder::sequential(3), 50.0);
  const Design split = design_all(ch, DesignOrder::from_one_based({1, 3, 2}), 50.0);
  CHECK(split.ledger.steps[2].tuning.report.crossover < seq.ledger.steps[2].tuning.report.crossover);
}

TEST_CASE("longer pools give lower crossovers") {
  const auto short_ch = fixture::integrator_channel({5e4, 5e4, 5e4}, 600.0);
  const auto long_ch = fixture::integrator_channel({5e5, 5e5, 5e5}, 6000.0);
  const Design a = design_all(short_ch, DesignOrder::sequential(2), 50.0);
  const Design b = design_all(long_ch, DesignOrder::sequential(2), 50.0);
  for (int m = 0; m < 2; ++m)
    CHECK(b.ledger.steps[m].tuning.report.crossover < a.ledger.steps[m].tuning.report.crossover);

  ChannelConfig near = make_synthetic_channel(2, "uniform"), far = near;
  for (auto& p : far.pools) p.length *= 10.0;
  const Design c = design_all(channel_for(near), DesignOrder::sequential(1), 50.0);
  const Design e = design_all(channel_for(far), DesignOrder::sequential(1), 50.0);
  CHECK(e.ledger.steps[0].tuning.report.crossover < c.ledger.steps[0].tuning.report.crossover);
}

TEST_CASE("a single gate: the full design is one tuning step") {
  const auto ch = channel_for(make_synthetic_channel(2, "uniform"));
  const Design d = design_all(ch, DesignOrder::sequential(1), 50.0);
  FrequencyResponse g = ch.G.entry(0, 0);
  g.integrator_gain = integrator_gain(g.grid, g.values);
  TunerOptions o;
  o.delay = estimate_delay(ch.pools[1].g_in);
  const TuneResult r = tune_step(g, 0, 50.0, o);
  CHECK(d.compensators.size() == 1);
  CHECK(d.compensators[0].kp == r.comp.kp);
  CHECK(d.compensators[0].ti == r.comp.ti);
  CHECK(d.compensators[0].tf == r.comp.tf);
}

TEST_CASE("measured and predicted closed-run gains agree in the design ledger") {
  const ChannelConfig cfg = make_synthetic_channel(5, "uniform");
  const auto ch = channel_for(cfg);
  for (const DesignOrder& o :
       {DesignOrder::sequential(4), DesignOrder::from_one_based({3, 1, 4, 2})}) {
    const Design d = design_all(ch, o, 50.0);
    for (const auto& s : d.ledger.steps)
      CHECK(std::abs(s.measured_gain - s.predicted_gain) < 0.01 * s.predicted_gain);
    const Eigen::VectorXd caps = ch.capacities();
    for (Eigen::Index k = 0; k < 5; ++k)
      for (Eigen::Index l = 0; l < 7; ++l) {
        const double pred = balanced_disturbance_gain(caps, ch.weights, l, k);
        CHECK(std::abs(d.ledger.disturbance_gains(k, l) - pred) < 0.01 * std::abs(pred));
      }
    // Every closed-loop disturbance path stays bounded away from the integrators.
    double worst = 0.0;
    for (Eigen::Index k = 0; k < d.ledger.final_loop.J.frequencies(); ++k) {
      CHECK(d.ledger.final_loop.J.at(k).allFinite());
      worst = std::max(worst, d.ledger.final_loop.J.at(k).cwiseAbs().maxCoeff());
    }
    CHECK(worst < ch.Gd.at(0).cwiseAbs().maxCoeff());
  }
}

TEST_CASE("field-trial layout: weighted, out-of-order design") {
  ChannelConfig cfg = make_synthetic_channel(7, "tapered");
  cfg.order = {4, 3, 5, 2, 6, 1};
  cfg.weights = {0.9, 1.0, 1.0, 1.25, 1.43, 1.11, 0.7};
  const auto ch = channel_for(cfg);
  const Design d = design_all(ch, cfg.design_order(), 50.0);
  REQUIRE(d.compensators.size() == 6);
  for (const auto& s : d.ledger.steps) {
    CHECK(s.tuning.report.stable());
    CHECK(s.tuning.report.rolloff_ok);
    CHECK(s.tuning.report.phase_margin >= 50.0 - 1e-6);
    CHECK(std::abs(s.measured_gain - s.predicted_gain) < 0.01 * s.predicted_gain);
  }
  for (std::size_t g = 0; g < 6; ++g) CHECK(d.compensators[g].gate == static_cast<int>(g));
}

TEST_CASE("an unattainable margin is reported as a numerical failure") {
  CHECK_THROWS_AS(tune_step(integrator(1000.0), 0, 89.0), NumericalError);
  CHECK_THROWS_AS(tune_step(integrator(1000.0), 0, 95.0), DomainError);
  FrequencyResponse neg = integrator(1000.0);
  neg.values = -neg.values;
  CHECK_THROWS_AS(tune_step(neg, 0, 50.0), DomainError);
}

TEST_CASE("crossover cap follows delay and resonance") {
  CHECK(crossover_cap(integrator(1000.0), 500.0) == doctest::Approx(1.0 / 500.0));
  // A lightly damped mode at 3e-3 rad/s standing far above the asymptote.
  const FrequencyGrid grid = FrequencyGrid::log_spaced(1e-6, 1e-1, 240);
  const double wn = 3e-3, zeta = 0.02;
  const FrequencyResponse res(grid, sample(grid, [&](Complex s) {
    return 1.0 / (1000.0 * s) * (wn * wn) / (s * s + 2 * zeta * wn * s + wn * wn);
  }));
  CHECK(crossover_cap(res, 0.0) == doctest::Approx(0.3 * wn).epsilon(0.03));
  const TuneResult r = tune_step(FrequencyResponse(res.grid, res.values, 1e-3), 0, 50.0);
  CHECK(r.report.crossover <= 0.3 * wn * 1.03);
}

TEST_CASE("delay estimate from the phase slope") {
  CHECK(estimate_delay(integrator(1000.0, 100.0)) == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(estimate_delay(integrator(1000.0)) == doctest::Approx(0.0));
}

}
