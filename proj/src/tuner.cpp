#include "canal/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace canal {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = 180.0 / kPi;

double lerp(double a, double b, double t) { return a + t * (b - a); }

// Principal-value winding number of a closed polygon around `z`.
double winding_number(const std::vector<Complex>& poly, Complex z) {
  double total = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Complex a = poly[i] - z;
    const Complex b = poly[(i + 1) % poly.size()] - z;
    total += std::arg(b / a);
  }
  return total / (2 * kPi);
}

double distance_to_segment(Complex a, Complex b, Complex z) {
  const Complex d = b - a;
  const double len2 = std::norm(d);
  double t = len2 > 0 ? ((z - a) * std::conj(d)).real() / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(a + t * d - z);
}

}  // namespace

Eigen::VectorXcd loop_response(const FrequencyResponse& g, const CompensatorParams& comp) {
  Eigen::VectorXcd L(g.size());
  for (Eigen::Index k = 0; k < g.size(); ++k)
    L(k) = -g.values(k) * comp(Complex(0.0, g.grid.omega(k)));
  return L;
}

LoopReport nyquist_report(const FrequencyResponse& g, const CompensatorParams& comp) {
  const Eigen::VectorXcd L = loop_response(g, comp);
  const Eigen::VectorXd& om = g.grid.omega;
  const Eigen::Index K = L.size();

  Eigen::VectorXd logmag(K), wrapped(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    logmag(k) = std::log(std::abs(L(k)));
    wrapped(k) = std::arg(L(k)) * kDeg;
  }
  Eigen::VectorXd phase = unwrap_degrees(wrapped);
  // Two integrators put the low-frequency phase near -180: pin that branch.
  const double shift = 360.0 * std::floor((-90.0 - phase(0)) / 360.0);
  phase.array() += shift + (phase(0) + shift <= -270.0 ? 360.0 : 0.0);

  LoopReport rep;

  std::vector<Eigen::Index> crossings;
  for (Eigen::Index k = 0; k + 1 < K; ++k)
    if ((logmag(k) >= 0) != (logmag(k + 1) >= 0)) crossings.push_back(k);
  rep.unique_crossover = crossings.size() == 1 && logmag(0) > 0;

  Eigen::Index kc = -1;
  for (Eigen::Index k : crossings)
    if (logmag(k) >= 0 && logmag(k + 1) < 0) {
      kc = k;
      break;
    }
  if (kc >= 0) {
    const double t = logmag(kc) / (logmag(kc) - logmag(kc + 1));
    rep.crossover = std::exp(lerp(std::log(om(kc)), std::log(om(kc + 1)), t));
    rep.phase_margin = 180.0 + lerp(phase(kc), phase(kc + 1), t);

    rep.sector_ok = true;
    for (Eigen::Index k = 0; k <= kc; ++k)
      if (!(phase(k) > -180.0 && phase(k) < 0.0)) rep.sector_ok = false;

    // Roll-off: monotone decrease from crossover to -20 dB, then stay below.
    const double floor_db = std::log(0.1);
    bool reached = false;
    bool ok = true;
    double prev = 0.0;
    for (Eigen::Index k = kc + 1; k < K; ++k) {
      if (!reached) {
        if (logmag(k) > prev) ok = false;
        if (logmag(k) < floor_db) reached = true;
        prev = logmag(k);
      } else if (logmag(k) >= floor_db) {
        ok = false;
      }
    }
    rep.rolloff_ok = ok && reached;

    // Gain margin at phase crossings of -180 (mod 360) above crossover.
    for (Eigen::Index k = kc; k + 1 < K; ++k) {
      const double a = std::floor((phase(k) + 180.0) / 360.0);
      const double b = std::floor((phase(k + 1) + 180.0) / 360.0);
      if (a == b) continue;
      const double target = 360.0 * std::max(a, b) - 180.0;
      const double t = (target - phase(k)) / (phase(k + 1) - phase(k));
      const double gm = -20.0 / std::log(10.0) * lerp(logmag(k), logmag(k + 1), t);
      rep.gain_margin = std::min(rep.gain_margin, gm);
    }
  }

  // Nyquist contour image: negative branch, indentation arc, positive branch, and
  // the origin for the strictly proper closure at infinity.
  std::vector<Complex> poly;
  poly.reserve(static_cast<std::size_t>(2 * K + 800));
  poly.emplace_back(0.0, 0.0);
  for (Eigen::Index k = K - 1; k >= 0; --k) poly.push_back(std::conj(L(k)));
  const double radius = std::abs(L(0));
  const double start = -phase(0);         // angle of conj(L(0)), degrees
  // Clockwise through about -360 for the two integrators, ending on L(0).
  double sweep = 2.0 * phase(0);
  sweep -= 360.0 * std::round((sweep + 360.0) / 360.0);
  const int arc_points = 720;
  for (int i = 1; i < arc_points; ++i) {
    const double ang = (start + sweep * i / arc_points) / kDeg;
    poly.push_back(std::polar(radius, ang));
  }
  for (Eigen::Index k = 0; k < K; ++k) poly.push_back(L(k));

  const Complex critical(-1.0, 0.0);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (distance_to_segment(poly[i], poly[(i + 1) % poly.size()], critical) < 1e-9)
      throw NumericalError("nyquist_report: loop passes through -1 (marginal stability)");
  }
  rep.encirclements = -static_cast<int>(std::lround(winding_number(poly, critical)));
  return rep;
}

double estimate_delay(const FrequencyResponse& g_in) {
  const BodeData bode = phase_and_magnitude(g_in);
  const double top = g_in.grid.max();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (Eigen::Index k = 0; k < bode.omega.size(); ++k) {
    if (bode.omega(k) < top / 10.0) continue;
    const double x = bode.omega(k), y = bode.phase_deg(k) / kDeg;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return 0.0;
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return std::max(0.0, -slope);
}

double crossover_cap(const FrequencyResponse& g, double delay) {
  double cap = g.grid.max() / 10.0;
  // Resonance: a local peak of |s g| at least 6 dB above the integrator
  // asymptote and 6 dB above the valleys on both sides. A plateau where the
  // integrator roll-off stops does not count, nor do the bumps and near-cancelled
  // pairs left by loops closed earlier.
  const Eigen::Index K = g.size();
  Eigen::VectorXd m(K);
  for (Eigen::Index k = 0; k < K; ++k) m(k) = g.grid.omega(k) * std::abs(g.values(k));
  for (Eigen::Index k = 1; k + 1 < K; ++k) {
    if (!(m(k) > m(k - 1) && m(k) >= m(k + 1))) continue;
    double left = m(k), right = m(k);
    for (Eigen::Index i = k - 1; i >= 0 && m(i) <= m(k); --i) left = std::min(left, m(i));
    for (Eigen::Index i = k + 1; i < K && m(i) <= m(k); ++i) right = std::min(right, m(i));
    if (m(k) >= 2.0 * m(0) && m(k) >= 2.0 * std::max(left, right)) {
      cap = 0.3 * g.grid.omega(k);
      break;
    }
  }
  if (delay > 0) cap = std::min(cap, 1.0 / delay);
  return cap;
}

CompensatorParams shape_compensator(const FrequencyResponse& g, int gate, double omega_c,
                                    double phase_margin_deg, double tf) {
  CompensatorParams c;
  c.gate = gate;
  c.tf = tf;
  // The PI zero contributes -(90 - phi)/2 degrees at crossover.
  c.ti = std::tan((45.0 + 0.5 * phase_margin_deg) / kDeg) / omega_c;
  c.kp = 1.0;
  const Complex s(0.0, omega_c);
  c.kp = 1.0 / std::abs(g.interpolate(omega_c) * c(s));
  return c;
}

namespace {

bool acceptable(const LoopReport& r, double phase_margin_deg, double tol) {
  return r.unique_crossover && r.phase_margin >= phase_margin_deg - tol && r.rolloff_ok &&
         r.sector_ok && r.stable();
}

// Moves the PI zero toward crossover until the achieved margin matches the
// required margin. Returns nullopt if the trimmed loop violates any criterion.
std::optional<TuneResult> trim(const FrequencyResponse& g, TuneResult base,
                               double phase_margin_deg, double tol) {
  const double wc = base.report.crossover;
  TuneResult cur = base;
  double lag = 90.0 - std::atan(wc * cur.comp.ti) * kDeg;
  // Aim a hair above the required margin so rounding never lands below it.
  const double target = phase_margin_deg + 5e-3;
  for (int it = 0; it < 4; ++it) {
    const double excess = cur.report.phase_margin - target;
    if (std::abs(excess) < 1e-3) break;
    lag = std::clamp(lag + excess, 0.5, 85.0);
    CompensatorParams c = cur.comp;
    c.ti = std::tan((90.0 - lag) / kDeg) / wc;
    c.kp = 1.0;
    c.kp = 1.0 / std::abs(g.interpolate(wc) * c(Complex(0.0, wc)));
    cur.comp = c;
    cur.report = nyquist_report(g, c);
    if (!acceptable(cur.report, phase_margin_deg, tol)) return std::nullopt;
  }
  return cur;
}

}  // namespace

TuneResult tune_step(const FrequencyResponse& g, int gate, double phase_margin_deg,
                     const TunerOptions& opts) {
  if (!(phase_margin_deg > 0 && phase_margin_deg < 90))
    throw DomainError("tune_step: phase margin must lie in (0, 90) degrees");
  const double gain = integrator_gain(g.grid, g.values);
  if (!(gain > 0)) throw DomainError("tune_step: plant integrator gain must be positive");

  const double cap = crossover_cap(g, opts.delay);
  const double lo = 10.0 * g.grid.min();
  std::vector<double> candidates;
  if (cap > lo) {
    const int n = std::max(2, opts.candidates);
    for (int i = 0; i < n; ++i)
      candidates.push_back(cap * std::pow(lo / cap, static_cast<double>(i) / (n - 1)));
  }
  // Fallback: deeper into the integrator-dominated band.
  for (int i = 1; i <= 10; ++i)
    candidates.push_back(std::min(cap, lo) * std::pow(0.2, static_cast<double>(i) / 10));

  for (double wc : candidates) {
    double tf = 1.0 / (opts.filter_ratio * wc);
    for (int h = 0; h <= opts.filter_halvings; ++h, tf *= 0.5) {
      TuneResult res;
      res.cap = cap;
      res.comp = shape_compensator(g, gate, wc, phase_margin_deg, tf);
      res.report = nyquist_report(g, res.comp);
      if (!acceptable(res.report, phase_margin_deg, opts.margin_tolerance)) continue;
      if (opts.trim_phase_margin) {
        if (auto t = trim(g, res, phase_margin_deg, opts.margin_tolerance)) return *t;
      }
      return res;
    }
  }
  std::ostringstream os;
  os << "tune_step: no feasible crossover for gate " << gate + 1
     << " above the grid minimum " << g.grid.min()
     << " rad/s; the frequency grid is too narrow at the low end";
  throw NumericalError(os.str());
}

Design design_all(const ChannelLinearModel& channel, const DesignOrder& order,
                  double phase_margin_deg, const TunerOptions& opts) {
  Design d;
  d.ledger.order = order;
  d.ledger.phase_margin = phase_margin_deg;
  const Eigen::VectorXd effective = channel.capacities().array() / channel.weights.array();

  PartialClosedLoop pcl = open_loop(channel, order);
  std::vector<CompensatorParams> comps(static_cast<std::size_t>(channel.gate_count()));
  while (!pcl.complete()) {
    const int m = pcl.step;
    const int gate = pcl.target_gate();
    DesignStep step;
    step.step = m;
    step.gate = gate;
    step.plant = pcl.target();
    step.measured_gain = step.plant.integrator_gain;
    step.predicted_gain = lemma1_gain(order, m, effective);

    TunerOptions o = opts;
    if (o.delay <= 0)
      o.delay = estimate_delay(channel.pools[static_cast<std::size_t>(gate + 1)].g_in);
    step.tuning = tune_step(step.plant, gate, phase_margin_deg, o);
    comps[static_cast<std::size_t>(gate)] = step.tuning.comp;
    pcl = close_one_loop(pcl, step.tuning.comp);
    d.ledger.steps.push_back(std::move(step));
  }

  d.ledger.final_loop = pcl;
  d.ledger.levels = closed_loop_levels(channel, pcl, comps);
  const Eigen::Index N = channel.pool_count();
  d.ledger.disturbance_gains.resize(N, N + 2);
  for (Eigen::Index k = 0; k < N; ++k)
    for (Eigen::Index l = 0; l < N + 2; ++l)
      d.ledger.disturbance_gains(k, l) = closed_loop_disturbance_gain(d.ledger.levels, l, k);
  d.compensators = std::move(comps);
  return d;
}

}  // namespace canal
