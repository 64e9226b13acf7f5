#include "canal/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "canal/error.hpp"

namespace canal {

FeedforwardGains FeedforwardGains::geometric(int pools, double base) {
  if (!(base > 0 && base < 1)) throw DomainError("FeedforwardGains: base must lie in (0, 1)");
  FeedforwardGains ff;
  ff.d_in.resize(pools - 1);
  ff.d_out.resize(pools - 1);
  for (int n = 1; n < pools; ++n) {
    ff.d_in(n - 1) = std::pow(base, n);
    ff.d_out(n - 1) = std::pow(base, pools - n);
  }
  return ff;
}

FeedforwardGains FeedforwardGains::none(int pools) {
  return {Eigen::VectorXd::Zero(pools - 1), Eigen::VectorXd::Zero(pools - 1)};
}

DiscreteCompensator::DiscreteCompensator(const CompensatorParams& c, double dt) : c_(c), dt_(dt) {
  c_.validate();
  if (!(dt > 0)) throw DomainError("DiscreteCompensator: sample time must be positive");
  alpha_ = (2 * c.tf - dt) / (2 * c.tf + dt);
  beta_ = dt / (2 * c.tf + dt);
}

double DiscreteCompensator::step(GateState& s, double y, double feedforward) const {
  const double yf = alpha_ * s.filter + beta_ * (y + s.input);
  const double integrator =
      s.integrator - c_.kp / c_.ti * 0.5 * dt_ * (yf + s.filter);
  const double raw = s.nominal + feedforward - c_.kp * yf + integrator;
  const double u = std::clamp(raw, s.u_min, s.u_max);
  s.integrator = integrator + dt_ / c_.ti * (u - raw);
  s.filter = yf;
  s.input = y;
  s.output = u;
  return u;
}

Complex DiscreteCompensator::response(double omega) const {
  const Complex z = std::exp(Complex(0.0, omega * dt_));
  const Complex s = 2.0 / dt_ * (z - 1.0) / (z + 1.0);
  return c_(s);
}

double controller_step(const DiscreteCompensator& dc, GateState& s, double y, double ff) {
  return dc.step(s, y, ff);
}

Eigen::VectorXd weighted_outputs(const Eigen::VectorXd& levels, const Eigen::VectorXd& refs,
                                 const Eigen::VectorXd& weights) {
  const Eigen::Index N = levels.size();
  if (refs.size() != N || (weights.size() != 0 && weights.size() != N))
    throw DomainError("weighted_outputs: inconsistent lengths");
  const Eigen::VectorXd w = weights.size() ? weights : Eigen::VectorXd::Ones(N);
  const Eigen::VectorXd we = w.cwiseProduct(refs - levels);
  return we.head(N - 1) - we.tail(N - 1);
}

const ScenarioSegment& Scenario::at(double t) const {
  auto it = std::upper_bound(segments.begin(), segments.end(), t,
                             [](double v, const ScenarioSegment& s) { return v < s.start; });
  return it == segments.begin() ? segments.front() : *(it - 1);
}

double Scenario::net_volume() const {
  double v = 0.0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const double a = std::min(segments[k].start, horizon);
    const double b = k + 1 < segments.size() ? std::min(segments[k + 1].start, horizon) : horizon;
    const auto& s = segments[k];
    v += (b - a) * (s.inflow - s.offtakes.sum() - s.outflow);
  }
  return v;
}

void Scenario::validate() const {
  if (segments.empty()) throw DomainError("Scenario: no segments");
  if (!(horizon > 0) || !(sample_time > 0))
    throw DomainError("Scenario: horizon and sample time must be positive");
  if (segments.front().start != 0.0) throw DomainError("Scenario: first segment must start at 0");
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& s = segments[k];
    if (k > 0 && !(s.start > segments[k - 1].start))
      throw DomainError("Scenario: segment start times must increase");
    if (s.offtakes.size() != segments.front().offtakes.size())
      throw DomainError("Scenario: offtake count changes between segments");
    if (s.inflow < 0 || s.outflow < 0 || (s.offtakes.array() < 0).any())
      throw DomainError("Scenario: negative flow");
  }
}

Eigen::MatrixXd Trajectory::errors() const {
  return (-levels).rowwise() + h_ref.transpose();
}

Trajectory run_closed_loop(const ClosedLoopSetup& setup, const Scenario& scenario) {
  scenario.validate();
  const std::size_t N = setup.params.size();
  const auto Ni = static_cast<Eigen::Index>(N);
  if (N < 2 || setup.initial.pools.size() != N || setup.nominal_gates.size() != Ni - 1 ||
      scenario.pools() != static_cast<int>(N))
    throw DomainError("run_closed_loop: inconsistent channel dimensions");

  std::vector<DiscreteCompensator> ctrl;
  std::vector<const CompensatorParams*> by_gate(N - 1, nullptr);
  for (const auto& c : setup.compensators) by_gate.at(static_cast<std::size_t>(c.gate)) = &c;
  for (const auto* c : by_gate) {
    if (!c) throw DomainError("run_closed_loop: missing compensator");
    ctrl.emplace_back(*c, scenario.sample_time);
  }
  const FeedforwardGains ff = setup.feedforward.d_in.size() ? setup.feedforward
                                                            : FeedforwardGains::none(Ni);

  Eigen::VectorXd h_ref(Ni);
  for (std::size_t n = 0; n < N; ++n) h_ref(static_cast<Eigen::Index>(n)) = setup.params[n].h_ref;

  ControllerState cs;
  for (Eigen::Index g = 0; g < Ni - 1; ++g) {
    GateState s;
    s.nominal = s.output = setup.nominal_gates(g);
    s.u_max = setup.u_max_factor * s.nominal;
    cs.gates.push_back(s);
  }

  const double dt = scenario.sample_time;
  const auto samples = static_cast<Eigen::Index>(std::floor(scenario.horizon / dt + 1e-9)) + 1;
  Trajectory tr;
  tr.h_ref = h_ref;
  tr.time.resize(samples);
  tr.levels.resize(samples, Ni);
  tr.outputs.resize(samples, Ni - 1);
  tr.gates.resize(samples, Ni - 1);
  tr.disturbances.resize(samples, Ni + 2);
  tr.volume_mismatch.resize(samples);

  std::vector<FlowField> reference = setup.initial.pools;
  ChannelState state = setup.initial;
  state.time = 0.0;
  BoundaryFlows b;
  b.gates.resize(Ni - 1);

  for (Eigen::Index k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    const ScenarioSegment& seg = scenario.at(t);
    const Eigen::VectorXd h = state.downstream_levels(setup.params);
    const Eigen::VectorXd y = weighted_outputs(h, h_ref, setup.weights);
    const double dd0 = seg.inflow - setup.nominal_inflow;
    const double ddout = seg.outflow - setup.nominal_outflow;
    for (Eigen::Index g = 0; g < Ni - 1; ++g) {
      const double feed = ff.d_in(g) * dd0 + ff.d_out(g) * ddout;
      b.gates(g) = controller_step(ctrl[static_cast<std::size_t>(g)],
                                   cs.gates[static_cast<std::size_t>(g)], y(g), feed);
    }

    tr.time(k) = t;
    tr.levels.row(k) = h.transpose();
    tr.outputs.row(k) = y.transpose();
    tr.gates.row(k) = b.gates.transpose();
    tr.disturbances(k, 0) = seg.inflow;
    tr.disturbances.row(k).segment(1, Ni) = seg.offtakes.transpose();
    tr.disturbances(k, Ni + 1) = seg.outflow;
    tr.volume_mismatch(k) = volume_mismatch(state, reference);
    if (k + 1 == samples) break;

    // Hold the gate commands; disturbances may switch inside the period.
    double t0 = t;
    const double t1 = t + dt;
    while (t0 < t1 - 1e-9) {
      const ScenarioSegment& cur = scenario.at(t0);
      double next = t1;
      for (const auto& s : scenario.segments)
        if (s.start > t0 + 1e-9) {
          next = std::min(next, s.start);
          break;
        }
      b.inflow = cur.inflow;
      b.offtakes = cur.offtakes;
      b.outflow = cur.outflow;
      try {
        state = advance_channel(state, b, next - t0, setup.params, setup.sim);
      } catch (const NumericalError& e) {
        std::ostringstream os;
        os << "closed-loop run aborted near t = " << t0 << " s: " << e.what();
        throw NumericalError(os.str());
      }
      state.time = next;
      t0 = next;
    }
  }
  return tr;
}

}  // namespace canal
