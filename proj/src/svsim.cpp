#include "canal/svsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/LU>

namespace canal {

namespace {

[[noreturn]] void abort_at(const char* what, int pool, double x, double t) {
  std::ostringstream os;
  os << "pool " << pool << ": " << what << " at x = " << x << " m, t = " << t << " s";
  throw NumericalError(os.str());
}

// Signed Manning slope: equal to friction_slope for Q >= 0 and opposing the
// flow otherwise.
double signed_friction(double A, double Q, const PoolParams& p) {
  const double sf = friction_slope(A, Q, p);
  return Q < 0 ? -sf : sf;
}

// Momentum residual on every face for given node areas and face flows.
void momentum_rates(const Eigen::VectorXd& A, const Eigen::VectorXd& Q, double q_in,
                    double q_out, double dx, const PoolParams& p, int pool, double t,
                    Eigen::VectorXd& dQ) {
  const Eigen::Index M = Q.size();
  dQ.resize(M);
  Eigen::VectorXd Af(M), flux(M);
  for (Eigen::Index j = 0; j < M; ++j) {
    Af(j) = 0.5 * (A(j) + A(j + 1));
    if (!(Af(j) > 0)) abort_at("dry face", pool, (j + 0.5) * dx, t);
    flux(j) = Q(j) * Q(j) / Af(j);
  }
  const double flux_in = q_in * q_in / A(0);
  const double flux_out = q_out * q_out / A(M);

  for (Eigen::Index j = 0; j < M; ++j) {
    double conv;
    if (Q(j) >= 0) {
      conv = j == 0 ? (flux(0) - flux_in) / (0.5 * dx) : (flux(j) - flux(j - 1)) / dx;
    } else {
      conv = j == M - 1 ? (flux_out - flux(j)) / (0.5 * dx) : (flux(j + 1) - flux(j)) / dx;
    }
    const double k = pressure_coefficient(Af(j), p);
    const double V = Q(j) / Af(j);
    if (V * V >= kGravity * k) abort_at("supercritical flow", pool, (j + 0.5) * dx, t);
    const double pressure = kGravity * k * (A(j + 1) - A(j)) / dx;
    const double source = kGravity * Af(j) * (p.bed_slope - signed_friction(Af(j), Q(j), p));
    dQ(j) = -conv - pressure + source;
  }
}

}  // namespace

Eigen::VectorXd ChannelState::downstream_levels(const std::vector<PoolParams>& params) const {
  Eigen::VectorXd h(static_cast<Eigen::Index>(pools.size()));
  for (std::size_t n = 0; n < pools.size(); ++n)
    h(static_cast<Eigen::Index>(n)) = level_from_area(pools[n].downstream_area(), params[n]);
  return h;
}

double ChannelState::volume() const {
  double v = 0.0;
  for (const auto& f : pools) v += f.volume();
  return v;
}

double BoundaryFlows::pool_inflow(std::size_t n) const {
  return n == 0 ? inflow : gates(static_cast<Eigen::Index>(n - 1));
}

double BoundaryFlows::pool_outflow(std::size_t n) const {
  const auto N = static_cast<std::size_t>(offtakes.size());
  const auto i = static_cast<Eigen::Index>(n);
  return n + 1 == N ? offtakes(i) + outflow : offtakes(i) + gates(i);
}

FlowFieldRate semidiscrete_rhs(const FlowField& f, double q_in, double q_out,
                               const PoolParams& p) {
  if (!std::isfinite(q_in) || !std::isfinite(q_out))
    throw NumericalError("semidiscrete_rhs: non-finite boundary flow");
  const Eigen::Index M = f.flow.size();
  const double dx = f.dx;
  FlowFieldRate r;
  r.area.resize(M + 1);
  for (Eigen::Index i = 0; i <= M; ++i)
    if (!(f.area(i) > 0)) abort_at("dry node", f.pool_index, i * dx, f.time);

  r.area(0) = (q_in - f.flow(0)) / (0.5 * dx);
  for (Eigen::Index i = 1; i < M; ++i) r.area(i) = (f.flow(i - 1) - f.flow(i)) / dx;
  r.area(M) = (f.flow(M - 1) - q_out) / (0.5 * dx);

  momentum_rates(f.area, f.flow, q_in, q_out, dx, p, f.pool_index, f.time, r.flow);
  return r;
}

FlowField discrete_equilibrium(const SteadyProfile& profile, const PoolParams& p) {
  const Eigen::Index M = profile.intervals();
  FlowField f;
  f.pool_index = p.index;
  f.dx = profile.spacing();
  f.area = profile.area;
  f.flow = Eigen::VectorXd::Constant(M, profile.flow);

  const double Q0 = profile.flow;
  auto residual = [&](const Eigen::VectorXd& upstream_areas) {
    Eigen::VectorXd A(M + 1);
    A.head(M) = upstream_areas;
    A(M) = profile.area(M);
    Eigen::VectorXd dQ;
    momentum_rates(A, f.flow, Q0, Q0, f.dx, p, p.index, 0.0, dQ);
    return dQ;
  };

  Eigen::VectorXd a = profile.area.head(M);
  Eigen::VectorXd r = residual(a);
  const double scale = kGravity * profile.area.maxCoeff() * p.bed_slope + 1e-12;
  for (int it = 0; it < 50 && r.lpNorm<Eigen::Infinity>() > 1e-14 * scale; ++it) {
    Eigen::MatrixXd J(M, M);
    for (Eigen::Index c = 0; c < M; ++c) {
      const double h = 1e-7 * std::max(1.0, std::abs(a(c)));
      Eigen::VectorXd ap = a, am = a;
      ap(c) += h;
      am(c) -= h;
      J.col(c) = (residual(ap) - residual(am)) / (2 * h);
    }
    Eigen::VectorXd step = J.partialPivLu().solve(-r);
    // Damped update keeps every area positive.
    double lambda = 1.0;
    while ((a + lambda * step).minCoeff() <= 0 && lambda > 1e-6) lambda *= 0.5;
    a += lambda * step;
    r = residual(a);
  }
  if (!(r.lpNorm<Eigen::Infinity>() <= 1e-10 * scale))
    throw NumericalError("discrete_equilibrium: Newton iteration did not converge");
  f.area.head(M) = a;
  return f;
}

double max_stable_step(const ChannelState& s, const std::vector<PoolParams>& params,
                       const SimulatorOptions& opts) {
  double dt = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < s.pools.size(); ++n) {
    const auto& f = s.pools[n];
    double speed = 0.0;
    for (Eigen::Index j = 0; j < f.flow.size(); ++j) {
      const double Af = 0.5 * (f.area(j) + f.area(j + 1));
      speed = std::max(speed, std::abs(f.flow(j) / Af) +
                                  std::sqrt(kGravity * pressure_coefficient(Af, params[n])));
    }
    dt = std::min(dt, opts.cfl * f.dx / speed);
  }
  return dt;
}

ChannelState step_channel(const ChannelState& s, const BoundaryFlows& b, double dt,
                          const std::vector<PoolParams>& params, const SimulatorOptions& opts) {
  const std::size_t N = s.pools.size();
  if (params.size() != N || static_cast<std::size_t>(b.offtakes.size()) != N ||
      static_cast<std::size_t>(b.gates.size()) + 1 != N)
    throw DomainError("step_channel: inconsistent channel dimensions");
  if (!(dt > 0)) throw DomainError("step_channel: non-positive time step");
  const double bound = max_stable_step(s, params, opts);
  if (dt > bound * (1 + 1e-12)) {
    std::ostringstream os;
    os << "step_channel: dt = " << dt << " s violates the CFL bound " << bound << " s";
    throw NumericalError(os.str());
  }

  ChannelState out = s;
  for (std::size_t n = 0; n < N; ++n) {
    const double q_in = b.pool_inflow(n);
    const double q_out = b.pool_outflow(n);
    if (q_in < 0 || q_out < 0) {
      std::ostringstream os;
      os << "pool " << params[n].index << ": reverse boundary flow at t = " << s.time << " s";
      throw NumericalError(os.str());
    }
    const FlowField& f0 = s.pools[n];
    auto stage = [&](const FlowFieldRate* k, double h) {
      FlowField g = f0;
      if (k) {
        g.area += h * k->area;
        g.flow += h * k->flow;
        g.time += h;
      }
      return g;
    };
    const FlowFieldRate k1 = semidiscrete_rhs(f0, q_in, q_out, params[n]);
    const FlowFieldRate k2 = semidiscrete_rhs(stage(&k1, 0.5 * dt), q_in, q_out, params[n]);
    const FlowFieldRate k3 = semidiscrete_rhs(stage(&k2, 0.5 * dt), q_in, q_out, params[n]);
    const FlowFieldRate k4 = semidiscrete_rhs(stage(&k3, dt), q_in, q_out, params[n]);
    FlowField& f = out.pools[n];
    f.area += dt / 6.0 * (k1.area + 2 * k2.area + 2 * k3.area + k4.area);
    f.flow += dt / 6.0 * (k1.flow + 2 * k2.flow + 2 * k3.flow + k4.flow);
    f.time = s.time + dt;
  }
  out.time = s.time + dt;
  return out;
}

ChannelState advance_channel(const ChannelState& s, const BoundaryFlows& b, double duration,
                             const std::vector<PoolParams>& params, const SimulatorOptions& opts) {
  if (duration <= 0) return s;
  const double bound = max_stable_step(s, params, opts);
  const auto steps = static_cast<long>(std::ceil(duration / bound));
  const double dt = duration / static_cast<double>(steps);
  ChannelState cur = s;
  for (long k = 0; k < steps; ++k) {
    // The CFL bound moves with the state; re-split if the wave speed grew.
    if (dt > max_stable_step(cur, params, opts)) {
      return advance_channel(cur, b, duration - k * dt, params, opts);
    }
    cur = step_channel(cur, b, dt, params, opts);
  }
  return cur;
}

double volume_mismatch(const ChannelState& s, const std::vector<FlowField>& reference) {
  if (reference.size() != s.pools.size())
    throw DomainError("volume_mismatch: reference does not match channel");
  double dv = 0.0;
  for (std::size_t n = 0; n < s.pools.size(); ++n) {
    if (reference[n].area.size() != s.pools[n].area.size())
      throw DomainError("volume_mismatch: grid mismatch");
    dv += s.pools[n].volume() - reference[n].volume();
  }
  return dv;
}

ChannelState equilibrium_state(const std::vector<SteadyProfile>& profiles,
                               const std::vector<PoolParams>& params) {
  ChannelState s;
  for (std::size_t n = 0; n < profiles.size(); ++n)
    s.pools.push_back(discrete_equilibrium(profiles[n], params[n]));
  return s;
}

}  // namespace canal
