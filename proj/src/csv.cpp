#include "canal/csv.hpp"

#include <iomanip>
#include <limits>

#include <json.hpp>

namespace canal {

namespace {

struct Precise {
  explicit Precise(std::ostream& os) : os(os), flags(os.flags()), prec(os.precision()) {
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
  }
  ~Precise() {
    os.flags(flags);
    os.precision(prec);
  }
  std::ostream& os;
  std::ios::fmtflags flags;
  std::streamsize prec;
};

}  // namespace

void write_profiles_csv(std::ostream& os, const std::vector<PoolParams>& params,
                        const std::vector<SteadyProfile>& profiles) {
  Precise guard(os);
  os << "pool,x_m,area_m2,level_m,flow_m3s\n";
  for (std::size_t n = 0; n < profiles.size(); ++n) {
    const auto& pr = profiles[n];
    for (Eigen::Index i = 0; i < pr.x.size(); ++i)
      os << params[n].index << ',' << pr.x(i) << ',' << pr.area(i) << ','
         << level_from_area(pr.area(i), params[n]) << ',' << pr.flow << '\n';
  }
}

void write_bode_csv(std::ostream& os, const PoolLinearModel& pool) {
  Precise guard(os);
  const BodeData in = phase_and_magnitude(pool.g_in);
  const BodeData out = phase_and_magnitude(pool.g_out);
  os << "omega_rad_s,g_in_db,g_in_phase_deg,g_out_db,g_out_phase_deg\n";
  for (Eigen::Index k = 0; k < in.omega.size(); ++k)
    os << in.omega(k) << ',' << in.magnitude_db(k) << ',' << in.phase_deg(k) << ','
       << out.magnitude_db(k) << ',' << out.phase_deg(k) << '\n';
}

void write_loop_bode_csv(std::ostream& os, const FrequencyResponse& g,
                         const CompensatorParams& c) {
  Precise guard(os);
  const BodeData b = phase_and_magnitude(FrequencyResponse(g.grid, loop_response(g, c)));
  os << "omega_rad_s,loop_db,loop_phase_deg\n";
  for (Eigen::Index k = 0; k < b.omega.size(); ++k)
    os << b.omega(k) << ',' << b.magnitude_db(k) << ',' << b.phase_deg(k) << '\n';
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  Precise guard(os);
  const Eigen::Index N = tr.levels.cols();
  os << "time_s";
  for (Eigen::Index n = 1; n <= N; ++n) os << ",h_ds_" << n;
  for (Eigen::Index n = 1; n < N; ++n) os << ",y_" << n;
  for (Eigen::Index n = 1; n < N; ++n) os << ",u_" << n;
  for (Eigen::Index n = 0; n <= N + 1; ++n) os << ",d_" << n;
  os << ",volume_mismatch_m3\n";
  for (Eigen::Index k = 0; k < tr.samples(); ++k) {
    os << tr.time(k);
    for (Eigen::Index n = 0; n < N; ++n) os << ',' << tr.levels(k, n);
    for (Eigen::Index n = 0; n < N - 1; ++n) os << ',' << tr.outputs(k, n);
    for (Eigen::Index n = 0; n < N - 1; ++n) os << ',' << tr.gates(k, n);
    for (Eigen::Index n = 0; n < N + 2; ++n) os << ',' << tr.disturbances(k, n);
    os << ',' << tr.volume_mismatch(k) << '\n';
  }
}

void write_equilibrium_csv(std::ostream& os, const BalancedEquilibriumCurve& curve) {
  Precise guard(os);
  os << "delta_volume_m3";
  for (Eigen::Index n = 1; n <= curve.level.cols(); ++n) os << ",dh_" << n;
  os << '\n';
  for (Eigen::Index i = 0; i < curve.volume.size(); ++i) {
    os << curve.volume(i);
    for (Eigen::Index n = 0; n < curve.level.cols(); ++n) os << ',' << curve.level(i, n);
    os << '\n';
  }
}

std::string compensators_json(const std::vector<CompensatorParams>& comps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : comps)
    arr.push_back({{"gate", c.gate + 1}, {"kp", c.kp}, {"ti", c.ti}, {"tf", c.tf}});
  return nlohmann::json{{"compensators", arr}}.dump(2) + "\n";
}

void write_design_ledger(std::ostream& os, const DesignLedger& ledger,
                         const Eigen::VectorXd& capacities, const Eigen::VectorXd& weights) {
  os << "design order:";
  for (int g : ledger.order.nu) os << ' ' << g + 1;
  os << "\nphase margin target: " << ledger.phase_margin << " deg\n\n";
  os << "step gate  crossover_rad_s  pm_deg  gm_db  kp  ti_s  tf_s  gain_pred  gain_meas  rel_err\n";
  for (const auto& s : ledger.steps) {
    const auto& r = s.tuning.report;
    const auto& c = s.tuning.comp;
    os << std::setw(4) << s.step << ' ' << std::setw(4) << s.gate + 1 << "  " << std::scientific
       << std::setprecision(4) << r.crossover << "  " << std::fixed << std::setprecision(2)
       << r.phase_margin << "  " << r.gain_margin << "  " << std::scientific
       << std::setprecision(4) << c.kp << "  " << c.ti << "  " << c.tf << "  "
       << s.predicted_gain << "  " << s.measured_gain << "  "
       << std::abs(s.measured_gain - s.predicted_gain) / s.predicted_gain << '\n';
  }
  os << std::defaultfloat << std::setprecision(6);
  os << "\nclosed-loop integrator gains d_l -> h_k (rows k, columns l = 0..N+1)\n";
  for (Eigen::Index k = 0; k < ledger.disturbance_gains.rows(); ++k) {
    for (Eigen::Index l = 0; l < ledger.disturbance_gains.cols(); ++l)
      os << (l ? "  " : "") << std::scientific << std::setprecision(4)
         << ledger.disturbance_gains(k, l);
    os << '\n';
  }
  os << std::defaultfloat;
  os << "predicted magnitude 1/(w_k sum c/w):";
  for (Eigen::Index k = 0; k < capacities.size(); ++k)
    os << ' ' << balanced_disturbance_gain(capacities, weights, 0, k);
  os << '\n';
}

}  // namespace canal
