#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "canal/scenarios.hpp"

using namespace canal;

namespace {

ChannelConfig random_config(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ChannelConfig cfg;
  const int N = count(rng);
  for (int n = 0; n < N; ++n) {
    PoolParams p;
    p.index = n + 1;
    p.length = 2000 + 10000 * u(rng);
    p.bed_width = 3 + 15 * u(rng);
    p.side_slope = u(rng) < 0.2 ? 0.0 : 2 * u(rng);
    p.bed_slope = 5e-5 + 3e-4 * u(rng);
    p.manning_n = 0.012 + 0.02 * u(rng);
    p.h_ref = 0.8 + 2 * u(rng);
    cfg.pools.push_back(p);
  }
  cfg.inflow = 2 + 20 * u(rng);
  if (u(rng) < 0.5)
    for (int n = 0; n < N; ++n) cfg.offtakes.push_back(0.5 * cfg.inflow / N * u(rng));
  if (u(rng) < 0.5)
    for (int n = 0; n < N; ++n) cfg.weights.push_back(0.5 + u(rng));
  if (u(rng) < 0.5) {
    const DesignOrder o = random_design_order(N - 1, rng());
    for (int g : o.nu) cfg.order.push_back(g + 1);
  }
  cfg.phase_margin = 30 + 40 * u(rng);
  cfg.feedforward = u(rng) < 0.5;
  cfg.feedforward_base = 0.5 + 0.45 * u(rng);
  cfg.sample_time = 30 + 90 * u(rng);
  cfg.horizon = 3600 * (1 + 200 * u(rng));
  cfg.u_max_factor = 1.1 + u(rng);
  cfg.cells = 10 + static_cast<int>(100 * u(rng));
  cfg.cfl = 0.1 + 0.8 * u(rng);
  cfg.omega_min = 1e-7 * (1 + 10 * u(rng));
  cfg.omega_max = 1e-2 * (1 + 10 * u(rng));
  cfg.omega_points = 50 + static_cast<int>(300 * u(rng));
  cfg.substeps = 1 + static_cast<int>(3 * u(rng));
  cfg.seed = rng();
  return cfg;
}

void expect_config_error(const std::string& text, const std::string& fragment) {
  try {
    parse_config(text);
    FAIL("expected a config error for: " << text);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(fragment) != std::string::npos);
  }
}

// Integral of d_0 - sum d_n by midpoint sampling, no segment bookkeeping.
double integrate_net(const Scenario& sc, double step) {
  double v = 0.0;
  for (double t = 0.5 * step; t < sc.horizon; t += step) {
    const auto& s = sc.at(t);
    v += step * (s.inflow - s.offtakes.sum() - s.outflow);
  }
  return v;
}

}  // namespace

TEST_SUITE("scenarios") {

TEST_CASE("config text round trip on random configs") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const ChannelConfig cfg = random_config(rng);
    REQUIRE_NOTHROW(cfg.validate());
    const ChannelConfig back = parse_config(serialize_config(cfg));
    CHECK(back == cfg);
    CHECK(serialize_config(back) == serialize_config(cfg));
  }
}

TEST_CASE("missing keys take defaults") {
  const ChannelConfig cfg = parse_config(R"({"pools": [{"length": 4000}, {}]})");
  CHECK(cfg.pool_count() == 2);
  CHECK(cfg.pools[0].length == 4000.0);
  CHECK(cfg.pools[1] == [] { PoolParams p; p.index = 2; return p; }());
  CHECK(cfg.phase_margin == 50.0);
  CHECK(cfg.sample_time == 60.0);
  CHECK(cfg.design_order().nu == std::vector<int>{0});
}

TEST_CASE("malformed configs are config errors") {
  expect_config_error(R"({"pools": [{}, {}], "colour": 3})", "colour");
  expect_config_error(R"({"pools": [{}, {"depth": 3}]})", "depth");
  expect_config_error(R"({"pools": [{}]})", "two pools");
  expect_config_error(R"({"inflow": 3})", "pools");
  expect_config_error(R"({"pools": [{}, {}], "order": [2]})", "order");
  expect_config_error(R"({"pools": [{}, {}], "weights": [1, -1]})", "weights");
  expect_config_error(R"({"pools": [{}, {}], "offtakes": [6, 6]})", "offtakes");
  expect_config_error(R"({"pools": [{}, {"manning_n": 0}]})", "manning_n");
  expect_config_error(R"({"pools": [{}, {}], "phase_margin": 120})", "phase_margin");
  expect_config_error(R"({"pools": [{}, {}], "inflow": "lots"})", "config");
  expect_config_error(R"({"pools": [{}, {}],)", "config");
  CHECK_THROWS_AS(load_config("/nonexistent/channel.json"), ConfigError);
}

TEST_CASE("synthetic channels") {
  const ChannelConfig u = make_synthetic_channel(4, "uniform");
  CHECK(u.pool_count() == 4);
  for (const auto& p : u.pools) {
    CHECK(p.manning_n == doctest::Approx(0.0225));
    CHECK(p.side_slope == doctest::Approx(1.0 / 1.5));
  }
  const ChannelConfig t = make_synthetic_channel(7, "tapered");
  for (const auto& p : t.pools) {
    CHECK(p.length >= 4500.0);
    CHECK(p.length <= 16000.0);
  }
  for (int n = 1; n < 7; ++n) {
    CHECK(t.pools[n].bed_width < t.pools[n - 1].bed_width);
    CHECK(t.pools[n].h_ref < t.pools[n - 1].h_ref);
  }
  CHECK(t.outflow() == doctest::Approx(0.6 * t.inflow));
  CHECK_THROWS_AS(make_synthetic_channel(1, "uniform"), DomainError);
  CHECK_THROWS_AS(make_synthetic_channel(3, "wiggly"), DomainError);

  const ChannelConfig two = make_synthetic_channel(2, "uniform");
  const auto ch = linear_channel(two, steady_profiles(two));
  CHECK(ch.pools[0].capacity == doctest::Approx(ch.pools[1].capacity).epsilon(0.005));
}

TEST_CASE("random design orders are permutations and depend on the seed") {
  const DesignOrder a = random_design_order(9, 4), b = random_design_order(9, 4),
                    c = random_design_order(9, 5);
  CHECK(a.nu == b.nu);
  CHECK(a.nu != c.nu);
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("balanced equilibrium map") {
  const ChannelConfig cfg = make_synthetic_channel(5, "uniform");
  const auto ch = linear_channel(cfg, steady_profiles(cfg));
  const double csum = ch.capacities().sum();
  CHECK(balanced_equilibrium_map(cfg, {}, 0.0).norm() == 0.0);
  for (double dv : {-500.0, 800.0}) {
    const Eigen::VectorXd dh = balanced_equilibrium_map(cfg, {}, dv);
    for (Eigen::Index n = 0; n < 5; ++n) CHECK(dh(n) == doctest::Approx(dv / csum).epsilon(0.02));
  }
  const Eigen::VectorXd w = (Eigen::VectorXd(5) << 1.0, 1.2, 0.8, 1.0, 1.5).finished();
  const Eigen::VectorXd dh = balanced_equilibrium_map(cfg, w, 3000.0);
  const Eigen::VectorXd scaled = w.cwiseProduct(dh);
  CHECK(scaled.maxCoeff() - scaled.minCoeff() < 1e-12);

  const ChannelConfig ten = make_synthetic_channel(10, "uniform");
  const double dv = 5000.0;
  CHECK(balanced_equilibrium_map(cfg, {}, dv)(0) > balanced_equilibrium_map(ten, {}, dv)(0));

  const auto curve = balanced_equilibrium_curve(cfg, {}, 2e4, 9);
  for (Eigen::Index i = 1; i < 9; ++i)
    for (Eigen::Index n = 0; n < 5; ++n) CHECK(curve.level(i, n) > curve.level(i - 1, n));
  CHECK_THROWS_AS(balanced_equilibrium_map(cfg, {}, -1e9), DomainError);
}

TEST_CASE("standard scenario") {
  const double q0 = 10.0, h = 3600.0;
  const Scenario sc = make_standard_scenario(6, q0, 144 * h);
  CHECK_NOTHROW(sc.validate());
  CHECK(sc.pools() == 6);
  // Matched supply and demand before 12 h and after 108 h.
  for (double t : {0.0, 6 * h, 11.9 * h, 108 * h, 143 * h}) {
    const auto& s = sc.at(t);
    CHECK(s.inflow == doctest::Approx(s.offtakes.sum() + s.outflow));
  }
  CHECK(sc.at(20 * h).inflow - sc.at(20 * h).offtakes.sum() - sc.at(20 * h).outflow ==
        doctest::Approx(-0.05 * q0));
  CHECK(sc.at(80 * h).inflow - sc.at(80 * h).offtakes.sum() - sc.at(80 * h).outflow ==
        doctest::Approx(0.04 * q0));
  CHECK(sc.net_volume() == doctest::Approx(0.6 * h * q0));
  CHECK(integrate_net(sc, 60.0) == doctest::Approx(sc.net_volume()).epsilon(1e-9));
  // Offtake steps are present mid-scenario and gone at the end.
  CHECK(sc.at(40 * h).offtakes.sum() == doctest::Approx(0.07 * q0));
  CHECK(sc.at(100 * h).offtakes.sum() == 0.0);

  const Scenario folded = fold_scenario(sc, 3);
  CHECK(folded.pools() == 3);
  for (double t : {10 * h, 40 * h, 70 * h})
    CHECK(folded.at(t).offtakes.sum() + folded.at(t).outflow ==
          doctest::Approx(sc.at(t).offtakes.sum() + sc.at(t).outflow));
  CHECK(folded.net_volume() == doctest::Approx(sc.net_volume()));
  CHECK_THROWS_AS(fold_scenario(sc, 7), DomainError);

  Scenario bad = sc;
  bad.segments[2].start = bad.segments[1].start;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("digests and manifests") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const auto dir = std::filesystem::temp_directory_path() / "canal_manifest_test";
  std::filesystem::remove_all(dir);
  const std::string text = serialize_config(make_synthetic_channel(3, "uniform"));
  write_manifest(dir, "design", text, {{"seed", 7}});
  std::ifstream in(dir / "manifest.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.at("command") == "design");
  CHECK(j.at("config_sha256") == sha256_hex(text));
  CHECK(j.at("seeds").at("seed") == 7);
  CHECK(j.at("module_versions").size() == 7);
  std::filesystem::remove_all(dir);
}

}
