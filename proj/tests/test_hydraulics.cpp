#include <doctest.h>

#include <random>

#include "canal/hydraulics.hpp"
#include "oracles.hpp"

using namespace canal;

TEST_SUITE("hydraulics") {

TEST_CASE("area from level: closed-form cases") {
  PoolParams p;
  CHECK(area_from_level(0.0, p) == 0.0);
  PoolParams rect = p;
  rect.side_slope = 0.0;
  CHECK(area_from_level(1.5, rect) == doctest::Approx(15.0).epsilon(1e-14));
  CHECK(area_from_level(1.5, p) == doctest::Approx(16.5).epsilon(1e-14));
  CHECK(level_from_area(15.0, rect) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK_THROWS_AS(area_from_level(-0.1, p), DomainError);
  CHECK_THROWS_AS(level_from_area(-1.0, p), DomainError);
}

TEST_CASE("level/area round trip on random sections") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> wb(0.5, 40.0), ss(0.0, 3.0), hh(0.0, 8.0);
  for (int i = 0; i < 1000; ++i) {
    PoolParams p;
    p.bed_width = wb(rng);
    p.side_slope = i % 10 == 0 ? 0.0 : ss(rng);
    const double h = hh(rng);
    const double back = level_from_area(area_from_level(h, p), p);
    CHECK(std::abs(back - h) <= 1e-12 * std::max(h, 1e-300) + 1e-300);
  }
}

TEST_CASE("friction slope") {
  PoolParams p;
  const double A = area_from_level(1.5, p);
  CHECK(friction_slope(A, 0.0, p) == 0.0);
  CHECK(friction_slope(A, 20.0, p) == doctest::Approx(4 * friction_slope(A, 10.0, p)).epsilon(1e-13));
  CHECK(friction_slope(A, -10.0, p) == friction_slope(A, 10.0, p));

  // Hand evaluation at h = 1.5, Q = 10.
  const double P = 10.0 + 2 * 1.5 * std::sqrt(1 + 4.0 / 9.0);
  const double R = 16.5 / P;
  const double expected = 0.0225 * 0.0225 * 100.0 / (16.5 * 16.5 * std::pow(R, 4.0 / 3.0));
  CHECK(friction_slope(A, 10.0, p) == doctest::Approx(expected).epsilon(1e-13));
  CHECK_THROWS_AS(friction_slope(0.0, 1.0, p), DomainError);
}

TEST_CASE("pressure coefficient") {
  PoolParams rect;
  rect.side_slope = 0.0;
  CHECK(pressure_coefficient(area_from_level(1.7, rect), rect) == doctest::Approx(1.7));
  PoolParams p;
  CHECK(pressure_coefficient(1e-12, p) < 1e-12);
  CHECK(pressure_coefficient(area_from_level(1.0, p), p) ==
        doctest::Approx((10.0 + 2.0 / 3.0) / (10.0 + 4.0 / 3.0)).epsilon(1e-14));
  CHECK_THROWS_AS(pressure_coefficient(0.0, p), DomainError);
}

TEST_CASE("steady profile with no flow is a horizontal surface") {
  PoolParams p;
  const auto prof = solve_steady_profile(p, 0.0, 50);
  for (Eigen::Index i = 0; i < prof.x.size(); ++i) {
    const double h = level_from_area(prof.area(i), p);
    CHECK(std::abs(h - (p.h_ref - p.bed_slope * (p.length - prof.x(i)))) < 1e-10);
  }
}

TEST_CASE("normal-depth boundary gives a uniform profile") {
  PoolParams p;
  const double An = oracle::normal_area(10.0, p.bed_slope, {p.bed_width, p.side_slope, p.manning_n});
  p.h_ref = level_from_area(An, p);
  const auto prof = solve_steady_profile(p, 10.0, 40);
  CHECK((prof.area.array() - An).abs().maxCoeff() < 1e-7 * An);
}

TEST_CASE("backwater profile converges under grid refinement") {
  PoolParams p;
  const auto coarse = solve_steady_profile(p, 10.0, 50);
  const auto fine = solve_steady_profile(p, 10.0, 500);
  for (Eigen::Index i = 0; i < coarse.x.size(); ++i) {
    const double hc = level_from_area(coarse.area(i), p);
    const double hf = level_from_area(fine.area(10 * i), p);
    CHECK(std::abs(hc - hf) < 1e-3);
  }
  const auto doubled = solve_steady_profile(p, 10.0, 100);
  CHECK(std::abs(doubled.volume - coarse.volume) < 1e-4 * coarse.volume);
}

TEST_CASE("backwater profile residual and shape") {
  PoolParams p;
  const auto prof = solve_steady_profile(p, 10.0, 400);
  // Sf(A_ref) < S0 here: the backed-up surface deepens toward the gate.
  const oracle::Trapezoid t{p.bed_width, p.side_slope, p.manning_n};
  CHECK(oracle::friction(prof.area(400), 10.0, t) < p.bed_slope);
  for (Eigen::Index i = 1; i < prof.x.size(); ++i) CHECK(prof.area(i) > prof.area(i - 1));
  // Five-point residual of the ODE at interior nodes.
  const double dx = prof.spacing();
  for (Eigen::Index i = 2; i + 2 < prof.x.size(); i += 37) {
    const double A = prof.area(i);
    const double slope = (-prof.area(i + 2) + 8 * prof.area(i + 1) - 8 * prof.area(i - 1) +
                          prof.area(i - 2)) / (12 * dx);
    const double w = oracle::top(oracle::level(A, t), t);
    const double V = 10.0 / A;
    const double rhs = oracle::g * A * (p.bed_slope - oracle::friction(A, 10.0, t)) /
                       (oracle::g * A / w - V * V);
    CHECK(std::abs(slope - rhs) < 1e-8 * std::abs(rhs));
  }
}

TEST_CASE("transcritical profile reports its location") {
  PoolParams p;
  p.h_ref = 0.3;
  try {
    solve_steady_profile(p, 30.0, 50);
    FAIL("expected a transcritical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("x =") != std::string::npos);
  }
}

TEST_CASE("parameter validation names the field") {
  PoolParams p;
  p.manning_n = 0.0;
  try {
    p.validate();
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("manning_n") != std::string::npos);
  }
}

}
