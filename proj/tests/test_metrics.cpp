#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "islsim/experiments.hpp"
#include "islsim/metrics.hpp"

using namespace islsim;
using Catch::Approx;

TEST_CASE("summary of a two-point sample", "[metrics]") {
  // mean 2, sample sd sqrt2, sem sd/sqrt2 = 1: all by hand
  Summary s = summarize({1.0, 3.0}, 42);
  REQUIRE(s.n == 2);
  REQUIRE(s.mean == Approx(2.0));
  REQUIRE(s.sem == Approx(1.0));
  // bootstrap resamples of {1,3} can only average within [1,3]
  REQUIRE(s.ci_lo >= 1.0);
  REQUIRE(s.ci_hi <= 3.0);
  REQUIRE(s.ci_lo <= s.mean);
  REQUIRE(s.ci_hi >= s.mean);

  SECTION("the bootstrap is seeded, so the CI is reproducible") {
    Summary t = summarize({1.0, 3.0}, 42);
    REQUIRE(t.ci_lo == s.ci_lo);
    REQUIRE(t.ci_hi == s.ci_hi);
  }
  SECTION("a singleton has zero spread") {
    Summary one = summarize({5.0}, 1);
    REQUIRE(one.mean == 5.0);
    REQUIRE(one.sem == 0.0);
  }
  SECTION("empty samples are rejected") {
    REQUIRE_THROWS_AS(summarize({}, 1), std::invalid_argument);
  }
}

TEST_CASE("survival counts strictly-above-floor cells", "[metrics]") {
  std::vector<std::vector<double>> trace = {{50.0, 30.0}, {70.0, 10.0}};
  REQUIRE(energy_survival_rate(trace, 40.0) == Approx(0.5));
  // sitting exactly on the floor does not count as surviving
  REQUIRE(energy_survival_rate({{40.0}}, 40.0) == 0.0);
  REQUIRE_THROWS_AS(energy_survival_rate({}, 40.0), std::invalid_argument);
}

TEST_CASE("flow violation is the demand-weighted shortfall", "[metrics]") {
  std::vector<Flow> flows = {{0, 0, 1, 10.0}, {1, 2, 3, 10.0}};
  REQUIRE(flow_violation_rate(flows, {10.0, 5.0}) == Approx(0.25));
  // surplus on one flow cannot pay for a deficit on another
  REQUIRE(flow_violation_rate(flows, {20.0, 5.0}) == Approx(0.25));
  REQUIRE(flow_violation_rate(flows, {10.0, 10.0}) == 0.0);
  REQUIRE_THROWS_AS(flow_violation_rate(flows, {1.0}), std::invalid_argument);
  std::vector<Flow> empty_demand = {{0, 0, 1, 0.0}};
  REQUIRE_THROWS_AS(flow_violation_rate(empty_demand, {0.0}),
                    std::invalid_argument);
}

TEST_CASE("efficiency handles the no-spend corner", "[metrics]") {
  REQUIRE(energy_efficiency(100.0, 10.0) == Approx(10.0));
  REQUIRE(energy_efficiency(100.0, 0.0) == 0.0);
}

TEST_CASE("residual series normalizes by the starting distance", "[metrics]") {
  std::vector<std::vector<double>> iterates = {{4.0}, {2.0}, {1.0}};
  auto r = residual_series(iterates, {0.0});
  REQUIRE(r.size() == 3);
  REQUIRE(r[0] == Approx(1.0));
  REQUIRE(r[1] == Approx(0.5));
  REQUIRE(r[2] == Approx(0.25));
  REQUIRE_THROWS_AS(residual_series({{0.0}}, {0.0}), std::invalid_argument);
}

TEST_CASE("plateau detection needs a sustained quiet stretch", "[metrics]") {
  std::vector<double> steps = {1.0, 1e-5, 1e-5, 1e-5};
  REQUIRE(plateau_index(steps, 1e-4, 3) == 4);
  // a single quiet step is not a plateau
  REQUIRE(plateau_index({1.0, 1e-5, 1.0, 1.0}, 1e-4, 3) == 4);
}

TEST_CASE("line fits recover exact lines", "[metrics]") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> y = {3.0, 5.0, 7.0, 9.0};  // y = 2x + 1
  auto f = linear_fit(x, y);
  REQUIRE(f.slope == Approx(2.0).epsilon(1e-12));
  REQUIRE(f.intercept == Approx(1.0).epsilon(1e-12));
  REQUIRE(f.r2 == Approx(1.0).epsilon(1e-12));

  SECTION("power laws straighten out in log space") {
    std::vector<double> px = {1.0, 4.0, 9.0, 16.0};
    std::vector<double> py;
    for (double v : px) py.push_back(5.0 / std::sqrt(v));
    auto g = loglog_fit(px, py);
    REQUIRE(g.slope == Approx(-0.5).epsilon(1e-9));
    REQUIRE(g.r2 == Approx(1.0).epsilon(1e-9));
  }
  SECTION("nonpositive points drop out of the log fit") {
    auto g = loglog_fit({1.0, 2.0, 3.0, 4.0}, {2.0, 0.0, 2.0 / 3.0, 0.5});
    REQUIRE(g.slope == Approx(-1.0).epsilon(1e-9));
  }
  SECTION("degenerate inputs are rejected") {
    REQUIRE_THROWS_AS(linear_fit({1.0}, {2.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(linear_fit({2.0, 2.0}, {1.0, 5.0}),
                      std::invalid_argument);
  }
}

TEST_CASE("trailing moving average", "[metrics]") {
  auto out = moving_average({1.0, 2.0, 3.0, 4.0, 5.0}, 3);
  REQUIRE(out[0] == Approx(1.0));
  REQUIRE(out[1] == Approx(1.5));
  REQUIRE(out[2] == Approx(2.0));
  REQUIRE(out[3] == Approx(3.0));
  REQUIRE(out[4] == Approx(4.0));
  REQUIRE_THROWS_AS(moving_average({1.0}, 0), std::invalid_argument);
}

TEST_CASE("derived seed lists are stable and collision-free", "[metrics]") {
  auto a = seed_list(123, 8);
  auto b = seed_list(123, 8);
  REQUIRE(a == b);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) REQUIRE(a[i] != a[j]);
  REQUIRE(seed_list(124, 8) != a);
}
