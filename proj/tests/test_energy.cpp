#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "islsim/constellation.hpp"  // kPi
#include "islsim/energy.hpp"

using namespace islsim;
using Catch::Approx;

TEST_CASE("battery step integrates net power over the slot", "[energy]") {
  EnergyParams ep;
  ep.base_load_w = 55.0;

  // 45 in, 50 + 55 out: net -60 W for 15 s is -900 J, computed by hand.
  REQUIRE(step_battery(10000.0, 45.0, 50.0, 15.0, ep) == Approx(9100.0));

  SECTION("deficits bottom out at zero, never negative") {
    REQUIRE(step_battery(100.0, 0.0, 50.0, 15.0, ep) == 0.0);
  }
  SECTION("surplus clamps at capacity") {
    REQUIRE(step_battery(ep.capacity_j - 1.0, 2000.0, 0.0, 15.0, ep) ==
            ep.capacity_j);
  }
  SECTION("zero net power holds the charge exactly") {
    REQUIRE(step_battery(5000.0, 105.0, 50.0, 15.0, ep) == 5000.0);
  }
  SECTION("negative transmit power is rejected") {
    REQUIRE_THROWS_AS(step_battery(5000.0, 0.0, -1.0, 15.0, ep),
                      std::invalid_argument);
  }
}

TEST_CASE("harvest follows the panel incidence", "[energy]") {
  EnergyParams ep;  // 2.5 m2, 30 %, 1361 W/m2
  REQUIRE(harvest_power(false, 1.0, ep) == 0.0);
  REQUIRE(harvest_power(true, 0.0, ep) == 0.0);
  // peak incidence: 0.3 * 1361 * 2.5 = 1020.75 W
  REQUIRE(harvest_power(true, kPi / 2.0, ep) == Approx(1020.75).epsilon(1e-12));
  // sin below the horizon clamps instead of going negative
  REQUIRE(harvest_power(true, -0.3, ep) == 0.0);
}

TEST_CASE("eclipse-aware power budget", "[energy]") {
  SECTION("dark: ration the charge over the time left in shadow") {
    // 10500 J over 2100 s is 5 W, well under the cap
    REQUIRE(dynamic_power_bound(10500.0, false, 0.0, 2100.0, 100.0) ==
            Approx(5.0));
  }
  SECTION("lit: harvest plus the reserve ration, capped by hardware") {
    // 3 + 10500/2100 = 8 W, inside the 10 W cap
    REQUIRE(dynamic_power_bound(10500.0, true, 3.0, 2100.0, 10.0) ==
            Approx(8.0));
    // push the ration past the cap and the cap wins
    REQUIRE(dynamic_power_bound(1e9, true, 3.0, 2100.0, 10.0) == 10.0);
  }
  SECTION("no eclipse on the orbit: budget degenerates to the cap") {
    double inf = std::numeric_limits<double>::infinity();
    REQUIRE(dynamic_power_bound(10500.0, true, 3.0, inf, 10.0) == 10.0);
    REQUIRE(dynamic_power_bound(0.0, false, 0.0, inf, 10.0) == 10.0);
  }
  SECTION("a drained pack gets no budget in the dark") {
    REQUIRE(dynamic_power_bound(0.0, false, 0.0, 2100.0, 10.0) == 0.0);
    // charge can arrive slightly negative from upstream roundoff
    REQUIRE(dynamic_power_bound(-1e-9, false, 0.0, 2100.0, 10.0) == 0.0);
  }
  SECTION("nonpositive horizon is a caller bug") {
    REQUIRE_THROWS_AS(dynamic_power_bound(100.0, false, 0.0, 0.0, 10.0),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(dynamic_power_bound(100.0, true, 5.0, -3.0, 10.0),
                      std::invalid_argument);
  }
}

TEST_CASE("energy parameter validation", "[energy]") {
  EnergyParams ep;
  REQUIRE_NOTHROW(ep.validate());
  SECTION("floor must sit below the initial charge") {
    ep.floor_j = ep.initial_j;
    REQUIRE_THROWS_AS(ep.validate(), std::invalid_argument);
  }
  SECTION("initial charge must fit the pack") {
    ep.initial_j = ep.capacity_j * 1.01;
    REQUIRE_THROWS_AS(ep.validate(), std::invalid_argument);
  }
  SECTION("efficiency beyond 1 is nonsense") {
    ep.panel_efficiency = 1.2;
    REQUIRE_THROWS_AS(ep.validate(), std::invalid_argument);
  }
}
