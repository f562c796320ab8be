#include <catch2/catch_amalgamated.hpp>

#include "islsim/experiments.hpp"
#include "islsim/verify.hpp"

TEST_CASE("headers compile and a tiny episode runs", "[smoke]") {
  islsim::Scenario sc = islsim::default_scenario();
  sc.cons.num_sats = 8;
  sc.cons.num_planes = 4;
  sc.slots = 2;
  sc.traffic.num_flows = 3;
  sc.solver.outer_iters = 5;
  sc.solver.inner_iters = 5;
  sc.finalize();
  auto ep = islsim::run_episode(sc, islsim::Variant::v3, 1);
  REQUIRE(ep.battery_j.size() == 8);
  REQUIRE(ep.battery_j[0].size() == 2);
}
