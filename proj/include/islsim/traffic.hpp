#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "islsim/constellation.hpp"
#include "islsim/link.hpp"
#include "islsim/rng.hpp"

namespace islsim {

struct Flow {
  int id = 0;
  int src = 0;
  int dst = 0;
  double demand_bps = 0.0;
};

struct TrafficParams {
  int num_flows = 24;
  double intensity = 0.65;  // aggregate demand / aggregate 1-hop capacity
};

// Sum over directed links of the rate each could carry alone under the
// per-satellite budget. The scale demands are normalized against.
inline double aggregate_single_hop_capacity(const Topology& topo,
                                            const LinkParams& lp) {
  double total = 0.0;
  for (const auto& l : topo.links)
    total += max_rate_under_bound(lp.max_power_w, l.kappa_w, lp.bandwidth_hz);
  return total;
}

// Endpoint pairs drawn uniformly (src != dst), per-flow weights jittered in
// [0.5, 1.5], then the whole set rescaled so the aggregate demand hits
// intensity * aggregate_single_hop_capacity. Same seed, same flows.
inline std::vector<Flow> generate_flows(std::uint64_t seed, int num_sats,
                                        const TrafficParams& tp,
                                        double capacity_scale_bps) {
  if (tp.num_flows <= 0) throw std::invalid_argument("need at least one flow");
  if (num_sats < 2) throw std::invalid_argument("need at least two satellites");
  if (tp.intensity <= 0.0) throw std::invalid_argument("intensity must be > 0");

  auto eng = make_engine(seed, RngStream::traffic);
  std::uniform_int_distribution<int> pick(0, num_sats - 1);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);

  std::vector<Flow> flows(tp.num_flows);
  double weight_sum = 0.0;
  for (int i = 0; i < tp.num_flows; ++i) {
    int s = pick(eng);
    int d = pick(eng);
    while (d == s) d = pick(eng);
    flows[i] = {i, s, d, jitter(eng)};
    weight_sum += flows[i].demand_bps;
  }
  double scale = tp.intensity * capacity_scale_bps / weight_sum;
  for (auto& f : flows) f.demand_bps *= scale;
  return flows;
}

// Net imbalance of one flow at one node: outflow - inflow - injection, where
// injection is +demand at the source and -demand at the sink. Zero everywhere
// means the flow is perfectly routed. `rates_bps[l]` carries this flow's rate
// on directed link l of the topology.
inline double conservation_residual(const Topology& topo, const Flow& flow,
                                    const std::vector<double>& rates_bps,
                                    int node) {
  double out = 0.0, in = 0.0;
  for (int l = topo.first_link[node]; l < topo.first_link[node + 1]; ++l)
    out += rates_bps[l];
  for (int l = 0; l < static_cast<int>(topo.links.size()); ++l)
    if (topo.links[l].to == node) in += rates_bps[l];
  double injection = node == flow.src   ? flow.demand_bps
                     : node == flow.dst ? -flow.demand_bps
                                        : 0.0;
  return out - in - injection;
}

}  // namespace islsim
