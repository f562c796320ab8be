#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "islsim/metrics.hpp"
#include "islsim/scenario.hpp"

namespace islsim {

// One directed link's allocation in one slot, for the solution table.
struct SolutionRow {
  int satellite;
  int slot;
  int neighbor;
  double rate_bps;
  double power_w;
};

struct EpisodeResult {
  // post-step charge per satellite per slot, plus illumination and depletion
  std::vector<std::vector<double>> battery_j;   // [m][t]
  std::vector<std::vector<char>> illuminated;   // [m][t]
  std::vector<double> delivered_bps;            // per flow, slot average
  std::vector<Flow> flows;
  std::vector<SolutionRow> solution;            // filled when requested
  std::vector<std::vector<double>> step_norms;  // per slot, per outer round
  std::vector<std::pair<int, int>> slot_iters;  // (slot, iterations used)
  double delivered_bits = 0.0;
  double isl_energy_j = 0.0;
  int non_converged_slots = 0;
  bool floor_crossed = false;  // any post-step charge <= floor

  double esr(double floor_j) const {
    return energy_survival_rate(battery_j, floor_j);
  }
  double fvr() const { return flow_violation_rate(flows, delivered_bps); }
  double ee() const { return energy_efficiency(delivered_bits, isl_energy_j); }
};

// Simulate `scenario.slots` slots under one variant. Per slot: rebuild the
// +Grid for the current geometry, set each satellite's budget and stress
// coefficient from its battery, solve the slot game warm-started from the
// previous rate profile, then integrate the batteries. Quasi-static:
// the game sees the charge at slot start, the charge moves afterwards.
inline EpisodeResult run_episode(const Scenario& sc, Variant variant,
                                 std::uint64_t seed,
                                 bool keep_solution = false) {
  Constellation cons(sc.cons);
  EpisodeResult ep;
  int M = sc.cons.num_sats;
  int F = sc.traffic.num_flows;
  double B = sc.link.bandwidth_hz;
  double De = sc.cons.slot_seconds;

  // flows are scaled against the slot-0 geometry
  auto st0 = cons.propagate(0);
  Topology topo0 = build_topology(cons, st0);
  for (auto& l : topo0.links) l.kappa_w = kappa_w(l.distance_m, sc.link);
  double cap_scale = aggregate_single_hop_capacity(topo0, sc.link);
  ep.flows = generate_flows(seed, M, sc.traffic, cap_scale);

  ep.battery_j.assign(M, std::vector<double>(sc.slots, 0.0));
  ep.illuminated.assign(M, std::vector<char>(sc.slots, 1));
  ep.delivered_bps.assign(F, 0.0);

  std::vector<double> charge(M, sc.energy.initial_j);
  std::vector<double> warm_y;  // profile carries over; prices start cold each
                               // slot (the problem changes under them)

  for (int t = 0; t < sc.slots; ++t) {
    auto st = t == 0 ? st0 : cons.propagate(t);
    Topology topo = t == 0 ? std::move(topo0) : build_topology(cons, st);
    if (t != 0)
      for (auto& l : topo.links) l.kappa_w = kappa_w(l.distance_m, sc.link);

    SlotProblem prob = make_slot_problem(topo, ep.flows, sc.link);
    for (int m = 0; m < M; ++m) {
      prob.bound_w[m] =
          variant_bound(variant, st[m], charge[m], sc.energy, sc.link.max_power_w);
      if (variant_penalty(variant)) {
        double denom = charge[m] - sc.energy.floor_j + sc.game.safety_margin_j;
        if (denom < sc.game.safety_margin_j) denom = sc.game.safety_margin_j;
        prob.cpen[m] = sc.game.penalty_weight / denom;
      }
    }

    int dim = prob.num_links() * F;
    std::vector<double> y0(dim, 0.0);
    if (static_cast<int>(warm_y.size()) == dim) y0 = warm_y;
    SlotResult sol = hbag_slot(prob, std::move(y0), {}, sc.solver,
                               /*record_history=*/false);
    if (!sol.converged) ++ep.non_converged_slots;
    ep.slot_iters.push_back({t, sol.iterations});
    ep.step_norms.push_back(sol.step_norms);

    // per-link aggregates, battery integration, delivery accounting
    std::vector<double> isl_power(M, 0.0);
    for (int l = 0; l < prob.num_links(); ++l) {
      double r_norm = prob.link_total(sol.y, l);
      double rate = r_norm * B;
      double pw = power_for_rate(rate, prob.kappa_w[l], B);
      const DirectedLink& lk = topo.links[l];
      isl_power[lk.from] += pw;
      if (keep_solution) ep.solution.push_back({lk.from, t, lk.to, rate, pw});
      ep.isl_energy_j += pw * De;
    }
    for (int f = 0; f < F; ++f) {
      int dst = ep.flows[f].dst;
      double net = 0.0;
      for (int l = 0; l < prob.num_links(); ++l) {
        if (topo.links[l].to == dst) net += sol.y[l * F + f];
        if (topo.links[l].from == dst) net -= sol.y[l * F + f];
      }
      double bps = std::max(0.0, net * B);
      ep.delivered_bps[f] += bps / sc.slots;
      ep.delivered_bits += bps * De;
    }
    for (int m = 0; m < M; ++m) {
      double h = harvest_power(st[m].illuminated, st[m].sun_elev, sc.energy);
      charge[m] = step_battery(charge[m], h, isl_power[m], De, sc.energy);
      ep.battery_j[m][t] = charge[m];
      ep.illuminated[m][t] = st[m].illuminated ? 1 : 0;
      if (charge[m] <= sc.energy.floor_j) ep.floor_crossed = true;
    }

    warm_y = std::move(sol.y);
  }
  return ep;
}

}  // namespace islsim
