#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "islsim/constellation.hpp"
#include "islsim/link.hpp"
#include "islsim/traffic.hpp"

namespace islsim {

struct GameParams {
  double energy_weight = 1e-3;   // alpha
  double penalty_weight = 0.2;   // lambda_m(t), broadcast over (m,t)
  double safety_margin_j = 0.2;  // epsilon in the penalty denominator
};

// One slot of the rate game. Decision variables are per-flow rates on the
// directed links, Y[l * F + f] in bits/s; the aggregate link rate is the sum
// over flows. Batteries are quasi-static within the slot: the utility reads
// the charge, it does not move it.
struct SlotGame {
  const Topology* topo = nullptr;
  const std::vector<Flow>* flows = nullptr;
  double bandwidth_hz = 10e9;
  double slot_seconds = 15.0;
  GameParams gp;
  double floor_j = 40e3;
  std::vector<double> battery_j;          // per satellite
  std::vector<double> duals;              // node-flow prices, [node * F + f]
  std::vector<double> power_bound_w;      // per-satellite budget this slot

  int num_flows() const { return static_cast<int>(flows->size()); }
  int num_links() const { return static_cast<int>(topo->links.size()); }
  double dual(int node, int f) const {
    return duals.empty() ? 0.0 : duals[node * num_flows() + f];
  }
  double link_rate(const std::vector<double>& y, int l) const {
    double r = 0.0;
    int F = num_flows();
    for (int f = 0; f < F; ++f) r += y[l * F + f];
    return r;
  }
};

// lambda / (C - floor + eps). The strict form used by the utility refuses a
// nonpositive denominator; the floored form is what the simulator uses once
// baselines have driven the charge below the floor and the game must still
// evaluate (the coefficient saturates at lambda / eps).
inline double penalty_coefficient(const SlotGame& g, int m) {
  double denom = g.battery_j[m] - g.floor_j + g.gp.safety_margin_j;
  if (denom <= 0.0)
    throw std::domain_error("battery below floor by more than the margin");
  return g.gp.penalty_weight / denom;
}

inline double penalty_coefficient_floored(const SlotGame& g, int m) {
  double denom = g.battery_j[m] - g.floor_j + g.gp.safety_margin_j;
  if (denom < g.gp.safety_margin_j) denom = g.gp.safety_margin_j;
  return g.gp.penalty_weight / denom;
}

// Utility of satellite m: throughput, minus the weighted energy bill, minus
// the battery stress penalty, minus the flow prices its rates incur.
inline double utility(const SlotGame& g, const std::vector<double>& y, int m) {
  const Topology& topo = *g.topo;
  int F = g.num_flows();
  double thr = 0.0, pw = 0.0, dual_cost = 0.0;
  for (int l = topo.first_link[m]; l < topo.first_link[m + 1]; ++l) {
    double r = g.link_rate(y, l);
    thr += r;
    pw += power_for_rate(r, topo.links[l].kappa_w, g.bandwidth_hz);
    int n = topo.links[l].to;
    for (int f = 0; f < F; ++f)
      dual_cost += y[l * F + f] * (g.dual(m, f) - g.dual(n, f));
  }
  double pen = penalty_coefficient(g, m);
  return thr - g.gp.energy_weight * g.slot_seconds * pw - pen * pw - dual_cost;
}

// The common function every unilateral utility change equals a change of.
// Written out independently of utility() on purpose: the tests compare the
// two numerically rather than trusting one definition twice.
inline double potential(const SlotGame& g, const std::vector<double>& y) {
  const Topology& topo = *g.topo;
  int F = g.num_flows();
  double acc = 0.0;
  for (int m = 0; m < topo.num_sats; ++m) {
    double pw = 0.0;
    for (int l = topo.first_link[m]; l < topo.first_link[m + 1]; ++l) {
      double r = g.link_rate(y, l);
      pw += power_for_rate(r, topo.links[l].kappa_w, g.bandwidth_hz);
      acc += r;
      int n = topo.links[l].to;
      for (int f = 0; f < F; ++f)
        acc -= y[l * F + f] * (g.dual(m, f) - g.dual(n, f));
    }
    acc -= (g.gp.energy_weight * g.slot_seconds + penalty_coefficient(g, m)) * pw;
  }
  return acc;
}

// |(U_m(y') - U_m(y)) - (Phi(y') - Phi(y))| for a deviation y -> y' that only
// touches m's coordinates. Exactness means this is zero up to roundoff.
inline double verify_exact_potential(const SlotGame& g,
                                     const std::vector<double>& y, int m,
                                     const std::vector<double>& y_dev) {
  double du = utility(g, y_dev, m) - utility(g, y, m);
  double dphi = potential(g, y_dev) - potential(g, y);
  return std::abs(du - dphi);
}

// dPhi/dy for one coordinate (directed link l, flow f). Identical to
// dU_{owner}/dy by the exactness property.
inline double potential_gradient(const SlotGame& g, const std::vector<double>& y,
                                 int l, int f) {
  const DirectedLink& lk = g.topo->links[l];
  double r = g.link_rate(y, l);
  double dp = power_rate_derivatives(r, lk.kappa_w, g.bandwidth_hz).first;
  double c_eff = g.gp.energy_weight * g.slot_seconds +
                 penalty_coefficient(g, lk.from);
  return 1.0 - c_eff * dp - (g.dual(lk.from, f) - g.dual(lk.to, f));
}

// Feasibility projection used everywhere a profile must be made admissible:
//   1. clip each flow component into [0, demand]
//   2. cap each link's aggregate rate at what link_share * bound affords,
//      shrinking that link's components proportionally
//   3. if a satellite's total power still exceeds its budget, scale the
//      per-link POWERS by a common factor and re-invert to rates
// Not the Euclidean projection, but cheap, deterministic, and idempotent.
inline void project_feasible(const SlotGame& g, double link_share,
                             std::vector<double>& y) {
  const Topology& topo = *g.topo;
  int F = g.num_flows();
  for (int l = 0; l < g.num_links(); ++l)
    for (int f = 0; f < F; ++f) {
      double cap = (*g.flows)[f].demand_bps;
      double& v = y[l * F + f];
      if (v < 0.0) v = 0.0;
      if (v > cap) v = cap;
    }
  for (int m = 0; m < topo.num_sats; ++m) {
    double bound = g.power_bound_w[m];
    // per-link gate
    for (int l = topo.first_link[m]; l < topo.first_link[m + 1]; ++l) {
      double rcap = max_rate_under_bound(link_share * bound,
                                         topo.links[l].kappa_w, g.bandwidth_hz);
      double r = g.link_rate(y, l);
      if (r > rcap && r > 0.0) {
        double s = rcap / r;
        for (int f = 0; f < F; ++f) y[l * F + f] *= s;
      }
    }
    // satellite budget
    double total = 0.0;
    int deg = topo.first_link[m + 1] - topo.first_link[m];
    std::vector<double> pw(deg);
    for (int i = 0; i < deg; ++i) {
      int l = topo.first_link[m] + i;
      pw[i] = power_for_rate(g.link_rate(y, l), topo.links[l].kappa_w,
                             g.bandwidth_hz);
      total += pw[i];
    }
    if (total > bound && total > 0.0) {
      double s = bound / total;
      for (int i = 0; i < deg; ++i) {
        int l = topo.first_link[m] + i;
        double r_old = g.link_rate(y, l);
        if (r_old <= 0.0) continue;
        double r_new = max_rate_under_bound(pw[i] * s, topo.links[l].kappa_w,
                                            g.bandwidth_hz);
        double f_scale = r_new / r_old;
        for (int f = 0; f < F; ++f) y[l * F + f] *= f_scale;
      }
    }
  }
}

inline void project_feasible(const SlotGame& g, std::vector<double>& y) {
  project_feasible(g, 1.0, y);
}

// Stationary point of r - c_eff * P(r) - dual_gap * r on [0, r_cap]:
//   r* = B log2((1 - dual_gap) B / (c_eff kappa ln 2)), clipped.
// c_eff > 0 keeps the problem strictly concave; a price gap of 1 or more
// makes transmitting worthless and the response is 0.
inline double analytic_best_response(double c_eff, double dual_gap,
                                     double kappa, double bandwidth_hz,
                                     double r_cap) {
  if (c_eff <= 0.0)
    throw std::domain_error("effective energy price must be positive");
  if (kappa <= 0.0 || bandwidth_hz <= 0.0)
    throw std::domain_error("kappa and bandwidth must be positive");
  double gain = 1.0 - dual_gap;
  if (gain <= 0.0) return 0.0;
  double r = bandwidth_hz *
             std::log2(gain * bandwidth_hz / (c_eff * kappa * kLn2));
  if (r < 0.0) return 0.0;
  if (r > r_cap) return r_cap;
  return r;
}

}  // namespace islsim
