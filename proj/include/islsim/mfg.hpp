#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "islsim/energy.hpp"
#include "islsim/game.hpp"
#include "islsim/link.hpp"

namespace islsim {

// Uniform 1-D grid over the battery interval. Densities are per-joule values
// at cell centers; a proper density sums to 1 after multiplying by dc().
struct BatteryGrid {
  double lo = 40e3;
  double hi = 400e3;
  int cells = 200;

  double dc() const { return (hi - lo) / cells; }
  double center(int i) const { return lo + (i + 0.5) * dc(); }
  int cell_of(double c) const {
    int i = static_cast<int>((c - lo) / dc());
    return std::clamp(i, 0, cells - 1);
  }
};

inline std::vector<double> empirical_measure(const std::vector<double>& samples,
                                             const BatteryGrid& g) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  std::vector<double> mu(g.cells, 0.0);
  double w = 1.0 / (samples.size() * g.dc());
  for (double s : samples) mu[g.cell_of(s)] += w;
  return mu;
}

// W1 between two grid densities: the integral of the CDF gap. Exact optimal
// transport in one dimension for measures living on the cell centers.
inline double wasserstein1(const std::vector<double>& mu1,
                           const std::vector<double>& mu2,
                           const BatteryGrid& g) {
  if (static_cast<int>(mu1.size()) != g.cells ||
      static_cast<int>(mu2.size()) != g.cells)
    throw std::invalid_argument("density/grid size mismatch");
  double dc = g.dc(), f1 = 0.0, f2 = 0.0, acc = 0.0;
  for (int i = 0; i < g.cells; ++i) {
    f1 += mu1[i] * dc;
    f2 += mu2[i] * dc;
    acc += std::abs(f1 - f2) * dc;
  }
  return acc;
}

// W1 between weighted point sets (weights need not be uniform but must sum to
// one each). CDF-difference integral over the merged support.
inline double wasserstein1_discrete(std::vector<double> x,
                                    std::vector<double> wx,
                                    std::vector<double> y,
                                    std::vector<double> wy) {
  if (x.size() != wx.size() || y.size() != wy.size() || x.empty() || y.empty())
    throw std::invalid_argument("bad point-set inputs");
  std::vector<std::pair<double, double>> ev;  // (position, +dF1 or -dF2)
  for (std::size_t i = 0; i < x.size(); ++i) ev.push_back({x[i], wx[i]});
  for (std::size_t j = 0; j < y.size(); ++j) ev.push_back({y[j], -wy[j]});
  std::sort(ev.begin(), ev.end());
  double gap = 0.0, acc = 0.0;
  for (std::size_t k = 0; k + 1 < ev.size(); ++k) {
    gap += ev[k].second;
    acc += std::abs(gap) * (ev[k + 1].first - ev[k].first);
  }
  return acc;
}

// Mean-field environment: one representative link and the reference orbit's
// harvest/eclipse schedule, everything a policy needs at (charge, time).
struct MfgEnv {
  BatteryGrid grid;
  double dt_s = 15.0;
  int steps = 360;              // horizon T = steps * dt
  double kappa_w = 1.0;         // representative link coefficient
  double bandwidth_hz = 10e9;
  double p_max_w = 10.0;
  double base_load_w = 55.0;
  GameParams gp;
  double slot_seconds = 15.0;   // D_e inside c_eff
  double crowding_weight = 0.05;  // kappa_mfg
  // schedule callbacks, indexed by time step
  std::function<bool(int)> illuminated;
  std::function<double(int)> harvest_w;
  std::function<double(int)> eclipse_horizon_s;

  double floor_j() const { return grid.lo; }
  double c_eff(double charge) const {
    double denom = charge - floor_j() + gp.safety_margin_j;
    if (denom < gp.safety_margin_j) denom = gp.safety_margin_j;
    return gp.energy_weight * slot_seconds + gp.penalty_weight / denom;
  }
  double rate_cap(double charge, int t) const {
    double bound = dynamic_power_bound(charge, illuminated(t), harvest_w(t),
                                       eclipse_horizon_s(t), p_max_w);
    return max_rate_under_bound(bound, kappa_w, bandwidth_hz);
  }
};

// Crowding cost d(c, mu) = W1(delta_c, mu) for every cell center, via prefix
// sums of the CDF: d_i = sum_{j<i} F_j dc + sum_{j>=i} (1 - F_j) dc.
inline std::vector<double> crowding_distance(const std::vector<double>& mu,
                                             const BatteryGrid& g) {
  int n = g.cells;
  double dc = g.dc();
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += mu[i] * dc;
    cdf[i] = acc;
  }
  std::vector<double> suffix(n + 1, 0.0);
  for (int i = n - 1; i >= 0; --i) suffix[i] = suffix[i + 1] + (1.0 - cdf[i]) * dc;
  std::vector<double> d(n);
  double prefix = 0.0;
  for (int i = 0; i < n; ++i) {
    d[i] = prefix + suffix[i];
    prefix += cdf[i] * dc;
  }
  return d;
}

struct HjbResult {
  // [t][i]: value at step t, cell i; policy maximizing the step at (t, i)
  std::vector<std::vector<double>> value;
  std::vector<std::vector<double>> policy;
};

// Backward semi-Lagrangian sweep of the control problem: at each (t, c) the
// running reward is R - c_eff(c) P(R) - crowding, the battery drifts at
// harvest - P(R) - base load, and the inner max is the analytic best response
// with the value slope folded into the energy price. An explicit viscous
// smoothing with coefficient nu is applied between steps (nu = 0 is fine).
inline HjbResult solve_hjb(const MfgEnv& env,
                           const std::vector<std::vector<double>>& mu_path,
                           double nu) {
  const BatteryGrid& g = env.grid;
  int n = g.cells, T = env.steps;
  double dc = g.dc(), dt = env.dt_s;
  if (static_cast<int>(mu_path.size()) < T)
    throw std::invalid_argument("density path shorter than the horizon");
  if (nu > 0.0 && nu * dt / (dc * dc) > 0.5)
    throw std::invalid_argument("viscous step unstable: need nu*dt/dc^2 <= 1/2");

  HjbResult out;
  out.value.assign(T + 1, std::vector<double>(n, 0.0));
  out.policy.assign(T, std::vector<double>(n, 0.0));

  std::vector<double> smoothed(n), slope(n);
  for (int t = T - 1; t >= 0; --t) {
    const std::vector<double>& vnext = out.value[t + 1];
    // diffuse the continuation value (reflecting ends)
    for (int i = 0; i < n; ++i) {
      double up = i + 1 < n ? vnext[i + 1] : vnext[i];
      double dn = i > 0 ? vnext[i - 1] : vnext[i];
      smoothed[i] = vnext[i] + nu * dt / (dc * dc) * (up - 2.0 * vnext[i] + dn);
    }
    for (int i = 0; i < n; ++i) {
      double up = i + 1 < n ? smoothed[i + 1] : smoothed[i];
      double dn = i > 0 ? smoothed[i - 1] : smoothed[i];
      slope[i] = (up - dn) / ((i > 0 && i + 1 < n) ? 2.0 * dc : dc);
    }
    std::vector<double> crowd = crowding_distance(mu_path[t], g);
    double h = env.harvest_w(t);
    for (int i = 0; i < n; ++i) {
      double c = g.center(i);
      double cap = env.rate_cap(c, t);
      double price = env.c_eff(c) + slope[i];
      double r = price > 0.0 ? analytic_best_response(price, 0.0, env.kappa_w,
                                                      env.bandwidth_hz, cap)
                             : cap;
      double pw = power_for_rate(r, env.kappa_w, env.bandwidth_hz);
      double reward = r - env.c_eff(c) * pw - env.crowding_weight * crowd[i];
      double target = c + dt * (h - pw - env.base_load_w);
      target = std::clamp(target, g.lo, g.hi);
      // linear interpolation of the smoothed continuation at the target
      double pos = (target - g.lo) / dc - 0.5;
      int j = static_cast<int>(std::floor(pos));
      double w = pos - j;
      double v_lo = smoothed[std::clamp(j, 0, n - 1)];
      double v_hi = smoothed[std::clamp(j + 1, 0, n - 1)];
      out.value[t][i] = dt * reward + (1.0 - w) * v_lo + w * v_hi;
      out.policy[t][i] = r;
    }
  }
  return out;
}

struct CflError : std::runtime_error {
  double required_dt;
  CflError(double need)
      : std::runtime_error("advection step violates CFL; largest stable dt = " +
                           std::to_string(need)),
        required_dt(need) {}
};

// One conservative first-order upwind step of d(mu)/dt = -d(mu v)/dc with
// zero-flux (reflecting) walls. Refuses a step the scheme cannot take.
inline std::vector<double> advect_fpk(const std::vector<double>& mu,
                                      const std::vector<double>& drift,
                                      double dt, const BatteryGrid& g) {
  int n = g.cells;
  if (static_cast<int>(mu.size()) != n ||
      static_cast<int>(drift.size()) != n)
    throw std::invalid_argument("density/drift size mismatch");
  double dc = g.dc();
  double vmax = 0.0;
  for (double v : drift) vmax = std::max(vmax, std::abs(v));
  if (dt * vmax > dc) throw CflError(vmax > 0.0 ? dc / vmax : dt);

  std::vector<double> flux(n + 1, 0.0);  // flux[i] across face i-1/2
  for (int i = 1; i < n; ++i) {
    double v = 0.5 * (drift[i - 1] + drift[i]);
    flux[i] = v > 0.0 ? v * mu[i - 1] : v * mu[i];
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = mu[i] - dt / dc * (flux[i + 1] - flux[i]);
  return out;
}

struct MfeResult {
  HjbResult hjb;
  std::vector<std::vector<double>> mu_path;  // [t][i], t = 0..steps
  int picard_iters = 0;
  bool converged = false;
  double last_change = 0.0;
};

struct MfeParams {
  double nu0 = 0.0;        // initial viscosity, annealed geometrically to 0
  double damping = 0.5;    // Picard mixing weight on the new path
  int max_iters = 40;
  double tol = 1e-6;       // sup-norm change of the density path
};

// Picard iteration between the backward control sweep and the forward
// transport of the initial density under the resulting drift. The density
// path is damped between rounds and the viscosity halves each round.
inline MfeResult solve_mfe(const MfgEnv& env, const std::vector<double>& mu0,
                           const MfeParams& mp) {
  const BatteryGrid& g = env.grid;
  int n = g.cells, T = env.steps;
  MfeResult res;
  res.mu_path.assign(T + 1, mu0);

  double nu = mp.nu0;
  for (int it = 0; it < mp.max_iters; ++it) {
    res.hjb = solve_hjb(env, res.mu_path, nu);
    // forward transport under the policy-induced drift
    std::vector<std::vector<double>> fresh(T + 1, mu0);
    for (int t = 0; t < T; ++t) {
      std::vector<double> drift(n);
      double h = env.harvest_w(t);
      for (int i = 0; i < n; ++i) {
        double pw = power_for_rate(res.hjb.policy[t][i], env.kappa_w,
                                   env.bandwidth_hz);
        drift[i] = h - pw - env.base_load_w;
      }
      // boundary cells cannot drift out: the battery clamps there
      if (drift[0] < 0.0) drift[0] = 0.0;
      if (drift[n - 1] > 0.0) drift[n - 1] = 0.0;
      double vmax = 0.0;
      for (double v : drift) vmax = std::max(vmax, std::abs(v));
      int sub = std::max(1, static_cast<int>(std::ceil(env.dt_s * vmax / g.dc())));
      std::vector<double> m = fresh[t];
      for (int s = 0; s < sub; ++s) m = advect_fpk(m, drift, env.dt_s / sub, g);
      fresh[t + 1] = std::move(m);
    }
    double change = 0.0;
    for (int t = 0; t <= T; ++t)
      for (int i = 0; i < n; ++i) {
        double mixed = (1.0 - mp.damping) * res.mu_path[t][i] +
                       mp.damping * fresh[t][i];
        change = std::max(change, std::abs(mixed - res.mu_path[t][i]));
        res.mu_path[t][i] = mixed;
      }
    res.picard_iters = it + 1;
    res.last_change = change;
    nu *= 0.5;
    if (change <= mp.tol) {
      res.converged = true;
      break;
    }
  }
  // final consistent sweep at zero viscosity against the settled path
  res.hjb = solve_hjb(env, res.mu_path, 0.0);
  return res;
}

struct LipschitzCheck {
  double max_ratio = 0.0;   // sup |U(R;mu1)-U(R;mu2)| / W1(mu1,mu2)
  double bound = 0.0;       // lambda_max * P_max / margin^2
  bool holds = false;
};

// The population enters the stress penalty through the mean charge, a
// 1-Lipschitz functional under W1, so the utility gap between two densities
// is at most lambda * P(R) / margin^2 times their W1 distance. Verifies that
// empirically over random density pairs and reports the analytic constant.
inline LipschitzCheck lipschitz_bound_check(
    const MfgEnv& env, const std::vector<std::vector<double>>& mus,
    const std::vector<double>& rates) {
  const BatteryGrid& g = env.grid;
  LipschitzCheck out;
  double p_max = env.p_max_w;
  double worst_margin = std::numeric_limits<double>::infinity();
  auto mean_of = [&](const std::vector<double>& mu) {
    double acc = 0.0;
    for (int i = 0; i < g.cells; ++i) acc += g.center(i) * mu[i] * g.dc();
    return acc;
  };
  auto util = [&](double r, double mean_c) {
    double margin = mean_c - g.lo + env.gp.safety_margin_j;
    double ce = env.gp.energy_weight * env.slot_seconds +
                env.gp.penalty_weight / margin;
    return r - ce * power_for_rate(r, env.kappa_w, env.bandwidth_hz);
  };
  for (std::size_t a = 0; a < mus.size(); ++a)
    for (std::size_t b = a + 1; b < mus.size(); ++b) {
      double w = wasserstein1(mus[a], mus[b], g);
      if (w <= 0.0) continue;
      double ma = mean_of(mus[a]), mb = mean_of(mus[b]);
      worst_margin = std::min({worst_margin, ma - g.lo + env.gp.safety_margin_j,
                               mb - g.lo + env.gp.safety_margin_j});
      for (double r : rates) {
        double gap = std::abs(util(r, ma) - util(r, mb));
        out.max_ratio = std::max(out.max_ratio, gap / w);
      }
    }
  double pw_cap = std::min(p_max, power_for_rate(rates.empty() ? 0.0
                                                 : *std::max_element(rates.begin(),
                                                                     rates.end()),
                                                 env.kappa_w, env.bandwidth_hz));
  out.bound = env.gp.penalty_weight * pw_cap / (worst_margin * worst_margin);
  out.holds = out.max_ratio <= out.bound * (1.0 + 1e-9) + 1e-15;
  return out;
}

}  // namespace islsim
