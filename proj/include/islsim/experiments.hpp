#pragma once

// Experiment drivers shared by the command-line harness and the acceptance
// suite. Everything here is deterministic per (scenario, seed).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "islsim/episode.hpp"
#include "islsim/metrics.hpp"
#include "islsim/mfg.hpp"
#include "islsim/rng.hpp"
#include "islsim/scenario.hpp"

namespace islsim {

// ---------------------------------------------------------------------------
// Small self-owned game instances for the identity and oracle suites.
// SlotGame keeps pointers, so the fixture owns the pointees and is pinned to
// the heap.

struct GameFixture {
  Topology topo;
  std::vector<Flow> flows;
  SlotGame game;
  std::vector<double> y;  // a feasible profile to perturb around

  GameFixture() = default;
  GameFixture(const GameFixture&) = delete;
  GameFixture& operator=(const GameFixture&) = delete;
};

// Ring of M nodes with a few random chords, every undirected edge giving two
// directed links, grouped by owner.
inline Topology make_ring_topology(int num_sats, int extra_chords,
                                   std::mt19937_64& eng) {
  std::vector<std::pair<int, int>> edges;
  for (int m = 0; m < num_sats; ++m) edges.push_back({m, (m + 1) % num_sats});
  std::uniform_int_distribution<int> pick(0, num_sats - 1);
  for (int c = 0; c < extra_chords; ++c) {
    int a = pick(eng), b = pick(eng);
    if (a == b || b == (a + 1) % num_sats || a == (b + 1) % num_sats) continue;
    if (a > b) std::swap(a, b);
    if (std::find(edges.begin(), edges.end(), std::make_pair(a, b)) ==
        edges.end())
      edges.push_back({a, b});
  }
  Topology topo;
  topo.num_sats = num_sats;
  for (auto [a, b] : edges) {
    topo.links.push_back({a, b, 1.0, 0.0});
    topo.links.push_back({b, a, 1.0, 0.0});
  }
  std::sort(topo.links.begin(), topo.links.end(),
            [](const DirectedLink& x, const DirectedLink& y) {
              return x.from != y.from ? x.from < y.from : x.to < y.to;
            });
  topo.first_link.assign(num_sats + 1, 0);
  for (const auto& l : topo.links) ++topo.first_link[l.from + 1];
  for (int m = 0; m < num_sats; ++m)
    topo.first_link[m + 1] += topo.first_link[m];
  return topo;
}

// A dimensionless game instance: all magnitudes O(1) so identity checks hit
// clean relative tolerances. Rates live in [0, ~2], kappa in [0.5, 2],
// effective energy prices in [1, 2.2].
inline std::unique_ptr<GameFixture> make_random_game(std::uint64_t seed,
                                                     int max_sats = 10) {
  auto fx = std::make_unique<GameFixture>();
  auto eng = make_engine(seed, RngStream::scenario, 0);
  std::uniform_int_distribution<int> msize(4, max_sats);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  int M = msize(eng);
  fx->topo = make_ring_topology(M, M / 3, eng);
  for (auto& l : fx->topo.links) l.kappa_w = 0.5 + 1.5 * u(eng);

  int F = 2 + static_cast<int>(u(eng) * 3);
  std::uniform_int_distribution<int> node(0, M - 1);
  for (int f = 0; f < F; ++f) {
    int s = node(eng), d = node(eng);
    while (d == s) d = node(eng);
    fx->flows.push_back({f, s, d, 0.5 + u(eng)});
  }

  SlotGame& g = fx->game;
  g.topo = &fx->topo;
  g.flows = &fx->flows;
  g.bandwidth_hz = 0.8 + 0.4 * u(eng);
  g.slot_seconds = 1.0;
  g.gp.energy_weight = 1.0 + u(eng);
  g.gp.penalty_weight = 0.05 + 0.1 * u(eng);
  g.gp.safety_margin_j = 0.5;
  g.floor_j = 1.0;
  g.battery_j.resize(M);
  for (auto& b : g.battery_j) b = g.floor_j + 0.5 + 2.0 * u(eng);
  g.duals.resize(M * F);
  for (auto& d : g.duals) d = 0.3 * u(eng);
  g.power_bound_w.assign(M, 50.0);  // generous: identities probe the interior

  fx->y.assign(fx->topo.links.size() * F, 0.0);
  for (auto& v : fx->y) v = 2.0 * g.bandwidth_hz * u(eng);
  project_feasible(g, fx->y);
  return fx;
}

// Unilateral deviation of satellite m: fresh random values on m's own links,
// projected back into m's feasible slice.
inline std::vector<double> deviate(const GameFixture& fx, int m,
                                   std::mt19937_64& eng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y2 = fx.y;
  int F = fx.game.num_flows();
  for (int l = fx.topo.first_link[m]; l < fx.topo.first_link[m + 1]; ++l)
    for (int f = 0; f < F; ++f)
      y2[l * F + f] = 2.0 * fx.game.bandwidth_hz * u(eng);
  project_feasible(fx.game, y2);
  // keep everyone else's coordinates exactly as they were
  for (int n = 0; n < fx.topo.num_sats; ++n) {
    if (n == m) continue;
    for (int l = fx.topo.first_link[n]; l < fx.topo.first_link[n + 1]; ++l)
      for (int f = 0; f < F; ++f) y2[l * F + f] = fx.y[l * F + f];
  }
  return y2;
}

// Curvature floor of the shared function: rates are nonnegative, so each
// coordinate's second derivative is at most -min_l c_eff(owner) kappa_l
// (ln2/B)^2. This is the modulus the concavity suite checks against.
inline double concavity_modulus(const SlotGame& g) {
  double best = std::numeric_limits<double>::infinity();
  double l2b = kLn2 / g.bandwidth_hz;
  for (int m = 0; m < g.topo->num_sats; ++m) {
    double c_eff = g.gp.energy_weight * g.slot_seconds +
                   penalty_coefficient(g, m);
    for (int l = g.topo->first_link[m]; l < g.topo->first_link[m + 1]; ++l)
      best = std::min(best, c_eff * g.topo->links[l].kappa_w * l2b * l2b);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Episode-level rows and aggregation.

struct MetricsRow {
  std::uint64_t run_seed = 0;
  Variant variant = Variant::v3;
  double theta = 0.0;
  double esr = 0.0;
  double fvr = 0.0;
  double ee = 0.0;
  int non_converged = 0;
};

inline MetricsRow episode_metrics_row(const Scenario& sc, Variant v,
                                      std::uint64_t seed) {
  EpisodeResult ep = run_episode(sc, v, seed);
  MetricsRow r;
  r.run_seed = seed;
  r.variant = v;
  r.theta = sc.cons.eclipse_fraction;
  r.esr = ep.esr(sc.energy.floor_j);
  r.fvr = ep.fvr();
  r.ee = ep.ee();
  r.non_converged = ep.non_converged_slots;
  return r;
}

// Seeds used by a command: the master seed splits into a reproducible list.
inline std::vector<std::uint64_t> seed_list(std::uint64_t master, int n) {
  std::vector<std::uint64_t> s(n);
  for (int i = 0; i < n; ++i)
    s[i] = derive_seed(master, RngStream::run, static_cast<std::uint64_t>(i));
  return s;
}

struct AblationRow {
  Variant variant;
  Summary esr, fvr, ee;
};

inline std::vector<AblationRow> run_ablation(
    const Scenario& sc, const std::vector<std::uint64_t>& seeds) {
  std::vector<AblationRow> rows;
  for (Variant v : {Variant::v0, Variant::v1, Variant::v2, Variant::v3}) {
    std::vector<double> esr, fvr, ee;
    for (auto s : seeds) {
      MetricsRow r = episode_metrics_row(sc, v, s);
      esr.push_back(r.esr);
      fvr.push_back(r.fvr);
      ee.push_back(r.ee);
    }
    AblationRow row{v,
                    summarize(esr, sc.seed, sc.bootstrap_reps),
                    summarize(fvr, sc.seed, sc.bootstrap_reps),
                    summarize(ee, sc.seed, sc.bootstrap_reps)};
    rows.push_back(row);
  }
  return rows;
}

// One cell of the eclipse-fraction sweep. `gap` is this variant's ESR minus
// the static baseline's on matched seeds; `shortfall` is the positive part of
// the baseline-minus-variant throughput difference, summed over link-slots
// (bits/s units), the quantity whose growth with theta the sweep tracks.
struct ThetaCell {
  double theta;
  Variant variant;
  Summary esr;
  double gap_mean = 0.0;
  double shortfall_mean = 0.0;
};

inline double throughput_shortfall(const EpisodeResult& base,
                                   const EpisodeResult& other) {
  double s = 0.0;
  std::size_t n = std::min(base.solution.size(), other.solution.size());
  for (std::size_t i = 0; i < n; ++i) {
    double d = base.solution[i].rate_bps - other.solution[i].rate_bps;
    if (d > 0.0) s += d;
  }
  return s;
}

inline std::vector<ThetaCell> run_theta_sweep(
    Scenario sc, const std::vector<double>& thetas,
    const std::vector<Variant>& variants,
    const std::vector<std::uint64_t>& seeds) {
  std::vector<ThetaCell> cells;
  for (double th : thetas) {
    sc.cons.eclipse_fraction = th;
    sc.finalize();
    // baseline episodes once per seed, shared across the variant rows
    std::vector<EpisodeResult> base;
    std::vector<double> base_esr;
    for (auto s : seeds) {
      base.push_back(run_episode(sc, Variant::v0, s, /*keep_solution=*/true));
      base_esr.push_back(base.back().esr(sc.energy.floor_j));
    }
    for (Variant v : variants) {
      ThetaCell cell;
      cell.theta = th;
      cell.variant = v;
      std::vector<double> esr;
      double gap = 0.0, shortfall = 0.0;
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (v == Variant::v0) {
          esr.push_back(base_esr[i]);
          continue;
        }
        EpisodeResult ep = run_episode(sc, v, seeds[i], /*keep_solution=*/true);
        double e = ep.esr(sc.energy.floor_j);
        esr.push_back(e);
        gap += e - base_esr[i];
        shortfall += throughput_shortfall(base[i], ep);
      }
      cell.esr = summarize(esr, sc.seed, sc.bootstrap_reps);
      if (v != Variant::v0) {
        cell.gap_mean = gap / seeds.size();
        cell.shortfall_mean = shortfall / seeds.size();
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Convergence study: one slot solved far past its plateau, residuals measured
// against the plateau iterate and slope-fitted on a smoothed log-log window.

struct ConvergenceStudy {
  std::vector<double> residual;  // normalized ||y^k - y*|| per outer iterate
  std::vector<double> smoothed;  // 5-point moving average of the residual
  std::size_t plateau = 0;
  FitResult fit;          // log-log slope over the fit window
  double final_ratio = 1.0;  // residual at the window end over the start value
  int fit_lo = 10, fit_hi = 200;
};

inline ConvergenceStudy run_convergence(const Scenario& sc, Variant v,
                                        int outer_iters = 320) {
  Constellation cons(sc.cons);
  auto st = cons.propagate(0);
  Topology topo = build_topology(cons, st);
  for (auto& l : topo.links) l.kappa_w = kappa_w(l.distance_m, sc.link);

  auto seeds = seed_list(sc.seed, 1);
  double cap_scale = aggregate_single_hop_capacity(topo, sc.link);
  std::vector<Flow> flows = generate_flows(seeds[0], sc.cons.num_sats,
                                           sc.traffic, cap_scale);

  SlotProblem prob = make_slot_problem(topo, flows, sc.link);
  for (int m = 0; m < sc.cons.num_sats; ++m) {
    prob.bound_w[m] = variant_bound(v, st[m], sc.energy.initial_j, sc.energy,
                                    sc.link.max_power_w);
    if (variant_penalty(v)) {
      double denom =
          sc.energy.initial_j - sc.energy.floor_j + sc.game.safety_margin_j;
      prob.cpen[m] = sc.game.penalty_weight / denom;
    }
  }

  SolverParams sp = sc.solver;
  sp.outer_iters = outer_iters;
  sp.tol = 0.0;  // run the full budget; the study wants the tail
  std::vector<double> y0(prob.num_links() * prob.num_flows(), 0.0);
  SlotResult sol = hbag_slot(prob, std::move(y0), {}, sp,
                             /*record_history=*/true);

  ConvergenceStudy cs;
  cs.plateau = std::min(plateau_index(sol.step_norms), sol.history.size() - 1);
  const std::vector<double>& ref = sol.history[cs.plateau];
  cs.residual = residual_series(sol.history, ref);
  cs.smoothed = moving_average(cs.residual, 5);

  std::size_t cap = cs.plateau > 20 ? cs.plateau - 5 : cs.residual.size() - 1;
  if (static_cast<std::size_t>(cs.fit_hi) > cap)
    cs.fit_hi = static_cast<int>(cap);
  std::vector<double> ks, rs;
  for (int k = cs.fit_lo; k <= cs.fit_hi; ++k) {
    if (cs.smoothed[k] <= 0.0) break;
    ks.push_back(static_cast<double>(k));
    rs.push_back(cs.smoothed[k]);
  }
  cs.fit = loglog_fit(ks, rs);
  if (!rs.empty()) cs.final_ratio = rs.back() / cs.residual.front();
  return cs;
}

// ---------------------------------------------------------------------------
// Scaling study: median wall time of one slot solve at a fixed iteration
// budget, swept over constellation size with the flow count held constant.

struct ScaleRow {
  int size;
  double ms_per_slot;
};

struct ScaleStudy {
  std::vector<ScaleRow> rows;
  FitResult fit;  // linear in size
};

inline ScaleStudy run_scaling(Scenario sc, const std::vector<int>& sizes,
                              int reps = 3) {
  ScaleStudy out;
  sc.solver.outer_iters = 8;   // fixed budget: measuring work, not quality
  sc.solver.inner_iters = 10;
  sc.solver.tol = 1e-300;      // unreachable: every repetition runs all rounds
  for (int M : sizes) {
    sc.cons.num_sats = M;
    sc.finalize();
    Constellation cons(sc.cons);
    auto st = cons.propagate(0);
    Topology topo = build_topology(cons, st);
    for (auto& l : topo.links) l.kappa_w = kappa_w(l.distance_m, sc.link);
    auto seeds = seed_list(sc.seed, 1);
    double cap_scale = aggregate_single_hop_capacity(topo, sc.link);
    std::vector<Flow> flows =
        generate_flows(seeds[0], M, sc.traffic, cap_scale);
    SlotProblem prob = make_slot_problem(topo, flows, sc.link);
    for (int m = 0; m < M; ++m) {
      prob.bound_w[m] = sc.link.max_power_w;
      prob.cpen[m] = sc.game.penalty_weight /
                     (sc.energy.initial_j - sc.energy.floor_j +
                      sc.game.safety_margin_j);
    }
    std::vector<double> times;
    for (int r = 0; r < reps; ++r) {
      std::vector<double> y0(prob.num_links() * prob.num_flows(), 0.0);
      auto t0 = std::chrono::steady_clock::now();
      hbag_slot(prob, std::move(y0), {}, sc.solver);
      auto t1 = std::chrono::steady_clock::now();
      times.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    out.rows.push_back({M, times[times.size() / 2]});
  }
  std::vector<double> xs, ys;
  for (const auto& r : out.rows) {
    xs.push_back(static_cast<double>(r.size));
    ys.push_back(r.ms_per_slot);
  }
  out.fit = linear_fit(xs, ys);
  return out;
}

// ---------------------------------------------------------------------------
// Mean-field machinery wired to a scenario.

// Representative single-orbit environment: schedules follow one reference
// satellite at phase zero, the link coefficient is the slot-0 average.
inline MfgEnv make_mfg_env(const Scenario& sc, double kappa_rep, int steps) {
  MfgEnv env;
  env.grid = BatteryGrid{sc.energy.floor_j, sc.energy.capacity_j,
                         sc.mfg_cells};
  env.dt_s = sc.cons.slot_seconds;
  env.steps = steps;
  env.kappa_w = kappa_rep;
  env.bandwidth_hz = sc.link.bandwidth_hz;
  env.p_max_w = sc.link.max_power_w;
  env.base_load_w = sc.energy.base_load_w;
  env.gp = sc.game;
  env.slot_seconds = sc.cons.slot_seconds;
  env.crowding_weight = sc.mfg_crowding_weight;

  // one probe body on the same orbit reproduces the illumination schedule
  ConstellationParams ref = sc.cons;
  ref.num_sats = 1;
  ref.num_planes = 1;
  auto cons = std::make_shared<Constellation>(ref);
  env.illuminated = [cons](int t) { return cons->propagate(t)[0].illuminated; };
  env.harvest_w = [cons, ep = sc.energy](int t) {
    auto s = cons->propagate(t)[0];
    return harvest_power(s.illuminated, s.sun_elev, ep);
  };
  env.eclipse_horizon_s = [cons](int t) {
    return cons->propagate(t)[0].eclipse_horizon_s;
  };
  return env;
}

inline double mean_kappa(const Topology& topo) {
  double s = 0.0;
  for (const auto& l : topo.links) s += l.kappa_w;
  return s / topo.links.size();
}

// The gap study compares, battery-bin by battery-bin, the per-satellite power
// spend of the finite solver (expressed as the rate a single representative
// link would carry at that power) against the limiting policy at the matched
// orbital phase. Gap is a weighted relative L1 distance between bin means.
struct GapRow {
  int size;
  double gap;
};

struct GapStudy {
  std::vector<GapRow> rows;
  FitResult fit;        // log-log slope of gap vs size
  MfeResult mfe;        // the largest size's limit solution, for CSV dumps
  MfgEnv env;           // matching environment (grids, schedules)
};

inline GapStudy run_gap_study(Scenario sc, const std::vector<int>& sizes,
                              const std::vector<std::uint64_t>& seeds,
                              int bins = 20) {
  GapStudy out;
  int steps = sc.slots;
  MfeParams mp;
  mp.nu0 = sc.mfg_viscosity();
  mp.damping = sc.mfg_damping;
  mp.max_iters = sc.mfg_picard_iters;
  mp.tol = sc.mfg_tol;

  // per-satellite flow density from the config; the study holds per-sat load
  // constant across fleet sizes, otherwise the mean-field premise (every
  // agent sees statistically similar traffic) breaks down as M grows
  double flow_density =
      static_cast<double>(sc.traffic.num_flows) / sc.cons.num_sats;
  double base_offset = sc.link.budget_offset;
  double kappa_anchor = 0.0;

  for (int M : sizes) {
    sc.cons.num_sats = M;
    sc.traffic.num_flows =
        std::max(1, static_cast<int>(std::lround(flow_density * M)));
    // near-square plane grid (largest power of two p with p^2 <= M dividing
    // M): growing both planes and sats per plane keeps path lengths, and
    // with them the price-propagation depth, growing like sqrt(M) instead
    // of M
    int planes = 1;
    while (4 * planes * planes <= M && M % (2 * planes) == 0) planes *= 2;
    sc.cons.num_planes = planes;
    sc.link.budget_offset = base_offset;
    sc.finalize();
    Constellation cons(sc.cons);
    auto st0 = cons.propagate(0);
    Topology topo0 = build_topology(cons, st0);
    for (auto& l : topo0.links) l.kappa_w = kappa_w(l.distance_m, sc.link);

    // denser fleets have shorter links and so cheaper mean kappa; pin the
    // representative coefficient to the first size's value (the usual
    // normalization of interaction strength across system sizes), so the
    // sweep varies fleet statistics and nothing else
    if (kappa_anchor <= 0.0) kappa_anchor = mean_kappa(topo0);
    sc.link.budget_offset *= mean_kappa(topo0) / kappa_anchor;
    for (auto& l : topo0.links) l.kappa_w = kappa_w(l.distance_m, sc.link);

    MfgEnv env = make_mfg_env(sc, mean_kappa(topo0), steps);
    std::vector<double> mu0 =
        empirical_measure({sc.energy.initial_j}, env.grid);
    MfeResult mfe = solve_mfe(env, mu0, mp);

    // the limit schedule's phase at step s is s*dt/T, so a satellite's phase
    // maps to a row inside the first orbit; later rows would alias a
    // different phase, and the rows just before the horizon are polluted by
    // the terminal condition anyway
    int orbit_steps = std::min(
        steps, static_cast<int>(std::lround(sc.cons.orbit_period_s /
                                            sc.cons.slot_seconds)));

    // bin HBAG samples by battery margin; accumulate both policies
    std::vector<double> w(bins, 0.0), hbag(bins, 0.0), limit(bins, 0.0);
    double lo = sc.energy.floor_j, hi = sc.energy.capacity_j;
    for (auto seed : seeds) {
      EpisodeResult ep = run_episode(sc, Variant::v3, seed,
                                     /*keep_solution=*/true);
      // per-satellite power by slot, from the solution rows
      std::vector<std::vector<double>> spend(
          M, std::vector<double>(sc.slots, 0.0));
      for (const auto& row : ep.solution)
        spend[row.satellite][row.slot] += row.power_w;
      for (int m = 0; m < M; ++m) {
        for (int t = 0; t < sc.slots; ++t) {
          double c = t == 0 ? sc.energy.initial_j : ep.battery_j[m][t - 1];
          int b = std::min(bins - 1,
                           std::max(0, static_cast<int>((c - lo) / (hi - lo) *
                                                        bins)));
          double r_equiv = sc.link.bandwidth_hz *
                           std::log2(1.0 + spend[m][t] / env.kappa_w);
          // matched orbital phase of this satellite at this slot
          double frac = cons.phase_frac(m, t * sc.cons.slot_seconds);
          int t_ref = std::min(steps - 1, static_cast<int>(frac * orbit_steps));
          int cell = env.grid.cell_of(c);
          double r_lim = mfe.hjb.policy[t_ref][cell];
          w[b] += 1.0;
          hbag[b] += r_equiv;
          limit[b] += r_lim;
        }
      }
    }
    double num = 0.0, den = 0.0;
    for (int b = 0; b < bins; ++b) {
      if (w[b] == 0.0) continue;
      num += std::abs(hbag[b] - limit[b]);
      den += std::abs(limit[b]);
    }
    out.rows.push_back({M, den > 0.0 ? num / den : 0.0});
    if (M == sizes.back()) {
      out.mfe = std::move(mfe);
      out.env = std::move(env);
    }
  }

  std::vector<double> xs, ys;
  for (const auto& r : out.rows) {
    xs.push_back(static_cast<double>(r.size));
    ys.push_back(r.gap);
  }
  out.fit = loglog_fit(xs, ys);
  return out;
}

}  // namespace islsim
