#pragma once

// Self-contained correctness suites behind the `verify` command: potential
// identity, gradient oracle, concavity floor, transport distance vs an
// independent LP solver, and transport-equation conservation. Each suite
// returns a pass flag plus a one-line diagnostic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "islsim/experiments.hpp"

namespace islsim {

// ---------------------------------------------------------------------------
// Transportation simplex on tiny instances. Independent oracle for the
// closed-form 1-D transport distance: same answer, entirely different
// algorithm (northwest-corner start, potentials, cycle pivots).

namespace detail {

struct TransportTableau {
  int m, n;
  std::vector<double> flow;   // m*n
  std::vector<char> basic;    // m*n
  double& f(int i, int j) { return flow[i * n + j]; }
  char& b(int i, int j) { return basic[i * n + j]; }
};

// Unique cycle closed by adding (si, sj) to the basis tree, as an alternating
// row/column walk. Returns the cell sequence starting at (si, sj).
inline bool find_cycle(TransportTableau& t, int si, int sj,
                       std::vector<std::pair<int, int>>& cycle) {
  // depth-first over basic cells, alternating direction each step
  std::vector<std::pair<int, int>> path{{si, sj}};
  // iterative DFS with explicit stack of (position, direction, next index)
  std::function<bool(int, int, bool)> dfs = [&](int i, int j,
                                                bool move_in_row) -> bool {
    if (move_in_row) {
      for (int j2 = 0; j2 < t.n; ++j2) {
        if (j2 == j || !t.b(i, j2)) continue;
        if (i == si && j2 == sj) continue;
        path.push_back({i, j2});
        if (j2 == sj) return true;  // column closes the loop
        if (dfs(i, j2, false)) return true;
        path.pop_back();
      }
    } else {
      for (int i2 = 0; i2 < t.m; ++i2) {
        if (i2 == i || !t.b(i2, j)) continue;
        path.push_back({i2, j});
        if (i2 == si) return true;  // row closes the loop
        if (dfs(i2, j, true)) return true;
        path.pop_back();
      }
    }
    return false;
  };
  if (!dfs(si, sj, true)) return false;
  cycle = path;
  return true;
}

}  // namespace detail

// Minimum-cost transport between discrete measures (x, a) -> (y, b) with cost
// |x_i - y_j|. Supplies and demands must balance to a common total.
inline double transport_lp(std::vector<double> a, const std::vector<double>& x,
                           std::vector<double> b,
                           const std::vector<double>& y) {
  int m = static_cast<int>(a.size()), n = static_cast<int>(b.size());
  detail::TransportTableau t{m, n, std::vector<double>(m * n, 0.0),
                             std::vector<char>(m * n, 0)};
  auto cost = [&](int i, int j) { return std::abs(x[i] - y[j]); };

  // tiny staircase perturbation wards off degenerate pivots
  double total = 0.0;
  for (double v : a) total += v;
  double eps = total * 1e-12;
  for (int i = 0; i < m; ++i) a[i] += eps;
  b[n - 1] += eps * m;

  // northwest corner start
  {
    int i = 0, j = 0;
    while (i < m && j < n) {
      double q = std::min(a[i], b[j]);
      t.f(i, j) = q;
      t.b(i, j) = 1;
      a[i] -= q;
      b[j] -= q;
      if (a[i] <= b[j])
        ++i;
      else
        ++j;
    }
  }

  for (int pivot = 0; pivot < 2000; ++pivot) {
    // potentials u_i + v_j = c_ij on the basis tree
    std::vector<double> u(m, 0.0), v(n, 0.0);
    std::vector<char> us(m, 0), vs(n, 0);
    us[0] = 1;
    for (int sweep = 0; sweep < m + n; ++sweep)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          if (!t.b(i, j)) continue;
          if (us[i] && !vs[j]) {
            v[j] = cost(i, j) - u[i];
            vs[j] = 1;
          } else if (!us[i] && vs[j]) {
            u[i] = cost(i, j) - v[j];
            us[i] = 1;
          }
        }

    int si = -1, sj = -1;
    double best = -1e-10;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        if (t.b(i, j)) continue;
        double rc = cost(i, j) - u[i] - v[j];
        if (rc < best) {
          best = rc;
          si = i;
          sj = j;
        }
      }
    if (si < 0) break;  // optimal

    std::vector<std::pair<int, int>> cycle;
    if (!detail::find_cycle(t, si, sj, cycle)) break;
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t p = 1; p < cycle.size(); p += 2)
      theta = std::min(theta, t.f(cycle[p].first, cycle[p].second));
    int li = -1, lj = -1;
    for (std::size_t p = 0; p < cycle.size(); ++p) {
      auto [i, j] = cycle[p];
      if (p % 2 == 0) {
        t.f(i, j) += theta;
      } else {
        t.f(i, j) -= theta;
        if (li < 0 && t.f(i, j) <= 0.0) {
          li = i;
          lj = j;
        }
      }
    }
    t.b(si, sj) = 1;
    if (li >= 0) {
      t.b(li, lj) = 0;
      t.f(li, lj) = 0.0;
    }
  }

  double c = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (t.f(i, j) > 0.0) c += t.f(i, j) * cost(i, j);
  return c;
}

// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Analytic per-coordinate curvature of the shared function at a profile:
// d2(Phi)/d(y_lf)2 = -c_eff(owner) * kappa_l * (ln2/B)^2 * 2^(total/B),
// the quantity whose magnitude the concavity suite floors.
inline double potential_curvature(const SlotGame& g,
                                  const std::vector<double>& y, int l) {
  const DirectedLink& lk = g.topo->links[l];
  double c_eff =
      g.gp.energy_weight * g.slot_seconds + penalty_coefficient(g, lk.from);
  double l2b = kLn2 / g.bandwidth_hz;
  double r = 0.0;
  int F = g.num_flows();
  for (int f = 0; f < F; ++f) r += y[l * F + f];
  return -c_eff * lk.kappa_w * l2b * l2b * std::exp2(r / g.bandwidth_hz);
}

inline CheckResult check_exact_potential(std::uint64_t seed, int games = 20,
                                         int deviations = 50) {
  double worst = 0.0;
  for (int gi = 0; gi < games; ++gi) {
    auto fx = make_random_game(derive_seed(seed, RngStream::scenario, gi));
    auto eng = make_engine(seed, RngStream::scenario, 1000 + gi);
    std::uniform_int_distribution<int> pick(0, fx->topo.num_sats - 1);
    for (int d = 0; d < deviations; ++d) {
      int m = pick(eng);
      auto y2 = deviate(*fx, m, eng);
      double dphi = potential(fx->game, y2) - potential(fx->game, fx->y);
      double gap = verify_exact_potential(fx->game, fx->y, m, y2);
      worst = std::max(worst, gap / (1.0 + std::abs(dphi)));
    }
  }
  CheckResult r{"exact_potential", worst <= 1e-8, ""};
  std::ostringstream os;
  os << "max |dU - dPhi| / (1+|dPhi|) = " << worst;
  r.detail = os.str();
  return r;
}

inline CheckResult check_gradient(std::uint64_t seed, int points = 1000) {
  double worst = 0.0;
  int done = 0;
  for (int gi = 0; done < points; ++gi) {
    auto fx = make_random_game(derive_seed(seed, RngStream::scenario, 7000 + gi));
    auto eng = make_engine(seed, RngStream::scenario, 9000 + gi);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int F = fx->game.num_flows();
    int L = fx->game.num_links();
    for (int p = 0; p < 25 && done < points; ++p, ++done) {
      // fresh interior-ish point each probe
      for (auto& v : fx->y) v = 1.5 * fx->game.bandwidth_hz * u(eng);
      project_feasible(fx->game, fx->y);
      int l = static_cast<int>(u(eng) * L) % L;
      int f = static_cast<int>(u(eng) * F) % F;
      double h = 1e-5 * fx->game.bandwidth_hz;
      std::vector<double> yp = fx->y, ym = fx->y;
      yp[l * F + f] += h;
      ym[l * F + f] -= h;
      double fd =
          (potential(fx->game, yp) - potential(fx->game, ym)) / (2.0 * h);
      double an = potential_gradient(fx->game, fx->y, l, f);
      worst = std::max(worst, std::abs(fd - an) / (1.0 + std::abs(an)));
    }
  }
  CheckResult r{"gradient_oracle", worst <= 1e-6, ""};
  std::ostringstream os;
  os << "max rel err analytic vs central FD = " << worst;
  r.detail = os.str();
  return r;
}

inline CheckResult check_concavity(std::uint64_t seed, int points = 1000) {
  double min_mag = std::numeric_limits<double>::infinity();
  double floor_gap = std::numeric_limits<double>::infinity();
  double worst_fd = 0.0;
  bool all_negative = true;
  int done = 0;
  for (int gi = 0; done < points; ++gi) {
    auto fx = make_random_game(derive_seed(seed, RngStream::scenario, 3000 + gi));
    auto eng = make_engine(seed, RngStream::scenario, 5000 + gi);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double modulus = concavity_modulus(fx->game);
    int F = fx->game.num_flows();
    int L = fx->game.num_links();
    for (int p = 0; p < 25 && done < points; ++p, ++done) {
      for (auto& v : fx->y) v = 1.5 * fx->game.bandwidth_hz * u(eng);
      project_feasible(fx->game, fx->y);
      int l = static_cast<int>(u(eng) * L) % L;
      double curv = potential_curvature(fx->game, fx->y, l);
      if (curv >= 0.0) all_negative = false;
      min_mag = std::min(min_mag, std::abs(curv));
      floor_gap = std::min(floor_gap, std::abs(curv) - modulus);
      // cross-check the closed form against a second difference
      int f = static_cast<int>(u(eng) * F) % F;
      double h = 1e-4 * fx->game.bandwidth_hz;
      std::vector<double> yp = fx->y, ym = fx->y;
      yp[l * F + f] += h;
      ym[l * F + f] -= h;
      double fd = (potential(fx->game, yp) - 2.0 * potential(fx->game, fx->y) +
                   potential(fx->game, ym)) /
                  (h * h);
      worst_fd = std::max(worst_fd, std::abs(fd - curv) / std::abs(curv));
    }
  }
  bool pass = all_negative && floor_gap >= -1e-9 && worst_fd <= 1e-3;
  CheckResult r{"concavity_floor", pass, ""};
  std::ostringstream os;
  os << "min |curvature| = " << min_mag << ", floor slack = " << floor_gap
     << ", FD cross-check rel err = " << worst_fd;
  r.detail = os.str();
  return r;
}

inline CheckResult check_wasserstein(std::uint64_t seed) {
  auto eng = make_engine(seed, RngStream::mfg, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    int m = 2 + static_cast<int>(u(eng) * 4);
    int n = 2 + static_cast<int>(u(eng) * 4);
    std::vector<double> x(m), a(m), y(n), b(n);
    double sa = 0.0, sb = 0.0;
    for (int i = 0; i < m; ++i) {
      x[i] = 10.0 * u(eng);
      a[i] = 0.1 + u(eng);
      sa += a[i];
    }
    for (int j = 0; j < n; ++j) {
      y[j] = 10.0 * u(eng);
      b[j] = 0.1 + u(eng);
      sb += b[j];
    }
    for (auto& v : a) v /= sa;
    for (auto& v : b) v /= sb;
    double lp = transport_lp(a, x, b, y);
    double cf = wasserstein1_discrete(x, a, y, b);
    worst = std::max(worst, std::abs(lp - cf));
  }

  // metric axioms on random triples of gridded measures
  BatteryGrid g{0.0, 1.0, 64};
  auto random_mu = [&]() {
    std::vector<double> mu(g.cells);
    double s = 0.0;
    for (auto& v : mu) {
      v = u(eng);
      s += v * g.dc();
    }
    for (auto& v : mu) v /= s;
    return mu;
  };
  double axiom_slack = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto m1 = random_mu(), m2 = random_mu(), m3 = random_mu();
    double d12 = wasserstein1(m1, m2, g);
    double d21 = wasserstein1(m2, m1, g);
    double d13 = wasserstein1(m1, m3, g);
    double d23 = wasserstein1(m2, m3, g);
    double d11 = wasserstein1(m1, m1, g);
    axiom_slack = std::max(axiom_slack, std::abs(d12 - d21));
    axiom_slack = std::max(axiom_slack, d11);
    axiom_slack = std::max(axiom_slack, d13 - (d12 + d23));
  }
  bool pass = worst <= 1e-8 && axiom_slack <= 1e-9;
  CheckResult r{"wasserstein_oracle", pass, ""};
  std::ostringstream os;
  os << "max |closed form - LP| = " << worst
     << ", metric axiom slack = " << axiom_slack;
  r.detail = os.str();
  return r;
}

inline CheckResult check_fpk(std::uint64_t seed) {
  (void)seed;
  BatteryGrid g{0.0, 1.0, 200};
  std::vector<double> mu(g.cells, 0.0);
  int start = g.cell_of(0.2);
  mu[start] = 1.0 / g.dc();  // Dirac
  double dt = 1.0;
  double v = 0.12 * g.dc();  // 0.12 cells per step: 1000 steps end at 0.8
  std::vector<double> drift(g.cells, v);
  int steps = 1000;
  double mass_err = 0.0;
  for (int s = 0; s < steps; ++s) {
    mu = advect_fpk(mu, drift, dt, g);
    double mass = 0.0;
    for (double q : mu) mass += q * g.dc();
    mass_err = std::max(mass_err, std::abs(mass - 1.0));
  }
  double centroid = 0.0;
  for (int i = 0; i < g.cells; ++i) centroid += g.center(i) * mu[i] * g.dc();
  double target = g.center(start) + v * dt * steps;
  double off = std::abs(centroid - target);
  bool pass = mass_err <= 1e-4 && off <= g.dc();
  CheckResult r{"fpk_conservation", pass, ""};
  std::ostringstream os;
  os << "max mass error = " << mass_err << ", centroid offset = " << off
     << " (cell " << g.dc() << ")";
  r.detail = os.str();
  return r;
}

inline std::vector<CheckResult> run_verify_suites(std::uint64_t seed) {
  return {check_exact_potential(seed), check_gradient(seed),
          check_concavity(seed), check_wasserstein(seed), check_fpk(seed)};
}

}  // namespace islsim
