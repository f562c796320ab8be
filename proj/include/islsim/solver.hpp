#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "islsim/energy.hpp"
#include "islsim/game.hpp"

namespace islsim {

// Ablation ladder over the two battery mechanisms.
enum class Variant { v0, v1, v2, v3 };

inline bool variant_dynamic_bound(Variant v) {
  return v == Variant::v1 || v == Variant::v3;
}
inline bool variant_penalty(Variant v) {
  return v == Variant::v2 || v == Variant::v3;
}
inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::v0: return "v0";
    case Variant::v1: return "v1";
    case Variant::v2: return "v2";
    default: return "v3";
  }
}
inline Variant variant_from_name(const std::string& s) {
  if (s == "v0") return Variant::v0;
  if (s == "v1") return Variant::v1;
  if (s == "v2") return Variant::v2;
  if (s == "v3") return Variant::v3;
  throw std::invalid_argument("unknown variant: " + s);
}

// Per-satellite transmit budget for the slot under the given variant: the
// hardware cap for v0/v2, the eclipse-aware ration for v1/v3.
inline double variant_bound(Variant v, const SatState& st, double charge_j,
                            const EnergyParams& ep, double p_max_w) {
  if (!variant_dynamic_bound(v)) return p_max_w;
  double h = harvest_power(st.illuminated, st.sun_elev, ep);
  return dynamic_power_bound(charge_j, st.illuminated, h,
                             st.eclipse_horizon_s, p_max_w);
}

struct SolverParams {
  double rho = 1.0;        // dual step / quadratic weight
  double step_c0 = 0.1;    // eta_k = step_c0 / sqrt(k)
  int inner_iters = 200;   // k_sg
  int outer_iters = 300;   // k_max
  double tol = 1e-4;       // stop when sum_m ||y_m^{k+1} - y_m^k|| <= tol
  int threads = 1;
};

// Everything the per-slot solve needs, with decision variables normalized:
// flow rates are kept in units of B (so boxes and steps are O(1)) and the
// power term in units of p_ref. The public game formulas stay physical; this
// is a fixed diagonal rescaling that makes the Table-II step sizes usable.
struct SlotProblem {
  const Topology* topo = nullptr;
  const std::vector<Flow>* flows = nullptr;
  double bandwidth_hz = 10e9;
  double p_ref_w = 10.0;       // power normalization, the hardware cap
  double link_share = 1.0;
  std::vector<double> kappa_w;      // per directed link
  std::vector<double> demand_norm;  // per flow, d / B
  std::vector<double> bound_w;      // per satellite, this slot's budget
  std::vector<double> cpen;         // per satellite, penalty coefficient
  std::vector<int> q;               // per node: degree + 1 touching sats

  int num_flows() const { return static_cast<int>(flows->size()); }
  int num_links() const { return static_cast<int>(topo->links.size()); }
  int num_nodes() const { return topo->num_sats; }

  double link_total(const std::vector<double>& y, int l) const {
    double r = 0.0;
    int F = num_flows();
    for (int f = 0; f < F; ++f) r += y[l * F + f];
    return r;
  }
};

inline SlotProblem make_slot_problem(const Topology& topo,
                                     const std::vector<Flow>& flows,
                                     const LinkParams& lp) {
  SlotProblem p;
  p.topo = &topo;
  p.flows = &flows;
  p.bandwidth_hz = lp.bandwidth_hz;
  p.p_ref_w = lp.max_power_w;
  p.link_share = lp.link_share;
  p.kappa_w.resize(topo.links.size());
  for (std::size_t l = 0; l < topo.links.size(); ++l)
    p.kappa_w[l] = topo.links[l].kappa_w;
  p.demand_norm.resize(flows.size());
  for (std::size_t f = 0; f < flows.size(); ++f)
    p.demand_norm[f] = flows[f].demand_bps / lp.bandwidth_hz;
  p.bound_w.assign(topo.num_sats, lp.max_power_w);
  p.cpen.assign(topo.num_sats, 0.0);
  p.q.resize(topo.num_sats);
  for (int m = 0; m < topo.num_sats; ++m) p.q[m] = topo.degree(m) + 1;
  return p;
}

// Conservation residual of every (node, flow) pair at the given profile:
// outflow - inflow - injection, in normalized rate units.
inline std::vector<double> conservation_residuals(const SlotProblem& p,
                                                  const std::vector<double>& y) {
  int F = p.num_flows();
  std::vector<double> r(p.num_nodes() * F, 0.0);
  for (int l = 0; l < p.num_links(); ++l) {
    int a = p.topo->links[l].from, b = p.topo->links[l].to;
    for (int f = 0; f < F; ++f) {
      double v = y[l * F + f];
      r[a * F + f] += v;
      r[b * F + f] -= v;
    }
  }
  for (int f = 0; f < F; ++f) {
    r[(*p.flows)[f].src * F + f] -= p.demand_norm[f];
    r[(*p.flows)[f].dst * F + f] += p.demand_norm[f];
  }
  return r;
}

// Restrict a full profile to satellite m's slice and back.
inline void copy_slice(const SlotProblem& p, const std::vector<double>& y,
                       int m, std::vector<double>& out) {
  int F = p.num_flows();
  int l0 = p.topo->first_link[m], l1 = p.topo->first_link[m + 1];
  out.assign(y.begin() + l0 * F, y.begin() + l1 * F);
}

// In-place feasibility projection of m's slice: flow boxes, per-link rate cap,
// then the satellite power budget by proportional power rescaling. The same
// three moves as the game-level projection, in normalized units.
inline void project_slice(const SlotProblem& p, int m, std::vector<double>& ym) {
  int F = p.num_flows();
  int l0 = p.topo->first_link[m];
  int deg = p.topo->first_link[m + 1] - l0;
  double bound = p.bound_w[m];
  for (int i = 0; i < deg; ++i) {
    double cap_rate = std::log2(1.0 + p.link_share * bound / p.kappa_w[l0 + i]);
    double tot = 0.0;
    for (int f = 0; f < F; ++f) {
      double& v = ym[i * F + f];
      if (v < 0.0) v = 0.0;
      if (v > p.demand_norm[f]) v = p.demand_norm[f];
      tot += v;
    }
    if (tot > cap_rate && tot > 0.0) {
      double s = cap_rate / tot;
      for (int f = 0; f < F; ++f) ym[i * F + f] *= s;
    }
  }
  double total_pw = 0.0;
  for (int i = 0; i < deg; ++i) {
    double tot = 0.0;
    for (int f = 0; f < F; ++f) tot += ym[i * F + f];
    total_pw += p.kappa_w[l0 + i] * (std::exp2(tot) - 1.0);
  }
  if (total_pw > bound && total_pw > 0.0) {
    double s = bound / total_pw;
    for (int i = 0; i < deg; ++i) {
      double tot = 0.0;
      for (int f = 0; f < F; ++f) tot += ym[i * F + f];
      if (tot <= 0.0) continue;
      double pw_new = p.kappa_w[l0 + i] * (std::exp2(tot) - 1.0) * s;
      double tot_new = std::log2(1.0 + pw_new / p.kappa_w[l0 + i]);
      double fs = tot_new / tot;
      for (int f = 0; f < F; ++f) ym[i * F + f] *= fs;
    }
  }
}

// Local objective of satellite m at candidate slice y_hat, holding the rest
// of the profile at y_k: normalized power bill (scaled by 1 + the battery
// stress coefficient), the linear prices, and the quadratic pull toward
// conservation with the 1/q_l averaged global residual.
inline double local_lagrangian(const SlotProblem& p, int m,
                               const std::vector<double>& y_hat,
                               const std::vector<double>& y_k,
                               const std::vector<double>& duals, double rho) {
  int F = p.num_flows();
  int l0 = p.topo->first_link[m];
  int deg = p.topo->first_link[m + 1] - l0;
  std::vector<double> resid = conservation_residuals(p, y_k);

  double power = 0.0, linear = 0.0, quad = 0.0;
  for (int i = 0; i < deg; ++i) {
    double tot = 0.0;
    for (int f = 0; f < F; ++f) tot += y_hat[i * F + f];
    power += p.kappa_w[l0 + i] * (std::exp2(tot) - 1.0) / p.p_ref_w;
  }
  power *= 1.0 + p.cpen[m];

  for (int i = 0; i < deg; ++i) {
    int n = p.topo->links[l0 + i].to;
    for (int f = 0; f < F; ++f)
      linear += y_hat[i * F + f] * (duals[m * F + f] - duals[n * F + f]);
  }

  // nodes m's variables touch: itself (all outflows) and each out-neighbor
  for (int f = 0; f < F; ++f) {
    double dm = 0.0;
    for (int i = 0; i < deg; ++i) dm += y_hat[i * F + f] - y_k[(l0 + i) * F + f];
    double tm = dm + resid[m * F + f] / p.q[m];
    quad += tm * tm;
  }
  for (int i = 0; i < deg; ++i) {
    int n = p.topo->links[l0 + i].to;
    for (int f = 0; f < F; ++f) {
      double dn = -(y_hat[i * F + f] - y_k[(l0 + i) * F + f]);
      double tn = dn + resid[n * F + f] / p.q[n];
      quad += tn * tn;
    }
  }
  return power + linear + 0.5 * rho * quad;
}

namespace detail {

// Cached per-outer-iteration quantities for m's inner descent: the averaged
// residuals of the nodes m touches are constants while y_k is frozen.
struct LocalScratch {
  std::vector<double> ym;      // candidate slice
  std::vector<double> grad;
  std::vector<double> avg_m;   // resid[m]/q[m] per flow
  std::vector<double> avg_n;   // resid[n]/q[n] per (out-link, flow)
};

inline void solve_local_impl(const SlotProblem& p, int m,
                             const std::vector<double>& y_k,
                             const std::vector<double>& duals,
                             const std::vector<double>& resid,
                             const SolverParams& sp, double rho,
                             LocalScratch& s) {
  int F = p.num_flows();
  int l0 = p.topo->first_link[m];
  int deg = p.topo->first_link[m + 1] - l0;
  int dim = deg * F;
  copy_slice(p, y_k, m, s.ym);
  s.grad.assign(dim, 0.0);
  s.avg_m.assign(F, 0.0);
  s.avg_n.assign(dim, 0.0);
  for (int f = 0; f < F; ++f) s.avg_m[f] = resid[m * F + f] / p.q[m];
  for (int i = 0; i < deg; ++i) {
    int n = p.topo->links[l0 + i].to;
    for (int f = 0; f < F; ++f)
      s.avg_n[i * F + f] = resid[n * F + f] / p.q[n];
  }

  double scale = (1.0 + p.cpen[m]) * kLn2 / p.p_ref_w;
  for (int j = 1; j <= sp.inner_iters; ++j) {
    // gradient of the local objective at the current candidate
    for (int f = 0; f < F; ++f) {
      double dm = 0.0;
      for (int i = 0; i < deg; ++i)
        dm += s.ym[i * F + f] - y_k[(l0 + i) * F + f];
      double pull_m = rho * (dm + s.avg_m[f]);
      for (int i = 0; i < deg; ++i) {
        int n = p.topo->links[l0 + i].to;
        double dn = -(s.ym[i * F + f] - y_k[(l0 + i) * F + f]);
        double pull_n = rho * (dn + s.avg_n[i * F + f]);
        s.grad[i * F + f] =
            (duals[m * F + f] - duals[n * F + f]) + pull_m - pull_n;
      }
    }
    for (int i = 0; i < deg; ++i) {
      double tot = 0.0;
      for (int f = 0; f < F; ++f) tot += s.ym[i * F + f];
      double dpw = scale * p.kappa_w[l0 + i] * std::exp2(tot);
      for (int f = 0; f < F; ++f) s.grad[i * F + f] += dpw;
    }
    double eta = sp.step_c0 / std::sqrt(static_cast<double>(j));
    for (int d = 0; d < dim; ++d) s.ym[d] -= eta * s.grad[d];
    project_slice(p, m, s.ym);
  }
}

}  // namespace detail

// k_sg projected sub-gradient steps on the local objective, returning m's
// improved slice (the rest of the profile and the prices stay frozen).
inline std::vector<double> solve_local(const SlotProblem& p, int m,
                                       const std::vector<double>& y_k,
                                       const std::vector<double>& duals,
                                       const SolverParams& sp,
                                       double rho) {
  detail::LocalScratch s;
  std::vector<double> resid = conservation_residuals(p, y_k);
  detail::solve_local_impl(p, m, y_k, duals, resid, sp, rho, s);
  return s.ym;
}

// Price ascent with projection onto the nonnegative orthant.
inline void dual_update(std::vector<double>& duals,
                        const std::vector<double>& resid, double rho) {
  for (std::size_t i = 0; i < duals.size(); ++i) {
    double v = duals[i] + rho * resid[i];
    duals[i] = v > 0.0 ? v : 0.0;
  }
}

struct SlotResult {
  std::vector<double> y;      // normalized per-flow link rates
  std::vector<double> duals;  // node-flow prices at exit
  int iterations = 0;
  bool converged = false;
  std::vector<double> step_norms;  // sum_m ||y^{k+1}-y^k|| per outer iteration
  std::vector<std::vector<double>> history;  // iterates, only when recorded
};

// One slot of the distributed loop. Each outer round: every satellite runs its
// local descent (embarrassingly parallel, deterministic reductions), prices
// move on the residuals of those local solutions, then the shared profile
// takes one projected gradient step with the fresh prices. The local solve
// informs the prices; the profile itself creeps at eta_k = c0/sqrt(k), which
// is what gives the 1/sqrt(k) convergence signature.
inline SlotResult hbag_slot(const SlotProblem& p, std::vector<double> y0,
                            std::vector<double> duals0, const SolverParams& sp,
                            bool record_history = false) {
  int F = p.num_flows();
  int M = p.num_nodes();
  int dim = p.num_links() * F;
  SlotResult out;
  out.y = std::move(y0);
  if (static_cast<int>(out.y.size()) != dim)
    throw std::invalid_argument("profile size mismatch");
  out.duals = std::move(duals0);
  if (out.duals.empty()) out.duals.assign(M * F, 0.0);
  if (static_cast<int>(out.duals.size()) != M * F)
    throw std::invalid_argument("dual size mismatch");

  // initial profile must be admissible
  {
    std::vector<double> slice;
    for (int m = 0; m < M; ++m) {
      copy_slice(p, out.y, m, slice);
      project_slice(p, m, slice);
      int base = p.topo->first_link[m] * F;
      std::copy(slice.begin(), slice.end(), out.y.begin() + base);
    }
  }
  if (record_history) out.history.push_back(out.y);

  std::vector<double> yhat(dim), grad(dim), ynext(dim);
  int threads = std::max(1, sp.threads);

  auto parallel_over_sats = [&](auto&& body) {
    if (threads == 1 || M < 2 * threads) {
      detail::LocalScratch scratch;
      for (int m = 0; m < M; ++m) body(m, scratch);
      return;
    }
    std::vector<std::thread> pool;
    int chunk = (M + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      int lo = w * chunk, hi = std::min(M, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        detail::LocalScratch scratch;
        for (int m = lo; m < hi; ++m) body(m, scratch);
      });
    }
    for (auto& t : pool) t.join();
  };

  for (int k = 1; k <= sp.outer_iters; ++k) {
    std::vector<double> resid = conservation_residuals(p, out.y);

    // local solves (each writes only its own disjoint slice of yhat)
    parallel_over_sats([&](int m, detail::LocalScratch& s) {
      detail::solve_local_impl(p, m, out.y, out.duals, resid, sp, sp.rho, s);
      int base = p.topo->first_link[m] * F;
      std::copy(s.ym.begin(), s.ym.end(), yhat.begin() + base);
    });

    std::vector<double> resid_hat = conservation_residuals(p, yhat);
    double dual_move = 0.0;
    {
      std::vector<double> before = out.duals;
      dual_update(out.duals, resid_hat, sp.rho);
      double sq = 0.0;
      for (std::size_t i = 0; i < before.size(); ++i) {
        double dd = out.duals[i] - before[i];
        sq += dd * dd;
      }
      dual_move = std::sqrt(sq);
    }

    // primal projected gradient step at the current profile, fresh prices
    double eta = sp.step_c0 / std::sqrt(static_cast<double>(k));
    parallel_over_sats([&](int m, detail::LocalScratch& s) {
      int F2 = F;
      int l0 = p.topo->first_link[m];
      int deg = p.topo->first_link[m + 1] - l0;
      copy_slice(p, out.y, m, s.ym);
      double scale = (1.0 + p.cpen[m]) * kLn2 / p.p_ref_w;
      for (int i = 0; i < deg; ++i) {
        double tot = 0.0;
        for (int f = 0; f < F2; ++f) tot += s.ym[i * F2 + f];
        double dpw = scale * p.kappa_w[l0 + i] * std::exp2(tot);
        int n = p.topo->links[l0 + i].to;
        for (int f = 0; f < F2; ++f) {
          double g = dpw + (out.duals[m * F2 + f] - out.duals[n * F2 + f]) +
                     sp.rho * (resid[m * F2 + f] / p.q[m] -
                               resid[n * F2 + f] / p.q[n]);
          s.ym[i * F2 + f] -= eta * g;
        }
      }
      project_slice(p, m, s.ym);
      int base = l0 * F2;
      std::copy(s.ym.begin(), s.ym.end(), ynext.begin() + base);
    });

    // deterministic reduction, ascending satellite order
    double move = 0.0;
    for (int m = 0; m < M; ++m) {
      double sq = 0.0;
      for (int d = p.topo->first_link[m] * F; d < p.topo->first_link[m + 1] * F;
           ++d) {
        double dd = ynext[d] - out.y[d];
        sq += dd * dd;
      }
      move += std::sqrt(sq);
    }
    out.y.swap(ynext);
    out.step_norms.push_back(move);
    if (record_history) out.history.push_back(out.y);
    out.iterations = k;
    // stationary only if the profile stopped AND the prices stopped; early
    // rounds often have a frozen profile while pressure is still building,
    // and that must not read as convergence
    if (move <= sp.tol && dual_move <= sp.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace islsim
