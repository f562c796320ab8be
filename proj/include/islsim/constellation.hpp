#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace islsim {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline double norm(Vec3 a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

struct ConstellationParams {
  int num_sats = 172;          // M, must be divisible by num_planes
  int num_planes = 4;
  double altitude_m = 550e3;
  double inclination_deg = 53.0;
  double orbit_period_s = 5400.0;   // T
  double eclipse_fraction = 0.38;   // theta, arc fraction spent in shadow
  double slot_seconds = 15.0;       // D_e
  double earth_radius_m = 6371e3;
};

// Per-satellite, per-slot kinematic and illumination state.
struct SatState {
  Vec3 pos;                 // ECI-like frame, meters
  bool illuminated = true;  // phi in {0,1}
  double sun_elev = 0.0;    // sigma in [0, pi], panel incidence over the lit arc
  double eclipse_horizon_s = 0.0;  // delta_ecl: time to eclipse end when dark,
                                   // duration of the next eclipse when lit
};

// Circular orbits on evenly spaced planes. Satellite m lives on plane
// m / (M/P) with in-plane phase offset 2*pi*(m mod S)/S, S = M/P, and all
// satellites advance at the common mean motion 2*pi/T.
//
// Shadow model: a fixed arc of width 2*pi*theta at the top of the phase circle
// (entry at phase fraction 1-theta, exit at wraparound). Anchoring the arc in
// phase rather than in inertial space keeps eclipse bookkeeping exact and
// per-plane: satellites of one plane march through the arc staggered by their
// phase offsets, which is the behavior that matters for the power bound.
class Constellation {
 public:
  explicit Constellation(const ConstellationParams& p) : p_(p) {
    if (p.num_planes <= 0 || p.num_sats <= 0)
      throw std::invalid_argument("constellation sizes must be positive");
    if (p.num_sats % p.num_planes != 0)
      throw std::invalid_argument("num_sats must be divisible by num_planes");
    if (p.eclipse_fraction < 0.0 || p.eclipse_fraction >= 1.0)
      throw std::invalid_argument("eclipse_fraction must lie in [0,1)");
    if (p.orbit_period_s <= 0 || p.slot_seconds <= 0)
      throw std::invalid_argument("times must be positive");
    sats_per_plane_ = p.num_sats / p.num_planes;
  }

  int sats_per_plane() const { return sats_per_plane_; }
  int plane_of(int m) const { return m / sats_per_plane_; }

  // Orbital phase in [0,1). Planes carry a small stagger (quarter of an
  // in-plane slot) so inter-plane geometry is not degenerate.
  double phase_frac(int m, double t_s) const {
    int plane = plane_of(m);
    int slot = m % sats_per_plane_;
    double frac = static_cast<double>(slot) / sats_per_plane_ +
                  t_s / p_.orbit_period_s +
                  0.25 * static_cast<double>(plane) /
                      (sats_per_plane_ * p_.num_planes);
    frac -= std::floor(frac);
    return frac;
  }

  SatState state(int m, double t_s) const {
    SatState s;
    double frac = phase_frac(m, t_s);
    double u = 2.0 * kPi * frac;  // argument of latitude
    double r = p_.earth_radius_m + p_.altitude_m;
    double raan = 2.0 * kPi * plane_of(m) / p_.num_planes;
    double inc = p_.inclination_deg * kPi / 180.0;

    // R_z(raan) * R_x(inc) applied to the in-plane position
    double cx = r * std::cos(u), cy = r * std::sin(u);
    double yq = cy * std::cos(inc);
    double zq = cy * std::sin(inc);
    s.pos = {cx * std::cos(raan) - yq * std::sin(raan),
             cx * std::sin(raan) + yq * std::cos(raan), zq};

    double theta = p_.eclipse_fraction;
    double lit_frac = 1.0 - theta;
    if (theta > 0.0 && frac >= lit_frac) {
      s.illuminated = false;
      s.sun_elev = 0.0;
      s.eclipse_horizon_s = (1.0 - frac) * p_.orbit_period_s;  // time to exit
    } else {
      s.illuminated = true;
      // panel incidence ramps 0 -> pi over the lit arc, so sin(sigma) rises
      // and falls like a day: zero at both terminators, peak mid-arc
      s.sun_elev = theta < 1.0 ? kPi * (frac / lit_frac) : 0.0;
      s.eclipse_horizon_s =
          theta > 0.0 ? theta * p_.orbit_period_s  // next eclipse, full length
                      : std::numeric_limits<double>::infinity();
    }
    return s;
  }

  // States of the whole fleet at slot t (t in [0, n_t)), sampled at slot start.
  std::vector<SatState> propagate(int t) const {
    std::vector<SatState> v(p_.num_sats);
    double ts = t * p_.slot_seconds;
    for (int m = 0; m < p_.num_sats; ++m) v[m] = state(m, ts);
    return v;
  }

  const ConstellationParams& params() const { return p_; }

 private:
  ConstellationParams p_;
  int sats_per_plane_ = 0;
};

inline double distance_m(const SatState& a, const SatState& b) {
  return norm(a.pos - b.pos);
}

// One directed transmit link. Owned by `from`; kappa is filled in by the link
// module once the power model is known.
struct DirectedLink {
  int from = -1;
  int to = -1;
  double distance_m = 0.0;
  double kappa_w = 0.0;
};

// +Grid adjacency for one slot: ring neighbors within the plane plus the
// nearest satellite in each adjacent plane (ties broken toward the lowest
// index). Directed links are grouped by owner in ascending (from, to) order,
// which later code relies on for reproducible reductions.
struct Topology {
  int num_sats = 0;
  std::vector<DirectedLink> links;     // grouped by `from`, ascending `to`
  std::vector<int> first_link;         // size num_sats+1, CSR-style offsets
  std::vector<std::vector<int>> out_neighbors;

  int degree(int m) const { return first_link[m + 1] - first_link[m]; }
  int find_link(int from, int to) const {
    for (int l = first_link[from]; l < first_link[from + 1]; ++l)
      if (links[l].to == to) return l;
    return -1;
  }
};

inline Topology build_topology(const Constellation& c,
                               const std::vector<SatState>& st) {
  const auto& p = c.params();
  int S = c.sats_per_plane();
  int M = p.num_sats;
  std::vector<std::vector<int>> nbr(M);

  auto add_undirected = [&](int a, int b) {
    if (a == b) return;
    if (std::find(nbr[a].begin(), nbr[a].end(), b) == nbr[a].end()) {
      nbr[a].push_back(b);
      nbr[b].push_back(a);
    }
  };

  for (int m = 0; m < M; ++m) {
    int plane = m / S, slot = m % S;
    if (S > 1) {
      add_undirected(m, plane * S + (slot + 1) % S);
      add_undirected(m, plane * S + (slot + S - 1) % S);
    }
    // nearest in each adjacent plane at this instant
    for (int dp : {1, p.num_planes - 1}) {
      if (p.num_planes < 2) break;
      int q = (plane + dp) % p.num_planes;
      if (q == plane) continue;
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < S; ++j) {
        int n = q * S + j;
        double d = distance_m(st[m], st[n]);
        if (d < best_d - 1e-9 || (std::abs(d - best_d) <= 1e-9 && n < best)) {
          best = n;
          best_d = d;
        }
      }
      if (best >= 0) add_undirected(m, best);
    }
  }

  Topology topo;
  topo.num_sats = M;
  topo.first_link.assign(M + 1, 0);
  topo.out_neighbors.resize(M);
  for (int m = 0; m < M; ++m) {
    std::sort(nbr[m].begin(), nbr[m].end());
    topo.out_neighbors[m] = nbr[m];
  }
  for (int m = 0; m < M; ++m) {
    topo.first_link[m] = static_cast<int>(topo.links.size());
    for (int n : nbr[m])
      topo.links.push_back({m, n, distance_m(st[m], st[n]), 0.0});
  }
  topo.first_link[M] = static_cast<int>(topo.links.size());
  return topo;
}

}  // namespace islsim
