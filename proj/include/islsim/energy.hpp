#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace islsim {

struct EnergyParams {
  double capacity_j = 400e3;    // C^B_max
  double floor_j = 40e3;        // C^B_min, the safe-reserve threshold
  double initial_j = 320e3;     // C^B(0)
  double panel_area_m2 = 2.5;
  double panel_efficiency = 0.30;
  double solar_flux_w_m2 = 1361.0;
  double base_load_w = 55.0;    // bus/payload draw independent of the ISL

  void validate() const {
    if (capacity_j <= 0 || panel_area_m2 <= 0 || solar_flux_w_m2 <= 0)
      throw std::invalid_argument("energy parameters must be positive");
    if (panel_efficiency <= 0 || panel_efficiency > 1)
      throw std::invalid_argument("panel efficiency must lie in (0,1]");
    if (base_load_w < 0) throw std::invalid_argument("base load must be >= 0");
    if (!(floor_j < initial_j && initial_j <= capacity_j) || floor_j < 0)
      throw std::invalid_argument("need 0 <= floor < initial <= capacity");
  }
};

// Instantaneous harvest: phi * eff * flux * area * sin(elev). Zero in shadow,
// peaks mid-arc. With the default panel this tops out at 1020.75 W.
inline double harvest_power(bool illuminated, double sun_elev_rad,
                            const EnergyParams& ep) {
  if (!illuminated) return 0.0;
  double s = std::sin(sun_elev_rad);
  if (s < 0.0) s = 0.0;
  return ep.panel_efficiency * ep.solar_flux_w_m2 * ep.panel_area_m2 * s;
}

// One slot of battery dynamics: charge += D_e * (harvest - isl_power - base),
// clamped into [0, capacity]. The clamp keeps surplus from inflating the
// battery past its rating and lets deficits bottom out at zero; the safe
// floor is deliberately NOT enforced here, baselines are allowed to pierce it
// and the metrics count exactly that.
inline double step_battery(double charge_j, double harvest_w,
                           double isl_power_w, double slot_s,
                           const EnergyParams& ep) {
  if (isl_power_w < 0.0) throw std::invalid_argument("power must be >= 0");
  double delta = slot_s * (harvest_w - isl_power_w - ep.base_load_w);
  double next = charge_j + delta;
  if (delta > 0.0) return std::min(next, ep.capacity_j);
  return std::max(next, 0.0);
}

// Eclipse-aware transmit budget:
//   dark:  min(charge / delta_ecl, P_max)        ration the battery to
//                                                survive until sunrise
//   lit:   min(harvest + charge / delta_ecl, P_max)  spend sunshine freely,
//                                                dip into reserves only at a
//                                                rate the next eclipse allows
// delta_ecl is time-to-exit when dark, next-eclipse length when lit, and +inf
// when the orbit never enters shadow (budget degenerates to P_max).
inline double dynamic_power_bound(double charge_j, bool illuminated,
                                  double harvest_w, double eclipse_horizon_s,
                                  double p_max_w) {
  if (eclipse_horizon_s <= 0.0)
    throw std::invalid_argument("eclipse horizon must be > 0");
  // No shadow on this orbit: the ration C/delta blows up as the upcoming
  // eclipse shrinks to nothing, so the budget is just the hardware cap. This
  // is the theta -> 0 limit of the lit branch, not a special case bolted on.
  if (std::isinf(eclipse_horizon_s)) return p_max_w;
  if (charge_j < 0.0) charge_j = 0.0;
  double ration = charge_j / eclipse_horizon_s;
  double budget = illuminated ? harvest_w + ration : ration;
  return std::min(budget, p_max_w);
}

}  // namespace islsim
