#pragma once

#include <cmath>
#include <stdexcept>

namespace islsim {

inline constexpr double kSpeedOfLight = 299792458.0;       // m/s
inline constexpr double kBoltzmann = 1.380649e-23;         // J/K
inline constexpr double kLn2 = 0.6931471805599453;

struct LinkParams {
  double bandwidth_hz = 10e9;     // B
  double tx_gain_dbi = 30.0;
  double rx_gain_dbi = 30.0;
  double noise_temp_k = 290.0;
  double wavelength_m = 1550e-9;  // optical carrier; f = c / wavelength
  double snr_margin = 1.0;        // the `a` factor folded into kappa
  double max_power_w = 10.0;      // per-satellite transmit budget P_max
  double link_share = 1.0;        // per-link cap as a fraction of the budget
  double budget_offset = 0.0;     // extra gain product; 0 = calibrate at load

  double carrier_hz() const { return kSpeedOfLight / wavelength_m; }
  double gain_product() const {
    return std::pow(10.0, tx_gain_dbi / 10.0) *
           std::pow(10.0, rx_gain_dbi / 10.0);
  }
};

// Free-space loss (4 pi d f / c)^2.
inline double path_loss(double distance_m, double freq_hz) {
  if (distance_m <= 0.0) throw std::invalid_argument("distance must be > 0");
  if (freq_hz <= 0.0) throw std::invalid_argument("frequency must be > 0");
  double x = 4.0 * 3.14159265358979323846 * distance_m * freq_hz / kSpeedOfLight;
  return x * x;
}

// Shannon rate at transmit power p over a link of the given geometry.
inline double capacity_bps(double power_w, double distance_m,
                           const LinkParams& lp) {
  if (power_w < 0.0) throw std::invalid_argument("power must be >= 0");
  double loss = path_loss(distance_m, lp.carrier_hz());
  double gain = lp.gain_product() *
                (lp.budget_offset > 0.0 ? lp.budget_offset : 1.0);
  double noise = kBoltzmann * lp.noise_temp_k * lp.bandwidth_hz;
  double snr = power_w * gain / (noise * loss);
  return lp.bandwidth_hz * std::log2(1.0 + snr);
}

// kappa collapses margin, noise, gains and path loss into one coefficient so
// the power curve reads P(R) = kappa * (2^(R/B) - 1), the exact inverse of the
// capacity above. Raw Table-II-style budgets put kappa around 1e9 W; the
// calibrated budget_offset (see below) brings it to order 1 W at 1000 km.
inline double kappa_w(double distance_m, const LinkParams& lp) {
  double loss = path_loss(distance_m, lp.carrier_hz());
  double gain = lp.gain_product() *
                (lp.budget_offset > 0.0 ? lp.budget_offset : 1.0);
  double noise = kBoltzmann * lp.noise_temp_k * lp.bandwidth_hz;
  return lp.snr_margin * noise * loss / gain;
}

inline double power_for_rate(double rate_bps, double kappa_w, double bw_hz) {
  if (rate_bps < 0.0) throw std::invalid_argument("rate must be >= 0");
  if (kappa_w <= 0.0 || bw_hz <= 0.0)
    throw std::invalid_argument("kappa and bandwidth must be > 0");
  return kappa_w * (std::exp2(rate_bps / bw_hz) - 1.0);
}

struct PowerRateDerivs {
  double first = 0.0;   // dP/dR, W per bit/s
  double second = 0.0;  // d2P/dR2
};

inline PowerRateDerivs power_rate_derivatives(double rate_bps, double kappa_w,
                                              double bw_hz) {
  double g = kLn2 / bw_hz;
  double e = std::exp2(rate_bps / bw_hz);
  return {kappa_w * g * e, kappa_w * g * g * e};
}

// Largest rate whose power draw fits under `power_bound_w`.
inline double max_rate_under_bound(double power_bound_w, double kappa_w,
                                   double bw_hz) {
  if (power_bound_w < 0.0) return 0.0;
  return bw_hz * std::log2(1.0 + power_bound_w / kappa_w);
}

// Gain product multiplier making a reference link (P_max over ref_distance)
// close at the target SNR. Raw optical budgets from the defaults are off by
// ~9 orders of magnitude; this pins the operating point instead.
inline double calibrate_budget_offset(const LinkParams& lp,
                                      double ref_distance_m = 1000e3,
                                      double target_snr = 10.0) {
  double loss = path_loss(ref_distance_m, lp.carrier_hz());
  double noise = kBoltzmann * lp.noise_temp_k * lp.bandwidth_hz;
  return target_snr * noise * loss / (lp.max_power_w * lp.gain_product());
}

}  // namespace islsim
