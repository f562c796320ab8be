#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "islsim/rng.hpp"
#include "islsim/traffic.hpp"

namespace islsim {

// Fraction of (satellite, slot) pairs whose post-step charge stays strictly
// above the safe floor. trace[m][t], t over the slots of the run.
inline double energy_survival_rate(const std::vector<std::vector<double>>& trace,
                                   double floor_j) {
  std::size_t total = 0, ok = 0;
  for (const auto& row : trace)
    for (double c : row) {
      ++total;
      if (c > floor_j) ++ok;
    }
  if (total == 0) throw std::invalid_argument("empty battery trace");
  return static_cast<double>(ok) / static_cast<double>(total);
}

// Demand-weighted shortfall: sum of positive (demand - delivered) over flows,
// divided by total demand. delivered_bps is the slot-averaged rate absorbed
// at each flow's sink.
inline double flow_violation_rate(const std::vector<Flow>& flows,
                                  const std::vector<double>& delivered_bps) {
  if (flows.size() != delivered_bps.size())
    throw std::invalid_argument("flows/delivered size mismatch");
  double short_sum = 0.0, demand_sum = 0.0;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    demand_sum += flows[i].demand_bps;
    double gap = flows[i].demand_bps - delivered_bps[i];
    if (gap > 0.0) short_sum += gap;
  }
  if (demand_sum <= 0.0) throw std::invalid_argument("no demand");
  return short_sum / demand_sum;
}

// Delivered bits per joule of ISL transmit energy.
inline double energy_efficiency(double delivered_bits, double isl_energy_j) {
  if (isl_energy_j <= 0.0) return 0.0;
  return delivered_bits / isl_energy_j;
}

// Distance-to-reference convergence curve r^k = ||y^k - y*|| / ||y^0 - y*||.
inline std::vector<double> residual_series(
    const std::vector<std::vector<double>>& iterates,
    const std::vector<double>& reference) {
  if (iterates.empty()) throw std::invalid_argument("no iterates");
  auto dist = [&](const std::vector<double>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double d = a[i] - reference[i];
      s += d * d;
    }
    return std::sqrt(s);
  };
  double d0 = dist(iterates.front());
  if (d0 <= 0.0) throw std::invalid_argument("start coincides with reference");
  std::vector<double> r(iterates.size());
  for (std::size_t k = 0; k < iterates.size(); ++k) r[k] = dist(iterates[k]) / d0;
  return r;
}

// Index of the first iterate after which the step norm stayed below `eps` for
// `run` consecutive iterations, or the last index if that never happens. The
// iterate there serves as the convergence reference.
inline std::size_t plateau_index(const std::vector<double>& step_norms,
                                 double eps = 1e-4, int run = 10) {
  int streak = 0;
  for (std::size_t k = 0; k < step_norms.size(); ++k) {
    streak = step_norms[k] < eps ? streak + 1 : 0;
    if (streak >= run) return k + 1;  // step k maps to iterate k+1
  }
  return step_norms.size();
}

struct Summary {
  double mean = 0.0;
  double sem = 0.0;      // sample sd / sqrt(n)
  double ci_lo = 0.0;    // bootstrap percentile bounds
  double ci_hi = 0.0;
  std::size_t n = 0;
};

// Mean, standard error and a seeded percentile-bootstrap CI. The bootstrap
// engine derives from the master seed so summaries are reproducible.
inline Summary summarize(const std::vector<double>& xs, std::uint64_t seed,
                         int bootstrap_reps = 1000, double level = 0.95) {
  if (xs.empty()) throw std::invalid_argument("summarize: empty sample");
  Summary s;
  s.n = xs.size();
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / xs.size();
  if (xs.size() > 1) {
    double sq = 0.0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.sem = std::sqrt(sq / (xs.size() - 1)) / std::sqrt(double(xs.size()));
  }
  auto eng = make_engine(seed, RngStream::bootstrap);
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  std::vector<double> means(bootstrap_reps);
  for (int b = 0; b < bootstrap_reps; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) acc += xs[pick(eng)];
    means[b] = acc / xs.size();
  }
  std::sort(means.begin(), means.end());
  double a = (1.0 - level) / 2.0;
  auto at = [&](double q) {
    double idx = q * (bootstrap_reps - 1);
    return means[static_cast<std::size_t>(std::lround(idx))];
  };
  s.ci_lo = at(a);
  s.ci_hi = at(1.0 - a);
  return s;
}

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline FitResult linear_fit(const std::vector<double>& x,
                            const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit needs >= 2 points");
  double n = double(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  FitResult f;
  double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("degenerate abscissa");
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0, ybar = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pred = f.intercept + f.slope * x[i];
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

// Log-log slope of y against x, skipping nonpositive values.
inline FitResult loglog_fit(const std::vector<double>& x,
                            const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  return linear_fit(lx, ly);
}

inline std::vector<double> moving_average(const std::vector<double>& xs,
                                          int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::size_t lo = i >= std::size_t(window - 1) ? i - (window - 1) : 0;
    double acc = 0.0;
    for (std::size_t j = lo; j <= i; ++j) acc += xs[j];
    out[i] = acc / double(i - lo + 1);
  }
  return out;
}

}  // namespace islsim
