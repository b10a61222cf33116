#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "smv/util.hpp"

namespace smv {

// Uniform-weight atomic measure on R^d, atoms stored row-major.
struct EmpiricalMeasure {
  int dim = 1;
  std::vector<double> data;

  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(std::vector<double> atoms_1d)
      : dim(1), data(std::move(atoms_1d)) {
    if (data.empty()) throw std::invalid_argument("EmpiricalMeasure: empty");
  }
  EmpiricalMeasure(int d, std::vector<double> flat) : dim(d), data(std::move(flat)) {
    if (dim < 1 || data.empty() || data.size() % dim != 0)
      throw std::invalid_argument("EmpiricalMeasure: bad atom array");
  }

  std::size_t size() const { return data.size() / dim; }
  std::span<const double> point(std::size_t i) const {
    return {data.data() + i * dim, static_cast<std::size_t>(dim)};
  }
  double scalar(std::size_t i) const { return data[i * dim]; }
};

// (1/N) sum |x_i|^beta.
inline double moment(const EmpiricalMeasure& mu, double beta) {
  if (beta < 0.0) throw std::invalid_argument("moment: beta must be >= 0");
  std::vector<double> vals(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double n2 = 0.0;
    for (double c : mu.point(i)) n2 += c * c;
    vals[i] = std::pow(std::sqrt(n2), beta);
  }
  return pairwise_mean(vals);
}

// Probability density sampled on a uniform 1-d grid.
struct GridDensity {
  double x0 = 0.0;         // first node
  double dx = 0.0;         // spacing
  std::vector<double> values;
  double time = 0.0;
  double mass_defect = 0.0;

  double x_at(std::size_t i) const { return x0 + i * dx; }
  std::size_t size() const { return values.size(); }
  double x_last() const { return x0 + (values.size() - 1) * dx; }

  double mass() const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      s += values[i] * ((i == 0 || i + 1 == values.size()) ? 0.5 : 1.0);
    return s * dx;
  }

  // Linear interpolation, zero outside the grid.
  double operator()(double x) const {
    const double u = (x - x0) / dx;
    if (u < 0.0 || u > values.size() - 1.0) return 0.0;
    const std::size_t i = std::min(static_cast<std::size_t>(u), values.size() - 2);
    const double w = u - i;
    return (1.0 - w) * values[i] + w * values[i + 1];
  }

  bool same_grid(const GridDensity& o) const {
    return values.size() == o.values.size() &&
           std::abs(x0 - o.x0) < 1e-12 * std::max(1.0, std::abs(x0)) &&
           std::abs(dx - o.dx) < 1e-14;
  }
};

using Measure = std::variant<EmpiricalMeasure, GridDensity>;

inline double mean_position(const GridDensity& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    s += g.x_at(i) * g.values[i] * ((i == 0 || i + 1 == g.size()) ? 0.5 : 1.0);
  return s * g.dx / std::max(g.mass(), 1e-300);
}

// Deterministic linear binning of 1-d samples; integer-exact accumulation
// order makes the result independent of sample permutation within chunks.
inline GridDensity bin_linear(std::span<const double> xs, double x0, double dx,
                              std::size_t n) {
  GridDensity g;
  g.x0 = x0;
  g.dx = dx;
  g.values.assign(n, 0.0);
  for (double x : xs) {
    const double u = (x - x0) / dx;
    if (u <= 0.0) {
      g.values.front() += 1.0;
    } else if (u >= n - 1.0) {
      g.values.back() += 1.0;
    } else {
      const std::size_t i = static_cast<std::size_t>(u);
      const double w = u - i;
      g.values[i] += 1.0 - w;
      g.values[i + 1] += w;
    }
  }
  const double norm = 1.0 / (static_cast<double>(xs.size()) * dx);
  for (double& v : g.values) v *= norm;
  return g;
}

// In-place convolution with a truncated discrete Gaussian (sigma in x units).
inline void gaussian_smooth(GridDensity& g, double sigma) {
  if (sigma <= 0.0) return;
  const int half = std::max(1, static_cast<int>(std::ceil(6.0 * sigma / g.dx)));
  std::vector<double> kern(2 * half + 1);
  double ks = 0.0;
  for (int j = -half; j <= half; ++j) {
    kern[j + half] = std::exp(-0.5 * (j * g.dx) * (j * g.dx) / (sigma * sigma));
    ks += kern[j + half];
  }
  for (double& k : kern) k /= ks;
  const int n = static_cast<int>(g.values.size());
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = -half; j <= half; ++j) {
      const int src = std::clamp(i + j, 0, n - 1);
      acc += kern[j + half] * g.values[src];
    }
    out[i] = acc;
  }
  g.values = std::move(out);
}

inline double silverman_bandwidth(std::vector<double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 1.0;
  const double sd = sample_sd(xs);
  std::sort(xs.begin(), xs.end());
  const double iqr = xs[static_cast<std::size_t>(0.75 * (n - 1))] -
                     xs[static_cast<std::size_t>(0.25 * (n - 1))];
  const double spread = (iqr > 0.0) ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * std::max(spread, 1e-12) * std::pow(static_cast<double>(n), -0.2);
}

struct KdeConfig {
  std::size_t grid_points = 2048;
  double tail_prob = 5e-4;        // window = pooled quantile range at this level
  double margin_bandwidths = 5.0;
  double bandwidth = 0.0;         // 0 = Silverman on the pooled sample
};

namespace detail {
inline std::pair<double, double> kde_window(std::vector<double>& pooled, double tail_prob,
                                            double margin) {
  std::sort(pooled.begin(), pooled.end());
  const std::size_t n = pooled.size();
  const double lo = pooled[static_cast<std::size_t>(tail_prob * (n - 1))];
  const double hi = pooled[static_cast<std::size_t>((1.0 - tail_prob) * (n - 1))];
  return {lo - margin, hi + margin};
}
}  // namespace detail

inline GridDensity kde_1d(std::span<const double> xs, double bandwidth, double lo,
                          double hi, std::size_t n) {
  const double dx = (hi - lo) / (n - 1);
  GridDensity g = bin_linear(xs, lo, dx, n);
  gaussian_smooth(g, bandwidth);
  return g;
}

// d_TV surrogate for a pair of laws. Grid pairs integrate |p_a - p_b|/2
// directly; empirical pairs go through kernel density estimates with a single
// shared bandwidth (Silverman on the pooled sample), the density surrogate the
// total-variation metric calls for when the inputs are atomic.
inline double dtv_estimate(const Measure& a, const Measure& b, KdeConfig cfg = {}) {
  const bool a_grid = std::holds_alternative<GridDensity>(a);
  const bool b_grid = std::holds_alternative<GridDensity>(b);
  if (a_grid && b_grid) {
    const auto& ga = std::get<GridDensity>(a);
    const auto& gb = std::get<GridDensity>(b);
    if (ga.same_grid(gb)) {
      double s = 0.0;
      for (std::size_t i = 0; i < ga.size(); ++i)
        s += std::abs(ga.values[i] - gb.values[i]) *
             ((i == 0 || i + 1 == ga.size()) ? 0.5 : 1.0);
      return 0.5 * s * ga.dx;
    }
    const double lo = std::min(ga.x0, gb.x0);
    const double hi = std::max(ga.x_last(), gb.x_last());
    const double dx = std::min(ga.dx, gb.dx);
    const std::size_t n = static_cast<std::size_t>((hi - lo) / dx) + 2;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = lo + i * dx;
      s += std::abs(ga(x) - gb(x)) * ((i == 0 || i + 1 == n) ? 0.5 : 1.0);
    }
    return 0.5 * s * dx;
  }
  if (!a_grid && !b_grid) {
    const auto& ea = std::get<EmpiricalMeasure>(a);
    const auto& eb = std::get<EmpiricalMeasure>(b);
    if (ea.dim != 1 || eb.dim != 1)
      throw std::invalid_argument("dtv_estimate: KDE route requires d = 1");
    std::vector<double> pooled(ea.data);
    pooled.insert(pooled.end(), eb.data.begin(), eb.data.end());
    const double h = (cfg.bandwidth > 0.0) ? cfg.bandwidth : silverman_bandwidth(pooled);
    auto [lo, hi] = detail::kde_window(pooled, cfg.tail_prob, cfg.margin_bandwidths * h);
    const GridDensity ka = kde_1d(ea.data, h, lo, hi, cfg.grid_points);
    const GridDensity kb = kde_1d(eb.data, h, lo, hi, cfg.grid_points);
    return dtv_estimate(ka, kb, cfg);
  }
  // Mixed: estimate the empirical side on the grid of the density side.
  const GridDensity& g = std::get<GridDensity>(a_grid ? a : b);
  const EmpiricalMeasure& e = std::get<EmpiricalMeasure>(a_grid ? b : a);
  if (e.dim != 1) throw std::invalid_argument("dtv_estimate: incompatible dimensions");
  std::vector<double> pooled(e.data);
  const double h = (cfg.bandwidth > 0.0) ? cfg.bandwidth : silverman_bandwidth(pooled);
  GridDensity ke = bin_linear(e.data, g.x0, g.dx, g.size());
  gaussian_smooth(ke, h);
  return dtv_estimate(g, Measure(ke), cfg);
}

}  // namespace smv
