#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "smv/special.hpp"

namespace smv {

// Parameters of the reference profile
//   rho^k(t,x) = t^{-d/alpha} (1 + t^{-1/alpha} |x|)^{-d-alpha-k},
// the yardstick every density and kernel bound is measured against.
struct RhoParams {
  double k;
  double alpha;
  int dim;

  RhoParams(double k_, double alpha_, int dim_) : k(k_), alpha(alpha_), dim(dim_) {
    if (!(alpha > 1.0 && alpha < 2.0))
      throw std::invalid_argument("RhoParams: alpha must lie in (1,2)");
    if (dim < 1) throw std::invalid_argument("RhoParams: dim must be >= 1");
    if (!(k > -alpha))
      throw std::invalid_argument("RhoParams: need k > -alpha for integrability");
  }
};

inline double rho_radial(const RhoParams& p, double t, double r) {
  if (!(t > 0.0)) throw std::invalid_argument("rho: t must be > 0");
  const double s = std::pow(t, -1.0 / p.alpha);
  return std::pow(t, -static_cast<double>(p.dim) / p.alpha) *
         std::pow(1.0 + s * std::abs(r), -(p.dim + p.alpha + p.k));
}

inline double rho(const RhoParams& p, double t, std::span<const double> x) {
  double n = 0.0;
  for (double v : x) n += v * v;
  return rho_radial(p, t, std::sqrt(n));
}

// |x|^g t^{-g/alpha} rho^k(t,x) / rho^{k-g}(t,x); contract: <= 1.
inline double space_time_ratio(const RhoParams& p, double gamma, double t, double r) {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("space_time_ratio: gamma must be in [0,1]");
  if (!(p.k - gamma > -p.alpha))
    throw std::invalid_argument("space_time_ratio: need k - gamma > -alpha");
  if (gamma == 0.0) return 1.0;
  const RhoParams shifted(p.k - gamma, p.alpha, p.dim);
  const double num = std::pow(std::abs(r), gamma) * std::pow(t, -gamma / p.alpha) *
                     rho_radial(p, t, r);
  return num / rho_radial(shifted, t, r);
}

struct ConvQuadConfig {
  double extent = 80.0;   // half-width of the z window
  int points = 4001;      // trapezoid nodes (d = 1)
};

// int rho^{k1}(t-s, y-z) rho^{k2}(s, z) dz  /  rho^{k1 ^ k2}(t, y), d = 1.
// The value is the empirical constant of the convolution inequality; callers
// assert stability under refinement, never a particular magnitude.
inline double convolution_inequality_ratio(double k1, double k2, double alpha,
                                           double s, double t, double y,
                                           const ConvQuadConfig& cfg = {}) {
  if (!(s > 0.0 && s < t))
    throw std::invalid_argument("convolution_inequality_ratio: need 0 < s < t");
  const RhoParams pa(k1, alpha, 1), pb(k2, alpha, 1);
  const RhoParams pmin(std::min(k1, k2), alpha, 1);
  const double h = 2.0 * cfg.extent / (cfg.points - 1);
  double acc = 0.0;
  for (int i = 0; i < cfg.points; ++i) {
    const double z = -cfg.extent + i * h;
    const double w = (i == 0 || i == cfg.points - 1) ? 0.5 : 1.0;
    acc += w * rho_radial(pa, t - s, y - z) * rho_radial(pb, s, z);
  }
  return acc * h / rho_radial(pmin, t, y);
}

// Term sequence a_k = C^k (t-s)^{(k-1)(1-1/alpha)} prod_{j<k} B(j(1-1/alpha), 1-1/alpha)
// governing the kernel iterates; a_k -> 0 and the partial sums converge.
inline std::vector<double> beta_product_tail(double alpha, double coefficient,
                                             int k_max, double dt) {
  if (k_max < 1) throw std::invalid_argument("beta_product_tail: k_max must be >= 1");
  const double gap = 1.0 - 1.0 / alpha;
  std::vector<double> terms;
  terms.reserve(k_max);
  double log_prod = 0.0;  // empty product for k = 1
  for (int k = 1; k <= k_max; ++k) {
    if (k >= 2) log_prod += std::log(beta_fn((k - 1) * gap, gap));
    const double a = std::pow(coefficient, k) * std::pow(dt, (k - 1) * gap) *
                     std::exp(log_prod);
    terms.push_back(a);
  }
  return terms;
}

// log a_k of the same sequence; usable far past the range where the raw terms
// overflow (for large C the peak term exceeds double range before decaying).
inline std::vector<double> beta_product_tail_log(double alpha, double coefficient,
                                                 int k_max, double dt) {
  if (k_max < 1) throw std::invalid_argument("beta_product_tail_log: k_max must be >= 1");
  const double gap = 1.0 - 1.0 / alpha;
  std::vector<double> logs;
  logs.reserve(k_max);
  double log_prod = 0.0;
  for (int k = 1; k <= k_max; ++k) {
    if (k >= 2) log_prod += std::log(beta_fn((k - 1) * gap, gap));
    logs.push_back(k * std::log(coefficient) + (k - 1) * gap * std::log(dt) + log_prod);
  }
  return logs;
}

// Per-term factors of the proxy-convolved series |p^ (x) H^k| from the kernel
// bound shape:  b_k = C^{k+1} (t-s)^{k(1-1/alpha)} prod_{j<=k} B(1/alpha + j(1-1/alpha), 1-1/alpha).
inline std::vector<double> proxy_series_terms(double alpha, double coefficient,
                                              int k_max, double dt) {
  const double gap = 1.0 - 1.0 / alpha;
  std::vector<double> terms;
  terms.reserve(k_max);
  double log_prod = 0.0;
  for (int k = 1; k <= k_max; ++k) {
    log_prod += std::log(beta_fn(1.0 / alpha + k * gap, gap));
    terms.push_back(std::pow(coefficient, k + 1) * std::pow(dt, k * gap) *
                    std::exp(log_prod));
  }
  return terms;
}

}  // namespace smv
