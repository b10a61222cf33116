#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "smv/drift.hpp"
#include "smv/measures.hpp"
#include "smv/reference_bounds.hpp"
#include "smv/stable_density.hpp"
#include "smv/util.hpp"

namespace smv {

// Law flow seen by the kernel: t -> marginal law. Measure-independent drifts
// can use null_flow().
using FlowLookup = std::function<Measure(double)>;

inline FlowLookup null_flow() {
  return [](double) { return Measure(EmpiricalMeasure({0.0})); };
}

// Lazy space-time kernel f(s, r, t, x, y), d = 1. `sing` is the blow-up
// exponent of (t-r)^{-sing} as r -> t; `concentrated` marks q-like profiles
// whose width collapses at rate (t-r)^{1/alpha} (the proxy and H have it,
// convolution outputs keep a flattening ρ-envelope instead).
struct SpaceTimeKernel {
  std::function<double(double, double, double, double, double)> eval;
  double sing = 0.0;
  bool concentrated = false;
};

struct ParametrixConfig {
  int truncation_K = 3;
  int time_nodes_per_side = 10;  // graded two-sided time mesh
  double grading_power = 0.0;    // 0 -> alpha/(alpha-1)
  double grid_extent = 16.0;     // y-grid half width around x
  double grid_step = 0.05;
  double tolerance = 1e-3;       // negative clamp threshold
  double mass_defect_threshold = 0.05;

  double power(double alpha) const {
    return grading_power > 0.0 ? grading_power : alpha / (alpha - 1.0);
  }
};

// p^(s, r, t, x, y) = q(t - r, y - x): transition density of the driftless
// stable flow, the expansion proxy.
inline double proxy_density(const StableLaw& law, double s, double t, double x, double y) {
  if (!(s < t)) throw std::invalid_argument("proxy_density: need s < t");
  return StableDensity::get(law.alpha, 1).density_radial(t - s, y - x);
}

inline SpaceTimeKernel proxy_kernel(const StableLaw& law) {
  const double alpha = law.alpha;
  return {[alpha](double, double r, double t, double x, double y) {
            return StableDensity::get(alpha, 1).density_radial(t - r, y - x);
          },
          0.0, true};
}

// H(s, r, t, x, y) = b(r, x, mu_r) . d_x p^(r, t, x, y)
//                  = -b(r, x, mu_r) q'(t - r, y - x); vanishes at y = x.
inline SpaceTimeKernel kernel_H(const DriftModel& drift, FlowLookup flow,
                                const StableLaw& law) {
  if (law.dim != 1) throw std::invalid_argument("kernel_H: parametrix engine is d = 1");
  const double alpha = law.alpha;
  const DriftModel* d = &drift;
  auto fl = std::make_shared<FlowLookup>(std::move(flow));
  return {[d, fl, alpha](double, double r, double t, double x, double y) {
            const Measure mu = (*fl)(r);
            return -d->eval1(r, x, mu) *
                   StableDensity::get(alpha, 1).gradient_radial(t - r, y - x);
          },
          1.0 / alpha, true};
}

namespace pmx {

// Interior nodes of (a, b), graded toward both endpoints with power p.
inline std::vector<double> two_sided_mesh(double a, double b, int n_side, double p) {
  std::vector<double> nodes;
  nodes.reserve(2 * n_side + 1);
  const double half = 0.5 * (b - a);
  for (int i = 1; i <= n_side; ++i)
    nodes.push_back(a + half * std::pow(static_cast<double>(i) / n_side, p));
  for (int i = n_side; i >= 1; --i)
    nodes.push_back(b - half * std::pow(static_cast<double>(i) / n_side, p));
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

// int_s^t I(r) dr where I ~ (r-s)^{-a} near s and (t-r)^{-b} near t, given
// I at interior nodes. Product-trapezoidal: the regularized factor is
// piecewise linear, the singular weight integrated in closed form; the end
// panels extend the regularized factor as a constant.
inline double product_time_integral(double s, double t, const std::vector<double>& nodes,
                                    const std::vector<double>& I, double a, double b) {
  const double mid = 0.5 * (s + t);
  const std::size_t n = nodes.size();
  if (n == 0) return 0.0;
  double total = 0.0;

  // weight integrals: W0 = int u^{-e} du, W1 = int u^{1-e} du on [u1, u2]
  auto w01 = [](double u1, double u2, double e, double& w0, double& w1) {
    w0 = (std::pow(u2, 1.0 - e) - std::pow(u1, 1.0 - e)) / (1.0 - e);
    w1 = (std::pow(u2, 2.0 - e) - std::pow(u1, 2.0 - e)) / (2.0 - e);
  };

  // Left end panel [s, nodes[0]] with phi = I (r-s)^a constant.
  {
    const double phi = I[0] * std::pow(nodes[0] - s, a);
    total += phi * std::pow(nodes[0] - s, 1.0 - a) / (1.0 - a);
  }
  // Right end panel [nodes[n-1], t].
  {
    const double phi = I[n - 1] * std::pow(t - nodes[n - 1], b);
    total += phi * std::pow(t - nodes[n - 1], 1.0 - b) / (1.0 - b);
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double r1 = nodes[i], r2 = nodes[i + 1];
    if (r2 <= mid || (r1 < mid && 0.5 * (r1 + r2) <= mid)) {
      // weight (r-s)^{-a}: phi = I (r-s)^a linear between nodes
      const double u1 = r1 - s, u2 = r2 - s;
      const double p1 = I[i] * std::pow(u1, a), p2 = I[i + 1] * std::pow(u2, a);
      const double slope = (p2 - p1) / (u2 - u1);
      double w0, w1;
      w01(u1, u2, a, w0, w1);
      total += (p1 - slope * u1) * w0 + slope * w1;
    } else {
      // weight (t-r)^{-b}: phi = I (t-r)^b linear in u = t - r
      const double u1 = t - r2, u2 = t - r1;
      const double p_at_u1 = I[i + 1] * std::pow(u1, b);
      const double p_at_u2 = I[i] * std::pow(u2, b);
      const double slope = (p_at_u2 - p_at_u1) / (u2 - u1);
      double w0, w1;
      w01(u1, u2, b, w0, w1);
      total += (p_at_u1 - slope * u1) * w0 + slope * w1;
    }
  }
  return total;
}

// Fixed quadrature rule in the self-similar variable w for integrals against
// the t = 1 stable profile: sum_m wq[m] f(w[m]) ~ int f(w) q(1,w) dw (weights
// normalized to 1) and sum_m wqp[m] f(w[m]) ~ int f(w) q'(1,w) dw (weights
// de-meaned so a constant integrates to exactly 0, which kills the
// (t-r)^{-1/alpha} amplification of rule error).
struct MasterRule {
  std::vector<double> w, wq, wqp;

  explicit MasterRule(const StableDensity& q1) {
    std::vector<double> nodes;
    for (double v = 0.0; v <= 2.0 + 1e-12; v += 0.08) nodes.push_back(v);
    double v = 2.0;
    while (v < 40.0) {
      v *= 1.12;
      nodes.push_back(std::min(v, 40.0));
    }
    std::vector<double> sym;
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it)
      if (*it > 0.0) sym.push_back(-*it);
    sym.insert(sym.end(), nodes.begin(), nodes.end());
    w = sym;
    const std::size_t n = w.size();
    wq.assign(n, 0.0);
    wqp.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double dl = (i == 0) ? 0.0 : 0.5 * (w[i] - w[i - 1]);
      const double dr = (i + 1 == n) ? 0.0 : 0.5 * (w[i + 1] - w[i]);
      wq[i] = q1.profile(std::abs(w[i])) * (dl + dr);
      const double sgn = (w[i] < 0.0) ? -1.0 : (w[i] > 0.0 ? 1.0 : 0.0);
      wqp[i] = sgn * q1.profile_deriv(std::abs(w[i])) * (dl + dr);
    }
    double sq = 0.0, sp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sq += wq[i];
      sp += wqp[i];
    }
    for (double& x : wq) x /= sq;
    const double mean_p = sp / static_cast<double>(n);
    for (double& x : wqp) x -= mean_p;
  }

  static const MasterRule& get(double alpha) {
    static std::unordered_map<long long, std::unique_ptr<MasterRule>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    const long long key = static_cast<long long>(std::llround(alpha * 1e12));
    auto it = cache.find(key);
    if (it == cache.end())
      it = cache.emplace(key, std::make_unique<MasterRule>(StableDensity::get(alpha, 1)))
               .first;
    return *it->second;
  }
};

}  // namespace pmx

// Generic space-time convolution
//   (f (x) g)(s, r, t, x, y) = int_r^t int f(s, r, r', x, z) g(s, r', t, z, y) dz dr'
// on a graded two-sided time mesh with product integration against the
// singular endpoint factors, and a trapezoid in z over the base grid plus
// locally refined windows wherever a concentrated factor is narrower than the
// grid step.
inline SpaceTimeKernel spacetime_convolve(const SpaceTimeKernel& f, const SpaceTimeKernel& g,
                                          const StableLaw& law, const ParametrixConfig& cfg) {
  if (!(f.sing < 1.0 && g.sing < 1.0))
    throw std::invalid_argument("spacetime_convolve: singularity exponents must be < 1");
  const double alpha = law.alpha;
  const double p = cfg.power(alpha);
  const ParametrixConfig c = cfg;
  const SpaceTimeKernel fk = f, gk = g;

  auto eval = [fk, gk, alpha, p, c](double s, double r, double t, double x, double y) {
    const auto nodes = pmx::two_sided_mesh(r, t, c.time_nodes_per_side, p);
    std::vector<double> I(nodes.size(), 0.0);
    const double lo = std::min(x, y) - c.grid_extent;
    const double hi = std::max(x, y) + c.grid_extent;
    for (std::size_t l = 0; l < nodes.size(); ++l) {
      const double rp = nodes[l];
      std::vector<double> zs;
      for (double z = lo; z <= hi + 1e-12; z += c.grid_step) zs.push_back(z);
      auto add_window = [&](double center, double width) {
        const double wlo = center - 10.0 * width, whi = center + 10.0 * width;
        for (double z = wlo; z <= whi; z += width / 4.0) {
          if (z > lo && z < hi) zs.push_back(z);
        }
      };
      if (fk.concentrated) {
        const double wf = std::pow(rp - r, 1.0 / alpha);
        if (wf < 3.0 * c.grid_step) add_window(x, std::max(wf, 1e-7));
      }
      if (gk.concentrated) {
        const double wg = std::pow(t - rp, 1.0 / alpha);
        if (wg < 3.0 * c.grid_step) add_window(y, std::max(wg, 1e-7));
      }
      std::sort(zs.begin(), zs.end());
      zs.erase(std::unique(zs.begin(), zs.end(),
                           [&](double a2, double b2) { return std::abs(a2 - b2) < 1e-10; }),
               zs.end());
      std::vector<double> vals(zs.size());
      for (std::size_t i = 0; i < zs.size(); ++i)
        vals[i] = fk.eval(s, r, rp, x, zs[i]) * gk.eval(s, rp, t, zs[i], y);
      I[l] = quad::trapezoid(zs, vals);
    }
    return pmx::product_time_integral(r, t, nodes, I, fk.sing, gk.sing);
  };
  return {eval, std::max(f.sing + g.sing - 1.0, 0.0), false};
}

// Memoization wrapper keyed exactly on the argument tuple; lets nested
// convolutions reuse inner evaluations.
inline SpaceTimeKernel memoize_kernel(const SpaceTimeKernel& k) {
  struct Cache {
    std::map<std::array<double, 5>, double> map;
    std::mutex mu;
  };
  auto cache = std::make_shared<Cache>();
  auto inner = k.eval;
  auto eval = [cache, inner](double s, double r, double t, double x, double y) {
    const std::array<double, 5> key{s, r, t, x, y};
    {
      std::lock_guard<std::mutex> lock(cache->mu);
      auto it = cache->map.find(key);
      if (it != cache->map.end()) return it->second;
    }
    const double v = inner(s, r, t, x, y);
    std::lock_guard<std::mutex> lock(cache->mu);
    cache->map[key] = v;
    return v;
  };
  return {eval, k.sing, k.concentrated};
}

// H^k: H^1 = H, H^{k+1} = H (x) H^k.
inline SpaceTimeKernel kernel_iterate(const SpaceTimeKernel& H, int k, const StableLaw& law,
                                      const ParametrixConfig& cfg) {
  if (k < 1) throw std::invalid_argument("kernel_iterate: k must be >= 1");
  SpaceTimeKernel acc = H;
  for (int i = 1; i < k; ++i) acc = spacetime_convolve(H, memoize_kernel(acc), law, cfg);
  return acc;
}

// Truncated parametrix density p_K(s,t,x,.) = p^ + sum_{k<=K} p^ (x) H^k with
// per-term L1 masses and a Beta-product tail estimate.
struct DensityExpansion {
  GridDensity density;          // p_K, clamped
  GridDensity proxy;            // p^(s,t,x,.)
  std::vector<double> term_l1;  // ||p^ (x) H^k||_L1, k = 1..K
  double truncation_estimate = 0.0;
  double empirical_constant = 0.0;
};

inline DensityExpansion density_truncated(const DriftModel& drift, const FlowLookup& flow,
                                          const StableLaw& law, double s, double t, double x,
                                          const ParametrixConfig& cfg) {
  if (!(s < t)) throw std::invalid_argument("density_truncated: need s < t");
  if (law.dim != 1) throw std::invalid_argument("density_truncated: d = 1 only");
  const double alpha = law.alpha;
  const StableDensity& qd = StableDensity::get(alpha, 1);
  const pmx::MasterRule& rule = pmx::MasterRule::get(alpha);
  const double p = cfg.power(alpha);

  // y-grid
  const double h = cfg.grid_step;
  const int ny = 2 * static_cast<int>(cfg.grid_extent / h) + 1;
  const double y0 = x - (ny / 2) * h;
  auto y_at = [&](int i) { return y0 + i * h; };

  // storage times: s = theta_0 < ... < theta_M = t (two-sided graded)
  std::vector<double> theta = pmx::two_sided_mesh(s, t, cfg.time_nodes_per_side, p);
  theta.insert(theta.begin(), s);
  theta.push_back(t);
  const int M = static_cast<int>(theta.size()) - 1;

  // drift values on the y-grid at arbitrary times, cached per time
  std::unordered_map<long long, std::vector<double>> drift_cache;
  auto drift_row = [&](double r) -> const std::vector<double>& {
    const long long key = static_cast<long long>(std::llround(r * 1e12));
    auto it = drift_cache.find(key);
    if (it != drift_cache.end()) return it->second;
    std::vector<double> row(ny);
    const Measure mu = flow(r);
    for (int i = 0; i < ny; ++i) row[i] = drift.eval1(r, y_at(i), mu);
    return drift_cache.emplace(key, std::move(row)).first->second;
  };

  // G_k(theta_j, .) for k >= 1; row j = 0 is identically 0.
  std::vector<std::vector<double>> g_prev, g_curr(M + 1, std::vector<double>(ny, 0.0));
  DensityExpansion out;
  out.proxy.x0 = y0;
  out.proxy.dx = h;
  out.proxy.time = t;
  out.proxy.values.resize(ny);
  for (int i = 0; i < ny; ++i) out.proxy.values[i] = qd.density_radial(t - s, y_at(i) - x);

  auto interp_row = [&](const std::vector<double>& row, double z) {
    const double u = (z - y0) / h;
    if (u <= 0.0 || u >= ny - 1.0) return 0.0;
    const int i = static_cast<int>(u);
    const double w = u - i;
    return (1.0 - w) * row[i] + w * row[i + 1];
  };

  std::vector<double> accum(ny, 0.0);  // sum over k of G_k(t, .)

  for (int k = 0; k < cfg.truncation_K; ++k) {
    // build G_{k+1} at every storage time
    for (int j = 1; j <= M; ++j) {
      const double tj = theta[j];
      const auto sub = pmx::two_sided_mesh(s, tj, cfg.time_nodes_per_side, p);
      const std::size_t ns = sub.size();

      // per sub-node: F(z) = G_k(r, z) b(r, z) on the grid (k >= 1) or the
      // analytic proxy row (k == 0); plus the route selector.
      std::vector<std::vector<double>> F(ns, std::vector<double>(ny));
      std::vector<const std::vector<double>*> drift_rows(ns);
      std::vector<int> route(ns, 0);  // 0 direct, 1 right-subst, 2 left-subst
      for (std::size_t l = 0; l < ns; ++l) {
        const double r = sub[l];
        drift_rows[l] = &drift_row(r);
        const double wg = std::pow(tj - r, 1.0 / alpha);
        const double wf = std::pow(r - s, 1.0 / alpha);
        if (wg < 3.0 * h) route[l] = 1;
        else if (k == 0 && wf < 3.0 * h) route[l] = 2;
        if (k == 0) {
          for (int i = 0; i < ny; ++i)
            F[l][i] = qd.density_radial(r - s, y_at(i) - x) * (*drift_rows[l])[i];
        } else {
          // interpolate G_k in time between bracketing theta rows
          const auto up = std::upper_bound(theta.begin(), theta.end(), r);
          int jhi = std::min<int>(static_cast<int>(up - theta.begin()), M);
          int jlo = jhi - 1;
          const double wt = (r - theta[jlo]) / (theta[jhi] - theta[jlo]);
          for (int i = 0; i < ny; ++i) {
            const double gk = (1.0 - wt) * g_prev[jlo][i] + wt * g_prev[jhi][i];
            F[l][i] = gk * (*drift_rows[l])[i];
          }
        }
      }

      auto& target = g_curr[j];
      parallel_for(0, static_cast<std::size_t>(ny), [&](std::size_t ylo, std::size_t yhi) {
        std::vector<double> I(ns);
        for (std::size_t yi = ylo; yi < yhi; ++yi) {
          const double y = y_at(static_cast<int>(yi));
          for (std::size_t l = 0; l < ns; ++l) {
            const double r = sub[l];
            const double dt_r = tj - r;
            if (route[l] == 1) {
              // z = y - dt^{1/a} w; I = -dt^{-1/a} int F(z(w)) q1'(w) dw
              const double scale = std::pow(dt_r, 1.0 / alpha);
              double acc = 0.0;
              if (k == 0) {
                for (std::size_t m = 0; m < rule.w.size(); ++m) {
                  const double z = y - scale * rule.w[m];
                  const double fv = qd.density_radial(r - s, z - x) *
                                    interp_row(*drift_rows[l], z);
                  acc += rule.wqp[m] * fv;
                }
              } else {
                for (std::size_t m = 0; m < rule.w.size(); ++m) {
                  const double z = y - scale * rule.w[m];
                  acc += rule.wqp[m] * interp_row(F[l], z);
                }
              }
              I[l] = -acc / scale;
            } else if (route[l] == 2) {
              // z = x + (r-s)^{1/a} w; F = q(r-s, z-x) b(z) handled exactly
              const double scale = std::pow(r - s, 1.0 / alpha);
              double acc = 0.0;
              for (std::size_t m = 0; m < rule.w.size(); ++m) {
                const double z = x + scale * rule.w[m];
                acc += rule.wq[m] * interp_row(*drift_rows[l], z) *
                       (-qd.gradient_radial(dt_r, y - z));
              }
              I[l] = acc;
            } else {
              double acc = 0.0;
              const std::vector<double>& Fl = F[l];
              for (int i = 0; i < ny; ++i) {
                const double w = (i == 0 || i == ny - 1) ? 0.5 : 1.0;
                acc += w * Fl[i] * -qd.gradient_radial(dt_r, y - y_at(i));
              }
              I[l] = acc * h;
            }
          }
          target[yi] = pmx::product_time_integral(s, tj, sub, I, 0.0, 1.0 / alpha);
        }
      });
    }
    // term mass and accumulation
    std::vector<double> abs_term(ny);
    for (int i = 0; i < ny; ++i) {
      accum[i] += g_curr[M][i];
      abs_term[i] = std::abs(g_curr[M][i]) * ((i == 0 || i == ny - 1) ? 0.5 : 1.0);
    }
    out.term_l1.push_back(pairwise_sum(abs_term) * h);
    g_prev = g_curr;
    for (auto& row : g_curr) std::fill(row.begin(), row.end(), 0.0);
  }

  // Tail estimate: calibrate the series constant on the measured terms, then
  // sum the Beta-product factors past K. The factor 2 margin covers the
  // pre-asymptotic drift of the implied constant (consecutive-step constants
  // were observed to grow by up to ~1.35x for Hoelder drifts at k <= 3,
  // stable under mesh refinement, before the Beta decline takes over).
  const double gap = 1.0 - 1.0 / alpha;
  const double kTailSafety = 2.0;
  const int K = cfg.truncation_K;
  double c_emp;
  if (K >= 2 && out.term_l1[K - 2] > 0.0) {
    const double ratio = out.term_l1[K - 1] / out.term_l1[K - 2];
    c_emp = ratio / (std::pow(t - s, gap) * beta_fn(1.0 / alpha + K * gap, gap));
  } else {
    c_emp = std::sqrt(std::max(out.term_l1[0], 1e-300) /
                      (std::pow(t - s, gap) * beta_fn(1.0, gap)));
  }
  out.empirical_constant = c_emp;
  double tail = 0.0, term = out.term_l1[K - 1];
  for (int m = K + 1; m <= K + 60; ++m) {
    term *= kTailSafety * c_emp * std::pow(t - s, gap) *
            beta_fn(1.0 / alpha + m * gap, gap);
    tail += term;
  }
  out.truncation_estimate = tail;
  if (tail > cfg.mass_defect_threshold)
    throw std::runtime_error(
        "density_truncated: truncation estimate exceeds tolerance; raise K or refine");

  // assemble, clamp, record mass defect
  out.density.x0 = y0;
  out.density.dx = h;
  out.density.time = t;
  out.density.values.resize(ny);
  for (int i = 0; i < ny; ++i) {
    double v = out.proxy.values[i] + accum[i];
    if (v < 0.0) {
      if (v <= -cfg.tolerance)
        throw std::runtime_error("density_truncated: negative density beyond tolerance "
                                 "(under-resolved mesh)");
      v = 0.0;
    }
    out.density.values[i] = v;
  }
  out.density.mass_defect = std::abs(1.0 - out.density.mass());
  return out;
}

// max_y p(y) / rho^0(t-s, y-x); reported, asserted finite/stable by callers.
inline double density_bound_ratio(const GridDensity& dens, const StableLaw& law, double s,
                                  double t, double x) {
  const RhoParams r0(0.0, law.alpha, 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < dens.size(); ++i)
    worst = std::max(worst, dens.values[i] / rho_radial(r0, t - s, dens.x_at(i) - x));
  return worst;
}

// |int d_x p^(t, y - x) dy| on the grid; odd integrand, so ~ quadrature noise.
inline double centering_residual(const StableLaw& law, double t, double x,
                                 double extent = 16.0, double step = 0.05) {
  const StableDensity& qd = StableDensity::get(law.alpha, 1);
  const int n = 2 * static_cast<int>(extent / step) + 1;
  const double y0 = x - (n / 2) * step;
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    vals[i] = w * qd.gradient_radial(t, (y0 + i * step) - x);
  }
  return std::abs(pairwise_sum(vals) * step);
}

}  // namespace smv
