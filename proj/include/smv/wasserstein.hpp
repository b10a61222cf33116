#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "smv/measures.hpp"

namespace smv {

namespace detail {
inline std::vector<double> sorted_atoms_1d(const EmpiricalMeasure& m) {
  if (m.dim != 1) throw std::invalid_argument("wasserstein 1d: measure must have d = 1");
  if (m.size() == 0) throw std::invalid_argument("wasserstein: empty measure");
  std::vector<double> v(m.data);
  std::sort(v.begin(), v.end());
  return v;
}
}  // namespace detail

// W_1 on the line. Equal atom counts reduce to the sorted coupling; unequal
// counts are handled exactly through int |F_a - F_b| over the merged support.
inline double w1_exact_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  auto xa = detail::sorted_atoms_1d(a);
  auto xb = detail::sorted_atoms_1d(b);
  if (xa.size() == xb.size()) {
    std::vector<double> diffs(xa.size());
    for (std::size_t i = 0; i < xa.size(); ++i) diffs[i] = std::abs(xa[i] - xb[i]);
    return pairwise_mean(diffs);
  }
  const double na = static_cast<double>(xa.size()), nb = static_cast<double>(xb.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(xa[0], xb[0]);
  double acc = 0.0;
  while (i < xa.size() || j < xb.size()) {
    const double x = (i < xa.size() && (j >= xb.size() || xa[i] <= xb[j])) ? xa[i] : xb[j];
    acc += std::abs(i / na - j / nb) * (x - prev);
    prev = x;
    while (i < xa.size() && xa[i] == x) ++i;
    while (j < xb.size() && xb[j] == x) ++j;
  }
  return acc;
}

// W_beta on the line via the sorted coupling (optimal for convex costs).
inline double w_beta_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double beta) {
  if (beta < 1.0) throw std::invalid_argument("w_beta_1d: beta must be >= 1");
  auto xa = detail::sorted_atoms_1d(a);
  auto xb = detail::sorted_atoms_1d(b);
  if (xa.size() != xb.size())
    throw std::invalid_argument("w_beta_1d: atom counts must match");
  std::vector<double> costs(xa.size());
  for (std::size_t i = 0; i < xa.size(); ++i)
    costs[i] = std::pow(std::abs(xa[i] - xb[i]), beta);
  return std::pow(pairwise_mean(costs), 1.0 / beta);
}

// Exact square assignment (Kuhn-Munkres with potentials), O(n^3).
inline double assignment_cost(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
  return total;
}

// Exact W_1 in any dimension through the assignment LP; desk-scale only.
inline double w1_small_exact(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                             std::size_t max_atoms = 256) {
  if (a.dim != b.dim) throw std::invalid_argument("w1_small_exact: dimension mismatch");
  if (a.size() != b.size())
    throw std::invalid_argument("w1_small_exact: atom counts must match");
  if (a.size() > max_atoms)
    throw std::invalid_argument("w1_small_exact: size exceeds exact-assignment budget");
  const std::size_t n = a.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto pa = a.point(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto pb = b.point(j);
      double s = 0.0;
      for (int c = 0; c < a.dim; ++c) s += (pa[c] - pb[c]) * (pa[c] - pb[c]);
      cost[i][j] = std::sqrt(s);
    }
  }
  return assignment_cost(cost) / static_cast<double>(n);
}

// A certified 1-Lipschitz test function for the dual bound.
struct LipschitzFn {
  std::string name;
  std::function<double(std::span<const double>)> fn;
};

inline std::vector<LipschitzFn> default_lipschitz_dictionary_1d() {
  std::vector<LipschitzFn> dict;
  dict.push_back({"identity", [](std::span<const double> x) { return x[0]; }});
  dict.push_back({"abs", [](std::span<const double> x) { return std::abs(x[0]); }});
  dict.push_back({"tanh", [](std::span<const double> x) { return std::tanh(x[0]); }});
  for (double c : {-2.0, -0.5, 0.5, 2.0}) {
    dict.push_back({"abs_shift_" + std::to_string(c),
                    [c](std::span<const double> x) { return std::abs(x[0] - c); }});
    dict.push_back({"clip_shift_" + std::to_string(c),
                    [c](std::span<const double> x) {
                      return std::clamp(x[0] - c, -1.0, 1.0);
                    }});
  }
  return dict;
}

// Kantorovich-Rubinstein lower bound: max_f |int f da - int f db| <= W_1(a,b).
inline double kantorovich_lower_bound(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                      const std::vector<LipschitzFn>& dict) {
  double best = 0.0;
  for (const auto& f : dict) {
    std::vector<double> va(a.size()), vb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) va[i] = f.fn(a.point(i));
    for (std::size_t i = 0; i < b.size(); ++i) vb[i] = f.fn(b.point(i));
    best = std::max(best, std::abs(pairwise_mean(va) - pairwise_mean(vb)));
  }
  return best;
}

// Analytic one-dimensional law with closed-form CDF machinery, used for exact
// W_1(empirical, law) without a reference sample.
struct AnalyticLaw1d {
  std::function<double(double)> cdf;
  std::function<double(double)> cdf_antideriv;   // int F
  std::function<double(double)> quantile;
  std::function<double(double)> tail_integral;   // int_x^inf (1 - F)
  double support_lo;
};

// W_1(empirical, law) = int |F_N - F| dx, evaluated segment by segment with
// the exact crossing points F^{-1}(k/N).
inline double w1_empirical_vs_law_1d(const EmpiricalMeasure& mu, const AnalyticLaw1d& law) {
  auto xs = detail::sorted_atoms_1d(mu);
  const std::size_t n = xs.size();
  double acc = law.cdf_antideriv(xs.front()) - law.cdf_antideriv(law.support_lo);
  for (std::size_t k = 1; k < n; ++k) {
    const double a = xs[k - 1], b = xs[k];
    if (b <= a) continue;
    const double c = static_cast<double>(k) / n;
    const double x_cross = std::clamp(law.quantile(c), a, b);
    const double int_f_left = law.cdf_antideriv(x_cross) - law.cdf_antideriv(a);
    const double int_f_right = law.cdf_antideriv(b) - law.cdf_antideriv(x_cross);
    acc += (c * (x_cross - a) - int_f_left) + (int_f_right - c * (b - x_cross));
  }
  acc += law.tail_integral(xs.back());
  return acc;
}

}  // namespace smv
