#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace smv {

// Gamma(x,y) via log-Gamma; relative error well below 1e-12 for moderate args.
inline double beta_fn(double x, double y) {
  if (!(x > 0.0) || !(y > 0.0))
    throw std::invalid_argument("beta_fn: arguments must be positive");
  return std::exp(std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y));
}

// J0/J1 rational fits (Abramowitz & Stegun 9.4.1-9.4.6), |err| ~ 1e-7 abs.
inline double bessel_j0(double x) {
  const double ax = std::abs(x);
  if (ax < 3.0) {
    const double t = (x / 3.0) * (x / 3.0);
    return 1.0 + t * (-2.2499997 + t * (1.2656208 + t * (-0.3163866 +
               t * (0.0444479 + t * (-0.0039444 + t * 0.0002100)))));
  }
  const double z = 3.0 / ax;
  const double f0 = 0.79788456 + z * (-0.00000077 + z * (-0.00552740 +
                       z * (-0.00009512 + z * (0.00137237 + z * (-0.00072805 +
                       z * 0.00014476)))));
  const double th = ax - 0.78539816 + z * (-0.04166397 + z * (-0.00003954 +
                       z * (0.00262573 + z * (-0.00054125 + z * (-0.00029333 +
                       z * 0.00013558)))));
  return f0 * std::cos(th) / std::sqrt(ax);
}

inline double bessel_j1(double x) {
  const double ax = std::abs(x);
  double v;
  if (ax < 3.0) {
    const double t = (x / 3.0) * (x / 3.0);
    v = ax * (0.5 + t * (-0.56249985 + t * (0.21093573 + t * (-0.03954289 +
            t * (0.00443319 + t * (-0.00031761 + t * 0.00001109))))));
  } else {
    const double z = 3.0 / ax;
    const double f1 = 0.79788456 + z * (0.00000156 + z * (0.01659667 +
                         z * (0.00017105 + z * (-0.00249511 + z * (0.00113653 +
                         z * (-0.00020033))))));
    const double th = ax - 2.35619449 + z * (0.12499612 + z * (0.00005650 +
                         z * (-0.00637879 + z * (0.00074348 + z * (0.00079824 +
                         z * (-0.00029166))))));
    v = f1 * std::cos(th) / std::sqrt(ax);
  }
  return (x < 0.0) ? -v : v;
}

namespace quad {

// Gauss-Kronrod 7-15 rule on [a,b]; returns (value, error estimate).
struct PanelResult {
  double value;
  double error;
};

template <class F>
PanelResult gk15(const F& f, double a, double b) {
  static const double xk[8] = {
      0.991455371120813, 0.949107912342759, 0.864864423359769,
      0.741531185599394, 0.586087235467691, 0.405845151377397,
      0.207784955007898, 0.0};
  static const double wk[8] = {
      0.022935322010529, 0.063092092629979, 0.104790010322250,
      0.140653259715525, 0.169004726639267, 0.190350578064785,
      0.204432940075298, 0.209482141084728};
  static const double wg[4] = {
      0.129484966168870, 0.279705391489277, 0.381830050505119,
      0.417959183673469};
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double res_k = wk[7] * fc;
  double res_g = wg[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double fp = f(c + h * xk[i]);
    const double fm = f(c - h * xk[i]);
    res_k += wk[i] * (fp + fm);
    if (i % 2 == 1) res_g += wg[i / 2] * (fp + fm);
  }
  return {res_k * h, std::abs((res_k - res_g) * h)};
}

// Adaptive bisection on [a,b] to absolute tolerance. Children split the
// budget by 1/sqrt(2), which keeps endpoint-singular panels convergent
// (their error shrinks slower than linearly in the panel length).
template <class F>
double adaptive(const F& f, double a, double b, double abs_tol, int max_depth = 36) {
  struct Seg {
    double a, b, tol;
    int depth;
  };
  double total = 0.0;
  std::vector<Seg> stack{{a, b, abs_tol, 0}};
  while (!stack.empty()) {
    Seg s = stack.back();
    stack.pop_back();
    auto r = gk15(f, s.a, s.b);
    if (r.error <= s.tol || s.depth >= max_depth) {
      if (s.depth >= max_depth && r.error > 100 * s.tol)
        throw std::runtime_error("quad::adaptive: failed to converge");
      total += r.value;
    } else {
      const double m = 0.5 * (s.a + s.b);
      const double child_tol = s.tol * 0.70710678118654752;
      stack.push_back({s.a, m, child_tol, s.depth + 1});
      stack.push_back({m, s.b, child_tol, s.depth + 1});
    }
  }
  return total;
}

// Fixed-panel integration where the caller caps the panel width (used for
// oscillatory integrands: width ~ period/4 keeps GK15 accurate).
template <class F>
double panels(const F& f, double a, double b, double max_width, double abs_tol) {
  if (b <= a) return 0.0;
  const int n = std::max(1, static_cast<int>(std::ceil((b - a) / max_width)));
  const double h = (b - a) / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    total += adaptive(f, a + i * h, a + (i + 1) * h, abs_tol / n, 18);
  }
  return total;
}

// Integral over [a,b] of g with an integrable endpoint singularity at a:
// substitute r = a + (b-a) u^p, which flattens (r-a)^{-s} factors when
// p (1-s) >= 1.
template <class F>
double graded_left(const F& g, double a, double b, double power, double abs_tol) {
  auto h = [&](double u) {
    const double r = a + (b - a) * std::pow(u, power);
    return g(r) * (b - a) * power * std::pow(u, power - 1.0);
  };
  return adaptive(h, 0.0, 1.0, abs_tol);
}

// int_(0,b] f with dyadic octaves toward 0: each [b 2^{-k-1}, b 2^{-k}] is
// singularity-free, so plain adaptivity is reliable; stops early once the
// octave masses collapse. Suited to f ~ z^{-s}, s < 1, where power grading
// can fool the embedded error estimate.
template <class F>
double dyadic_left(const F& f, double b, double abs_tol, double floor = 0.0,
                   int max_octaves = 180) {
  double total = 0.0;
  double hi = b;
  int tiny_streak = 0;
  for (int k = 0; k < max_octaves && hi > floor * 1.0000001; ++k) {
    const double lo = std::max(0.5 * hi, floor);
    const double piece = adaptive(f, lo, hi, abs_tol / 16.0);
    total += piece;
    hi = lo;
    tiny_streak = (std::abs(piece) < abs_tol * 1e-3) ? tiny_streak + 1 : 0;
    if (tiny_streak >= 4) break;
  }
  return total;
}

template <class F>
double graded_right(const F& g, double a, double b, double power, double abs_tol) {
  auto h = [&](double u) {
    const double r = b - (b - a) * std::pow(u, power);
    return g(r) * (b - a) * power * std::pow(u, power - 1.0);
  };
  return adaptive(h, 0.0, 1.0, abs_tol);
}

// Fixed GK15 panels for a 3-component integrand sharing expensive factors.
// No error control: the caller keeps panels at a quarter oscillation period.
template <class F>
void gk15_fused3(const F& f, double a, double b, double out[3]) {
  static const double xk[8] = {
      0.991455371120813, 0.949107912342759, 0.864864423359769,
      0.741531185599394, 0.586087235467691, 0.405845151377397,
      0.207784955007898, 0.0};
  static const double wk[8] = {
      0.022935322010529, 0.063092092629979, 0.104790010322250,
      0.140653259715525, 0.169004726639267, 0.190350578064785,
      0.204432940075298, 0.209482141084728};
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double acc[3] = {0.0, 0.0, 0.0}, v[3];
  f(c, v);
  for (int j = 0; j < 3; ++j) acc[j] += wk[7] * v[j];
  for (int i = 0; i < 7; ++i) {
    f(c + h * xk[i], v);
    for (int j = 0; j < 3; ++j) acc[j] += wk[i] * v[j];
    f(c - h * xk[i], v);
    for (int j = 0; j < 3; ++j) acc[j] += wk[i] * v[j];
  }
  for (int j = 0; j < 3; ++j) out[j] += acc[j] * h;
}

// Trapezoid over tabulated values on a sorted node set.
inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    s += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return s;
}

}  // namespace quad

}  // namespace smv
