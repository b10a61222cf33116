#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "smv/special.hpp"
#include "smv/stable_law.hpp"

namespace smv {

// Density q(t,.) of the rotationally invariant alpha-stable noise under the
// UnitExponent convention, by radial Fourier inversion of e^{-t u^alpha}:
//   d=1  (1/pi)      int cos(u r) e^{-t u^a} du
//   d=2  (1/2pi)     int u J_0(u r) e^{-t u^a} du
//   d=3  (1/2pi^2 r) int u sin(u r) e^{-t u^a} du
// Only the t=1 radial profile is tabulated; q(t,x) = t^{-d/a} q(1, t^{-1/a}|x|).
// Beyond the table the Blumenthal-Getoor tail series takes over.
class StableDensity {
 public:
  StableDensity(double alpha, int dim, double tol = 1e-8)
      : alpha_(alpha), dim_(dim), tol_(tol) {
    if (!(alpha > 1.0 && alpha < 2.0))
      throw std::invalid_argument("StableDensity: alpha must lie in (1,2)");
    if (dim < 1 || dim > 3)
      throw std::invalid_argument("StableDensity: density evaluation supports d in {1,2,3}");
    build_table();
  }

  double alpha() const { return alpha_; }
  int dim() const { return dim_; }

  // q(1, r) and its first/second radial derivatives.
  double profile(double r) const { return std::max(0.0, interp(g0_, g1_, r, tail0(r))); }
  double profile_deriv(double r) const { return interp(g1_, g2_, r, tail1(r)); }
  double profile_second(double r) const { return interp_linear(g2_, r, tail2(r)); }

  double density_radial(double t, double r) const {
    check_time(t);
    const double s = std::pow(t, -1.0 / alpha_);
    return std::pow(t, -static_cast<double>(dim_) / alpha_) * profile(s * r);
  }

  // d/dr of q(t, r e) for a unit direction e; antisymmetric under r -> -r.
  double gradient_radial(double t, double r) const {
    check_time(t);
    const double sign = (r < 0.0) ? -1.0 : 1.0;
    const double s = std::pow(t, -1.0 / alpha_);
    return sign * std::pow(t, -static_cast<double>(dim_ + 1) / alpha_) *
           profile_deriv(s * std::abs(r));
  }

  double density(double t, std::span<const double> x) const {
    return density_radial(t, norm(x));
  }

  std::vector<double> gradient(double t, std::span<const double> x) const {
    const double r = norm(x);
    std::vector<double> g(x.size(), 0.0);
    if (r == 0.0) return g;  // radial symmetry
    const double dr = gradient_radial(t, r);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = dr * x[i] / r;
    return g;
  }

  double table_extent() const { return r_max_; }

  // Shared cache; concurrent reads are safe once an entry is built.
  static const StableDensity& get(double alpha, int dim) {
    static std::map<std::pair<long long, int>, std::unique_ptr<StableDensity>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    const auto key = std::make_pair(static_cast<long long>(std::llround(alpha * 1e12)), dim);
    auto it = cache.find(key);
    if (it == cache.end())
      it = cache.emplace(key, std::make_unique<StableDensity>(alpha, dim)).first;
    return *it->second;
  }

 private:
  static double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
  }

  static void check_time(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("stable density: t must be > 0");
  }

  // n-th absolute moment of e^{-u^alpha} on (0,inf): Gamma((n+1)/alpha)/alpha.
  double expo_moment(int n) const {
    return std::exp(std::lgamma((n + 1.0) / alpha_)) / alpha_;
  }

  // First tail coefficient: q(1,r) ~ c1 r^{-d-alpha}.
  double tail_c1() const {
    return alpha_ * std::pow(2.0, alpha_ - 1.0) *
           std::pow(std::numbers::pi, -0.5 * dim_ - 1.0) *
           std::sin(0.5 * std::numbers::pi * alpha_) *
           std::exp(std::lgamma(0.5 * (dim_ + alpha_)) + std::lgamma(0.5 * alpha_));
  }

  // d=1 Bergstroem series coefficients: q(1,r) = sum_n a_n r^{-n alpha - 1}.
  double series_coeff(int n) const {
    const double sign = (n % 2 == 1) ? 1.0 : -1.0;
    return sign / std::numbers::pi *
           std::exp(std::lgamma(n * alpha_ + 1.0) - std::lgamma(n + 1.0)) *
           std::sin(0.5 * std::numbers::pi * n * alpha_);
  }

  double tail0(double r) const {
    if (dim_ == 1) {
      double s = 0.0;
      for (int n = 1; n <= 4; ++n) s += series_coeff(n) * std::pow(r, -n * alpha_ - 1.0);
      return s;
    }
    return tail_c1() * std::pow(r, -dim_ - alpha_);
  }

  double tail1(double r) const {
    if (dim_ == 1) {
      double s = 0.0;
      for (int n = 1; n <= 4; ++n)
        s += series_coeff(n) * (-n * alpha_ - 1.0) * std::pow(r, -n * alpha_ - 2.0);
      return s;
    }
    return tail_c1() * (-dim_ - alpha_) * std::pow(r, -dim_ - alpha_ - 1.0);
  }

  double tail2(double r) const {
    if (dim_ == 1) {
      double s = 0.0;
      for (int n = 1; n <= 4; ++n)
        s += series_coeff(n) * (n * alpha_ + 1.0) * (n * alpha_ + 2.0) *
             std::pow(r, -n * alpha_ - 3.0);
      return s;
    }
    return tail_c1() * (dim_ + alpha_) * (dim_ + alpha_ + 1.0) *
           std::pow(r, -dim_ - alpha_ - 2.0);
  }

  // Radial inversion integrands at frequency u for radius r: value, d/dr, d2/dr2.
  struct Moments {
    double f0, f1, f2;
  };

  void integrand(double u, double r, double out[3]) const {
    const double e = std::exp(-std::pow(u, alpha_));
    const double pi = std::numbers::pi;
    if (dim_ == 1) {
      const double c = std::cos(u * r), s = std::sin(u * r);
      out[0] = e * c / pi;
      out[1] = -e * u * s / pi;
      out[2] = -e * u * u * c / pi;
      return;
    }
    if (dim_ == 2) {
      const double j0 = bessel_j0(u * r);
      const double j1 = bessel_j1(u * r);
      // J0' = -J1,  J1'(x) = J0(x) - J1(x)/x  (limit 1/2 at x = 0).
      const double j1p = (u * r > 1e-8) ? j0 - j1 / (u * r) : 0.5;
      const double k = 1.0 / (2.0 * pi);
      out[0] = k * e * u * j0;
      out[1] = -k * e * u * u * j1;
      out[2] = -k * e * u * u * u * j1p;
      return;
    }
    // d = 3, r away from 0 (small r handled by the Taylor branch).
    const double c = std::cos(u * r), s = std::sin(u * r);
    const double k = e / (2.0 * pi * pi);
    out[0] = k * u * s / r;
    out[1] = k * (u * u * c / r - u * s / (r * r));
    out[2] = k * (-u * u * u * s / r - 2.0 * u * u * c / (r * r) +
                  2.0 * u * s / (r * r * r));
  }

  Moments quad_point(double r) const {
    const double u_max = std::pow(41.5, 1.0 / alpha_);  // e^{-u^alpha} < 1e-18 beyond
    if (dim_ == 3 && r < 0.05) {
      // Taylor in r: (1/2pi^2)[M2 - r^2 M4/6 + r^4 M6/120], etc.
      const double k = 1.0 / (2.0 * std::numbers::pi * std::numbers::pi);
      const double m2 = expo_moment(2), m4 = expo_moment(4), m6 = expo_moment(6);
      return {k * (m2 - r * r * m4 / 6.0 + r * r * r * r * m6 / 120.0),
              k * (-r * m4 / 3.0 + r * r * r * m6 / 30.0),
              k * (-m4 / 3.0 + r * r * m6 / 10.0)};
    }
    // Fixed fused panels at a quarter oscillation period; the first panel is
    // split geometrically toward 0 where e^{-u^alpha} has its cusp.
    const double width = std::min(0.4, 0.25 * std::numbers::pi / (r + 0.2));
    auto f = [&](double u, double out[3]) { integrand(u, r, out); };
    double acc[3] = {0.0, 0.0, 0.0};
    double edge = width;
    for (int k = 0; k < 24; ++k) {
      const double lo = edge * 0.5;
      quad::gk15_fused3(f, (k == 23) ? 0.0 : lo, edge, acc);
      edge = lo;
    }
    for (double a = width; a < u_max; a += width)
      quad::gk15_fused3(f, a, std::min(a + width, u_max), acc);
    return {acc[0], acc[1], acc[2]};
  }

  void build_table() {
    r_max_ = (dim_ == 1) ? 40.0 : 60.0;
    h_ = 0.02;
    const int n = static_cast<int>(r_max_ / h_) + 1;
    g0_.resize(n);
    g1_.resize(n);
    g2_.resize(n);
    for (int i = 0; i < n; ++i) {
      const Moments m = quad_point(i * h_);
      g0_[i] = m.f0;
      g1_[i] = m.f1;
      g2_[i] = m.f2;
    }
  }

  // Cubic Hermite on [r_i, r_{i+1}] from values f and exact slopes df.
  double interp(const std::vector<double>& f, const std::vector<double>& df,
                double r, double tail) const {
    r = std::abs(r);
    if (r >= r_max_) return tail;
    const int i = std::min(static_cast<int>(r / h_), static_cast<int>(f.size()) - 2);
    const double u = (r - i * h_) / h_;
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * f[i] + (u3 - 2 * u2 + u) * h_ * df[i] +
           (-2 * u3 + 3 * u2) * f[i + 1] + (u3 - u2) * h_ * df[i + 1];
  }

  double interp_linear(const std::vector<double>& f, double r, double tail) const {
    r = std::abs(r);
    if (r >= r_max_) return tail;
    const int i = std::min(static_cast<int>(r / h_), static_cast<int>(f.size()) - 2);
    const double u = (r - i * h_) / h_;
    return (1.0 - u) * f[i] + u * f[i + 1];
  }

  double alpha_;
  int dim_;
  double tol_;
  double r_max_ = 0.0, h_ = 0.0;
  std::vector<double> g0_, g1_, g2_;
};

// Free-function wrappers over the cached evaluator.
inline double stable_density(const StableLaw& law, double t, std::span<const double> x) {
  return StableDensity::get(law.alpha, law.dim).density(t, x);
}

inline std::vector<double> stable_density_gradient(const StableLaw& law, double t,
                                                   std::span<const double> x) {
  return StableDensity::get(law.alpha, law.dim).gradient(t, x);
}

}  // namespace smv
