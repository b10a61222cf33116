#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "smv/reference_bounds.hpp"
#include "smv/rng.hpp"
#include "smv/stable_density.hpp"
#include "smv/stable_law.hpp"

using namespace smv;

TEST_CASE("StableLaw rejects alpha outside (1,2)") {
  CHECK_THROWS(StableLaw(1.0, 1));
  CHECK_THROWS(StableLaw(2.0, 1));
  CHECK_THROWS(StableLaw(0.5, 1));
  CHECK_NOTHROW(StableLaw(1.5, 3));
}

TEST_CASE("sampler characteristic function matches e^{-|xi|^alpha}") {
  const StableLaw law(1.5, 1);
  RandomStream base(2024, {10, 0, 0, 0});
  const int m = 300000;
  for (double xi : {0.5, 1.0, 2.0}) {
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < m; ++i) {
      RandomStream s = base.substream(i, 0);
      const double z = sample_increment_1d(law, 1.0, s);
      const double c = std::cos(xi * z);
      sum += c;
      sum2 += c * c;
    }
    const double mean = sum / m;
    const double se = std::sqrt((sum2 / m - mean * mean) / m);
    const double target = std::exp(-std::pow(std::abs(xi), law.alpha));
    CHECK(std::abs(mean - target) < 3.0 * se + 1e-12);
  }
}

TEST_CASE("self-similarity: quantiles of Z_4 match 4^{1/alpha} Z_1") {
  const StableLaw law(1.5, 1);
  RandomStream base(7, {11, 0, 0, 0});
  const int m = 200000;
  std::vector<double> z4(m), z1s(m);
  for (int i = 0; i < m; ++i) {
    RandomStream s = base.substream(i, 0);
    z4[i] = sample_increment_1d(law, 4.0, s);
    RandomStream s2 = base.substream(i, 1);
    z1s[i] = std::pow(4.0, 1.0 / law.alpha) * sample_increment_1d(law, 1.0, s2);
  }
  std::sort(z4.begin(), z4.end());
  std::sort(z1s.begin(), z1s.end());
  for (double p : {0.1, 0.5, 0.9}) {
    const std::size_t idx = static_cast<std::size_t>(p * (m - 1));
    CHECK(z4[idx] == doctest::Approx(z1s[idx]).epsilon(0.05).scale(1.0));
  }
}

TEST_CASE("Hill estimator of |Z_1| recovers the tail index") {
  const StableLaw law(1.5, 1);
  RandomStream base(5, {12, 0, 0, 0});
  const int m = 400000;
  std::vector<double> abs_z(m);
  for (int i = 0; i < m; ++i) {
    RandomStream s = base.substream(i, 0);
    abs_z[i] = std::abs(sample_increment_1d(law, 1.0, s));
  }
  std::sort(abs_z.begin(), abs_z.end(), std::greater<>());
  const int k = 2000;
  double h = 0.0;
  for (int i = 0; i < k; ++i) h += std::log(abs_z[i] / abs_z[k]);
  const double alpha_hat = k / h;
  CHECK(alpha_hat > 0.9 * law.alpha);
  CHECK(alpha_hat < 1.1 * law.alpha);
}

TEST_CASE("density at the origin matches Gamma(1+1/alpha)/pi") {
  for (double alpha : {1.2, 1.5, 1.8}) {
    const StableDensity& q = StableDensity::get(alpha, 1);
    const double target = std::tgamma(1.0 + 1.0 / alpha) / std::numbers::pi;
    CHECK(q.density_radial(1.0, 0.0) == doctest::Approx(target).epsilon(1e-6));
  }
}

TEST_CASE("density integrates to one") {
  const StableDensity& q = StableDensity::get(1.5, 1);
  const double h = 0.01;
  double mass = 0.0;
  for (double x = -39.0; x <= 39.0; x += h) mass += q.density_radial(1.0, x) * h;
  // mass beyond the window from the first tail term: 2 c1/alpha * R^{-alpha}
  const double c1 = std::tgamma(1.0 + 1.5) * std::sin(0.75 * std::numbers::pi) /
                    std::numbers::pi;
  mass += 2.0 * c1 / 1.5 * std::pow(39.0, -1.5);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("self-similarity identity is exact as implemented") {
  const StableDensity& q = StableDensity::get(1.5, 1);
  for (double x : {0.0, 0.3, 1.7, 8.0}) {
    const double lhs = q.density_radial(4.0, x);
    const double rhs =
        std::pow(4.0, -1.0 / 1.5) * q.density_radial(1.0, std::pow(4.0, -1.0 / 1.5) * x);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
  }
}

TEST_CASE("gradient: zero at the origin, odd, matches finite differences") {
  const StableDensity& q = StableDensity::get(1.5, 1);
  CHECK(q.gradient_radial(1.0, 0.0) == 0.0);
  CHECK(q.gradient_radial(0.37, 0.0) == 0.0);
  const double x = 0.7, h = 2e-3;
  const double fd = (q.density_radial(1.0, x + h) - q.density_radial(1.0, x - h)) / (2 * h);
  CHECK(q.gradient_radial(1.0, x) == doctest::Approx(fd).epsilon(1e-5));
  CHECK(q.gradient_radial(1.0, -x) == doctest::Approx(-q.gradient_radial(1.0, x)));
}

TEST_CASE("gradient integrates to zero") {
  const StableDensity& q = StableDensity::get(1.5, 1);
  const double h = 0.01;
  double s = 0.0;
  for (double x = -30.0; x <= 30.0; x += h) s += q.gradient_radial(1.0, x) * h;
  CHECK(std::abs(s) < 1e-6);
}

TEST_CASE("d=2 and d=3 densities are normalized (analytic tail beyond the window)") {
  const double alpha = 1.5, R = 45.0;
  for (int d : {2, 3}) {
    const StableDensity& q = StableDensity::get(alpha, d);
    const double h = 0.01;
    double mass = 0.0;
    const double surface = (d == 2) ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
    for (double r = 0.5 * h; r <= R; r += h)
      mass += surface * std::pow(r, d - 1) * q.density_radial(1.0, r) * h;
    // int_R^inf surface r^{d-1} c1 r^{-d-alpha} dr = surface c1 R^{-alpha}/alpha
    const double c1 = alpha * std::pow(2.0, alpha - 1.0) *
                      std::pow(std::numbers::pi, -0.5 * d - 1.0) *
                      std::sin(0.5 * std::numbers::pi * alpha) *
                      std::exp(std::lgamma(0.5 * (d + alpha)) + std::lgamma(0.5 * alpha));
    mass += surface * c1 * std::pow(R, -alpha) / alpha;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("gradient-estimate sweep: sup of |d^j q| t^{j/alpha} / rho^j is refinement stable") {
  const double alpha = 1.5;
  const StableDensity& q = StableDensity::get(alpha, 1);
  auto sweep = [&](int j, int nt, int nx) {
    const RhoParams rp(static_cast<double>(j), alpha, 1);
    double sup = 0.0;
    for (int it = 0; it < nt; ++it) {
      const double t = 0.05 + (2.0 - 0.05) * it / (nt - 1.0);
      for (int ix = 0; ix < nx; ++ix) {
        const double x = -8.0 + 16.0 * ix / (nx - 1.0);
        const double num = (j == 0) ? q.density_radial(t, x)
                                    : std::abs(q.gradient_radial(t, x)) *
                                          std::pow(t, 1.0 / alpha);
        sup = std::max(sup, num / rho_radial(rp, t, x));
      }
    }
    return sup;
  };
  for (int j : {0, 1}) {
    const double coarse = sweep(j, 21, 81);
    const double fine = sweep(j, 41, 161);
    CHECK(std::isfinite(fine));
    CHECK(std::abs(fine - coarse) / fine < 0.05);
  }
}

TEST_CASE("d=2 sampler CF is isotropic") {
  const StableLaw law(1.8, 2);
  RandomStream base(3, {13, 0, 0, 0});
  const int m = 200000;
  const double xi[2] = {1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2};
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < m; ++i) {
    RandomStream s = base.substream(i, 0);
    const auto z = sample_increment(law, 1.0, s);
    const double c = std::cos(xi[0] * z[0] + xi[1] * z[1]);
    sum += c;
    sum2 += c * c;
  }
  const double mean = sum / m;
  const double se = std::sqrt((sum2 / m - mean * mean) / m);
  CHECK(std::abs(mean - std::exp(-1.0)) < 3.0 * se + 1e-12);
}
