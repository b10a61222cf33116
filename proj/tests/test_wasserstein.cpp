#include <doctest.h>

#include <cmath>
#include <vector>

#include "smv/rng.hpp"
#include "smv/wasserstein.hpp"

using namespace smv;

namespace {
EmpiricalMeasure random_measure(std::uint32_t rep, std::size_t n, int dim = 1,
                                double scale = 2.0) {
  std::vector<double> xs(n * dim);
  RandomStream s(31, {50, rep, 0, 0});
  for (auto& x : xs) x = scale * (s.uniform01() - 0.5) + s.normal();
  return EmpiricalMeasure(dim, std::move(xs));
}
}  // namespace

TEST_CASE("w1_exact_1d basics") {
  EmpiricalMeasure a({0.0});
  EmpiricalMeasure b({1.0});
  CHECK(w1_exact_1d(a, a) == doctest::Approx(0.0));
  CHECK(w1_exact_1d(a, b) == doctest::Approx(1.0));
}

TEST_CASE("w1_exact_1d agrees with the assignment LP on random pairs") {
  for (std::uint32_t rep = 0; rep < 25; ++rep) {
    const std::size_t n = 2 + (rep % 63);
    auto a = random_measure(rep, n);
    auto b = random_measure(rep + 1000, n);
    CHECK(w1_exact_1d(a, b) == doctest::Approx(w1_small_exact(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("w1 with unequal counts equals the merged-CDF integral") {
  // hand value: {0, 1} vs {0.5}: int |F_a - F_b| = 0.5 * 0.5 + 0.5 * 0.5 = 0.5
  EmpiricalMeasure a({0.0, 1.0});
  EmpiricalMeasure b({0.5});
  CHECK(w1_exact_1d(a, b) == doctest::Approx(0.5));
}

TEST_CASE("w_beta_1d: reduction at beta=1, two-atom value, Jensen ordering") {
  EmpiricalMeasure a({0.0, 0.0});
  EmpiricalMeasure b({1.0, 1.0});
  CHECK(w_beta_1d(a, b, 1.25) == doctest::Approx(1.0));
  for (std::uint32_t rep = 0; rep < 20; ++rep) {
    auto x = random_measure(rep, 40);
    auto y = random_measure(rep + 500, 40);
    CHECK(w_beta_1d(x, y, 1.0) == doctest::Approx(w1_exact_1d(x, y)).epsilon(1e-12));
    CHECK(w_beta_1d(x, y, 1.25) >= w1_exact_1d(x, y) - 1e-12);
  }
}

TEST_CASE("w1_small_exact: permutation invariance and translation") {
  auto a = random_measure(3, 32, 2);
  std::vector<double> perm(a.data);
  std::rotate(perm.begin(), perm.begin() + 2 * 7, perm.end());
  EmpiricalMeasure b(2, perm);
  CHECK(w1_small_exact(a, b) == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<double> shifted(a.data);
  for (std::size_t i = 0; i < shifted.size(); i += 2) {
    shifted[i] += 3.0;
    shifted[i + 1] += 4.0;
  }
  EmpiricalMeasure c(2, shifted);
  CHECK(w1_small_exact(a, c) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK_THROWS(w1_small_exact(random_measure(0, 300), random_measure(1, 300)));
}

TEST_CASE("metric axioms on random triples") {
  for (std::uint32_t rep = 0; rep < 10; ++rep) {
    auto x = random_measure(rep, 24);
    auto y = random_measure(rep + 100, 24);
    auto z = random_measure(rep + 200, 24);
    const double xy = w1_exact_1d(x, y), yx = w1_exact_1d(y, x);
    CHECK(xy == doctest::Approx(yx).epsilon(1e-12));
    CHECK(w1_exact_1d(x, x) == doctest::Approx(0.0));
    CHECK(w1_exact_1d(x, z) <= xy + w1_exact_1d(y, z) + 1e-12);
    const double bxy = w_beta_1d(x, y, 1.25);
    CHECK(bxy <= w_beta_1d(x, z, 1.25) + w_beta_1d(z, y, 1.25) + 1e-12);
  }
}

TEST_CASE("kantorovich lower bound: tightness and domination") {
  EmpiricalMeasure a({0.0});
  EmpiricalMeasure b({1.0});
  auto dict = default_lipschitz_dictionary_1d();
  CHECK(kantorovich_lower_bound(a, b, dict) == doctest::Approx(1.0));  // f(x)=x is tight
  CHECK(kantorovich_lower_bound(a, b, {}) == 0.0);
  for (std::uint32_t rep = 0; rep < 20; ++rep) {
    auto x = random_measure(rep, 48);
    auto y = random_measure(rep + 300, 48);
    CHECK(kantorovich_lower_bound(x, y, dict) <= w1_small_exact(x, y) + 1e-12);
  }
}

TEST_CASE("w1 empirical-vs-law: exact on a hand case") {
  // uniform[0,1] law, atoms {0.5}: int |F_hat - x| over [0,1] with one atom,
  // F_hat = 0 below 0.5 and 1 above: int_0^.5 x + int_.5^1 (1-x) = 0.25
  AnalyticLaw1d unif;
  unif.cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
  unif.cdf_antideriv = [](double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 0.5 + (x - 1.0);
    return 0.5 * x * x;
  };
  unif.quantile = [](double p) { return p; };
  unif.tail_integral = [](double x) {
    if (x >= 1.0) return 0.0;
    const double a = std::max(x, 0.0);
    return 0.5 * (1.0 - a) * (1.0 - a);
  };
  unif.support_lo = 0.0;
  CHECK(w1_empirical_vs_law_1d(EmpiricalMeasure({0.5}), unif) == doctest::Approx(0.25));
  // two atoms at the quartiles: crossing integrals give 0.125
  CHECK(w1_empirical_vs_law_1d(EmpiricalMeasure({0.25, 0.75}), unif) ==
        doctest::Approx(0.125));
}
