#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "smv/measures.hpp"
#include "smv/util.hpp"

namespace smv {

// Membership certificate for the Hoelder class of test functionals: both flat
// derivatives are (delta, L)-Hoelder in their point arguments.
struct HolderCertificate {
  double delta = 1.0;
  double L = 1.0;
};

namespace detail {
template <class F>
double integrate_measure(const Measure& mu, const F& f) {
  if (std::holds_alternative<EmpiricalMeasure>(mu)) {
    const auto& e = std::get<EmpiricalMeasure>(mu);
    if (e.dim != 1) throw std::invalid_argument("functional: d = 1 measures only");
    std::vector<double> vals(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) vals[i] = f(e.scalar(i));
    return pairwise_mean(vals);
  }
  const auto& g = std::get<GridDensity>(mu);
  std::vector<double> vals(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    vals[i] = f(g.x_at(i)) * g.values[i] * ((i == 0 || i + 1 == g.size()) ? 0.5 : 1.0);
  return pairwise_sum(vals) * g.dx;
}
}  // namespace detail

// phi on probability measures with analytic flat derivatives. The linear
// derivative is only defined up to an additive constant; built-ins ship the
// natural uncentred representative and all consumers take differences or the
// v-gradient.
class TestFunctional {
 public:
  virtual ~TestFunctional() = default;
  virtual std::string name() const = 0;
  virtual HolderCertificate certificate() const = 0;
  virtual double eval(const Measure& mu) const = 0;
  virtual double flat_derivative(const Measure& mu, double v) const = 0;
  virtual double dv_flat_derivative(const Measure& mu, double v) const = 0;
  virtual double second_flat_derivative(const Measure& mu, double v, double vp) const = 0;
  // phi((1-eps) mu + eps delta_v), evaluated exactly through the functional's
  // own statistics so atomic perturbations of grid densities need no grid.
  virtual double eval_mixture(const Measure& mu, double v, double eps) const = 0;
};

// phi(mu) = int psi dmu.
class LinearFunctional final : public TestFunctional {
 public:
  LinearFunctional(std::function<double(double)> psi, std::function<double(double)> dpsi,
                   HolderCertificate cert, std::string nm)
      : psi_(std::move(psi)), dpsi_(std::move(dpsi)), cert_(cert), name_(std::move(nm)) {}

  std::string name() const override { return name_; }
  HolderCertificate certificate() const override { return cert_; }
  double eval(const Measure& mu) const override {
    return detail::integrate_measure(mu, psi_);
  }
  double flat_derivative(const Measure&, double v) const override { return psi_(v); }
  double dv_flat_derivative(const Measure&, double v) const override { return dpsi_(v); }
  double second_flat_derivative(const Measure&, double, double) const override {
    return 0.0;
  }
  double eval_mixture(const Measure& mu, double v, double eps) const override {
    return (1.0 - eps) * eval(mu) + eps * psi_(v);
  }

 private:
  std::function<double(double)> psi_, dpsi_;
  HolderCertificate cert_;
  std::string name_;
};

// phi(mu) = intint cos(x - y) dmu(x) dmu(y) = C(mu)^2 + S(mu)^2 with
// C = int cos dmu, S = int sin dmu; the separable form keeps evaluation O(N).
class QuadraticCosFunctional final : public TestFunctional {
 public:
  std::string name() const override { return "quadratic_cos"; }
  HolderCertificate certificate() const override { return {1.0, 2.0}; }

  double eval(const Measure& mu) const override {
    const auto [c, s] = stats(mu);
    return c * c + s * s;
  }
  // delta phi/delta m (mu)(v) = 2 int cos(v - y) dmu(y).
  double flat_derivative(const Measure& mu, double v) const override {
    const auto [c, s] = stats(mu);
    return 2.0 * (std::cos(v) * c + std::sin(v) * s);
  }
  double dv_flat_derivative(const Measure& mu, double v) const override {
    const auto [c, s] = stats(mu);
    return 2.0 * (-std::sin(v) * c + std::cos(v) * s);
  }
  double second_flat_derivative(const Measure&, double v, double vp) const override {
    return 2.0 * std::cos(v - vp);
  }
  double eval_mixture(const Measure& mu, double v, double eps) const override {
    const auto [c, s] = stats(mu);
    const double cm = (1.0 - eps) * c + eps * std::cos(v);
    const double sm = (1.0 - eps) * s + eps * std::sin(v);
    return cm * cm + sm * sm;
  }

 private:
  static std::pair<double, double> stats(const Measure& mu) {
    const double c = detail::integrate_measure(mu, [](double x) { return std::cos(x); });
    const double s = detail::integrate_measure(mu, [](double x) { return std::sin(x); });
    return {c, s};
  }
};

// phi(mu) = F(int psi dmu) with chain-rule derivatives; F(u) = u^2 here.
class CompositeSquareFunctional final : public TestFunctional {
 public:
  std::string name() const override { return "composite_square"; }
  HolderCertificate certificate() const override { return {1.0, 2.0}; }

  double eval(const Measure& mu) const override {
    const double m = mean_psi(mu);
    return m * m;
  }
  double flat_derivative(const Measure& mu, double v) const override {
    return 2.0 * mean_psi(mu) * std::tanh(v);
  }
  double dv_flat_derivative(const Measure& mu, double v) const override {
    const double th = std::tanh(v);
    return 2.0 * mean_psi(mu) * (1.0 - th * th);
  }
  double second_flat_derivative(const Measure&, double v, double vp) const override {
    return 2.0 * std::tanh(v) * std::tanh(vp);
  }
  double eval_mixture(const Measure& mu, double v, double eps) const override {
    const double m = (1.0 - eps) * mean_psi(mu) + eps * std::tanh(v);
    return m * m;
  }

 private:
  static double mean_psi(const Measure& mu) {
    return detail::integrate_measure(mu, [](double x) { return std::tanh(x); });
  }
};

// Catalog of built-ins with valid (delta, L) certificates. The 1-Lipschitz
// bounded psi = tanh puts the linear functional in the (1,1) class.
inline std::vector<std::shared_ptr<TestFunctional>> builtin_functionals() {
  std::vector<std::shared_ptr<TestFunctional>> v;
  v.push_back(std::make_shared<LinearFunctional>(
      [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      },
      HolderCertificate{1.0, 1.0}, "linear_tanh"));
  v.push_back(std::make_shared<QuadraticCosFunctional>());
  v.push_back(std::make_shared<CompositeSquareFunctional>());
  return v;
}

inline std::shared_ptr<TestFunctional> make_functional(const std::string& id) {
  for (auto& f : builtin_functionals())
    if (f->name() == id) return f;
  throw std::invalid_argument("unknown functional id: " + id);
}

struct ProjectionCheck {
  double fd_gradient;
  double formula_gradient;
  double discrepancy;
};

// partial_{x_i} phi(mu^N_x) versus (1/N) d_v (delta phi / delta m)(mu^N_x)(x_i):
// the empirical-projection identity, checked through a Richardson-extrapolated
// central difference.
inline ProjectionCheck empirical_projection_gradient_check(const TestFunctional& phi,
                                                           std::vector<double> atoms,
                                                           std::size_t i, double h) {
  if (i >= atoms.size())
    throw std::invalid_argument("projection check: atom index out of range");
  auto value_with = [&](double xi) {
    std::vector<double> a(atoms);
    a[i] = xi;
    return phi.eval(Measure(EmpiricalMeasure(std::move(a))));
  };
  const double x = atoms[i];
  auto central = [&](double step) {
    return (value_with(x + step) - value_with(x - step)) / (2.0 * step);
  };
  const double d_h = central(h);
  const double d_h2 = central(0.5 * h);
  const double fd = (4.0 * d_h2 - d_h) / 3.0;
  const double formula =
      phi.dv_flat_derivative(Measure(EmpiricalMeasure(atoms)), x) /
      static_cast<double>(atoms.size());
  return {fd, formula, std::abs(fd - formula)};
}

}  // namespace smv
