#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smv/measures.hpp"

namespace smv {

// Quantitative certificates of Assumption-2 type: bounds the library reports
// and the property tests probe by random sampling.
struct DriftMeta {
  double sup_norm = 0.0;       // ||b||_inf
  double holder_eta = 1.0;     // spatial Hoelder exponent in (0,1]
  double holder_const = 0.0;   // |b(t,x1,mu)-b(t,x2,mu)| <= C |x1-x2|^eta
  double tv_lipschitz = 0.0;   // Lipschitz constant in d_TV for the measure slot
};

struct StepEvalConfig {
  std::size_t pairwise_threshold = 192;  // below: exact pairwise sums
  std::size_t grid_points = 256;         // above: histogram + kernel table
};

// Drift b(t, x, mu) with flat derivatives in the measure argument. The core
// experiments run on the line; measure-independent drifts also support d > 1
// through eval_vec.
class DriftModel {
 public:
  virtual ~DriftModel() = default;

  virtual std::string name() const = 0;
  virtual const DriftMeta& meta() const = 0;
  virtual bool measure_independent() const { return false; }

  virtual double eval1(double t, double x, const Measure& mu) const = 0;

  // delta b / delta m (t,x,mu)(v); zero unless the drift sees the measure.
  virtual double flat_derivative(double /*t*/, double /*x*/, const Measure& /*mu*/,
                                 double /*v*/) const {
    return 0.0;
  }
  virtual double second_flat_derivative(double /*t*/, double /*x*/, const Measure& /*mu*/,
                                        double /*v*/, double /*vp*/) const {
    return 0.0;
  }

  virtual void eval_vec(double /*t*/, std::span<const double> /*x*/,
                        const EmpiricalMeasure& /*mu*/, std::span<double> out) const {
    throw std::invalid_argument(name() + ": only d = 1 is supported");
    (void)out;
  }

  // One-step evaluator against a frozen pre-step empirical measure. Built-ins
  // may precompute per-step structures here (sorted atoms, kernel tables).
  virtual std::function<double(double)> step_evaluator_1d(double t,
                                                          const EmpiricalMeasure& mu,
                                                          const StepEvalConfig&) const {
    Measure m{mu};
    return [this, t, m](double x) { return eval1(t, x, m); };
  }

  // Same against a grid-represented law; default samples eval1 per node.
  virtual std::vector<double> table_on_grid(double t, const GridDensity& mu,
                                            const std::vector<double>& nodes) const {
    Measure m{mu};
    std::vector<double> out(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = eval1(t, nodes[i], m);
    return out;
  }
};

class ZeroDrift final : public DriftModel {
 public:
  std::string name() const override { return "zero"; }
  const DriftMeta& meta() const override {
    static DriftMeta m{0.0, 1.0, 0.0, 0.0};
    return m;
  }
  bool measure_independent() const override { return true; }
  double eval1(double, double, const Measure&) const override { return 0.0; }
  void eval_vec(double, std::span<const double>, const EmpiricalMeasure&,
                std::span<double> out) const override {
    for (double& v : out) v = 0.0;
  }
};

class ConstantDrift final : public DriftModel {
 public:
  explicit ConstantDrift(double c) : c_(c), meta_{std::abs(c), 1.0, 0.0, 0.0} {}
  std::string name() const override { return "constant"; }
  const DriftMeta& meta() const override { return meta_; }
  bool measure_independent() const override { return true; }
  double eval1(double, double, const Measure&) const override { return c_; }
  void eval_vec(double, std::span<const double> x, const EmpiricalMeasure& mu,
                std::span<double> out) const override {
    (void)x;
    (void)mu;
    for (double& v : out) v = c_;
  }
  double value() const { return c_; }

 private:
  double c_;
  DriftMeta meta_;
};

// b(x) = a min(1, |x|^eta) sign(x): bounded, eta-Hoelder, measure independent.
class HolderDrift final : public DriftModel {
 public:
  HolderDrift(double amplitude, double eta)
      : a_(amplitude), eta_(eta), meta_{std::abs(amplitude), eta, std::abs(amplitude) * 2.0, 0.0} {
    if (!(eta > 0.0 && eta <= 1.0))
      throw std::invalid_argument("HolderDrift: eta must lie in (0,1]");
  }
  std::string name() const override { return "holder"; }
  const DriftMeta& meta() const override { return meta_; }
  bool measure_independent() const override { return true; }
  double eval1(double, double x, const Measure&) const override {
    const double m = std::min(1.0, std::pow(std::abs(x), eta_));
    return a_ * m * (x < 0.0 ? -1.0 : (x > 0.0 ? 1.0 : 0.0));
  }

 private:
  double a_, eta_;
  DriftMeta meta_;
};

// b(t,x,mu) = int K(x - y) dmu(y) with a bounded Lipschitz kernel;
// delta b/delta m (x)(v) = K(x - v), second flat derivative identically 0.
class ConvolutionDrift final : public DriftModel {
 public:
  ConvolutionDrift(std::function<double(double)> kernel, double kernel_sup,
                   double kernel_lip, std::string kernel_name = "kernel")
      : kernel_(std::move(kernel)),
        kernel_name_(std::move(kernel_name)),
        meta_{kernel_sup, 1.0, kernel_lip, kernel_sup} {}

  static ConvolutionDrift tanh_kernel(double scale) {
    return ConvolutionDrift([scale](double u) { return scale * std::tanh(u); },
                            std::abs(scale), std::abs(scale), "tanh");
  }

  std::string name() const override { return "convolution_" + kernel_name_; }
  const DriftMeta& meta() const override { return meta_; }

  double kernel(double u) const { return kernel_(u); }

  double eval1(double t, double x, const Measure& mu) const override {
    (void)t;
    if (std::holds_alternative<EmpiricalMeasure>(mu)) {
      const auto& e = std::get<EmpiricalMeasure>(mu);
      if (e.dim != 1) throw std::invalid_argument("ConvolutionDrift: d = 1 only");
      std::vector<double> terms(e.size());
      for (std::size_t j = 0; j < e.size(); ++j) terms[j] = kernel_(x - e.scalar(j));
      return pairwise_mean(terms);
    }
    const auto& g = std::get<GridDensity>(mu);
    std::vector<double> vals(g.size());
    for (std::size_t j = 0; j < g.size(); ++j)
      vals[j] = kernel_(x - g.x_at(j)) * g.values[j] *
                ((j == 0 || j + 1 == g.size()) ? 0.5 : 1.0);
    return pairwise_sum(vals) * g.dx;
  }

  double flat_derivative(double, double x, const Measure&, double v) const override {
    return kernel_(x - v);
  }

  std::function<double(double)> step_evaluator_1d(double t, const EmpiricalMeasure& mu,
                                                  const StepEvalConfig& cfg) const override {
    (void)t;
    if (mu.dim != 1) throw std::invalid_argument("ConvolutionDrift: d = 1 only");
    const std::size_t n = mu.size();
    if (n <= cfg.pairwise_threshold) {
      // Sorted atom order keeps the sum invariant under permutations.
      auto atoms = std::make_shared<std::vector<double>>(mu.data);
      std::sort(atoms->begin(), atoms->end());
      auto kern = kernel_;
      return [atoms, kern, n](double x) {
        std::vector<double> terms(n);
        for (std::size_t j = 0; j < n; ++j) terms[j] = kern(x - (*atoms)[j]);
        return pairwise_mean(terms);
      };
    }
    // Histogram route: integer cell counts (permutation invariant), then a
    // kernel table b(node) = sum_cells K(node - cell) count/N, linear interp.
    double lo = mu.data[0], hi = mu.data[0];
    for (double v : mu.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double pad = 1e-9 + 1e-12 * std::max(std::abs(lo), std::abs(hi));
    lo -= pad;
    hi += pad;
    const std::size_t g = cfg.grid_points;
    const double dx = (hi - lo) / (g - 1);
    auto counts = std::make_shared<std::vector<double>>(g, 0.0);
    for (double v : mu.data) {
      std::size_t c = static_cast<std::size_t>((v - lo) / dx + 0.5);
      (*counts)[std::min(c, g - 1)] += 1.0;
    }
    auto table = std::make_shared<std::vector<double>>(g, 0.0);
    for (std::size_t i = 0; i < g; ++i) {
      double acc = 0.0;
      const double xi = lo + i * dx;
      for (std::size_t j = 0; j < g; ++j) {
        if ((*counts)[j] != 0.0) acc += (*counts)[j] * kernel_(xi - lo - j * dx);
      }
      (*table)[i] = acc / static_cast<double>(n);
    }
    const double inv_dx = 1.0 / dx;
    return [table, lo, inv_dx, g](double x) {
      const double u = (x - lo) * inv_dx;
      if (u <= 0.0) return (*table)[0];
      if (u >= g - 1.0) return (*table)[g - 1];
      const std::size_t i = static_cast<std::size_t>(u);
      const double w = u - i;
      return (1.0 - w) * (*table)[i] + w * (*table)[i + 1];
    };
  }

  std::vector<double> table_on_grid(double t, const GridDensity& mu,
                                    const std::vector<double>& nodes) const override {
    (void)t;
    std::vector<double> out(nodes.size(), 0.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < mu.size(); ++j) {
        const double w = (j == 0 || j + 1 == mu.size()) ? 0.5 : 1.0;
        acc += w * mu.values[j] * kernel_(nodes[i] - mu.x_at(j));
      }
      out[i] = acc * mu.dx;
    }
    return out;
  }

 private:
  std::function<double(double)> kernel_;
  std::string kernel_name_;
  DriftMeta meta_;
};

inline std::unique_ptr<DriftModel> make_drift(const std::string& id,
                                              double param = 0.0) {
  if (id == "zero") return std::make_unique<ZeroDrift>();
  if (id == "constant") return std::make_unique<ConstantDrift>(param);
  if (id == "holder") return std::make_unique<HolderDrift>(param == 0.0 ? 0.5 : param, 0.7);
  if (id == "conv_tanh")
    return std::make_unique<ConvolutionDrift>(
        ConvolutionDrift::tanh_kernel(param == 0.0 ? 0.5 : param));
  throw std::invalid_argument("unknown drift id: " + id);
}

}  // namespace smv
