#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "smv/functionals.hpp"
#include "smv/mckean.hpp"
#include "smv/particles.hpp"
#include "smv/wasserstein.hpp"

namespace smv {

// Initial law mu_0 with enough analytic structure for exact 1-d W_1 and
// declared moment order q (P_q membership).
struct InitSpec {
  std::string kind = "uniform";  // point | uniform | pareto | two_point
  double a = 0.0;                // point: location; uniform: lower; pareto: index q
  double b = 1.0;                // uniform: upper; two_point: second atom

  double moment_order() const {
    if (kind == "pareto") return a;
    return std::numeric_limits<double>::infinity();
  }

  double quantile(double p) const {
    if (kind == "point") return a;
    if (kind == "uniform") return a + (b - a) * p;
    if (kind == "two_point") return (p < 0.5) ? a : b;
    if (kind == "pareto") return std::pow(1.0 - p, -1.0 / a);  // support [1, inf)
    throw std::invalid_argument("InitSpec: unknown kind " + kind);
  }

  bool has_analytic_law() const {
    return kind == "uniform" || kind == "pareto" || kind == "point";
  }

  AnalyticLaw1d analytic_law() const {
    AnalyticLaw1d law;
    if (kind == "uniform") {
      const double lo = a, hi = b, len = b - a;
      law.cdf = [lo, hi, len](double x) { return std::clamp((x - lo) / len, 0.0, 1.0); };
      law.cdf_antideriv = [lo, hi, len](double x) {
        if (x <= lo) return 0.0;
        if (x >= hi) return 0.5 * len + (x - hi);
        return 0.5 * (x - lo) * (x - lo) / len;
      };
      law.quantile = [this](double p) { return quantile(p); };
      law.tail_integral = [lo, hi, len](double x) {
        if (x >= hi) return 0.0;
        const double y = std::max(x, lo);
        return 0.5 * (hi - y) * (hi - y) / len;
      };
      law.support_lo = lo;
      return law;
    }
    if (kind == "pareto") {
      const double q = a;
      law.cdf = [q](double x) { return x <= 1.0 ? 0.0 : 1.0 - std::pow(x, -q); };
      // int_1^x F = (x - 1) + (x^{1-q} - 1)/(q - 1)
      law.cdf_antideriv = [q](double x) {
        if (x <= 1.0) return 0.0;
        return (x - 1.0) + (std::pow(x, 1.0 - q) - 1.0) / (q - 1.0);
      };
      law.quantile = [this](double p) { return quantile(p); };
      law.tail_integral = [q](double x) {
        const double y = std::max(x, 1.0);
        return std::pow(y, 1.0 - q) / (q - 1.0);
      };
      law.support_lo = 1.0;
      return law;
    }
    if (kind == "point") {
      const double c = a;
      law.cdf = [c](double x) { return x < c ? 0.0 : 1.0; };
      law.cdf_antideriv = [c](double x) { return x < c ? 0.0 : x - c; };
      law.quantile = [c](double) { return c; };
      law.tail_integral = [](double) { return 0.0; };
      law.support_lo = c;
      return law;
    }
    throw std::invalid_argument("InitSpec: no analytic law for kind " + kind);
  }
};

// iid initial atoms for one replication; the init draw uses a step id past the
// Euler range so it never collides with increment substreams.
inline std::vector<double> iid_init_atoms(const InitSpec& init, std::size_t n,
                                          std::uint64_t seed, std::uint32_t experiment,
                                          std::uint32_t replication) {
  std::vector<double> xs(n);
  RandomStream base(seed, {experiment, replication, 0, 0});
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream s = base.substream(static_cast<std::uint32_t>(i), 0xFFFFFFF0u);
    xs[i] = init.quantile(s.uniform01());
  }
  return xs;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // 95%
  std::vector<std::size_t> excluded;
};

// Weighted least squares on (ln N, ln err); points with se >= err/3 are
// excluded and reported. Needs at least 4 usable points.
inline RateFit fit_rate(const std::vector<double>& n, const std::vector<double>& err,
                        const std::vector<double>& se) {
  if (n.size() != err.size() || n.size() != se.size())
    throw std::invalid_argument("fit_rate: ragged inputs");
  RateFit fit;
  std::vector<double> lx, ly, w;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(err[i] > 0.0) || !(se[i] >= 0.0) || se[i] >= err[i] / 3.0) {
      fit.excluded.push_back(i);
      continue;
    }
    lx.push_back(std::log(n[i]));
    ly.push_back(std::log(err[i]));
    const double sigma = std::max(se[i] / err[i], 1e-9);  // delta method
    w.push_back(1.0 / (sigma * sigma));
  }
  if (lx.size() < 4)
    throw std::runtime_error("fit_rate: fewer than 4 usable points (noise-dominated)");
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sw += w[i];
    swx += w[i] * lx[i];
    swy += w[i] * ly[i];
    swxx += w[i] * lx[i] * lx[i];
    swxy += w[i] * lx[i] * ly[i];
  }
  const double det = sw * swxx - swx * swx;
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.intercept = (swxx * swy - swx * swxy) / det;
  fit.slope_se = std::sqrt(sw / det);
  fit.ci_lo = fit.slope - 1.96 * fit.slope_se;
  fit.ci_hi = fit.slope + 1.96 * fit.slope_se;
  return fit;
}

enum class ReferenceMode { Quadrature, NRef, Picard };

struct ChaosConfig {
  StableLaw law{1.5, 1};
  InitSpec init;
  std::vector<std::size_t> n_grid{16, 32, 64, 128, 256, 512, 1024};
  int replications = 2000;
  SimConfig sim{1.0, 100};
  double beta = 1.25;
  std::uint64_t seed = 1;
  std::uint32_t experiment = 2;
  ReferenceMode reference = ReferenceMode::NRef;
  std::size_t nref_factor = 16;  // N_ref = factor * max(n_grid)
  int nref_replications = 400;
  StepEvalConfig interaction;

  void validate(double alpha) const {
    for (std::size_t i = 1; i < n_grid.size(); ++i)
      if (n_grid[i] <= n_grid[i - 1])
        throw std::invalid_argument("ChaosConfig: N grid must be strictly increasing");
    if (replications < 30)
      throw std::invalid_argument("ChaosConfig: R >= 30 for any SE-bearing claim");
    if (!(beta > 1.0 && beta < alpha))
      throw std::invalid_argument("ChaosConfig: need 1 < beta < alpha");
  }
};

struct ChaosCurveRow {
  std::size_t n = 0;
  double strong_err = 0.0, strong_se = 0.0;
  double weak_err = 0.0, weak_se = 0.0;
};

struct ChaosCurve {
  std::vector<ChaosCurveRow> rows;
  double reference = 0.0;
  double reference_se = 0.0;
  std::string reference_mode;
};

namespace detail {

// phi(mu^N_T) for one replication of the N-particle system.
inline double terminal_statistic(const ChaosConfig& cfg, const DriftModel& drift,
                                 const TestFunctional& phi, std::size_t n,
                                 std::uint32_t replication) {
  const auto init = iid_init_atoms(cfg.init, n, cfg.seed, cfg.experiment, replication);
  RandomStream base(cfg.seed, {cfg.experiment, replication, 0, 0});
  const auto term =
      simulate(EmpiricalMeasure(init), drift, cfg.sim, cfg.law, base, nullptr,
               cfg.interaction);
  return phi.eval(Measure(term.measure()));
}

}  // namespace detail

// Reference value phi(mu_T) for a measure-independent drift by exact
// convolution of mu_0 with the stable kernel (plus the constant-drift shift).
inline GridDensity exact_flow_marginal(const ChaosConfig& cfg, const DriftModel& drift,
                                       double t, const FlowGridSpec& grid = {}) {
  if (!drift.measure_independent())
    throw std::invalid_argument("exact_flow_marginal: needs a measure-independent drift");
  const StableDensity& q = StableDensity::get(cfg.law.alpha, 1);
  double shift = 0.0;
  if (const auto* cd = dynamic_cast<const ConstantDrift*>(&drift)) shift = cd->value() * t;
  const int n_atoms = 512;
  GridDensity g;
  g.dx = (grid.hi - grid.lo) / (grid.points - 1);
  g.x0 = grid.lo;
  g.time = t;
  g.values.assign(grid.points, 0.0);
  for (int k = 0; k < n_atoms; ++k) {
    const double x0 = cfg.init.quantile((k + 0.5) / n_atoms) + shift;
    for (std::size_t i = 0; i < grid.points; ++i)
      g.values[i] += q.density_radial(t, g.x_at(i) - x0) / n_atoms;
  }
  return g;
}

inline ChaosCurve chaos_error_curve(const ChaosConfig& cfg, const DriftModel& drift,
                                    const TestFunctional& phi) {
  cfg.validate(cfg.law.alpha);
  ChaosCurve curve;

  // reference phi(mu_T)
  if (cfg.reference == ReferenceMode::Quadrature) {
    const GridDensity muT = exact_flow_marginal(cfg, drift, cfg.sim.horizon);
    curve.reference = phi.eval(Measure(muT));
    curve.reference_se = 0.0;
    curve.reference_mode = "quadrature";
  } else if (cfg.reference == ReferenceMode::NRef) {
    const std::size_t nref = cfg.nref_factor * cfg.n_grid.back();
    std::vector<double> vals(cfg.nref_replications);
    parallel_for(0, vals.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r)
        vals[r] = detail::terminal_statistic(cfg, drift, phi, nref,
                                             0x40000000u + static_cast<std::uint32_t>(r));
    });
    curve.reference = pairwise_mean(vals);
    curve.reference_se = sample_sd(vals) / std::sqrt(static_cast<double>(vals.size()));
    curve.reference_mode = "nref";
  } else {
    McConfig mc;
    mc.horizon = cfg.sim.horizon;
    mc.steps = cfg.sim.steps;
    mc.samples = 200000;
    mc.seed = cfg.seed;
    mc.experiment = cfg.experiment + 7;
    const auto init = stratified_atoms(
        [&](double p) { return cfg.init.quantile(p); }, mc.samples);
    PicardResult pr = picard_solve(drift, init, cfg.law, mc, 0.01, 8);
    curve.reference = phi.eval(Measure(pr.flow.laws.back()));
    curve.reference_se = 0.0;  // bias-dominated; documented, not SE-quantified
    curve.reference_mode = "picard";
  }

  for (std::size_t n : cfg.n_grid) {
    std::vector<double> vals(cfg.replications);
    parallel_for(0, vals.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r)
        vals[r] = detail::terminal_statistic(cfg, drift, phi, n,
                                             static_cast<std::uint32_t>(r));
    });
    ChaosCurveRow row;
    row.n = n;
    std::vector<double> absdev(vals.size());
    for (std::size_t r = 0; r < vals.size(); ++r)
      absdev[r] = std::abs(vals[r] - curve.reference);
    row.strong_err = pairwise_mean(absdev);
    row.strong_se = std::sqrt(
        std::pow(sample_sd(absdev) / std::sqrt(static_cast<double>(vals.size())), 2) +
        curve.reference_se * curve.reference_se);
    row.weak_err = std::abs(pairwise_mean(vals) - curve.reference);
    row.weak_se = std::sqrt(
        std::pow(sample_sd(vals) / std::sqrt(static_cast<double>(vals.size())), 2) +
        curve.reference_se * curve.reference_se);
    curve.rows.push_back(row);
  }
  return curve;
}

struct InitRatePoint {
  std::size_t n;
  double mean_w1;
  double se;
};

// E W_1(mu^N_0, mu_0) over iid samples, exact in d = 1 via the analytic CDF.
inline std::vector<InitRatePoint> initial_wasserstein_curve(const InitSpec& init,
                                                            const std::vector<std::size_t>& n_grid,
                                                            int replications,
                                                            std::uint64_t seed,
                                                            std::uint32_t experiment = 3) {
  if (!init.has_analytic_law())
    throw std::invalid_argument("initial_wasserstein_curve: init needs an analytic CDF");
  const AnalyticLaw1d law = init.analytic_law();
  std::vector<InitRatePoint> out;
  for (std::size_t n : n_grid) {
    std::vector<double> vals(replications);
    parallel_for(0, vals.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r) {
        const auto atoms =
            iid_init_atoms(init, n, seed, experiment, static_cast<std::uint32_t>(r));
        vals[r] = w1_empirical_vs_law_1d(EmpiricalMeasure(atoms), law);
      }
    });
    out.push_back({n, pairwise_mean(vals),
                   sample_sd(vals) / std::sqrt(static_cast<double>(replications))});
  }
  return out;
}

// d in {2,3} variant at small N: product init law, exact-assignment W_1
// against one fixed reference sample (a lower-variance stand-in for mu_0;
// documented two-sample bias, decreasing in the reference size).
inline std::vector<InitRatePoint> initial_wasserstein_curve_multid(
    const InitSpec& init, int dim, const std::vector<std::size_t>& n_grid,
    int replications, std::uint64_t seed, std::size_t reference_size = 256,
    std::uint32_t experiment = 4) {
  if (dim < 2 || dim > 3)
    throw std::invalid_argument("initial_wasserstein_curve_multid: d in {2,3}");
  if (reference_size > 256)
    throw std::invalid_argument("initial_wasserstein_curve_multid: reference <= 256");
  auto draw = [&](std::uint32_t rep, std::size_t n) {
    std::vector<double> flat(n * dim);
    RandomStream base(seed, {experiment, rep, 0, 0});
    for (std::size_t i = 0; i < n * static_cast<std::size_t>(dim); ++i) {
      RandomStream s = base.substream(static_cast<std::uint32_t>(i), 0xFFFFFFF1u);
      flat[i] = init.quantile(s.uniform01());
    }
    return EmpiricalMeasure(dim, std::move(flat));
  };
  std::vector<InitRatePoint> out;
  for (std::size_t n : n_grid) {
    if (n > 256)
      throw std::invalid_argument("initial_wasserstein_curve_multid: N <= 256");
    std::vector<double> vals(replications);
    parallel_for(0, vals.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r) {
        // equal-size clouds: subsample the reference draw to n atoms
        const auto sample = draw(static_cast<std::uint32_t>(r), n);
        const auto ref = draw(0x7FFF0000u + static_cast<std::uint32_t>(r % 8),
                              std::max(n, reference_size));
        EmpiricalMeasure ref_n(dim, std::vector<double>(
                                        ref.data.begin(), ref.data.begin() + n * dim));
        vals[r] = w1_small_exact(sample, ref_n);
      }
    });
    out.push_back({n, pairwise_mean(vals),
                   sample_sd(vals) / std::sqrt(static_cast<double>(replications))});
  }
  return out;
}

struct MeanFieldPoint {
  std::size_t n;
  double w1;
  double sampling_floor;
};

// W_1 between the law of particle 1 at T (across replications) and a reference
// sample of mu_T; the R-replication sampling floor is measured by splitting
// the reference sample.
inline std::vector<MeanFieldPoint> mean_field_w1_curve(const ChaosConfig& cfg,
                                                       const DriftModel& drift,
                                                       const std::vector<double>& reference_sample) {
  std::vector<MeanFieldPoint> out;
  // sampling floor: two disjoint R-subsamples of the reference
  double floor = 0.0;
  {
    const std::size_t r = std::min<std::size_t>(cfg.replications, reference_sample.size() / 2);
    std::vector<double> a(reference_sample.begin(), reference_sample.begin() + r);
    std::vector<double> b(reference_sample.begin() + r, reference_sample.begin() + 2 * r);
    floor = w1_exact_1d(EmpiricalMeasure(a), EmpiricalMeasure(b));
  }
  for (std::size_t n : cfg.n_grid) {
    std::vector<double> firsts(cfg.replications);
    parallel_for(0, firsts.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r) {
        const auto init = iid_init_atoms(cfg.init, n, cfg.seed, cfg.experiment,
                                         static_cast<std::uint32_t>(r));
        RandomStream base(cfg.seed, {cfg.experiment, static_cast<std::uint32_t>(r), 0, 0});
        const auto term = simulate(EmpiricalMeasure(init), drift, cfg.sim, cfg.law, base,
                                   nullptr, cfg.interaction);
        firsts[r] = term.positions[0];
      }
    });
    out.push_back({n, w1_exact_1d(EmpiricalMeasure(firsts),
                                  EmpiricalMeasure(reference_sample)),
                   floor});
  }
  return out;
}

}  // namespace smv
