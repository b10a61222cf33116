#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "smv/functionals.hpp"
#include "smv/mckean.hpp"

namespace smv {

// Estimation knobs for U(t, mu) = phi([X^{t,mu}_T]). Restarts share the global
// step grid on [0, T]: step keys are absolute indices, so runs started at
// different checkpoints reuse identical noise on the overlap (common random
// numbers), and Euler bias cancels in differences.
struct SemigroupConfig {
  double horizon = 1.0;
  int steps = 200;              // global Euler grid on [0, T]
  std::size_t samples = 100000;
  int replications = 6;
  double picard_tol = 0.01;
  int picard_max_iter = 8;
  FlowGridSpec grid;
  std::uint64_t seed = 1;
  std::uint32_t experiment = 1;
  // One bandwidth for every law-smoothing step of the experiment; 0 derives
  // it from the initial sample. Restart runs must not re-derive it from
  // their own clouds (that redistributes mass and biases symmetric
  // functionals at the 1e-4 level).
  double smooth_bandwidth = 0.0;
  // Checkpoint restarts reuse base-run noise keys when set; exact for
  // measure-independent drifts, but it shrinks replication SEs to the point
  // where any estimator-level bias dominates, so the default draws fresh
  // noise per checkpoint.
  bool common_random_numbers = false;
};

struct EstimateWithError {
  double value = 0.0;
  double se = 0.0;
};

namespace detail {

inline McConfig restart_config(const SemigroupConfig& cfg, double t,
                               std::uint32_t replication) {
  McConfig mc;
  mc.t0 = t;
  mc.horizon = cfg.horizon - t;
  const double dt = cfg.horizon / cfg.steps;
  mc.steps = std::max(1, static_cast<int>(std::llround(mc.horizon / dt)));
  mc.samples = cfg.samples;
  mc.grid = cfg.grid;
  mc.seed = cfg.seed;
  mc.experiment = cfg.experiment;
  mc.replication = replication;
  mc.smooth_bandwidth = cfg.smooth_bandwidth;
  return mc;
}

inline double evaluate_terminal(const TestFunctional& phi,
                                const std::vector<double>& terminal) {
  return phi.eval(Measure(EmpiricalMeasure(terminal)));
}

}  // namespace detail

// One replication of U(t, mu): Picard-solve from (t, atoms) to T, evaluate phi
// on the terminal sample.
inline double semigroup_U_once(double t, const std::vector<double>& atoms,
                               const TestFunctional& phi, const DriftModel& drift,
                               const StableLaw& law, const SemigroupConfig& cfg,
                               std::uint32_t replication) {
  if (t > cfg.horizon) throw std::invalid_argument("semigroup_U: t must be <= T");
  if (t == cfg.horizon) return phi.eval(Measure(EmpiricalMeasure(atoms)));
  const McConfig mc = detail::restart_config(cfg, t, replication);
  PicardResult pr = picard_solve(drift, atoms, law, mc, cfg.picard_tol, cfg.picard_max_iter);
  return detail::evaluate_terminal(phi, pr.terminal_particles);
}

// U(t, mu) with a replication-based standard error.
inline EstimateWithError semigroup_U_estimate(double t, const std::vector<double>& atoms,
                                              const TestFunctional& phi,
                                              const DriftModel& drift, const StableLaw& law,
                                              const SemigroupConfig& cfg) {
  std::vector<double> vals(cfg.replications);
  for (int r = 0; r < cfg.replications; ++r)
    vals[r] = semigroup_U_once(t, atoms, phi, drift, law, cfg, static_cast<std::uint32_t>(r));
  EstimateWithError e;
  e.value = pairwise_mean(vals);
  e.se = (cfg.replications > 1)
             ? sample_sd(vals) / std::sqrt(static_cast<double>(cfg.replications))
             : 0.0;
  return e;
}

struct FlowConstancyReport {
  std::vector<double> checkpoints;
  std::vector<double> residuals;      // |mean_r U_r(t_i) - U_r(0)|
  std::vector<double> ses;            // SE of the paired difference
  double max_residual = 0.0;
  double max_residual_se = 0.0;
  bool within_3se = true;
};

// U(t_i, mu_{t_i}) should not move along the solved flow. Each replication
// runs the base solve from (0, mu_0), snapshots its own particle cloud at the
// checkpoints and restarts the solve there, so the difference
// U_r(t_i) - U_r(0) isolates the fixed-point consistency error.
inline FlowConstancyReport flow_constancy_residual(const TestFunctional& phi,
                                                   const std::vector<double>& init_atoms,
                                                   const std::vector<double>& checkpoints,
                                                   const DriftModel& drift,
                                                   const StableLaw& law,
                                                   const SemigroupConfig& cfg_in) {
  SemigroupConfig cfg = cfg_in;
  if (cfg.smooth_bandwidth <= 0.0)
    cfg.smooth_bandwidth = silverman_bandwidth(init_atoms);
  FlowConstancyReport rep;
  rep.checkpoints = checkpoints;
  const double dt = cfg.horizon / cfg.steps;
  std::vector<std::vector<double>> diffs(checkpoints.size(),
                                         std::vector<double>(cfg.replications));

  for (int r = 0; r < cfg.replications; ++r) {
    const McConfig base_mc = detail::restart_config(cfg, 0.0, static_cast<std::uint32_t>(r));
    PicardResult base =
        picard_solve(drift, init_atoms, law, base_mc, cfg.picard_tol, cfg.picard_max_iter);

    // Re-walk the solved flow once to snapshot particle clouds at checkpoints;
    // U_r(0) is evaluated on this walk's own terminal cloud so that every
    // compared quantity shares the same lineage.
    std::vector<std::vector<double>> snaps(checkpoints.size());
    double u0 = 0.0;
    {
      std::vector<double> particles(init_atoms);
      RandomStream stream_base(cfg.seed, {cfg.experiment, static_cast<std::uint32_t>(r), 0, 0});
      std::vector<double> nodes(cfg.grid.points);
      const double dx = (cfg.grid.hi - cfg.grid.lo) / (cfg.grid.points - 1);
      for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = cfg.grid.lo + i * dx;
      for (int k = 0; k < cfg.steps; ++k) {
        const double tk = k * dt;
        for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
          if (std::abs(checkpoints[ci] - tk) < 0.5 * dt && snaps[ci].empty())
            snaps[ci] = particles;
        }
        std::vector<double> btab;
        if (drift.measure_independent()) {
          Measure none{EmpiricalMeasure({0.0})};
          btab.resize(nodes.size());
          for (std::size_t i = 0; i < nodes.size(); ++i)
            btab[i] = drift.eval1(tk, nodes[i], none);
        } else {
          btab = drift.table_on_grid(tk, base.flow.at_time(tk), nodes);
        }
        parallel_for(0, particles.size(), [&](std::size_t i0, std::size_t i1) {
          for (std::size_t i = i0; i < i1; ++i) {
            const double u = (particles[i] - cfg.grid.lo) / dx;
            double b;
            if (u <= 0.0) b = btab.front();
            else if (u >= nodes.size() - 1.0) b = btab.back();
            else {
              const std::size_t ii = static_cast<std::size_t>(u);
              const double w = u - ii;
              b = (1.0 - w) * btab[ii] + w * btab[ii + 1];
            }
            RandomStream s = stream_base.substream(static_cast<std::uint32_t>(i),
                                                   static_cast<std::uint32_t>(k));
            particles[i] += b * dt + sample_increment_1d(law, dt, s);
          }
        });
      }
      for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
        if (snaps[ci].empty() && std::abs(checkpoints[ci] - cfg.horizon) < 0.5 * dt)
          snaps[ci] = particles;
      }
      u0 = detail::evaluate_terminal(phi, particles);
    }

    for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
      if (snaps[ci].empty())
        throw std::invalid_argument("flow_constancy: checkpoint off the step grid");
      SemigroupConfig restart_cfg = cfg;
      if (!cfg.common_random_numbers)
        restart_cfg.experiment = cfg.experiment + 101 + static_cast<std::uint32_t>(ci);
      const double ui = semigroup_U_once(checkpoints[ci], snaps[ci], phi, drift, law,
                                         restart_cfg, static_cast<std::uint32_t>(r));
      diffs[ci][r] = ui - u0;
    }
  }

  for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
    const double mean_diff = std::abs(pairwise_mean(diffs[ci]));
    const double se = sample_sd(diffs[ci]) / std::sqrt(static_cast<double>(cfg.replications));
    rep.residuals.push_back(mean_diff);
    rep.ses.push_back(se);
    if (mean_diff > rep.max_residual) {
      rep.max_residual = mean_diff;
      rep.max_residual_se = se;
    }
    if (mean_diff > 3.0 * se + 1e-12) rep.within_3se = false;
  }
  return rep;
}

// Deterministic atom list for (1 - eps) mu + eps delta_v.
inline std::vector<double> mixture_atoms(const std::vector<double>& mu_atoms, double v,
                                         double eps, std::size_t m) {
  const std::size_t nv = static_cast<std::size_t>(std::llround(eps * m));
  std::vector<double> out;
  out.reserve(m);
  for (std::size_t i = 0; i + nv < m; ++i) out.push_back(mu_atoms[i % mu_atoms.size()]);
  for (std::size_t i = 0; i < nv; ++i) out.push_back(v);
  return out;
}

struct FlatDerivativeResult {
  double value = 0.0;   // delta U/delta m (t,mu)(v1) - delta U/delta m (t,mu)(v2)
  double se = 0.0;
  bool noise_warning = false;
};

// [U(t, (1-eps) mu + eps delta_{v1}) - U(t, (1-eps) mu + eps delta_{v2})] / eps.
// Differences of two lateral perturbations cancel the additive constant the
// linear derivative is only defined up to. Both runs share noise keys.
inline FlatDerivativeResult flat_derivative_U_difference(
    double t, const std::vector<double>& mu_atoms, const TestFunctional& phi, double v1,
    double v2, double eps, const DriftModel& drift, const StableLaw& law,
    const SemigroupConfig& cfg_in) {
  if (!(eps > 0.0)) throw std::invalid_argument("flat_derivative_U_difference: eps > 0");
  if (v1 == v2) return {0.0, 0.0, false};
  SemigroupConfig cfg = cfg_in;
  if (cfg.smooth_bandwidth <= 0.0) cfg.smooth_bandwidth = silverman_bandwidth(mu_atoms);
  std::vector<double> d(cfg.replications);
  for (int r = 0; r < cfg.replications; ++r) {
    const auto a1 = mixture_atoms(mu_atoms, v1, eps, cfg.samples);
    const auto a2 = mixture_atoms(mu_atoms, v2, eps, cfg.samples);
    const double u1 = semigroup_U_once(t, a1, phi, drift, law, cfg, static_cast<std::uint32_t>(r));
    const double u2 = semigroup_U_once(t, a2, phi, drift, law, cfg, static_cast<std::uint32_t>(r));
    d[r] = (u1 - u2) / eps;
  }
  FlatDerivativeResult res;
  res.value = pairwise_mean(d);
  res.se = (cfg.replications > 1)
               ? sample_sd(d) / std::sqrt(static_cast<double>(cfg.replications))
               : 0.0;
  res.noise_warning = res.se > std::abs(res.value) * 0.5 + 1e-12;
  return res;
}

}  // namespace smv
