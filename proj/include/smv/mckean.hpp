#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smv/drift.hpp"
#include "smv/measures.hpp"
#include "smv/parametrix.hpp"
#include "smv/particles.hpp"
#include "smv/rng.hpp"
#include "smv/stable_law.hpp"
#include "smv/util.hpp"

namespace smv {

enum class FlowProvenance { PicardIterate, FixedPoint, ParticleEmpirical };

// Marginal law flow on a step grid, density track (d = 1). Particle clouds are
// binned and lightly smoothed on a fixed grid: the faithful discretization for
// a total-variation metric, which is singular on atoms.
struct MeasureFlow {
  std::vector<double> times;
  std::vector<GridDensity> laws;
  FlowProvenance provenance = FlowProvenance::PicardIterate;
  int iterate_index = 0;

  const GridDensity& at_time(double t) const {
    if (times.empty()) throw std::invalid_argument("MeasureFlow: empty");
    if (t <= times.front()) return laws.front();
    if (t >= times.back()) return laws.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t j = static_cast<std::size_t>(it - times.begin());
    // previous-step law (the Euler convention for the frozen measure)
    return laws[j - 1];
  }

  FlowLookup lookup() const {
    const MeasureFlow* self = this;
    return [self](double t) { return Measure(self->at_time(t)); };
  }
};

struct FlowGridSpec {
  double lo = -24.0;
  double hi = 24.0;
  std::size_t points = 481;
};

// Monte Carlo configuration of one Picard pass.
struct McConfig {
  double t0 = 0.0;
  double horizon = 1.0;
  int steps = 400;
  std::size_t samples = 200000;
  FlowGridSpec grid;
  std::uint64_t seed = 1;
  std::uint32_t experiment = 0;
  std::uint32_t replication = 0;
  double smooth_bandwidth = 0.0;  // 0 = Silverman on the terminal sample
};

namespace detail {
inline GridDensity bin_flow_law(std::span<const double> xs, const FlowGridSpec& g,
                                double bandwidth, double time) {
  const double dx = (g.hi - g.lo) / (g.points - 1);
  GridDensity d = bin_linear(xs, g.lo, dx, g.points);
  gaussian_smooth(d, bandwidth);
  d.time = time;
  return d;
}
}  // namespace detail

// Deterministic stratified atoms from a quantile function: atom i at the
// (i + 1/2)/n quantile. Reproducible and variance-reduced versus iid draws.
inline std::vector<double> stratified_atoms(const std::function<double(double)>& quantile,
                                            std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  return out;
}

// One Picard sweep: Euler-Monte Carlo marginals of
//   dX = b(t, X, prev_t) dt + dZ,  X_{t0} given,
// against the frozen previous flow. Noise keys depend only on
// (replication, particle, absolute step), never on the iterate index, so
// successive iterates are coupled by common random numbers.
inline MeasureFlow picard_iterate(const MeasureFlow* prev, const DriftModel& drift,
                                  std::vector<double> particles, const StableLaw& law,
                                  const McConfig& cfg,
                                  std::vector<double>* terminal_out = nullptr) {
  if (law.dim != 1) throw std::invalid_argument("picard_iterate: density track is d = 1");
  const std::size_t m = particles.size();
  if (m == 0) throw std::invalid_argument("picard_iterate: empty initial sample");
  const double dt = cfg.horizon / cfg.steps;
  const double bw = (cfg.smooth_bandwidth > 0.0)
                        ? cfg.smooth_bandwidth
                        : silverman_bandwidth(particles);

  MeasureFlow out;
  out.provenance = FlowProvenance::PicardIterate;
  out.iterate_index = prev ? prev->iterate_index + 1 : 1;
  out.times.reserve(cfg.steps + 1);
  out.laws.reserve(cfg.steps + 1);
  out.times.push_back(cfg.t0);
  out.laws.push_back(detail::bin_flow_law(particles, cfg.grid, bw, cfg.t0));

  RandomStream base(cfg.seed, {cfg.experiment, cfg.replication, 0, 0});
  const int step0 = static_cast<int>(std::llround(cfg.t0 / dt));

  std::vector<double> nodes(cfg.grid.points);
  const double dx = (cfg.grid.hi - cfg.grid.lo) / (cfg.grid.points - 1);
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = cfg.grid.lo + i * dx;

  for (int k = 0; k < cfg.steps; ++k) {
    const double tk = cfg.t0 + k * dt;
    // drift table on the flow grid against the frozen measure
    std::vector<double> btab;
    if (drift.measure_independent()) {
      Measure none{EmpiricalMeasure({0.0})};
      btab.resize(nodes.size());
      for (std::size_t i = 0; i < nodes.size(); ++i)
        btab[i] = drift.eval1(tk, nodes[i], none);
    } else {
      if (!prev) throw std::invalid_argument("picard_iterate: measure-dependent drift needs a previous flow");
      btab = drift.table_on_grid(tk, prev->at_time(tk), nodes);
    }
    const double lo = cfg.grid.lo;
    auto bval = [&](double x) {
      const double u = (x - lo) / dx;
      if (u <= 0.0) return btab.front();
      if (u >= nodes.size() - 1.0) return btab.back();
      const std::size_t i = static_cast<std::size_t>(u);
      const double w = u - i;
      return (1.0 - w) * btab[i] + w * btab[i + 1];
    };
    parallel_for(0, m, [&](std::size_t i0, std::size_t i1) {
      for (std::size_t i = i0; i < i1; ++i) {
        RandomStream s = base.substream(static_cast<std::uint32_t>(i),
                                        static_cast<std::uint32_t>(step0 + k));
        particles[i] += bval(particles[i]) * dt + sample_increment_1d(law, dt, s);
        if (!std::isfinite(particles[i]))
          throw std::runtime_error("picard_iterate: non-finite sample");
      }
    });
    out.times.push_back(tk + dt);
    out.laws.push_back(detail::bin_flow_law(particles, cfg.grid, bw, tk + dt));
  }
  if (terminal_out) *terminal_out = std::move(particles);
  return out;
}

inline double flow_sup_dtv(const MeasureFlow& a, const MeasureFlow& b) {
  if (a.times.size() != b.times.size())
    throw std::invalid_argument("flow_sup_dtv: incompatible flows");
  double sup = 0.0;
  for (std::size_t j = 0; j < a.laws.size(); ++j)
    sup = std::max(sup, dtv_estimate(Measure(a.laws[j]), Measure(b.laws[j])));
  return sup;
}

struct PicardHistoryEntry {
  int iterate;
  double sup_dtv;
  double noise_floor;
};

struct PicardResult {
  MeasureFlow flow;
  std::vector<PicardHistoryEntry> history;
  bool converged = false;
  std::vector<double> terminal_particles;  // last sweep's sample at the horizon
};

// Resampling noise floor of the flow distance estimator: d_TV between the laws
// built from the two halves of the same terminal sample, scaled by 1/sqrt(2).
inline double picard_noise_floor(std::span<const double> terminal, const FlowGridSpec& g,
                                 double bandwidth) {
  std::vector<double> a, b;
  a.reserve(terminal.size() / 2);
  b.reserve(terminal.size() / 2);
  for (std::size_t i = 0; i < terminal.size(); ++i)
    ((i % 2 == 0) ? a : b).push_back(terminal[i]);
  const GridDensity da = detail::bin_flow_law(a, g, bandwidth, 0.0);
  const GridDensity db = detail::bin_flow_law(b, g, bandwidth, 0.0);
  return dtv_estimate(Measure(da), Measure(db)) / std::numbers::sqrt2;
}

// Picard iteration to the nonlinear fixed point. The iterate map starts from
// the frozen initial law (P_t = mu_0 for all t) and stops when the sup-t
// distance between successive flows falls below tol (which must sit above the
// documented estimator noise floor) or after max_iter sweeps.
inline PicardResult picard_solve(const DriftModel& drift, const std::vector<double>& init,
                                 const StableLaw& law, const McConfig& cfg, double tol,
                                 int max_iter) {
  if (max_iter < 1) throw std::invalid_argument("picard_solve: max_iter >= 1");
  PicardResult res;
  const double bw = silverman_bandwidth(init);

  MeasureFlow frozen;
  frozen.provenance = FlowProvenance::PicardIterate;
  frozen.iterate_index = 0;
  frozen.times = {cfg.t0, cfg.t0 + cfg.horizon};
  frozen.laws = {detail::bin_flow_law(init, cfg.grid, bw, cfg.t0),
                 detail::bin_flow_law(init, cfg.grid, bw, cfg.t0)};

  const MeasureFlow* prev = &frozen;
  MeasureFlow prev_store;
  // Measure-independent drifts hit the fixed point in one sweep; the second
  // sweep then reproduces it bitwise (common random numbers), which is what
  // the recorded 0 distance measures.
  const int effective_max = drift.measure_independent() ? 2 : max_iter;
  for (int m = 1; m <= effective_max; ++m) {
    std::vector<double> particles(init);
    std::vector<double> terminal;
    MeasureFlow next = picard_iterate(prev, drift, std::move(particles), law, cfg, &terminal);
    bool done = false;
    if (m >= 2) {
      const double dist = flow_sup_dtv(prev_store, next);
      const double floor =
          picard_noise_floor(terminal, cfg.grid, silverman_bandwidth(terminal));
      res.history.push_back({m, dist, floor});
      done = (dist < tol) || drift.measure_independent();
    }
    res.terminal_particles = std::move(terminal);
    prev_store = std::move(next);
    prev = &prev_store;
    if (done) {
      res.converged = true;
      break;
    }
  }
  res.flow = std::move(prev_store);
  res.flow.provenance = FlowProvenance::FixedPoint;
  return res;
}

// Decoupled transition density: the parametrix engine with the solved flow
// frozen inside the kernel.
inline DensityExpansion decoupled_flow_density(const MeasureFlow& fixed_flow,
                                               const DriftModel& drift, const StableLaw& law,
                                               double s, double x, double t,
                                               const ParametrixConfig& cfg) {
  if (fixed_flow.provenance != FlowProvenance::FixedPoint)
    throw std::invalid_argument("decoupled_flow_density: flow must be a fixed point");
  return density_truncated(drift, fixed_flow.lookup(), law, s, t, x, cfg);
}

// || int p(mu,s,t,x,.) dmu(x) - mu_t ||_L1: the mixture identity residual,
// with the mixture over the init atoms computed independently of the flow.
inline double mixture_identity_residual(const MeasureFlow& fixed_flow,
                                        const DriftModel& drift, const StableLaw& law,
                                        const std::vector<double>& init_atoms, double s,
                                        double t, const ParametrixConfig& cfg) {
  GridDensity mix;
  bool first = true;
  for (double x : init_atoms) {
    auto dx = decoupled_flow_density(fixed_flow, drift, law, s, x, t, cfg);
    // decoupled grids are centered at x; resample onto the flow grid below
    const GridDensity& flow_law = fixed_flow.at_time(t);
    if (first) {
      mix = flow_law;
      std::fill(mix.values.begin(), mix.values.end(), 0.0);
      first = false;
    }
    for (std::size_t i = 0; i < mix.size(); ++i)
      mix.values[i] += dx.density(mix.x_at(i)) / static_cast<double>(init_atoms.size());
  }
  const GridDensity& target = fixed_flow.at_time(t);
  double l1 = 0.0;
  for (std::size_t i = 0; i < mix.size(); ++i)
    l1 += std::abs(mix.values[i] - target.values[i]) * mix.dx;
  return l1;
}

}  // namespace smv
