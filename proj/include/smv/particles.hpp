#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "smv/drift.hpp"
#include "smv/measures.hpp"
#include "smv/rng.hpp"
#include "smv/stable_law.hpp"
#include "smv/util.hpp"

namespace smv {

struct ParticleState {
  int dim = 1;
  std::vector<double> positions;  // row-major N x dim
  double time = 0.0;
  std::uint32_t step_index = 0;

  std::size_t count() const { return positions.size() / dim; }
  EmpiricalMeasure measure() const { return EmpiricalMeasure(dim, positions); }
};

struct SimConfig {
  double horizon = 1.0;
  int steps = 100;
  double jump_cap = 0.0;  // 0 disables truncation

  SimConfig() = default;
  SimConfig(double T, int n, double cap = 0.0) : horizon(T), steps(n), jump_cap(cap) {
    if (!(horizon > 0.0)) throw std::invalid_argument("SimConfig: horizon must be > 0");
    if (steps < 1) throw std::invalid_argument("SimConfig: steps must be >= 1");
  }
};

namespace detail {
inline void check_finite(double v) {
  if (!std::isfinite(v))
    throw std::runtime_error("particle_system: non-finite position (heavy-tail overflow)");
}
}  // namespace detail

// One Euler step. Every particle reads the frozen pre-step empirical measure
// (simultaneous update); increments come from per-(particle, step) substreams,
// so the result does not depend on thread count or scheduling. With cap > 0
// any increment with |dZ| > cap is rescaled onto the cap sphere.
inline ParticleState step(const ParticleState& state, const DriftModel& drift, double dt,
                          const StableLaw& law, const RandomStream& base, double cap = 0.0,
                          const StepEvalConfig& cfg = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
  if (state.dim != law.dim) throw std::invalid_argument("step: dimension mismatch");
  ParticleState next = state;
  const std::size_t n = state.count();

  if (state.dim == 1) {
    std::function<double(double)> b;
    if (drift.measure_independent()) {
      const double t = state.time;
      const DriftModel* d = &drift;
      b = [d, t](double x) {
        static const Measure none{EmpiricalMeasure({0.0})};
        return d->eval1(t, x, none);
      };
    } else {
      b = drift.step_evaluator_1d(state.time, state.measure(), cfg);
    }
    parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        RandomStream s = base.substream(static_cast<std::uint32_t>(i), state.step_index);
        double dz = sample_increment_1d(law, dt, s);
        if (cap > 0.0 && std::abs(dz) > cap) dz = (dz > 0.0 ? cap : -cap);
        next.positions[i] = state.positions[i] + b(state.positions[i]) * dt + dz;
        detail::check_finite(next.positions[i]);
      }
    });
  } else {
    const EmpiricalMeasure pre = state.measure();
    parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
      std::vector<double> bvec(state.dim);
      for (std::size_t i = lo; i < hi; ++i) {
        RandomStream s = base.substream(static_cast<std::uint32_t>(i), state.step_index);
        std::vector<double> dz = sample_increment(law, dt, s);
        if (cap > 0.0) {
          double nrm = 0.0;
          for (double v : dz) nrm += v * v;
          nrm = std::sqrt(nrm);
          if (nrm > cap)
            for (double& v : dz) v *= cap / nrm;
        }
        drift.eval_vec(state.time, pre.point(i), pre, bvec);
        for (int c = 0; c < state.dim; ++c) {
          const std::size_t idx = i * state.dim + c;
          next.positions[idx] = state.positions[idx] + bvec[c] * dt + dz[c];
          detail::check_finite(next.positions[idx]);
        }
      }
    });
  }
  next.time = state.time + dt;
  next.step_index = state.step_index + 1;
  return next;
}

inline ParticleState simulate(const EmpiricalMeasure& init, const DriftModel& drift,
                              const SimConfig& cfg, const StableLaw& law,
                              const RandomStream& base,
                              std::vector<ParticleState>* trajectory = nullptr,
                              const StepEvalConfig& eval_cfg = {}) {
  ParticleState state;
  state.dim = init.dim;
  state.positions = init.data;
  state.time = 0.0;
  state.step_index = 0;
  const double dt = cfg.horizon / cfg.steps;
  if (trajectory) {
    trajectory->clear();
    trajectory->push_back(state);
  }
  for (int k = 0; k < cfg.steps; ++k) {
    state = step(state, drift, dt, law, base, cfg.jump_cap, eval_cfg);
    if (trajectory) trajectory->push_back(state);
  }
  return state;
}

}  // namespace smv
