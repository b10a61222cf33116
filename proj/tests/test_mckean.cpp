#include <doctest.h>

#include <cmath>
#include <vector>

#include "smv/mckean.hpp"

using namespace smv;

namespace {
const StableLaw kLaw(1.5, 1);

McConfig small_mc(std::uint32_t experiment, std::size_t samples = 30000, int steps = 50) {
  McConfig mc;
  mc.horizon = 1.0;
  mc.steps = steps;
  mc.samples = samples;
  mc.seed = 11;
  mc.experiment = experiment;
  return mc;
}

std::vector<double> uniform_atoms(std::size_t n, double lo = -1.0, double hi = 1.0) {
  return stratified_atoms([&](double p) { return lo + (hi - lo) * p; }, n);
}
}  // namespace

TEST_CASE("picard_solve: zero drift converges in one sweep with a zero-distance history") {
  ZeroDrift zero;
  const auto mc = small_mc(80);
  auto init = uniform_atoms(mc.samples);
  auto res = picard_solve(zero, init, kLaw, mc, 0.01, 6);
  CHECK(res.converged);
  REQUIRE(res.history.size() == 1);
  // common random numbers: the second sweep reproduces the first bitwise
  CHECK(res.history[0].sup_dtv == 0.0);
  CHECK(res.history[0].noise_floor > 0.0);
  CHECK(res.flow.provenance == FlowProvenance::FixedPoint);
}

TEST_CASE("measure-independent drift: the first iterate from any prev is the fixed point") {
  ConstantDrift cd(0.4);
  const auto mc = small_mc(81, 10000, 25);
  auto init = uniform_atoms(mc.samples);

  MeasureFlow weird_prev;
  weird_prev.times = {0.0, 1.0};
  GridDensity g;
  g.x0 = mc.grid.lo;
  g.dx = (mc.grid.hi - mc.grid.lo) / (mc.grid.points - 1);
  g.values.assign(mc.grid.points, 0.0);
  g.values[10] = 1.0 / g.dx;  // some unrelated point mass
  weird_prev.laws = {g, g};

  auto a = picard_iterate(&weird_prev, cd, init, kLaw, mc);
  auto b = picard_iterate(nullptr, cd, init, kLaw, mc);
  for (std::size_t j = 0; j < a.laws.size(); ++j)
    for (std::size_t i = 0; i < a.laws[j].size(); ++i)
      CHECK(a.laws[j].values[i] == b.laws[j].values[i]);
}

TEST_CASE("picard_solve: interaction drift contracts monotonically") {
  auto drift = ConvolutionDrift::tanh_kernel(0.5);
  const auto mc = small_mc(82, 40000, 50);
  auto init = std::vector<double>(mc.samples, 0.0);  // point mass at 0
  auto res = picard_solve(drift, init, kLaw, mc, 1e-4, 6);
  REQUIRE(res.history.size() >= 3);
  for (std::size_t i = 1; i < res.history.size(); ++i)
    CHECK(res.history[i].sup_dtv < res.history[i - 1].sup_dtv);
  CHECK(res.history.back().sup_dtv < 0.02 + res.history.back().noise_floor);
}

TEST_CASE("noise floor scales like M^{-1/2}") {
  ZeroDrift zero;
  auto run_floor = [&](std::size_t m) {
    auto mc = small_mc(83, m, 10);
    auto init = uniform_atoms(m);
    auto res = picard_solve(zero, init, kLaw, mc, 0.01, 4);
    return res.history[0].noise_floor;
  };
  const double f1 = run_floor(20000);
  const double f4 = run_floor(80000);
  CHECK(f4 / f1 > 0.3);
  CHECK(f4 / f1 < 0.75);  // ideal 0.5
}

TEST_CASE("decoupled density: zero drift reduces to the proxy") {
  ZeroDrift zero;
  auto mc = small_mc(84, 20000, 25);
  auto init = uniform_atoms(mc.samples);
  auto solved = picard_solve(zero, init, kLaw, mc, 0.01, 4);
  ParametrixConfig pc;
  pc.truncation_K = 2;
  pc.time_nodes_per_side = 6;
  pc.grid_extent = 12.0;
  pc.grid_step = 0.1;
  auto dens = decoupled_flow_density(solved.flow, zero, kLaw, 0.0, 0.3, 1.0, pc);
  for (std::size_t i = 0; i < dens.density.size(); ++i)
    CHECK(dens.density.values[i] == doctest::Approx(dens.proxy.values[i]).epsilon(1e-12));
  // provenance is enforced
  MeasureFlow raw = solved.flow;
  raw.provenance = FlowProvenance::PicardIterate;
  CHECK_THROWS(decoupled_flow_density(raw, zero, kLaw, 0.0, 0.3, 1.0, pc));
}

TEST_CASE("point-mass init: the flow marginal matches the decoupled density from the atom") {
  auto drift = ConvolutionDrift::tanh_kernel(0.5);
  auto mc = small_mc(85, 60000, 50);
  std::vector<double> init(mc.samples, 0.0);
  auto solved = picard_solve(drift, init, kLaw, mc, 5e-3, 6);
  ParametrixConfig pc;
  pc.truncation_K = 3;
  pc.time_nodes_per_side = 8;
  pc.grid_extent = 14.0;
  pc.grid_step = 0.05;
  auto dens = decoupled_flow_density(solved.flow, drift, kLaw, 0.0, 0.0, 1.0, pc);
  const GridDensity& marg = solved.flow.laws.back();
  double l1 = 0.0;
  for (std::size_t i = 0; i < marg.size(); ++i)
    l1 += std::abs(marg.values[i] - dens.density(marg.x_at(i))) * marg.dx;
  CHECK(l1 < 0.05);
}

TEST_CASE("mixture identity residual is small for an interaction drift") {
  auto drift = ConvolutionDrift::tanh_kernel(0.5);
  auto mc = small_mc(86, 50000, 50);
  auto init_particles = uniform_atoms(mc.samples);
  auto solved = picard_solve(drift, init_particles, kLaw, mc, 5e-3, 6);
  ParametrixConfig pc;
  pc.truncation_K = 2;
  pc.time_nodes_per_side = 6;
  pc.grid_extent = 12.0;
  pc.grid_step = 0.1;
  const auto atoms = uniform_atoms(8);  // quadrature over mu_0
  const double res = mixture_identity_residual(solved.flow, drift, kLaw, atoms, 0.0, 1.0, pc);
  CHECK(res < 0.05);
}
