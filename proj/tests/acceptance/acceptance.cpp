// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances and thresholds are pinned in code next to each check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "smv/chaos.hpp"
#include "smv/cli.hpp"
#include "smv/functionals.hpp"
#include "smv/generator.hpp"
#include "smv/mckean.hpp"
#include "smv/parametrix.hpp"
#include "smv/semigroup.hpp"
#include "smv/wasserstein.hpp"

using namespace smv;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, double seconds,
            const std::string& detail) {
  std::printf("[%s] C%02d (%6.1fs) %-36s %s\n", pass ? "PASS" : "FAIL", id, seconds,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void run(int id, const std::string& name,
         const std::function<std::pair<bool, std::string>()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    auto [p, d] = body();
    pass = p;
    detail = d;
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(id, name, pass, secs, detail);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------

std::pair<bool, std::string> c1_sampler_cf() {
  const std::size_t m = 1000000;
  double worst = 0.0;
  for (double alpha : {1.2, 1.5, 1.8}) {
    for (int d : {1, 2}) {
      const StableLaw law(alpha, d);
      for (double xi : {0.5, 1.0, 2.0}) {
        std::vector<double> chunk_sums((m + 8191) / 8192, 0.0);
        parallel_for(0, m, [&](std::size_t lo, std::size_t hi) {
          RandomStream base(2026, {30, static_cast<std::uint32_t>(10 * alpha + d), 0, 0});
          for (std::size_t i = lo; i < hi; ++i) {
            RandomStream si = base.substream(static_cast<std::uint32_t>(i), 0);
            double dot = 0.0;
            if (d == 1) {
              dot = xi * sample_increment_1d(law, 1.0, si);
            } else {
              const auto z = sample_increment(law, 1.0, si);
              dot = xi * z[0];  // isotropy: any unit direction
            }
            chunk_sums[i / 8192] += std::cos(dot);
          }
        }, 8192);
        const double mean = pairwise_sum(chunk_sums) / static_cast<double>(m);
        worst = std::max(worst, std::abs(mean - std::exp(-std::pow(xi, alpha))));
      }
    }
  }
  return {worst < 0.005, fmt("max CF deviation %.2e (limit 5e-3)", worst)};
}

std::pair<bool, std::string> c2_density_oracle() {
  double worst_q0 = 0.0;
  for (double alpha : {1.2, 1.5, 1.8}) {
    const StableDensity& q = StableDensity::get(alpha, 1);
    const double target = std::tgamma(1.0 + 1.0 / alpha) / std::numbers::pi;
    worst_q0 = std::max(worst_q0, std::abs(q.density_radial(1.0, 0.0) - target));
  }
  // Chapman-Kolmogorov residual for the proxy semigroup, alpha = 1.5
  const StableLaw law(1.5, 1);
  double worst_ck = 0.0;
  const double s = 0.0, r = 0.4, t = 1.0, h = 0.02;
  for (double x : {0.0, 0.5}) {
    for (double y = -3.0; y <= 3.0; y += 0.5) {
      double conv = 0.0;
      for (double z = -120.0; z <= 120.0; z += h)
        conv += proxy_density(law, s, r, x, z) * proxy_density(law, r, t, z, y) * h;
      worst_ck = std::max(worst_ck, std::abs(conv - proxy_density(law, s, t, x, y)));
    }
  }
  const bool pass = worst_q0 < 1e-6 && worst_ck < 1e-3;
  return {pass, fmt("q(1,0) err %.1e (1e-6); CK L-inf %.1e (1e-3)", worst_q0, worst_ck)};
}

std::pair<bool, std::string> c3_generator_symbol() {
  ZeroDrift zero;
  const Measure mu{EmpiricalMeasure({0.0})};
  double worst = 0.0;
  for (double alpha : {1.2, 1.5, 1.8}) {
    const StableLaw law(alpha, 1);
    for (double xi : {0.5, 1.0, 2.0}) {
      for (double x : {0.0, 0.4}) {
        const double got = apply_generator(
            zero, 0.0, mu, [xi](double u) { return std::cos(xi * u); },
            [xi](double u) { return -xi * std::sin(xi * u); }, x, law);
        worst = std::max(worst, std::abs(got + std::pow(xi, alpha) * std::cos(xi * x)));
      }
    }
  }
  return {worst < 1e-3, fmt("max |L^a cos - symbol| = %.2e (limit 1e-3)", worst)};
}

std::pair<bool, std::string> c4_rho_calculus() {
  const double alpha = 1.5;
  const RhoParams p(1.0, alpha, 1);
  double worst = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double t = 0.02 + 0.05 * it;
    for (int ix = 0; ix < 100; ++ix)
      worst = std::max(worst, space_time_ratio(p, 0.5, t, -10.0 + 0.2 * ix));
  }
  ConvQuadConfig coarse, fine;
  fine.points = 2 * (coarse.points - 1) + 1;
  double max_drift = 0.0;
  for (double kv : {0.0, 1.0})
    for (double ss : {0.25, 0.5, 0.75})
      for (double y : {0.0, 1.0, 4.0}) {
        const double a = convolution_inequality_ratio(0.0, kv, alpha, ss, 1.0, y, coarse);
        const double b = convolution_inequality_ratio(0.0, kv, alpha, ss, 1.0, y, fine);
        max_drift = std::max(max_drift, std::abs(b - a) / b);
      }
  const bool pass = worst <= 1.0 + 1e-12 && max_drift < 0.02;
  return {pass,
          fmt("space-time sup %.12f (<=1); conv-ratio drift %.2e (<2e-2)", worst, max_drift)};
}

std::pair<bool, std::string> c5_parametrix_vs_mc() {
  const StableLaw law(1.5, 1);
  HolderDrift drift(0.5, 0.7);
  ParametrixConfig pc;
  pc.truncation_K = 3;
  auto out = density_truncated(drift, null_flow(), law, 0.0, 1.0, 0.0, pc);

  // 1e6 Euler paths, 400 steps, from x = 0
  const std::size_t m = 1000000;
  const int steps = 400;
  const double dt = 1.0 / steps;
  std::vector<double> terminal(m);
  parallel_for(0, m, [&](std::size_t lo, std::size_t hi) {
    Measure none{EmpiricalMeasure({0.0})};
    RandomStream base(31, {32, 0, 0, 0});
    for (std::size_t i = lo; i < hi; ++i) {
      double x = 0.0;
      for (int k = 0; k < steps; ++k) {
        RandomStream s = base.substream(static_cast<std::uint32_t>(i),
                                        static_cast<std::uint32_t>(k));
        x += drift.eval1(k * dt, x, none) * dt + sample_increment_1d(law, dt, s);
      }
      terminal[i] = x;
    }
  });
  GridDensity kde = bin_linear(terminal, out.density.x0, out.density.dx, out.density.size());
  gaussian_smooth(kde, 0.05);
  double l1 = 0.0;
  for (std::size_t i = 0; i < kde.size(); ++i)
    l1 += std::abs(kde.values[i] - out.density.values[i]) * kde.dx;

  // The truncation estimate attached at K = 2 (Beta-product tail with the
  // calibrated constant and its safety margin) must dominate the measured
  // ||p_3 - p_2||_L1 = ||p^ (x) H^3||_L1 from the K = 3 run.
  ParametrixConfig pc2 = pc;
  pc2.truncation_K = 2;
  auto out2 = density_truncated(drift, null_flow(), law, 0.0, 1.0, 0.0, pc2);
  const double bound3 = out2.truncation_estimate;
  const bool tail_ok = bound3 >= out.term_l1[2];
  const bool pass = l1 < 0.05 && tail_ok;
  return {pass, fmt("L1(p_3, KDE) = %.4f (<0.05); beta-tail bound %.2e >= term3 %.2e",
                    l1, bound3, out.term_l1[2])};
}

std::pair<bool, std::string> c6_picard_convergence() {
  const StableLaw law(1.5, 1);
  auto drift = ConvolutionDrift::tanh_kernel(0.5);
  McConfig mc;
  mc.horizon = 1.0;
  mc.steps = 400;
  mc.samples = 200000;
  mc.seed = 33;
  mc.experiment = 34;
  std::vector<double> init(mc.samples, 0.0);
  auto res = picard_solve(drift, init, law, mc, 1e-6, 6);
  bool decreasing = res.history.size() >= 4;
  for (std::size_t i = 1; i < res.history.size(); ++i)
    decreasing = decreasing && res.history[i].sup_dtv < res.history[i - 1].sup_dtv;
  const auto& last = res.history.back();
  const bool plateau = last.sup_dtv < 0.02 + last.noise_floor;
  std::ostringstream hist;
  for (const auto& h : res.history) hist << " " << h.sup_dtv;
  return {decreasing && plateau,
          "sup dtv per iterate:" + hist.str() + fmt(" (floor %.4f)", last.noise_floor)};
}

std::pair<bool, std::string> c7_flow_constancy() {
  const StableLaw law(1.5, 1);
  auto drift = ConvolutionDrift::tanh_kernel(0.5);
  SemigroupConfig cfg;
  cfg.horizon = 1.0;
  cfg.steps = 100;
  cfg.samples = 100000;
  cfg.replications = 6;
  cfg.seed = 35;
  cfg.experiment = 36;
  cfg.picard_tol = 5e-3;
  const auto init = stratified_atoms([](double p) { return 2.0 * p - 1.0; }, cfg.samples);
  std::string detail;
  bool pass = true;
  for (const auto& phi : builtin_functionals()) {
    auto rep = flow_constancy_residual(*phi, init, {0.0, 0.25, 0.5, 0.75}, drift, law, cfg);
    pass = pass && rep.within_3se;
    detail += phi->name() + fmt(": %.1e vs 3x%.1e; ", rep.max_residual, rep.max_residual_se);
  }
  return {pass, detail};
}

std::pair<bool, std::string> c8_empirical_projection() {
  double worst = 0.0;
  RandomStream s(3, {37, 0, 0, 0});
  for (const auto& phi : builtin_functionals()) {
    for (std::size_t n : {1u, 3u, 10u, 100u}) {
      std::vector<double> atoms(n);
      for (auto& a : atoms) a = 3.0 * (s.uniform01() - 0.5);
      for (std::size_t i : {std::size_t{0}, n / 2, n - 1}) {
        auto chk = empirical_projection_gradient_check(*phi, atoms, i, 1e-4);
        worst = std::max(worst, chk.discrepancy);
      }
    }
  }
  return {worst < 1e-6, fmt("max discrepancy %.2e (limit 1e-6)", worst)};
}

std::pair<bool, std::string> run_strong_fit(const ChaosConfig& cfg, const DriftModel& drift,
                                            const TestFunctional& phi) {
  auto curve = chaos_error_curve(cfg, drift, phi);
  std::vector<double> n, err, se;
  for (const auto& r : curve.rows) {
    n.push_back(static_cast<double>(r.n));
    err.push_back(r.strong_err);
    se.push_back(r.strong_se);
  }
  auto fit = fit_rate(n, err, se);
  const bool pass = fit.slope <= -0.1 && fit.ci_hi < 0.0;
  return {pass, fmt("slope %.3f CI [%.3f, %.3f]", fit.slope, fit.ci_lo, fit.ci_hi)};
}

std::pair<bool, std::string> c9_strong_chaos_rate() {
  auto phi = make_functional("linear_tanh");
  ChaosConfig cfg;
  cfg.law = StableLaw(1.5, 1);
  cfg.init = InitSpec{"uniform", -1.0, 1.0};
  cfg.n_grid = {16, 32, 64, 128, 256, 512, 1024};
  cfg.replications = 2000;
  cfg.sim = SimConfig(1.0, 80);
  cfg.beta = 1.25;
  cfg.seed = 9;
  cfg.interaction.pairwise_threshold = 192;
  cfg.interaction.grid_points = 192;

  ZeroDrift zero;
  cfg.reference = ReferenceMode::Quadrature;
  cfg.experiment = 40;
  auto [p1, s1] = run_strong_fit(cfg, zero, *phi);

  auto conv = ConvolutionDrift::tanh_kernel(0.5);
  cfg.reference = ReferenceMode::NRef;
  cfg.nref_factor = 16;
  cfg.nref_replications = 400;
  cfg.experiment = 41;
  auto [p2, s2] = run_strong_fit(cfg, conv, *phi);
  return {p1 && p2, "zero: " + s1 + " | conv: " + s2 + " (need <= -0.1, CI < 0)"};
}

std::pair<bool, std::string> c10_weak_chaos_rate() {
  // mu_0 uniform (all moments, so in P_{2 delta}); the quadratic functional
  // carries a genuine O(1/N) weak bias, which makes the slope measurable.
  auto phi = make_functional("quadratic_cos");
  auto conv = ConvolutionDrift::tanh_kernel(0.5);
  ChaosConfig cfg;
  cfg.law = StableLaw(1.5, 1);
  cfg.init = InitSpec{"uniform", -1.0, 1.0};
  cfg.n_grid = {16, 32, 64, 128};
  cfg.replications = 20000;
  cfg.sim = SimConfig(1.0, 80);
  cfg.beta = 1.25;
  cfg.seed = 10;
  cfg.experiment = 42;
  cfg.interaction.pairwise_threshold = 192;
  cfg.interaction.grid_points = 192;
  cfg.reference = ReferenceMode::NRef;
  cfg.nref_factor = 128;  // N_ref = 16384
  cfg.nref_replications = 1200;
  auto curve = chaos_error_curve(cfg, conv, *phi);
  std::vector<double> n, err, se;
  for (const auto& r : curve.rows) {
    n.push_back(static_cast<double>(r.n));
    err.push_back(r.weak_err);
    se.push_back(r.weak_se);
  }
  try {
    auto fit = fit_rate(n, err, se);
    const bool pass = fit.slope <= -0.5;
    return {pass, fmt("weak slope %.3f CI [%.3f, %.3f] (need <= -0.5)", fit.slope,
                      fit.ci_lo, fit.ci_hi)};
  } catch (const std::exception&) {
    // Explicit degrade: the one-sided check weak <= strong at every N.
    bool one_sided = true;
    std::string detail = "DEGRADED (CIs too wide); one-sided weak<=strong:";
    for (const auto& r : curve.rows) {
      const bool ok = r.weak_err <= r.strong_err + 3.0 * r.strong_se;
      one_sided = one_sided && ok;
      detail += " N=" + std::to_string(r.n) + (ok ? ":ok" : ":VIOLATED");
    }
    return {one_sided, detail};
  }
}

std::pair<bool, std::string> c11_initial_data_rates() {
  InitSpec unif{"uniform", 0.0, 1.0};
  auto pts_u =
      initial_wasserstein_curve(unif, {64, 128, 256, 512, 1024, 2048, 4096}, 500, 12);
  std::vector<double> n, e, s;
  for (const auto& p : pts_u) {
    n.push_back(static_cast<double>(p.n));
    e.push_back(p.mean_w1);
    s.push_back(p.se);
  }
  const auto fit_u = fit_rate(n, e, s);

  InitSpec pareto{"pareto", 1.5, 0.0};
  auto pts_p =
      initial_wasserstein_curve(pareto, {64, 128, 256, 512, 1024, 2048, 4096}, 500, 12);
  n.clear();
  e.clear();
  s.clear();
  for (const auto& p : pts_p) {
    n.push_back(static_cast<double>(p.n));
    e.push_back(p.mean_w1);
    s.push_back(p.se);
  }
  const auto fit_p = fit_rate(n, e, s);

  const bool pass = std::abs(fit_u.slope + 0.5) < 0.1 &&
                    std::abs(fit_p.slope + (1.0 - 1.0 / 1.5)) < 0.1;
  return {pass, fmt("uniform slope %.3f (-0.5 +- 0.1); pareto %.3f (-1/3 +- 0.1)",
                    fit_u.slope, fit_p.slope)};
}

std::pair<bool, std::string> c12_w1_oracle() {
  RandomStream s(5, {43, 0, 0, 0});
  double worst = 0.0;
  for (int pair = 0; pair < 200; ++pair) {
    const std::size_t n = 2 + (pair % 63);
    std::vector<double> xa(n), xb(n);
    for (auto& v : xa) v = 3.0 * s.normal();
    for (auto& v : xb) v = 1.0 + 2.0 * s.normal();
    EmpiricalMeasure a(xa), b(xb);
    worst = std::max(worst, std::abs(w1_exact_1d(a, b) - w1_small_exact(a, b)));
  }
  double metric_worst = 0.0;
  for (int trip = 0; trip < 40; ++trip) {
    std::vector<double> xs(24), ys(24), zs(24);
    for (auto& v : xs) v = 2.0 * s.normal();
    for (auto& v : ys) v = 1.0 + s.normal();
    for (auto& v : zs) v = -0.5 + 2.0 * s.normal();
    EmpiricalMeasure x(xs), y(ys), z(zs);
    metric_worst = std::max(metric_worst, std::abs(w1_exact_1d(x, y) - w1_exact_1d(y, x)));
    metric_worst = std::max(metric_worst, w1_exact_1d(x, x));
    metric_worst = std::max(metric_worst,
                            w1_exact_1d(x, z) - (w1_exact_1d(x, y) + w1_exact_1d(y, z)));
  }
  const bool pass = worst < 1e-9 && metric_worst < 1e-12;
  return {pass, fmt("sorted-vs-LP max %.1e (<1e-9); metric axioms %.1e (<1e-12)", worst,
                    metric_worst)};
}

std::pair<bool, std::string> c13_determinism() {
  const fs::path dir = fs::temp_directory_path() / "smv_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    out << R"({
      "schema": 1,
      "law": {"alpha": 1.5, "dim": 1},
      "drift": {"id": "conv_tanh", "param": 0.5},
      "init": {"kind": "uniform", "a": -1.0, "b": 1.0},
      "phi": {"id": "linear_tanh"},
      "sim": {"horizon": 0.5, "steps": 10},
      "n_grid": [8, 16, 32, 64],
      "replications": 64,
      "beta": 1.25,
      "seed": 4,
      "chaos": {"reference": "nref", "nref_factor": 4, "nref_replications": 40},
      "picard": {"samples": 20000, "tol": 0.05, "max_iter": 4}
    })";
  }
  auto run_all = [&](const std::string& tag, const std::string& threads) {
    std::string blob;
    for (const std::string sub : {"chaos-rate", "picard"}) {
      const fs::path out_dir = dir / (tag + "_" + sub);
      const int rc = run_cli({sub, "--config", cfg_path.string(), "--seed", "99",
                              "--threads", threads, "--out", out_dir.string()});
      if (rc != 0) return std::string("rc=") + std::to_string(rc);
      for (const auto& entry : fs::directory_iterator(out_dir)) {
        if (entry.path().extension() == ".csv") {
          std::ifstream in(entry.path());
          std::stringstream ss;
          ss << in.rdbuf();
          blob += entry.path().filename().string() + "\n" + ss.str();
        }
      }
    }
    return blob;
  };
  const std::string a = run_all("a", "1");
  const std::string b = run_all("b", "8");
  const std::string c = run_all("c", "8");
  const bool pass = !a.empty() && a.find("rc=") != 0 && a == b && b == c;
  return {pass, pass ? "chaos-rate and picard CSVs bit-identical at 1 and 8 workers"
                     : "outputs differ across worker counts"};
}

}  // namespace

int main() {
  std::printf("acceptance suite (alpha-stable McKean-Vlasov lab)\n");
  const auto t0 = std::chrono::steady_clock::now();

  run(1, "stable sampler CF", c1_sampler_cf);
  run(2, "density oracle + Chapman-Kolmogorov", c2_density_oracle);
  run(3, "generator Fourier symbol", c3_generator_symbol);
  run(4, "rho^k calculus sweeps", c4_rho_calculus);
  run(5, "parametrix vs Monte Carlo", c5_parametrix_vs_mc);
  run(6, "Picard convergence", c6_picard_convergence);
  run(7, "flow constancy", c7_flow_constancy);
  run(8, "empirical projection identity", c8_empirical_projection);
  run(9, "strong chaos rate", c9_strong_chaos_rate);
  run(10, "weak chaos rate", c10_weak_chaos_rate);
  run(11, "initial-data rates", c11_initial_data_rates);
  run(12, "W1 oracle equivalence", c12_w1_oracle);
  run(13, "CLI determinism", c13_determinism);

  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d/13 criteria passed in %.1f s\n", 13 - g_failures, total);
  return g_failures == 0 ? 0 : 1;
}
