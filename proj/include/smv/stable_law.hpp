#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "smv/rng.hpp"

namespace smv {

enum class NoiseConvention { UnitExponent };  // CF  E e^{i<xi,Z_t>} = e^{-t |xi|^alpha}

// Rotationally invariant alpha-stable driving noise, alpha in (1,2) strictly.
struct StableLaw {
  double alpha;
  int dim;
  NoiseConvention convention = NoiseConvention::UnitExponent;

  StableLaw(double a, int d, NoiseConvention c = NoiseConvention::UnitExponent)
      : alpha(a), dim(d), convention(c) {
    if (!(alpha > 1.0) || !(alpha < 2.0))
      throw std::invalid_argument("StableLaw: alpha must lie in (1,2)");
    if (dim < 1) throw std::invalid_argument("StableLaw: dim must be >= 1");
  }
};

// Positive (alpha/2)-stable subordinator value with Laplace transform
// E e^{-lambda A} = e^{-lambda^{alpha/2}}  (Kanter's representation).
inline double sample_positive_stable(double sigma, RandomStream& stream) {
  const double u = std::numbers::pi * stream.uniform01();
  const double w = stream.exponential();
  const double s1 = std::sin(sigma * u);
  const double s2 = std::sin((1.0 - sigma) * u);
  const double s = std::sin(u);
  const double zolotarev =
      std::pow(s1, sigma / (1.0 - sigma)) * s2 / std::pow(s, 1.0 / (1.0 - sigma));
  return std::pow(zolotarev / w, (1.0 - sigma) / sigma);
}

// Increment Z_dt via the subordinated-Gaussian construction
// dt^{1/alpha} * sqrt(2 A) * G with A positive (alpha/2)-stable and G ~ N(0, I_d).
// Isotropic for every d, unlike per-coordinate samplers.
inline std::vector<double> sample_increment(const StableLaw& law, double dt,
                                            RandomStream& stream) {
  if (!(dt > 0.0)) throw std::invalid_argument("sample_increment: dt must be > 0");
  const double a = sample_positive_stable(0.5 * law.alpha, stream);
  const double scale = std::pow(dt, 1.0 / law.alpha) * std::sqrt(2.0 * a);
  std::vector<double> z(law.dim);
  for (int i = 0; i < law.dim; ++i) z[i] = scale * stream.normal();
  return z;
}

// 1-d fast path used by the particle loops.
inline double sample_increment_1d(const StableLaw& law, double dt,
                                  RandomStream& stream) {
  const double a = sample_positive_stable(0.5 * law.alpha, stream);
  return std::pow(dt, 1.0 / law.alpha) * std::sqrt(2.0 * a) * stream.normal();
}

}  // namespace smv
