#pragma once

// Random number helpers: a seeded engine and a counter-based generator for
// thread-count-independent sampling, plus von Mises-Fisher axis sampling.

#include <cmath>
#include <cstdint>
#include <random>

#include "fibra/geometry.hpp"

namespace fibra {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Stateless uniform [0,1) draw keyed by (seed, stream, step, index).
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t step,
                              std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ (step * 0xD1B54A32D192ED03ull));
  h = splitmix64(h ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Orientation distribution for fibre axes: von Mises-Fisher around mean_axis
/// with concentration kappa (kappa = 0 is uniform).
struct DirectionDistribution {
  Vec3 mean_axis{0.0, 0.0, 1.0};
  double kappa = 0.0;
};

inline UnitVector sample_uniform_sphere(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Vec3 v(g(rng), g(rng), g(rng));
    if (v.norm() > 1e-6) return UnitVector::normalize(v);
  }
}

/// Draws one unit vector from vMF(mean_axis, kappa) on S^2 (Wood's method, p = 3).
inline UnitVector sample_vmf(const DirectionDistribution& dist, Rng& rng) {
  if (dist.kappa <= 0.0) return sample_uniform_sphere(rng);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double k = dist.kappa;
  const double u = uni(rng);
  // Cosine to the mean: inverse CDF of the exact p = 3 density, stable for large kappa.
  double w = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * k)) / k;
  w = std::clamp(w, -1.0, 1.0);
  const double phi = 2.0 * kPi * uni(rng);
  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));

  const Vec3 mu = dist.mean_axis.normalized();
  // Orthonormal frame around mu.
  Vec3 helper = std::abs(mu.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
  Vec3 e1 = (helper - helper.dot(mu) * mu).normalized();
  Vec3 e2 = mu.cross(e1);
  return UnitVector::normalize(w * mu + s * (std::cos(phi) * e1 + std::sin(phi) * e2));
}

}  // namespace fibra
