#pragma once

// Nearest-neighbour entropy of a sample of directions on S^2.
//
//   H = 2 ln(rho_bar) + C1 + gamma + ln(N - 1)
//
// where rho_i is the geodesic distance from X_i to its nearest neighbour and
// rho_bar is the geometric mean of the rho_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fibra/error.hpp"
#include "fibra/geometry.hpp"

namespace fibra {

struct EntropyConstants {
  /// Additive constant C1. 1.1447 ~= ln(pi), the area term of the planar estimator.
  /// A literal reading of "ln c1" with c1 = 1.1447 gives literal_log_reading() instead.
  double additive = 1.1447;
  double euler_gamma = 0.5772;
  /// Lower clamp for rho_i in radians; keeps duplicates finite.
  double rho_floor = 1e-6;

  static double literal_log_reading() { return std::log(1.1447); }
};

struct EntropyEstimate {
  double value = 0.0;
  double log_rho_mean = 0.0;     // ln(rho_bar)
  std::size_t clamped = 0;       // rho_i that hit the floor
  std::size_t n = 0;

  /// More than half of the nearest-neighbour distances were clamped.
  bool degenerate() const { return 2 * clamped > n; }
};

/// Nearest-neighbour entropy estimate in nats. Brute-force O(N^2) neighbour search.
template <typename Direction>
EntropyEstimate nn_entropy(std::span<const Direction> dirs, Metric mode = Metric::axial,
                           const EntropyConstants& k = {}) {
  const std::size_t n = dirs.size();
  if (n < 2) fail(ErrorKind::TooFewPoints, "nearest-neighbour entropy needs N >= 2 directions");
  EntropyEstimate est;
  est.n = n;
  double log_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // arccos is decreasing, so the nearest neighbour maximizes the (absolute) dot product.
    double best = -2.0;
    const Vec3& vi = dirs[i].vec();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double c = vi.dot(dirs[j].vec());
      if (mode == Metric::axial) c = std::abs(c);
      best = std::max(best, c);
    }
    const double lo = mode == Metric::axial ? 0.0 : -1.0;
    double rho = std::acos(std::clamp(best, lo, 1.0));
    if (rho < k.rho_floor) {
      rho = k.rho_floor;
      ++est.clamped;
    }
    log_sum += std::log(rho);
  }
  est.log_rho_mean = log_sum / static_cast<double>(n);
  est.value = 2.0 * est.log_rho_mean + k.additive + k.euler_gamma + std::log(static_cast<double>(n - 1));
  return est;
}

template <typename Direction>
EntropyEstimate nn_entropy(const std::vector<Direction>& dirs, Metric mode = Metric::axial,
                           const EntropyConstants& k = {}) {
  return nn_entropy(std::span<const Direction>(dirs), mode, k);
}

}  // namespace fibra
