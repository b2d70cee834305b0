#pragma once

// Dense 3D 8-bit volumes and the separable Gaussian filter used on them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fibra/error.hpp"
#include "fibra/parallel.hpp"

namespace fibra {

struct Dims3 {
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + nx * (y + ny * z); }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

/// Grayscale voxels in x-fastest, z-slowest order.
struct Volume3D {
  Dims3 dims;
  std::vector<std::uint8_t> voxels;
  std::array<double, 3> spacing{1.0, 1.0, 1.0};

  Volume3D() = default;
  explicit Volume3D(Dims3 d, std::uint8_t fill = 0) : dims(d), voxels(d.count(), fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t z) { return voxels[dims.index(x, y, z)]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t z) const { return voxels[dims.index(x, y, z)]; }

  void validate() const {
    if (voxels.size() != dims.count()) fail(ErrorKind::InvalidParameter, "voxel array length != nx*ny*nz");
  }
};

/// Float-valued scalar field on the same grid layout as Volume3D.
struct ScalarField {
  Dims3 dims;
  std::vector<float> values;

  float at(std::size_t x, std::size_t y, std::size_t z) const { return values[dims.index(x, y, z)]; }
};

/// Half-sample symmetric reflection: ... b a | a b c ... | c b a ...
inline std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

/// Normalized 1D Gaussian kernel truncated at 3 sigma.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace detail {

inline void convolve_axis(const std::vector<float>& in, std::vector<float>& out, const Dims3& d, int axis,
                          const std::vector<double>& kernel) {
  const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const std::size_t n[3] = {d.nx, d.ny, d.nz};
  const std::size_t stride[3] = {1, d.nx, d.nx * d.ny};
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(n[axis]);
  parallel_for(0, d.nz, [&](std::size_t z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t pos[3] = {x, y, z};
        const std::size_t base = d.index(x, y, z) - pos[axis] * stride[axis];
        const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(pos[axis]);
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * in[base + reflect_index(p + k, len) * stride[axis]];
        }
        out[d.index(x, y, z)] = static_cast<float>(acc);
      }
    }
  });
}

}  // namespace detail

/// Separable Gaussian smoothing, kernel truncated at 3 sigma, reflective boundaries.
/// sigma <= 0 returns the input converted to float.
inline ScalarField gaussian_smooth(const ScalarField& in, double sigma) {
  ScalarField out{in.dims, in.values};
  if (sigma <= 0.0) return out;
  const auto kernel = gaussian_kernel(sigma);
  std::vector<float> tmp(in.values.size());
  detail::convolve_axis(out.values, tmp, in.dims, 0, kernel);
  detail::convolve_axis(tmp, out.values, in.dims, 1, kernel);
  detail::convolve_axis(out.values, tmp, in.dims, 2, kernel);
  out.values.swap(tmp);
  return out;
}

inline ScalarField to_field(const Volume3D& vol) {
  ScalarField f{vol.dims, std::vector<float>(vol.voxels.begin(), vol.voxels.end())};
  return f;
}

inline ScalarField gaussian_smooth(const Volume3D& vol, double sigma) { return gaussian_smooth(to_field(vol), sigma); }

/// Otsu threshold over a 256-bin histogram of values in [0, 255].
/// Returns the gray level t maximizing between-class variance for classes {<= t} and {> t}.
inline double otsu_threshold(const std::vector<float>& values) {
  std::array<double, 256> hist{};
  for (float v : values) {
    const int bin = std::clamp(static_cast<int>(std::lround(v)), 0, 255);
    hist[bin] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  if (total == 0.0) return 0.0;
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  if (best < 0.0) {
    // Single occupied bin: everything sits at or below the threshold.
    for (int t = 255; t >= 0; --t)
      if (hist[t] > 0) return t + 0.5;
  }
  return best_t + 0.5;
}

}  // namespace fibra
