#pragma once

// Window grids laid over the cube grid of a direction field.

#include <compare>
#include <cstddef>
#include <string>

#include "fibra/error.hpp"
#include "fibra/geometry.hpp"
#include "fibra/volume.hpp"

namespace fibra {

/// Integer grid coordinate; ordered z-major so sorted containers follow the x-fastest layout.
struct GridIndex {
  int x = 0, y = 0, z = 0;

  friend bool operator==(const GridIndex&, const GridIndex&) = default;
  friend std::strong_ordering operator<=>(const GridIndex& a, const GridIndex& b) {
    if (auto c = a.z <=> b.z; c != 0) return c;
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

/// Scanning windows s_l: cubes of `window` direction-field cells, placed every `stride` cells.
struct WindowSpec {
  int window = 8;
  int stride = 8;
  int min_samples = 16;

  void validate() const {
    require(window >= 2, "window edge must be >= 2 cubes");
    require(stride >= 1, "window stride must be >= 1");
    require(min_samples >= 2, "minimum window sample size must be >= 2");
  }
};

inline std::size_t window_count_1d(std::size_t cells, const WindowSpec& spec) {
  const auto w = static_cast<std::size_t>(spec.window);
  if (cells < w) return 0;
  return (cells - w) / static_cast<std::size_t>(spec.stride) + 1;
}

inline Dims3 window_grid_dims(const Dims3& cube_dims, const WindowSpec& spec) {
  return {window_count_1d(cube_dims.nx, spec), window_count_1d(cube_dims.ny, spec),
          window_count_1d(cube_dims.nz, spec)};
}

inline Dims3 cube_grid_dims(const Dims3& voxel_dims, int cube_edge) {
  const auto c = static_cast<std::size_t>(cube_edge);
  return {voxel_dims.nx / c, voxel_dims.ny / c, voxel_dims.nz / c};
}

/// Centre of a window in voxel coordinates (voxel i spans [i, i+1)).
inline Vec3 window_center_voxels(const GridIndex& w, const WindowSpec& spec, int cube_edge) {
  const double half = 0.5 * spec.window;
  return Vec3((w.x * spec.stride + half) * cube_edge, (w.y * spec.stride + half) * cube_edge,
              (w.z * spec.stride + half) * cube_edge);
}

}  // namespace fibra
