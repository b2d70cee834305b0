#pragma once

// Local fibre directions from Hessian eigenanalysis of the smoothed gray image,
// aggregated to one axial direction per c^3-voxel cube.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fibra/error.hpp"
#include "fibra/geometry.hpp"
#include "fibra/grid.hpp"
#include "fibra/parallel.hpp"
#include "fibra/volume.hpp"

namespace fibra {

enum class VoxelState : std::uint8_t { background = 0, valid = 1, degenerate = 2 };

/// Per-voxel fibre axes. Only voxels in state `valid` carry a meaningful direction.
struct VoxelDirections {
  Dims3 dims;
  std::vector<float> axes;  // 3 floats per voxel
  std::vector<VoxelState> state;
  double threshold = 0.0;

  Vec3 axis(std::size_t i) const { return Vec3(axes[3 * i], axes[3 * i + 1], axes[3 * i + 2]); }
  bool is_fibre(std::size_t i) const { return state[i] != VoxelState::background; }
};

/// Hessian of `f` at (x, y, z) by central differences with reflective boundaries.
inline Mat3 hessian_at(const ScalarField& f, std::size_t x, std::size_t y, std::size_t z) {
  const auto& d = f.dims;
  const auto nx = static_cast<std::ptrdiff_t>(d.nx), ny = static_cast<std::ptrdiff_t>(d.ny),
             nz = static_cast<std::ptrdiff_t>(d.nz);
  const auto X = static_cast<std::ptrdiff_t>(x), Y = static_cast<std::ptrdiff_t>(y), Z = static_cast<std::ptrdiff_t>(z);
  auto v = [&](std::ptrdiff_t dx, std::ptrdiff_t dy, std::ptrdiff_t dz) -> double {
    return f.values[d.index(reflect_index(X + dx, nx), reflect_index(Y + dy, ny), reflect_index(Z + dz, nz))];
  };
  const double c = v(0, 0, 0);
  Mat3 h;
  h(0, 0) = v(1, 0, 0) - 2 * c + v(-1, 0, 0);
  h(1, 1) = v(0, 1, 0) - 2 * c + v(0, -1, 0);
  h(2, 2) = v(0, 0, 1) - 2 * c + v(0, 0, -1);
  h(0, 1) = h(1, 0) = 0.25 * (v(1, 1, 0) - v(1, -1, 0) - v(-1, 1, 0) + v(-1, -1, 0));
  h(0, 2) = h(2, 0) = 0.25 * (v(1, 0, 1) - v(1, 0, -1) - v(-1, 0, 1) + v(-1, 0, -1));
  h(1, 2) = h(2, 1) = 0.25 * (v(0, 1, 1) - v(0, 1, -1) - v(0, -1, 1) + v(0, -1, -1));
  return h;
}

/// Fibre axis from a Hessian: eigenvector of the smallest-magnitude eigenvalue.
/// Empty when the two smallest magnitudes differ by less than 1e-9.
inline std::optional<AxialDirection> hessian_axis(const Mat3& h) {
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  es.computeDirect(h);
  const Vec3 mag = es.eigenvalues().cwiseAbs();
  int order[3] = {0, 1, 2};
  std::sort(order, order + 3, [&](int a, int b) { return mag[a] < mag[b]; });
  if (mag[order[1]] - mag[order[0]] < 1e-9) return std::nullopt;
  const Vec3 v = es.eigenvectors().col(order[0]);
  if (!(v.norm() > 1e-6)) return std::nullopt;
  return axis_from(v);
}

/// Smooths with sigma, masks voxels whose smoothed value exceeds the threshold (Otsu when not
/// given) and estimates the fibre axis of every masked voxel.
inline VoxelDirections hessian_directions(const Volume3D& vol, double sigma,
                                          std::optional<double> fibre_threshold = std::nullopt) {
  vol.validate();
  require(vol.dims.count() > 0, "volume is empty");
  require(sigma >= 0.5, "Hessian smoothing sigma must be >= 0.5");
  const ScalarField smooth = gaussian_smooth(vol, sigma);
  VoxelDirections out;
  out.dims = vol.dims;
  out.threshold = fibre_threshold ? *fibre_threshold : otsu_threshold(smooth.values);
  out.axes.assign(3 * vol.dims.count(), 0.0f);
  out.state.assign(vol.dims.count(), VoxelState::background);
  const auto& d = vol.dims;
  parallel_for(0, d.nz, [&](std::size_t z) {
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        if (!(smooth.values[i] > out.threshold)) continue;
        const auto axis = hessian_axis(hessian_at(smooth, x, y, z));
        if (!axis) {
          out.state[i] = VoxelState::degenerate;
          continue;
        }
        out.state[i] = VoxelState::valid;
        out.axes[3 * i] = static_cast<float>(axis->x());
        out.axes[3 * i + 1] = static_cast<float>(axis->y());
        out.axes[3 * i + 2] = static_cast<float>(axis->z());
      }
  });
  return out;
}

struct CubeDirection {
  AxialDirection axis;
  std::uint32_t count = 0;  // fibre (above-threshold) voxels in the cube
  bool valid = false;
};

/// One axial direction per cube of `cube_edge`^3 voxels.
struct DirectionField {
  Dims3 grid;
  int cube_edge = 4;
  std::vector<CubeDirection> cells;

  const CubeDirection& at(std::size_t x, std::size_t y, std::size_t z) const { return cells[grid.index(x, y, z)]; }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.valid;
    return n;
  }
};

/// Principal eigenvector of the orientation tensor sum(v v^T), canonicalized.
/// Sign flips of the inputs leave the result unchanged.
inline AxialDirection principal_axis(const Mat3& tensor) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(tensor);
  return axis_from(es.eigenvectors().col(2));
}

inline DirectionField aggregate_to_cubes(const VoxelDirections& vd, int cube_edge, std::uint32_t min_voxels = 8) {
  require(cube_edge >= 2, "cube edge must be >= 2");
  DirectionField df;
  df.cube_edge = cube_edge;
  df.grid = cube_grid_dims(vd.dims, cube_edge);
  df.cells.resize(df.grid.count());
  const auto c = static_cast<std::size_t>(cube_edge);
  parallel_for(0, df.grid.count(), [&](std::size_t cell) {
    const std::size_t cx = cell % df.grid.nx, cy = (cell / df.grid.nx) % df.grid.ny, cz = cell / (df.grid.nx * df.grid.ny);
    Mat3 tensor = Mat3::Zero();
    std::uint32_t fibre = 0, valid = 0;
    for (std::size_t z = cz * c; z < (cz + 1) * c; ++z)
      for (std::size_t y = cy * c; y < (cy + 1) * c; ++y)
        for (std::size_t x = cx * c; x < (cx + 1) * c; ++x) {
          const std::size_t i = vd.dims.index(x, y, z);
          if (!vd.is_fibre(i)) continue;
          ++fibre;
          if (vd.state[i] != VoxelState::valid) continue;
          ++valid;
          const Vec3 v = vd.axis(i);
          tensor += v * v.transpose();
        }
    CubeDirection& out = df.cells[cell];
    out.count = fibre;
    if (valid >= min_voxels && valid > 0) {
      out.axis = principal_axis(tensor);
      out.valid = true;
    }
  });
  return df;
}

struct DirectionParams {
  double sigma = 1.5;
  std::optional<double> threshold;  // Otsu when empty
  int cube_edge = 4;
  std::uint32_t min_voxels = 8;

  void validate() const {
    require(sigma >= 0.5, "Hessian smoothing sigma must be >= 0.5");
    require(cube_edge >= 2, "cube edge must be >= 2");
  }
};

inline DirectionField estimate_direction_field(const Volume3D& vol, const DirectionParams& p) {
  p.validate();
  return aggregate_to_cubes(hessian_directions(vol, p.sigma, p.threshold), p.cube_edge, p.min_voxels);
}

}  // namespace fibra
