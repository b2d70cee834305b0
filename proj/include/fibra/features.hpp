#pragma once

// Window attributes over a direction field: coordinate-wise mean local direction and
// nearest-neighbour directional entropy.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fibra/direction_field.hpp"
#include "fibra/entropy.hpp"
#include "fibra/error.hpp"
#include "fibra/grid.hpp"
#include "fibra/parallel.hpp"

namespace fibra {

enum class AttributeMode { entropy, mean_dir, both };

inline const char* to_string(AttributeMode m) {
  switch (m) {
    case AttributeMode::entropy: return "entropy";
    case AttributeMode::mean_dir: return "mean_dir";
    case AttributeMode::both: return "both";
  }
  return "?";
}

inline AttributeMode parse_attribute_mode(const std::string& s) {
  if (s == "entropy") return AttributeMode::entropy;
  if (s == "mean_dir" || s == "mean-dir") return AttributeMode::mean_dir;
  if (s == "both") return AttributeMode::both;
  fail(ErrorKind::InvalidParameter, "unknown attribute mode '" + s + "'");
}

inline int feature_dimension(AttributeMode m) {
  switch (m) {
    case AttributeMode::entropy: return 1;
    case AttributeMode::mean_dir: return 3;
    case AttributeMode::both: return 4;
  }
  return 0;
}

inline bool has_entropy(AttributeMode m) { return m != AttributeMode::mean_dir; }
inline bool has_mean_dir(AttributeMode m) { return m != AttributeMode::entropy; }

/// Coordinate-wise arithmetic mean of the directions, without renormalization.
inline Vec3 mean_direction(std::span<const AxialDirection> dirs) {
  if (dirs.empty()) fail(ErrorKind::EmptyWindow, "mean direction of an empty window");
  Vec3 sum = Vec3::Zero();
  for (const auto& d : dirs) sum += d.vec();
  return sum / static_cast<double>(dirs.size());
}

struct FeatureVector {
  GridIndex window;
  std::size_t n = 0;
  double entropy = std::numeric_limits<double>::quiet_NaN();
  Vec3 mean{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN()};
  bool degenerate = false;  // more than half the nearest-neighbour distances clamped
};

/// Per-dimension z-score record: standardized = (raw - shift) / scale.
struct Normalization {
  bool applied = false;
  std::vector<double> shift;
  std::vector<double> scale;
};

struct FeatureParams {
  WindowSpec spec;
  AttributeMode mode = AttributeMode::mean_dir;
  Metric metric = Metric::axial;
  std::optional<bool> standardize;  // default: only for the combined mode
  EntropyConstants constants;

  bool standardized() const { return standardize.value_or(mode == AttributeMode::both); }
};

struct FeatureGrid {
  Dims3 grid;  // window grid
  Dims3 cube_grid;
  int cube_edge = 4;
  WindowSpec spec;
  AttributeMode mode = AttributeMode::mean_dir;
  Metric metric = Metric::axial;
  std::vector<FeatureVector> windows;  // sorted by grid coordinate
  Normalization normalization;

  int dimension() const { return feature_dimension(mode); }

  /// Raw attribute vector of window i in the order (H, X, Y, Z), restricted to the mode.
  std::vector<double> raw(std::size_t i) const {
    const auto& f = windows[i];
    std::vector<double> v;
    if (has_entropy(mode)) v.push_back(f.entropy);
    if (has_mean_dir(mode)) {
      v.push_back(f.mean.x());
      v.push_back(f.mean.y());
      v.push_back(f.mean.z());
    }
    return v;
  }

  /// n x d clustering matrix, standardized when the normalization record says so.
  Eigen::MatrixXd matrix() const {
    const int d = dimension();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(windows.size()), d);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto v = raw(i);
      for (int k = 0; k < d; ++k) {
        double x = v[k];
        if (normalization.applied) x = (x - normalization.shift[k]) / normalization.scale[k];
        m(static_cast<Eigen::Index>(i), k) = x;
      }
    }
    return m;
  }

  std::vector<double> entropies() const {
    std::vector<double> h;
    if (!has_entropy(mode)) return h;
    for (const auto& f : windows) h.push_back(f.entropy);
    return h;
  }

  std::vector<GridIndex> window_indices() const {
    std::vector<GridIndex> w;
    for (const auto& f : windows) w.push_back(f.window);
    return w;
  }

  std::size_t degenerate_count() const {
    std::size_t n = 0;
    for (const auto& f : windows) n += f.degenerate;
    return n;
  }
};

inline Normalization fit_normalization(const FeatureGrid& g) {
  Normalization norm;
  norm.applied = true;
  const int d = g.dimension();
  norm.shift.assign(d, 0.0);
  norm.scale.assign(d, 1.0);
  const double n = static_cast<double>(g.windows.size());
  if (g.windows.empty()) return norm;
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  for (std::size_t i = 0; i < g.windows.size(); ++i) {
    const auto v = g.raw(i);
    for (int k = 0; k < d; ++k) sum[k] += v[k];
  }
  for (int k = 0; k < d; ++k) norm.shift[k] = sum[k] / n;
  for (std::size_t i = 0; i < g.windows.size(); ++i) {
    const auto v = g.raw(i);
    for (int k = 0; k < d; ++k) sq[k] += (v[k] - norm.shift[k]) * (v[k] - norm.shift[k]);
  }
  for (int k = 0; k < d; ++k) {
    const double sd = std::sqrt(sq[k] / n);
    norm.scale[k] = sd > 0.0 ? sd : 1.0;
  }
  return norm;
}

/// Valid cube directions inside window w.
inline std::vector<AxialDirection> window_directions(const DirectionField& df, const GridIndex& w,
                                                     const WindowSpec& spec) {
  std::vector<AxialDirection> dirs;
  const auto s = static_cast<std::size_t>(spec.stride), e = static_cast<std::size_t>(spec.window);
  const std::size_t x0 = w.x * s, y0 = w.y * s, z0 = w.z * s;
  for (std::size_t z = z0; z < z0 + e; ++z)
    for (std::size_t y = y0; y < y0 + e; ++y)
      for (std::size_t x = x0; x < x0 + e; ++x) {
        const auto& c = df.at(x, y, z);
        if (c.valid) dirs.push_back(c.axis);
      }
  return dirs;
}

/// Computes the requested attributes for every window with at least min_samples valid cubes.
inline FeatureGrid extract_features(const DirectionField& df, const FeatureParams& p) {
  p.spec.validate();
  if (df.grid.count() == 0) fail(ErrorKind::InvalidParameter, "direction field is empty");
  FeatureGrid g;
  g.grid = window_grid_dims(df.grid, p.spec);
  g.cube_grid = df.grid;
  g.cube_edge = df.cube_edge;
  g.spec = p.spec;
  g.mode = p.mode;
  g.metric = p.metric;

  const std::size_t total = g.grid.count();
  std::vector<std::optional<FeatureVector>> slots(total);
  parallel_for(0, total, [&](std::size_t k) {
    GridIndex w{static_cast<int>(k % g.grid.nx), static_cast<int>((k / g.grid.nx) % g.grid.ny),
                static_cast<int>(k / (g.grid.nx * g.grid.ny))};
    const auto dirs = window_directions(df, w, p.spec);
    if (dirs.size() < static_cast<std::size_t>(p.spec.min_samples)) return;
    FeatureVector f;
    f.window = w;
    f.n = dirs.size();
    if (has_mean_dir(p.mode)) f.mean = mean_direction(dirs);
    if (has_entropy(p.mode)) {
      const auto est = nn_entropy(std::span<const AxialDirection>(dirs), p.metric, p.constants);
      f.entropy = est.value;
      f.degenerate = est.degenerate();
    }
    slots[k] = f;
  });
  for (auto& s : slots)
    if (s) g.windows.push_back(*s);
  if (g.windows.empty()) fail(ErrorKind::NoValidWindows, "every window has fewer than min_samples valid cubes");
  if (p.standardized()) g.normalization = fit_normalization(g);
  return g;
}

}  // namespace fibra
