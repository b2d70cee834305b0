#pragma once

// Layered random sequential adsorption (RSA) of straight, non-intersecting
// cylindrical fibres with a region-dependent direction distribution.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "fibra/cluster_map.hpp"
#include "fibra/error.hpp"
#include "fibra/geometry.hpp"
#include "fibra/grid.hpp"
#include "fibra/parallel.hpp"
#include "fibra/random.hpp"
#include "fibra/volume.hpp"

namespace fibra {

struct Cylinder {
  Vec3 center{0, 0, 0};
  AxialDirection axis;
  double radius = 1.0;
  double half_length = 1.0;
  bool is_anomaly = false;

  Vec3 end_a() const { return center - half_length * axis.vec(); }
  Vec3 end_b() const { return center + half_length * axis.vec(); }

  bool contains(const Vec3& p) const {
    const Vec3 d = p - center;
    const double t = d.dot(axis.vec());
    if (std::abs(t) > half_length) return false;
    return (d - t * axis.vec()).squaredNorm() <= radius * radius;
  }
};

/// Axis-aligned box [lo, hi) or closed ball, in voxel coordinates.
struct AnomalyRegion {
  enum class Kind { none, box, ball };
  Kind kind = Kind::none;
  Vec3 lo{0, 0, 0}, hi{0, 0, 0};
  Vec3 center{0, 0, 0};
  double radius = 0.0;

  static AnomalyRegion make_box(const Vec3& lo, const Vec3& hi) {
    AnomalyRegion r;
    r.kind = Kind::box;
    r.lo = lo;
    r.hi = hi;
    return r;
  }
  static AnomalyRegion make_ball(const Vec3& c, double radius) {
    AnomalyRegion r;
    r.kind = Kind::ball;
    r.center = c;
    r.radius = radius;
    return r;
  }

  bool contains(const Vec3& p) const {
    switch (kind) {
      case Kind::none: return false;
      case Kind::box:
        return p.x() >= lo.x() && p.x() < hi.x() && p.y() >= lo.y() && p.y() < hi.y() && p.z() >= lo.z() &&
               p.z() < hi.z();
      case Kind::ball: return (p - center).norm() <= radius;
    }
    return false;
  }
};

struct RsaParams {
  Dims3 dims{200, 200, 300};
  double fibre_radius = 2.0;
  double fibre_length = 24.0;
  double volume_fraction = 0.1;
  std::uint64_t max_attempts = 2'000'000;
  DirectionDistribution normal_dirs;
  DirectionDistribution anomaly_dirs;
  AnomalyRegion anomaly;
  std::uint64_t seed = 1;

  void validate() const {
    require(dims.count() > 0, "domain dimensions must be positive");
    require(fibre_radius > 0.0, "fibre radius must be > 0");
    require(fibre_length > 0.0, "fibre length must be > 0");
    require(volume_fraction >= 0.0 && volume_fraction < 0.3, "target volume fraction must lie in [0, 0.3)");
    require(normal_dirs.kappa >= 0.0 && anomaly_dirs.kappa >= 0.0, "concentration kappa must be >= 0");
    require(normal_dirs.mean_axis.norm() > 1e-6 && anomaly_dirs.mean_axis.norm() > 1e-6,
            "mean axes must be non-zero");
  }
};

struct FibreSystem {
  Dims3 dims;
  std::vector<Cylinder> cylinders;
  AnomalyRegion anomaly;
  DirectionDistribution normal_dirs;
  DirectionDistribution anomaly_dirs;
  double target_fraction = 0.0;
  double placed_fraction = 0.0;  // in-domain cylinder volume / domain volume
  bool jammed = false;           // attempt budget ran out below 90% of the target
};

/// Named anomaly presets for 200x200x300 volumes: a centred box covering 2x2x3 default windows.
/// "rotated-mean" turns the mean axis by 90 degrees inside the box; "raised-dispersion" keeps the
/// axis but makes the box isotropic.
inline RsaParams rsa_preset(const std::string& name, Dims3 dims = {200, 200, 300}) {
  RsaParams p;
  p.dims = dims;
  const double cx = static_cast<double>(dims.nx), cy = static_cast<double>(dims.ny),
               cz = static_cast<double>(dims.nz);
  p.anomaly = AnomalyRegion::make_box(Vec3(0.32 * cx, 0.32 * cy, 0.32 * cz), Vec3(0.64 * cx, 0.64 * cy, 0.64 * cz));
  p.normal_dirs = {Vec3(1, 0, 1).normalized(), 20.0};
  if (name == "rotated-mean") {
    p.anomaly_dirs = {Vec3(-1, 0, 1).normalized(), 20.0};
  } else if (name == "raised-dispersion") {
    p.anomaly_dirs = {Vec3(1, 0, 1).normalized(), 0.0};
  } else if (name == "homogeneous") {
    p.anomaly = AnomalyRegion{};
    p.anomaly_dirs = p.normal_dirs;
  } else {
    fail(ErrorKind::InvalidParameter, "unknown RSA preset '" + name + "'");
  }
  return p;
}

/// Squared distance between segments [p1,q1] and [p2,q2] (closest-point parametrization).
inline double segment_distance_sq(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  constexpr double eps = 1e-15;
  double s = 0.0, t = 0.0;
  if (a <= eps && e <= eps) return r.squaredNorm();
  if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > eps * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p1 + s * d1) - (p2 + t * d2)).squaredNorm();
}

/// Two fibres intersect when their axis segments come within r_i + r_j.
inline bool cylinders_intersect(const Cylinder& a, const Cylinder& b) {
  const double reach = a.radius + b.radius;
  if ((a.center - b.center).norm() > a.half_length + b.half_length + reach) return false;
  return segment_distance_sq(a.end_a(), a.end_b(), b.end_a(), b.end_b()) <= reach * reach;
}

/// Length of the axis segment of c that lies inside [0,n)^3, times the cross-section.
inline double in_domain_volume(const Cylinder& c, const Dims3& dims) {
  const Vec3 a = c.end_a(), b = c.end_b(), d = b - a;
  double t0 = 0.0, t1 = 1.0;
  const double hi[3] = {static_cast<double>(dims.nx), static_cast<double>(dims.ny), static_cast<double>(dims.nz)};
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (a[k] < 0.0 || a[k] > hi[k]) return 0.0;
      continue;
    }
    double ta = (0.0 - a[k]) / d[k], tb = (hi[k] - a[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t1 <= t0) return 0.0;
  return (t1 - t0) * 2.0 * c.half_length * kPi * c.radius * c.radius;
}

namespace detail {

class CylinderHash {
 public:
  explicit CylinderHash(double cell) : cell_(cell) {}

  template <typename Fn>
  bool any_near(const Vec3& p, Fn&& pred) const {
    const auto k = key_of(p);
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          auto it = cells_.find(pack(k[0] + dx, k[1] + dy, k[2] + dz));
          if (it == cells_.end()) continue;
          for (std::size_t idx : it->second)
            if (pred(idx)) return true;
        }
    return false;
  }

  void insert(const Vec3& p, std::size_t idx) {
    const auto k = key_of(p);
    cells_[pack(k[0], k[1], k[2])].push_back(idx);
  }

 private:
  std::array<std::int64_t, 3> key_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v + (1 << 20)) & 0x1FFFFF; };
    return u(x) | (u(y) << 21) | (u(z) << 42);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace detail

/// Sequentially places fibres slab by slab in increasing z (slab thickness = fibre length).
/// Each slab receives its share of the target volume and of the attempt budget.
inline FibreSystem generate_rsa(const RsaParams& params) {
  params.validate();
  FibreSystem fs;
  fs.dims = params.dims;
  fs.anomaly = params.anomaly;
  fs.normal_dirs = params.normal_dirs;
  fs.anomaly_dirs = params.anomaly_dirs;
  fs.target_fraction = params.volume_fraction;
  if (params.volume_fraction == 0.0) return fs;

  Rng rng(params.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double nx = static_cast<double>(params.dims.nx), ny = static_cast<double>(params.dims.ny),
               nz = static_cast<double>(params.dims.nz);
  const double domain_volume = nx * ny * nz;
  const double r = params.fibre_radius, hl = 0.5 * params.fibre_length;
  detail::CylinderHash hash(2.0 * (hl + r));

  double placed_volume = 0.0;
  const double slab = params.fibre_length;
  for (double z0 = 0.0; z0 < nz; z0 += slab) {
    const double z1 = std::min(nz, z0 + slab);
    const double share = (z1 - z0) / nz;
    const double slab_target = params.volume_fraction * nx * ny * (z1 - z0);
    const auto budget = static_cast<std::uint64_t>(std::ceil(share * static_cast<double>(params.max_attempts)));
    double slab_volume = 0.0;
    for (std::uint64_t attempt = 0; attempt < budget && slab_volume < slab_target; ++attempt) {
      Cylinder c;
      c.center = Vec3(nx * uni(rng), ny * uni(rng), z0 + (z1 - z0) * uni(rng));
      c.radius = r;
      c.half_length = hl;
      c.is_anomaly = params.anomaly.contains(c.center);
      c.axis = canonicalize(sample_vmf(c.is_anomaly ? params.anomaly_dirs : params.normal_dirs, rng));
      const bool hit = hash.any_near(c.center, [&](std::size_t j) { return cylinders_intersect(c, fs.cylinders[j]); });
      if (hit) continue;
      const double v = in_domain_volume(c, params.dims);
      slab_volume += v;
      placed_volume += v;
      hash.insert(c.center, fs.cylinders.size());
      fs.cylinders.push_back(c);
    }
  }
  fs.placed_fraction = placed_volume / domain_volume;
  fs.jammed = fs.placed_fraction < 0.9 * params.volume_fraction;
  return fs;
}

/// Renders fibres as 255 on 0 (voxel centres at i + 0.5), then optionally blurs and adds
/// clipped Gaussian noise.
inline Volume3D voxelize(const FibreSystem& fs, double blur_sigma = 0.0, double noise_sigma = 0.0,
                         std::uint64_t noise_seed = 0) {
  Volume3D vol(fs.dims, 0);
  const std::size_t slab = 8;
  const std::size_t chunks = (fs.dims.nz + slab - 1) / slab;
  parallel_for(0, chunks, [&](std::size_t chunk) {
    const double zlo = static_cast<double>(chunk * slab), zhi = static_cast<double>(std::min(fs.dims.nz, (chunk + 1) * slab));
    for (const auto& c : fs.cylinders) {
      const Vec3 a = c.end_a(), b = c.end_b();
      Vec3 lo = a.cwiseMin(b).array() - c.radius;
      Vec3 hi = a.cwiseMax(b).array() + c.radius;
      if (hi.z() < zlo || lo.z() > zhi) continue;
      const auto first = [](double v) { return static_cast<std::ptrdiff_t>(std::floor(v - 0.5)); };
      const auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t lo_, std::ptrdiff_t hi_) { return std::clamp(v, lo_, hi_); };
      const std::ptrdiff_t x0 = clampi(first(lo.x()), 0, fs.dims.nx - 1), x1 = clampi(first(hi.x()) + 1, 0, fs.dims.nx - 1);
      const std::ptrdiff_t y0 = clampi(first(lo.y()), 0, fs.dims.ny - 1), y1 = clampi(first(hi.y()) + 1, 0, fs.dims.ny - 1);
      const std::ptrdiff_t z0 = std::max<std::ptrdiff_t>(first(lo.z()), static_cast<std::ptrdiff_t>(zlo));
      const std::ptrdiff_t z1 = std::min<std::ptrdiff_t>(first(hi.z()) + 1, static_cast<std::ptrdiff_t>(zhi) - 1);
      for (std::ptrdiff_t z = z0; z <= z1; ++z)
        for (std::ptrdiff_t y = y0; y <= y1; ++y)
          for (std::ptrdiff_t x = x0; x <= x1; ++x)
            if (c.contains(Vec3(x + 0.5, y + 0.5, z + 0.5))) vol.at(x, y, z) = 255;
    }
  });
  if (blur_sigma <= 0.0 && noise_sigma <= 0.0) return vol;

  ScalarField f = gaussian_smooth(vol, blur_sigma);
  Rng rng(noise_seed);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    double v = f.values[i];
    if (noise_sigma > 0.0) v += noise(rng);
    vol.voxels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return vol;
}

/// Binary ground truth: a window is anomalous iff its centre lies in the anomaly region.
/// Every window position of the grid is labelled (label 1 = anomaly, 0 = normal).
inline ClusterMap ground_truth_labels(const FibreSystem& fs, const WindowSpec& spec, int cube_edge) {
  spec.validate();
  require(cube_edge >= 1, "cube edge must be >= 1");
  ClusterMap map;
  map.grid = window_grid_dims(cube_grid_dims(fs.dims, cube_edge), spec);
  for (std::size_t z = 0; z < map.grid.nz; ++z)
    for (std::size_t y = 0; y < map.grid.ny; ++y)
      for (std::size_t x = 0; x < map.grid.nx; ++x) {
        GridIndex w{static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)};
        map.windows.push_back(w);
        map.labels.push_back(fs.anomaly.contains(window_center_voxels(w, spec, cube_edge)) ? 1 : 0);
      }
  map.roles[0] = ClusterRole::normal;
  map.roles[1] = ClusterRole::anomaly;
  return map;
}

}  // namespace fibra
