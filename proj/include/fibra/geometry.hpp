#pragma once

// Unit vectors and axial directions on the sphere S^2.

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "fibra/error.hpp"

namespace fibra {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

/// A vector of unit Euclidean length (within 1e-9).
class UnitVector {
 public:
  UnitVector() = default;

  /// Normalizes v. Throws NearZeroVector when |v| < 1e-6.
  static UnitVector normalize(const Vec3& v) {
    const double n = v.norm();
    if (!(n >= 1e-6)) fail(ErrorKind::NearZeroVector, "cannot normalize a vector of norm < 1e-6");
    return UnitVector(v / n);
  }
  static UnitVector normalize(double x, double y, double z) { return normalize(Vec3(x, y, z)); }

  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  const Vec3& vec() const { return v_; }

  UnitVector operator-() const { return UnitVector(-v_); }
  double dot(const UnitVector& o) const { return v_.dot(o.v_); }

  friend bool operator==(const UnitVector& a, const UnitVector& b) { return a.v_ == b.v_; }

 private:
  explicit UnitVector(const Vec3& v) : v_(v) {}
  Vec3 v_{0.0, 0.0, 1.0};
};

/// A fibre axis: the hemisphere representative of {v, -v}.
/// Invariant: z > 0, or z == 0 and y > 0, or (x, y, z) == (1, 0, 0).
class AxialDirection {
 public:
  AxialDirection() = default;

  double x() const { return u_.x(); }
  double y() const { return u_.y(); }
  double z() const { return u_.z(); }
  const Vec3& vec() const { return u_.vec(); }
  const UnitVector& unit() const { return u_; }
  operator const UnitVector&() const { return u_; }

  friend bool operator==(const AxialDirection& a, const AxialDirection& b) { return a.u_ == b.u_; }
  friend AxialDirection canonicalize(const UnitVector& v);

 private:
  explicit AxialDirection(const UnitVector& u) : u_(u) {}
  UnitVector u_;
};

inline bool in_canonical_hemisphere(const Vec3& v) {
  if (v.z() > 0.0) return true;
  if (v.z() < 0.0) return false;
  if (v.y() > 0.0) return true;
  if (v.y() < 0.0) return false;
  return v.x() > 0.0;
}

inline AxialDirection canonicalize(const UnitVector& v) {
  return AxialDirection(in_canonical_hemisphere(v.vec()) ? v : -v);
}

/// Normalizes then canonicalizes; throws NearZeroVector for |v| < 1e-6.
inline AxialDirection axis_from(const Vec3& v) { return canonicalize(UnitVector::normalize(v)); }

enum class Metric { spherical, axial };

/// Great-circle angle between u and v. The axial variant treats v and -v as the same point.
inline double geodesic_distance(const UnitVector& u, const UnitVector& v, Metric mode) {
  const double c = u.dot(v);
  if (mode == Metric::axial) return std::acos(std::clamp(std::abs(c), 0.0, 1.0));
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace fibra
