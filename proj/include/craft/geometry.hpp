#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "craft/plan.hpp"

namespace craft {

using Vec3 = Eigen::Vector3d;

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 size() const { return hi - lo; }
  bool empty() const { return (hi.array() < lo.array()).any(); }
  Aabb intersect(const Aabb& o) const { return {lo.cwiseMax(o.lo), hi.cwiseMin(o.hi)}; }
  Aabb merge(const Aabb& o) const { return {lo.cwiseMin(o.lo), hi.cwiseMax(o.hi)}; }
  bool contains(const Aabb& o, double tol = 0.0) const {
    return ((o.lo - lo).array() >= -tol).all() && ((hi - o.hi).array() >= -tol).all();
  }
};

// The two axes perpendicular to `a`, in increasing order.
inline std::pair<int, int> transverse_axes(Axis a) {
  switch (a) {
    case Axis::X: return {1, 2};
    case Axis::Y: return {0, 2};
    default: return {0, 1};
  }
}

enum class PrimKind { Box, Cylinder };

// Axis-aligned box or cylinder. `half` holds the half extents of the AABB; a
// cylinder's radius is half[t] for either transverse axis t.
struct Primitive {
  PrimKind kind = PrimKind::Box;
  Vec3 center = Vec3::Zero();
  Vec3 half = Vec3::Zero();
  Axis axis = Axis::Z;  // cylinders only

  static Primitive box(const Vec3& center, const Vec3& half);
  static Primitive cylinder(const Vec3& center, Axis axis, double radius, double half_length);

  double radius() const;
  double half_length() const { return half[index(axis)]; }
  Aabb aabb() const { return {center - half, center + half}; }
  double volume() const;

  // Exact signed distance, negative inside.
  double sdf(const Vec3& p) const;
  // Grows (t > 0) or shrinks (t < 0) the primitive uniformly by t.
  Primitive offset(double t) const;
  Primitive translated(const Vec3& d) const;
};

struct HoleRegion {
  std::string owner;
  std::string modification;
  Axis axis = Axis::Z;
  Vec3 center = Vec3::Zero();
  bool cylindrical = true;
  double radius = 0.0;  // cylindrical cross-section
  double side = 0.0;    // square cross-section
  double depth = 0.0;
  bool through = false;

  Primitive primitive() const;
};

// Base primitive minus hole regions.
struct Solid {
  Primitive base;
  std::vector<Primitive> holes;

  // Signed distance bound: max(base, -union(holes)); the sign is exact.
  double sdf(const Vec3& p) const;
  bool contains(const Vec3& p, double margin = 0.0) const { return sdf(p) < -margin; }
};

}  // namespace craft
