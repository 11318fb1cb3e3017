#include "craft/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace craft {

Primitive Primitive::box(const Vec3& center, const Vec3& half) {
  return {PrimKind::Box, center, half, Axis::Z};
}

Primitive Primitive::cylinder(const Vec3& center, Axis axis, double radius, double half_length) {
  Vec3 half = Vec3::Constant(radius);
  half[index(axis)] = half_length;
  return {PrimKind::Cylinder, center, half, axis};
}

double Primitive::radius() const {
  return half[transverse_axes(axis).first];
}

double Primitive::volume() const {
  if (kind == PrimKind::Box) return 8.0 * half.prod();
  return std::numbers::pi * radius() * radius() * 2.0 * half_length();
}

double Primitive::sdf(const Vec3& p) const {
  Vec3 d = (p - center).cwiseAbs();
  if (kind == PrimKind::Box) {
    Vec3 q = d - half;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
  }
  auto [u, v] = transverse_axes(axis);
  double radial = std::hypot(d[u], d[v]) - radius();
  double axial = d[index(axis)] - half_length();
  double outside = std::hypot(std::max(radial, 0.0), std::max(axial, 0.0));
  return outside + std::min(std::max(radial, axial), 0.0);
}

Primitive Primitive::offset(double t) const {
  Primitive out = *this;
  out.half = (half.array() + t).max(0.0).matrix();
  return out;
}

Primitive Primitive::translated(const Vec3& d) const {
  Primitive out = *this;
  out.center += d;
  return out;
}

Primitive HoleRegion::primitive() const {
  if (cylindrical) return Primitive::cylinder(center, axis, radius, 0.5 * depth);
  Vec3 half = Vec3::Constant(0.5 * side);
  half[index(axis)] = 0.5 * depth;
  return Primitive::box(center, half);
}

double Solid::sdf(const Vec3& p) const {
  double d = base.sdf(p);
  for (const Primitive& hole : holes) d = std::max(d, -hole.sdf(p));
  return d;
}

}  // namespace craft
