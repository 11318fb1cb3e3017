#include "craft/physics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>

#include <Eigen/Cholesky>

#include "craft/errors.hpp"

namespace craft {

namespace {

constexpr double kMargin = 0.02;  // speculative contact distance, m
constexpr int kRimSegments = 16;
constexpr int kGroundRimSegments = 8;

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 primitive_inertia(const Primitive& p, double m) {
  const Vec3 e = 2.0 * p.half;
  Mat3 out = Mat3::Zero();
  if (p.kind == PrimKind::Box) {
    out.diagonal() << m / 12.0 * (e.y() * e.y() + e.z() * e.z()), m / 12.0 * (e.x() * e.x() + e.z() * e.z()),
        m / 12.0 * (e.x() * e.x() + e.y() * e.y());
    return out;
  }
  const int k = index(p.axis);
  const double r = p.radius();
  const double len = e[k];
  out.diagonal().setConstant(m / 12.0 * (3.0 * r * r + len * len));
  out(k, k) = 0.5 * m * r * r;
  return out;
}

std::vector<Vec3> surface_samples(const Primitive& p) {
  std::vector<Vec3> out;
  if (p.kind == PrimKind::Box) {
    for (int i = -1; i <= 1; ++i) {
      for (int j = -1; j <= 1; ++j) {
        for (int k = -1; k <= 1; ++k) {
          if (i == 0 && j == 0 && k == 0) continue;
          out.push_back(p.center + Vec3(i, j, k).cwiseProduct(p.half));
        }
      }
    }
    return out;
  }
  const int k = index(p.axis);
  auto [u, v] = transverse_axes(p.axis);
  for (double s : {-1.0, 1.0}) {
    Vec3 end = p.center;
    end[k] += s * p.half_length();
    out.push_back(end);
    for (int n = 0; n < kRimSegments; ++n) {
      double th = 2.0 * std::numbers::pi * n / kRimSegments;
      Vec3 q = end;
      q[u] += p.radius() * std::cos(th);
      q[v] += p.radius() * std::sin(th);
      out.push_back(q);
    }
  }
  return out;
}

// Candidate ground-contact points of a body-frame primitive, in world space.
std::vector<Vec3> ground_points(const Primitive& p, const RigidBody& body) {
  std::vector<Vec3> out;
  if (p.kind == PrimKind::Box) {
    for (int i = 0; i < 8; ++i) {
      Vec3 s((i & 1) ? 1 : -1, (i & 2) ? 1 : -1, (i & 4) ? 1 : -1);
      out.push_back(body.to_world(p.center + s.cwiseProduct(p.half)));
    }
    return out;
  }
  const int k = index(p.axis);
  auto [u, v] = transverse_axes(p.axis);
  const Vec3 axis = body.direction_to_world(Vec3::Unit(k));
  const Vec3 down = Vec3::UnitZ() - axis.z() * axis;
  for (double s : {-1.0, 1.0}) {
    Vec3 end_local = p.center;
    end_local[k] += s * p.half_length();
    const Vec3 end = body.to_world(end_local);
    if (down.norm() > 1e-6) out.push_back(end - p.radius() * down.normalized());
    if (std::abs(axis.z()) > 0.5) {
      // Near-upright cylinder: the flat end needs a support polygon.
      for (int n = 0; n < kGroundRimSegments; ++n) {
        double th = 2.0 * std::numbers::pi * n / kGroundRimSegments;
        Vec3 q = end_local;
        q[u] += p.radius() * std::cos(th);
        q[v] += p.radius() * std::sin(th);
        out.push_back(body.to_world(q));
      }
    }
  }
  return out;
}

// Outward unit normal of a primitive at a body-frame point. Points on an
// edge or corner have several candidate faces; the tie goes to the face whose
// normal crosses the thinnest part of the pair overlap (`overlap`, body frame),
// which is the direction a resting or stacked contact pushes along.
Vec3 primitive_normal(const Primitive& prim, const Vec3& p, const Vec3& overlap) {
  constexpr double kTie = 1e-7;
  const Vec3 d = p - prim.center;
  auto score = [&](const Vec3& n) { return n.cwiseAbs().dot(overlap); };
  if (prim.kind == PrimKind::Box) {
    const Vec3 q = d.cwiseAbs() - prim.half;
    Vec3 out = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      if (q[k] > kTie) out[k] = std::copysign(q[k], d[k]);
    }
    if (out.squaredNorm() > 0.0) return out.normalized();
    Vec3 best = Vec3::UnitZ();
    double best_score = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      if (q[k] < q.maxCoeff() - kTie) continue;
      const Vec3 n = std::copysign(1.0, d[k]) * Vec3::Unit(k);
      if (score(n) < best_score) {
        best_score = score(n);
        best = n;
      }
    }
    return best;
  }
  const int k = index(prim.axis);
  Vec3 radial = d;
  radial[k] = 0.0;
  const double rho = radial.norm();
  const Vec3 rn = rho > 1e-12 ? Vec3(radial / rho) : Vec3::Unit(transverse_axes(prim.axis).first);
  const Vec3 an = std::copysign(1.0, d[k]) * Vec3::Unit(k);
  const double qr = rho - prim.radius();
  const double qa = std::abs(d[k]) - prim.half_length();
  if (qr > kTie && qa > kTie) return (qr * rn + qa * an).normalized();
  if (qr > kTie) return rn;
  if (qa > kTie) return an;
  if (std::abs(qr - qa) <= kTie) return score(rn) < score(an) ? rn : an;
  return qr > qa ? rn : an;
}

// Outward normal of a solid: the base primitive, or the wall of the hole that
// is closest when the point sits inside a hole.
Vec3 solid_normal(const Solid& s, const Vec3& p, const Vec3& overlap) {
  double active = s.base.sdf(p);
  const Primitive* hole = nullptr;
  for (const Primitive& h : s.holes) {
    const double v = -h.sdf(p);
    if (v > active) {
      active = v;
      hole = &h;
    }
  }
  if (!hole) return primitive_normal(s.base, p, overlap);
  return -primitive_normal(*hole, p, overlap);
}

Aabb world_aabb(const Primitive& p, const RigidBody& body) {
  const Mat3 r = body.orientation.toRotationMatrix();
  const Vec3 c = body.to_world(p.center);
  const Vec3 h = r.cwiseAbs() * p.half;
  return {c - h, c + h};
}

bool overlaps(const Aabb& a, const Aabb& b, double margin) {
  return ((a.lo.array() - margin) <= b.hi.array()).all() && ((b.lo.array() - margin) <= a.hi.array()).all();
}

std::pair<Vec3, Vec3> tangents(const Vec3& n) {
  Vec3 t1 = std::abs(n.x()) < 0.9 ? n.cross(Vec3::UnitX()) : n.cross(Vec3::UnitY());
  t1.normalize();
  return {t1, n.cross(t1)};
}

// Velocity state used by the iterative solver; the same code solves the
// real velocities and the split-impulse pseudo velocities.
struct Motions {
  std::vector<Vec3> v;
  std::vector<Vec3> w;
  std::vector<double> inv_mass;
  std::vector<Mat3> inv_inertia;

  Vec3 lin(std::size_t i) const { return i == kGround ? Vec3::Zero() : v[i]; }
  Vec3 ang(std::size_t i) const { return i == kGround ? Vec3::Zero() : w[i]; }
  double im(std::size_t i) const { return i == kGround ? 0.0 : inv_mass[i]; }
  Mat3 ii(std::size_t i) const { return i == kGround ? Mat3::Zero() : inv_inertia[i]; }

  void apply(std::size_t i, const Vec3& impulse, const Vec3& r) {
    if (i == kGround) return;
    v[i] += inv_mass[i] * impulse;
    w[i] += inv_inertia[i] * r.cross(impulse);
  }
  void apply_angular(std::size_t i, const Vec3& impulse) {
    if (i == kGround) return;
    w[i] += inv_inertia[i] * impulse;
  }
};

struct ContactRow {
  std::size_t a;
  std::size_t b;
  Vec3 ra;
  Vec3 rb;
  Vec3 n;
  Vec3 t1;
  Vec3 t2;
  double gap;
  double target = 0.0;  // lowest admissible normal velocity
  double mass_n = 0.0;
  double mass_t1 = 0.0;
  double mass_t2 = 0.0;
  double jn = 0.0;
  double jt1 = 0.0;
  double jt2 = 0.0;
  double jp = 0.0;
};

struct JointRow {
  std::size_t a;
  std::size_t b;
  Vec3 ra;
  Vec3 rb;
  Vec3 error;        // anchor b - anchor a
  Vec3 axis_error;   // axis a x axis b
  Vec3 t1;
  Vec3 t2;
  Eigen::LDLT<Mat3> k_lin;
  double k1 = 0.0;
  double k2 = 0.0;
  bool active = true;
};

double effective_mass(const Motions& m, std::size_t a, std::size_t b, const Vec3& ra, const Vec3& rb,
                      const Vec3& dir) {
  Vec3 ca = ra.cross(dir);
  Vec3 cb = rb.cross(dir);
  double k = m.im(a) + m.im(b) + ca.dot(m.ii(a) * ca) + cb.dot(m.ii(b) * cb);
  return k > 1e-12 ? 1.0 / k : 0.0;
}

Vec3 relative_velocity(const Motions& m, std::size_t a, std::size_t b, const Vec3& ra, const Vec3& rb) {
  return m.lin(a) + m.ang(a).cross(ra) - m.lin(b) - m.ang(b).cross(rb);
}

void solve_joint_linear(Motions& m, const JointRow& j, const Vec3& target) {
  Vec3 cdot = m.lin(j.b) + m.ang(j.b).cross(j.rb) - m.lin(j.a) - m.ang(j.a).cross(j.ra);
  Vec3 lambda = j.k_lin.solve(target - cdot);
  m.apply(j.a, -lambda, j.ra);
  m.apply(j.b, lambda, j.rb);
}

void solve_joint_angular(Motions& m, const JointRow& j, const Vec3& t, double k, double target) {
  if (k <= 0.0) return;
  double cdot = (m.ang(j.b) - m.ang(j.a)).dot(t);
  double lambda = k * (target - cdot);
  m.apply_angular(j.a, -lambda * t);
  m.apply_angular(j.b, lambda * t);
}

}  // namespace

void SimConfig::validate() const {
  if (!(timestep > 0.0)) throw Error("timestep must be positive");
  if (!(scale > 0.0)) throw Error("scale must be positive");
  if (!(part_mass > 0.0)) throw Error("part_mass must be positive");
  if (solver_iterations <= 0) throw Error("solver_iterations must be positive");
  if (duration < 0.0) throw Error("duration must not be negative");
}

Mat3 RigidBody::inv_inertia_world() const {
  if (!movable()) return Mat3::Zero();
  const Mat3 r = orientation.toRotationMatrix();
  return r * inv_inertia * r.transpose();
}

Vec3 RigidBody::point_velocity(const Vec3& world) const {
  return velocity + angular_velocity.cross(world - position);
}

double RigidBody::kinetic_energy() const {
  const Mat3 r = orientation.toRotationMatrix();
  const Vec3 wl = r.transpose() * angular_velocity;
  return 0.5 * mass * velocity.squaredNorm() + 0.5 * wl.dot(inertia * wl);
}

void RigidBody::apply_force(const Vec3& f, const Vec3& world_point) {
  force += f;
  torque += (world_point - position).cross(f);
}

RigidBody make_body(std::string id, const std::vector<std::pair<std::string, Solid>>& parts, double mass_per_part,
                    Motion motion) {
  if (parts.empty()) throw Error("body " + id + " has no parts");
  RigidBody body;
  body.id = std::move(id);
  body.motion = motion;
  Vec3 com = Vec3::Zero();
  for (const auto& [name, solid] : parts) com += solid.base.center;
  com /= static_cast<double>(parts.size());
  body.position = com;
  body.mass = mass_per_part * static_cast<double>(parts.size());
  body.inertia = Mat3::Zero();
  for (const auto& [name, solid] : parts) {
    const Vec3 d = solid.base.center - com;
    body.inertia += primitive_inertia(solid.base, mass_per_part) +
                    mass_per_part * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
    BodyShape shape;
    shape.part = name;
    shape.local = solid.base.translated(-com);
    for (const Primitive& h : solid.holes) shape.holes.push_back(h.translated(-com));
    for (const Vec3& s : surface_samples(shape.local)) {
      bool in_hole = std::any_of(shape.holes.begin(), shape.holes.end(),
                                 [&](const Primitive& h) { return h.sdf(s) <= 1e-9; });
      if (!in_hole) shape.samples.push_back(s);
    }
    body.shapes.push_back(std::move(shape));
  }
  if (motion == Motion::Dynamic) {
    body.inv_mass = 1.0 / body.mass;
    body.inv_inertia = body.inertia.inverse();
  }
  return body;
}

double lowest_z(const Primitive& local, const RigidBody& body) {
  if (local.kind == PrimKind::Box) {
    double z = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 8; ++i) {
      Vec3 s((i & 1) ? 1 : -1, (i & 2) ? 1 : -1, (i & 4) ? 1 : -1);
      z = std::min(z, body.to_world(local.center + s.cwiseProduct(local.half)).z());
    }
    return z;
  }
  const int k = index(local.axis);
  const Vec3 axis = body.direction_to_world(Vec3::Unit(k));
  const double spread = local.radius() * std::sqrt(std::max(0.0, 1.0 - axis.z() * axis.z()));
  const Vec3 c = body.to_world(local.center);
  return c.z() - std::abs(axis.z()) * local.half_length() - spread;
}

World::World(SimConfig config) : config_(config) { config_.validate(); }

std::size_t World::add_body(RigidBody body) {
  bodies_.push_back(std::move(body));
  return bodies_.size() - 1;
}

std::size_t World::add_revolute(std::size_t a, std::size_t b, const Vec3& anchor, const Vec3& axis) {
  const RigidBody& ba = bodies_.at(a);
  const RigidBody& bb = bodies_.at(b);
  const Vec3 n = axis.normalized();
  joints_.push_back({a, b, ba.to_local(anchor), bb.to_local(anchor), ba.orientation.conjugate() * n,
                     bb.orientation.conjugate() * n});
  jointed_.insert(std::minmax(a, b));
  return joints_.size() - 1;
}

bool World::jointed(std::size_t a, std::size_t b) const { return jointed_.count(std::minmax(a, b)) > 0; }

bool World::touched(std::size_t a, std::size_t b) const { return touched_.count(std::minmax(a, b)) > 0; }

namespace {

std::uint64_t feature_key(std::size_t a, std::size_t b, std::size_t sa, std::size_t sb, bool flip, std::size_t k) {
  const std::uint64_t bb = b == kGround ? 0xFFF : b & 0xFFF;
  return (std::uint64_t(a & 0xFFF) << 52) | (bb << 40) | (std::uint64_t(sa & 0x3FF) << 30) |
         (std::uint64_t(sb & 0x3FF) << 20) | (std::uint64_t(flip) << 19) | std::uint64_t(k & 0x7FFFF);
}

}  // namespace

void World::ground_contacts(std::size_t i) {
  const RigidBody& body = bodies_[i];
  for (std::size_t s = 0; s < body.shapes.size(); ++s) {
    const BodyShape& shape = body.shapes[s];
    if (world_aabb(shape.local, body).lo.z() > kMargin) continue;
    const std::vector<Vec3> points = ground_points(shape.local, body);
    for (std::size_t k = 0; k < points.size(); ++k) {
      const Vec3& p = points[k];
      if (p.z() < kMargin) {
        contacts_.push_back({i, kGround, p, Vec3::UnitZ(), p.z(), 0.0, feature_key(i, kGround, s, 0, false, k)});
      }
    }
  }
}

void World::pair_contacts(std::size_t i, std::size_t j) {
  const RigidBody& a = bodies_[i];
  const RigidBody& b = bodies_[j];
  const Mat3 ra = a.orientation.toRotationMatrix();
  const Mat3 rb = b.orientation.toRotationMatrix();
  for (std::size_t ia = 0; ia < a.shapes.size(); ++ia) {
    const BodyShape& sa = a.shapes[ia];
    const Aabb box_a = world_aabb(sa.local, a);
    for (std::size_t ib = 0; ib < b.shapes.size(); ++ib) {
      const BodyShape& sb = b.shapes[ib];
      const Aabb box_b = world_aabb(sb.local, b);
      if (!overlaps(box_a, box_b, kMargin)) continue;
      const Vec3 overlap = box_a.intersect(box_b).size().cwiseMax(0.0);
      const Vec3 overlap_a = (ra.transpose() * overlap).cwiseAbs();
      const Vec3 overlap_b = (rb.transpose() * overlap).cwiseAbs();
      const Solid solid_a = sa.solid();
      const Solid solid_b = sb.solid();
      for (std::size_t k = 0; k < sa.samples.size(); ++k) {
        const Vec3 p = a.to_world(sa.samples[k]);
        const Vec3 pl = b.to_local(p);
        const double d = solid_b.sdf(pl);
        if (d < kMargin) {
          contacts_.push_back(
              {i, j, p, rb * solid_normal(solid_b, pl, overlap_b), d, 0.0, feature_key(i, j, ia, ib, false, k)});
        }
      }
      for (std::size_t k = 0; k < sb.samples.size(); ++k) {
        const Vec3 p = b.to_world(sb.samples[k]);
        const Vec3 pl = a.to_local(p);
        const double d = solid_a.sdf(pl);
        if (d < kMargin) {
          contacts_.push_back(
              {i, j, p, -(ra * solid_normal(solid_a, pl, overlap_a)), d, 0.0, feature_key(i, j, ia, ib, true, k)});
        }
      }
    }
  }
}

void World::collect_contacts() {
  contacts_.clear();
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    if (bodies_[i].movable()) ground_contacts(i);
  }
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    for (std::size_t j = i + 1; j < bodies_.size(); ++j) {
      if (!bodies_[i].movable() && !bodies_[j].movable()) continue;
      if (jointed(i, j)) continue;
      pair_contacts(i, j);
    }
  }
}

void World::step() {
  const double dt = config_.timestep;
  const std::size_t n = bodies_.size();

  for (RigidBody& b : bodies_) {
    if (b.movable()) {
      b.velocity += dt * b.inv_mass * b.force;
      if (b.gravity) b.velocity.z() -= dt * config_.gravity;
      b.angular_velocity += dt * (b.inv_inertia_world() * b.torque);
    }
    b.force.setZero();
    b.torque.setZero();
  }

  collect_contacts();

  Motions real;
  real.v.resize(n);
  real.w.resize(n);
  real.inv_mass.resize(n);
  real.inv_inertia.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const RigidBody& b = bodies_[i];
    real.v[i] = b.velocity;
    real.w[i] = b.angular_velocity;
    real.inv_mass[i] = b.movable() ? b.inv_mass : 0.0;
    real.inv_inertia[i] = b.inv_inertia_world();
  }
  Motions pseudo = real;
  std::fill(pseudo.v.begin(), pseudo.v.end(), Vec3::Zero());
  std::fill(pseudo.w.begin(), pseudo.w.end(), Vec3::Zero());

  std::vector<ContactRow> rows;
  rows.reserve(contacts_.size());
  for (const Contact& c : contacts_) {
    ContactRow r{c.a, c.b, c.point - bodies_[c.a].position,
                 c.b == kGround ? Vec3::Zero() : Vec3(c.point - bodies_[c.b].position), c.normal, Vec3::Zero(),
                 Vec3::Zero(), c.gap};
    std::tie(r.t1, r.t2) = tangents(c.normal);
    r.mass_n = effective_mass(real, r.a, r.b, r.ra, r.rb, r.n);
    const double vn0 = relative_velocity(real, r.a, r.b, r.ra, r.rb).dot(r.n);
    if (r.gap > config_.slop) {
      r.target = -r.gap / dt;  // speculative: may close the gap this step
    } else if (vn0 < 0.0) {
      r.target = -config_.restitution * vn0;
    }
    r.mass_t1 = effective_mass(real, r.a, r.b, r.ra, r.rb, r.t1);
    r.mass_t2 = effective_mass(real, r.a, r.b, r.ra, r.rb, r.t2);
    if (auto it = warm_.find(c.feature); it != warm_.end() && r.gap <= config_.slop) {
      r.jn = it->second.normal;
      r.jt1 = it->second.friction.dot(r.t1);
      r.jt2 = it->second.friction.dot(r.t2);
      const Vec3 p = r.jn * r.n + r.jt1 * r.t1 + r.jt2 * r.t2;
      real.apply(r.a, p, r.ra);
      real.apply(r.b, -p, r.rb);
    }
    rows.push_back(r);
  }

  std::vector<JointRow> jrows;
  for (const RevoluteJoint& j : joints_) {
    const RigidBody& a = bodies_[j.a];
    const RigidBody& b = bodies_[j.b];
    JointRow r;
    r.a = j.a;
    r.b = j.b;
    r.ra = a.direction_to_world(j.local_anchor_a);
    r.rb = b.direction_to_world(j.local_anchor_b);
    r.error = (b.position + r.rb) - (a.position + r.ra);
    const Vec3 axis_a = a.direction_to_world(j.local_axis_a).normalized();
    const Vec3 axis_b = b.direction_to_world(j.local_axis_b).normalized();
    r.axis_error = axis_a.cross(axis_b);
    std::tie(r.t1, r.t2) = tangents(axis_a);
    const Mat3 k = (real.im(r.a) + real.im(r.b)) * Mat3::Identity() - skew(r.ra) * real.ii(r.a) * skew(r.ra) -
                   skew(r.rb) * real.ii(r.b) * skew(r.rb);
    r.active = k.trace() > 1e-12;
    r.k_lin.compute(k);
    const Mat3 ii = real.ii(r.a) + real.ii(r.b);
    const double k1 = r.t1.dot(ii * r.t1);
    const double k2 = r.t2.dot(ii * r.t2);
    r.k1 = k1 > 1e-12 ? 1.0 / k1 : 0.0;
    r.k2 = k2 > 1e-12 ? 1.0 / k2 : 0.0;
    jrows.push_back(std::move(r));
  }

  const double mu = config_.friction;
  for (int it = 0; it < config_.solver_iterations; ++it) {
    for (const JointRow& j : jrows) {
      if (!j.active) continue;
      solve_joint_linear(real, j, Vec3::Zero());
      solve_joint_angular(real, j, j.t1, j.k1, 0.0);
      solve_joint_angular(real, j, j.t2, j.k2, 0.0);
    }
    for (ContactRow& r : rows) {
      if (r.mass_n <= 0.0) continue;
      const Vec3 vrel = relative_velocity(real, r.a, r.b, r.ra, r.rb);
      const double vn = vrel.dot(r.n);
      const double old = r.jn;
      r.jn = std::max(0.0, r.jn + r.mass_n * (r.target - vn));
      const Vec3 p = (r.jn - old) * r.n;
      real.apply(r.a, p, r.ra);
      real.apply(r.b, -p, r.rb);

      const double limit = mu * r.jn;
      for (int t = 0; t < 2; ++t) {
        const Vec3& dir = t == 0 ? r.t1 : r.t2;
        double& acc = t == 0 ? r.jt1 : r.jt2;
        const double mass = t == 0 ? r.mass_t1 : r.mass_t2;
        const double vt = relative_velocity(real, r.a, r.b, r.ra, r.rb).dot(dir);
        const double prev = acc;
        acc = std::clamp(acc - mass * vt, -limit, limit);
        const Vec3 pt = (acc - prev) * dir;
        real.apply(r.a, pt, r.ra);
        real.apply(r.b, -pt, r.rb);
      }
    }
  }

  const double bias = config_.baumgarte / dt;
  for (int it = 0; it < config_.solver_iterations; ++it) {
    for (const JointRow& j : jrows) {
      if (!j.active) continue;
      solve_joint_linear(pseudo, j, -bias * j.error);
      solve_joint_angular(pseudo, j, j.t1, j.k1, -bias * j.axis_error.dot(j.t1));
      solve_joint_angular(pseudo, j, j.t2, j.k2, -bias * j.axis_error.dot(j.t2));
    }
    for (ContactRow& r : rows) {
      const double depth = -r.gap - config_.slop;
      if (depth <= 0.0 || r.mass_n <= 0.0) continue;
      const double vn = relative_velocity(pseudo, r.a, r.b, r.ra, r.rb).dot(r.n);
      const double old = r.jp;
      r.jp = std::max(0.0, r.jp + r.mass_n * (bias * depth - vn));
      const Vec3 p = (r.jp - old) * r.n;
      pseudo.apply(r.a, p, r.ra);
      pseudo.apply(r.b, -p, r.rb);
    }
  }

  touched_.clear();
  warm_.clear();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    warm_[contacts_[k].feature] = {rows[k].jn, rows[k].jt1 * rows[k].t1 + rows[k].jt2 * rows[k].t2};
    contacts_[k].normal_impulse = rows[k].jn;
    if (rows[k].jn > 0.0) touched_.insert(std::minmax(rows[k].a, rows[k].b));
  }

  for (std::size_t i = 0; i < n; ++i) {
    RigidBody& b = bodies_[i];
    if (b.motion == Motion::Static) continue;
    if (b.movable()) {
      b.velocity = real.v[i];
      b.angular_velocity = real.w[i];
    }
    const Vec3 v = b.velocity + pseudo.v[i];
    const Vec3 w = b.angular_velocity + pseudo.w[i];
    b.position += dt * v;
    Quat spin(0.0, w.x(), w.y(), w.z());
    Quat dq = spin * b.orientation;
    b.orientation.coeffs() += 0.5 * dt * dq.coeffs();
    b.orientation.normalize();
    if (b.movable() && (!std::isfinite(b.velocity.norm()) || b.velocity.norm() > config_.divergence_speed ||
                        !std::isfinite(b.position.norm()))) {
      diverged_ = true;
    }
  }
  time_ += dt;
}

double World::energy() const {
  double e = 0.0;
  for (const RigidBody& b : bodies_) {
    if (!b.movable()) continue;
    e += b.kinetic_energy();
    if (b.gravity) e += b.mass * config_.gravity * b.position.z();
  }
  return e;
}

Vec3 World::momentum() const {
  Vec3 p = Vec3::Zero();
  for (const RigidBody& b : bodies_) {
    if (b.movable()) p += b.mass * b.velocity;
  }
  return p;
}

}  // namespace craft
