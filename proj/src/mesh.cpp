#include "craft/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <Eigen/Geometry>

#include "craft/errors.hpp"

namespace craft {

Aabb TriangleMesh::bounds() const {
  Aabb box{Vec3::Constant(std::numeric_limits<double>::infinity()),
           Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (const Vec3& v : vertices) {
    box.lo = box.lo.cwiseMin(v);
    box.hi = box.hi.cwiseMax(v);
  }
  return box;
}

double TriangleMesh::triangle_area(std::size_t t) const {
  const auto& f = triangles[t];
  return 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
}

double TriangleMesh::area() const {
  double a = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) a += triangle_area(t);
  return a;
}

double TriangleMesh::signed_volume() const {
  double v = 0.0;
  for (const auto& f : triangles) v += vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]]));
  return v / 6.0;
}

void TriangleMesh::append(const TriangleMesh& other) {
  const int base = static_cast<int>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& f : other.triangles) triangles.push_back({f[0] + base, f[1] + base, f[2] + base});
}

TriangleMesh TriangleMesh::transformed(const Vec3& offset, double scale) const {
  TriangleMesh out = *this;
  for (Vec3& v : out.vertices) v = scale * (v + offset);
  return out;
}

bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) return false;
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[k];
      const int b = f[(k + 1) % 3];
      if (a == b) return false;
      if (++directed[{a, b}] > 1) return false;
    }
  }
  for (const auto& [edge, count] : directed) {
    if (!directed.count({edge.second, edge.first})) return false;
  }
  return true;
}

// ---------------------------------------------------------------- OBJ

namespace {

int resolve_index(const std::string& token, std::size_t vertex_count, int line) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoi(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw ParseError("OBJ line " + std::to_string(line) + ": bad face index '" + token + "'");
  }
  const long resolved = idx < 0 ? static_cast<long>(vertex_count) + idx : idx - 1;
  if (idx == 0 || resolved < 0 || resolved >= static_cast<long>(vertex_count)) {
    throw ParseError("OBJ line " + std::to_string(line) + ": face index out of range");
  }
  return static_cast<int>(resolved);
}

}  // namespace

TriangleMesh parse_obj(std::string_view text) {
  TriangleMesh mesh;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::istringstream ls(raw);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw ParseError("OBJ line " + std::to_string(line) + ": bad vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string token;
      while (ls >> token) face.push_back(resolve_index(token, mesh.vertices.size(), line));
      if (face.size() < 3) throw ParseError("OBJ line " + std::to_string(line) + ": face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < face.size(); ++k) mesh.triangles.push_back({face[0], face[k], face[k + 1]});
    }
  }
  std::erase_if(mesh.triangles, [&](const std::array<int, 3>& f) {
    return 0.5 * (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]).norm() <
           1e-12;
  });
  if (mesh.triangles.empty()) throw EmptyMesh("OBJ contains no non-degenerate triangles");
  return mesh;
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str());
}

void write_obj(std::ostream& out, const std::vector<NamedMesh>& objects) {
  std::size_t base = 1;
  char buf[128];
  for (const NamedMesh& obj : objects) {
    out << "o " << obj.name << '\n';
    for (const Vec3& v : obj.mesh.vertices) {
      std::snprintf(buf, sizeof buf, "v %.10g %.10g %.10g\n", v.x(), v.y(), v.z());
      out << buf;
    }
    for (const auto& f : obj.mesh.triangles) {
      out << "f " << f[0] + base << ' ' << f[1] + base << ' ' << f[2] + base << '\n';
    }
    base += obj.mesh.vertices.size();
  }
}

void save_obj(const std::filesystem::path& path, const std::vector<NamedMesh>& objects) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_obj(out, objects);
}

// ---------------------------------------------------------------- BSP CSG

namespace {

constexpr double kPlaneEps = 1e-9;
constexpr double kWeldEps = 1e-8;

struct Plane {
  Vec3 n = Vec3::UnitZ();
  double w = 0.0;
};

struct Polygon {
  std::vector<Vec3> v;
  Plane plane;
};

Polygon make_polygon(std::vector<Vec3> v) {
  // Newell normal: robust for any convex loop.
  Vec3 n = Vec3::Zero();
  for (std::size_t i = 0; i < v.size(); ++i) n += v[i].cross(v[(i + 1) % v.size()]);
  n.normalize();
  Polygon p{std::move(v), {}};
  p.plane = {n, n.dot(p.v[0])};
  return p;
}

void flip(Polygon& p) {
  std::reverse(p.v.begin(), p.v.end());
  p.plane.n = -p.plane.n;
  p.plane.w = -p.plane.w;
}

enum : int { kCoplanar = 0, kFront = 1, kBack = 2, kSpanning = 3 };

void split(const Plane& plane, const Polygon& poly, std::vector<Polygon>& coplanar_front,
           std::vector<Polygon>& coplanar_back, std::vector<Polygon>& front, std::vector<Polygon>& back) {
  int poly_type = 0;
  std::vector<int> types(poly.v.size());
  for (std::size_t i = 0; i < poly.v.size(); ++i) {
    const double t = plane.n.dot(poly.v[i]) - plane.w;
    types[i] = t < -kPlaneEps ? kBack : (t > kPlaneEps ? kFront : kCoplanar);
    poly_type |= types[i];
  }
  switch (poly_type) {
    case kCoplanar:
      (plane.n.dot(poly.plane.n) > 0 ? coplanar_front : coplanar_back).push_back(poly);
      return;
    case kFront: front.push_back(poly); return;
    case kBack: back.push_back(poly); return;
    default: break;
  }
  std::vector<Vec3> f;
  std::vector<Vec3> b;
  const std::size_t n = poly.v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const int ti = types[i];
    const int tj = types[j];
    const Vec3& vi = poly.v[i];
    const Vec3& vj = poly.v[j];
    if (ti != kBack) f.push_back(vi);
    if (ti != kFront) b.push_back(vi);
    if ((ti | tj) == kSpanning) {
      const double t = (plane.w - plane.n.dot(vi)) / plane.n.dot(vj - vi);
      const Vec3 v = vi + t * (vj - vi);
      f.push_back(v);
      b.push_back(v);
    }
  }
  if (f.size() >= 3) front.push_back({std::move(f), poly.plane});
  if (b.size() >= 3) back.push_back({std::move(b), poly.plane});
}

class BspNode {
 public:
  explicit BspNode(const std::vector<Polygon>& polygons = {}) { build(polygons); }

  void invert() {
    for (Polygon& p : polygons_) flip(p);
    if (plane_) {
      plane_->n = -plane_->n;
      plane_->w = -plane_->w;
    }
    if (front_) front_->invert();
    if (back_) back_->invert();
    std::swap(front_, back_);
  }

  std::vector<Polygon> clip_polygons(const std::vector<Polygon>& polygons) const {
    if (!plane_) return polygons;
    std::vector<Polygon> f;
    std::vector<Polygon> b;
    for (const Polygon& p : polygons) split(*plane_, p, f, b, f, b);
    if (front_) f = front_->clip_polygons(f);
    if (back_) {
      b = back_->clip_polygons(b);
    } else {
      b.clear();
    }
    f.insert(f.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
    return f;
  }

  void clip_to(const BspNode& other) {
    polygons_ = other.clip_polygons(polygons_);
    if (front_) front_->clip_to(other);
    if (back_) back_->clip_to(other);
  }

  void all_polygons(std::vector<Polygon>& out) const {
    out.insert(out.end(), polygons_.begin(), polygons_.end());
    if (front_) front_->all_polygons(out);
    if (back_) back_->all_polygons(out);
  }

  void build(const std::vector<Polygon>& polygons) {
    if (polygons.empty()) return;
    if (!plane_) plane_ = polygons.front().plane;
    std::vector<Polygon> f;
    std::vector<Polygon> b;
    for (const Polygon& p : polygons) split(*plane_, p, polygons_, polygons_, f, b);
    if (!f.empty()) {
      if (!front_) front_ = std::make_unique<BspNode>();
      front_->build(f);
    }
    if (!b.empty()) {
      if (!back_) back_ = std::make_unique<BspNode>();
      back_->build(b);
    }
  }

 private:
  std::optional<Plane> plane_;
  std::vector<Polygon> polygons_;
  std::unique_ptr<BspNode> front_;
  std::unique_ptr<BspNode> back_;
};

std::vector<Polygon> subtract(const std::vector<Polygon>& a_polys, const std::vector<Polygon>& b_polys) {
  BspNode a(a_polys);
  BspNode b(b_polys);
  a.invert();
  a.clip_to(b);
  b.clip_to(a);
  b.invert();
  b.clip_to(a);
  b.invert();
  std::vector<Polygon> rest;
  b.all_polygons(rest);
  a.build(rest);
  a.invert();
  std::vector<Polygon> out;
  a.all_polygons(out);
  return out;
}

std::vector<Polygon> primitive_polygons(const Primitive& p, int segments) {
  std::vector<Polygon> out;
  if (p.kind == PrimKind::Box) {
    for (int k = 0; k < 3; ++k) {
      const int u = (k + 1) % 3;
      const int w = (k + 2) % 3;
      for (int s : {-1, 1}) {
        std::vector<Vec3> quad;
        // (u, w) corners counter-clockwise about +k; reversed for the low face
        const int su[4] = {-1, 1, 1, -1};
        const int sw[4] = {-1, -1, 1, 1};
        for (int c = 0; c < 4; ++c) {
          Vec3 v = p.center;
          v[k] += s * p.half[k];
          v[u] += su[c] * p.half[u];
          v[w] += sw[c] * p.half[w];
          quad.push_back(v);
        }
        if (s < 0) std::reverse(quad.begin(), quad.end());
        out.push_back(make_polygon(std::move(quad)));
      }
    }
    return out;
  }
  const int k = index(p.axis);
  const int u = (k + 1) % 3;  // (u, w, k) is right-handed
  const int w = (k + 2) % 3;
  const double r = p.radius();
  const double h = p.half_length();
  std::vector<Vec3> ring;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    Vec3 v = p.center;
    v[u] += r * std::cos(a);
    v[w] += r * std::sin(a);
    ring.push_back(v);
  }
  auto lift = [&](const Vec3& v, double s) {
    Vec3 q = v;
    q[k] += s * h;
    return q;
  };
  std::vector<Vec3> top;
  std::vector<Vec3> bottom;
  for (int i = 0; i < segments; ++i) {
    top.push_back(lift(ring[i], 1.0));
    bottom.push_back(lift(ring[segments - 1 - i], -1.0));
    const Vec3& a = ring[i];
    const Vec3& b = ring[(i + 1) % segments];
    out.push_back(make_polygon({lift(a, -1.0), lift(b, -1.0), lift(b, 1.0), lift(a, 1.0)}));
  }
  out.push_back(make_polygon(std::move(top)));
  out.push_back(make_polygon(std::move(bottom)));
  return out;
}

// Holes that end on the owner's boundary are pushed past it so that the
// subtraction never meets coplanar caps.
Primitive extend_hole(const Primitive& hole, const Primitive& owner) {
  const Aabb ob = owner.aabb();
  const double pad = 1e-3 + 0.01 * owner.half.maxCoeff();
  Aabb hb = hole.aabb();
  const int k = hole.kind == PrimKind::Cylinder ? index(hole.axis) : -1;
  for (int a = 0; a < 3; ++a) {
    if (k >= 0 && a != k) continue;
    if (hb.lo[a] <= ob.lo[a] + kWeldEps) hb.lo[a] = ob.lo[a] - pad;
    if (hb.hi[a] >= ob.hi[a] - kWeldEps) hb.hi[a] = ob.hi[a] + pad;
  }
  if (hole.kind == PrimKind::Box) return Primitive::box(hb.center(), 0.5 * hb.size());
  return Primitive::cylinder(hb.center(), hole.axis, hole.radius(), 0.5 * hb.size()[k]);
}

class Welder {
 public:
  int add(const Vec3& p) {
    const Key key = key_of(p);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find({key[0] + dx, key[1] + dy, key[2] + dz});
          if (it == cells_.end()) continue;
          for (int id : it->second) {
            if ((points_[id] - p).norm() <= kWeldEps) return id;
          }
        }
      }
    }
    const int id = static_cast<int>(points_.size());
    points_.push_back(p);
    cells_[key].push_back(id);
    return id;
  }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  using Key = std::array<long long, 3>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<long long>()(k[0] * 73856093LL ^ k[1] * 19349663LL ^ k[2] * 83492791LL);
    }
  };
  static Key key_of(const Vec3& p) {
    return {std::llround(std::floor(p.x() / kWeldEps)), std::llround(std::floor(p.y() / kWeldEps)),
            std::llround(std::floor(p.z() / kWeldEps))};
  }
  std::vector<Vec3> points_;
  std::unordered_map<Key, std::vector<int>, KeyHash> cells_;
};

// Welds vertices, splits edges at vertices lying on them (the T-junctions
// left by BSP splitting) and triangulates.
TriangleMesh to_mesh(const std::vector<Polygon>& polygons) {
  Welder welder;
  std::vector<std::vector<int>> loops;
  for (const Polygon& p : polygons) {
    std::vector<int> loop;
    for (const Vec3& v : p.v) {
      const int id = welder.add(v);
      if (loop.empty() || loop.back() != id) loop.push_back(id);
    }
    while (loop.size() > 1 && loop.front() == loop.back()) loop.pop_back();
    if (loop.size() >= 3) loops.push_back(std::move(loop));
  }
  const std::vector<Vec3>& pts = welder.points();
  std::vector<int> by_x(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) by_x[i] = static_cast<int>(i);
  std::sort(by_x.begin(), by_x.end(), [&](int a, int b) { return pts[a].x() < pts[b].x(); });

  TriangleMesh mesh;
  mesh.vertices = pts;
  for (const std::vector<int>& loop : loops) {
    std::vector<int> full;
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const int a = loop[i];
      const int b = loop[(i + 1) % loop.size()];
      full.push_back(a);
      const Vec3 d = pts[b] - pts[a];
      const double len2 = d.squaredNorm();
      const double lo = std::min(pts[a].x(), pts[b].x()) - kWeldEps;
      const double hi = std::max(pts[a].x(), pts[b].x()) + kWeldEps;
      auto first = std::lower_bound(by_x.begin(), by_x.end(), lo, [&](int id, double x) { return pts[id].x() < x; });
      std::vector<std::pair<double, int>> inner;
      for (auto it = first; it != by_x.end() && pts[*it].x() <= hi; ++it) {
        const int c = *it;
        if (c == a || c == b) continue;
        const double t = (pts[c] - pts[a]).dot(d) / len2;
        if (t <= 0.0 || t >= 1.0) continue;
        if ((pts[a] + t * d - pts[c]).norm() <= kWeldEps) inner.emplace_back(t, c);
      }
      std::sort(inner.begin(), inner.end());
      for (const auto& [t, c] : inner) full.push_back(c);
    }
    if (full.size() == 3) {
      mesh.triangles.push_back({full[0], full[1], full[2]});
      continue;
    }
    if (full.size() == loop.size()) {
      for (std::size_t k = 1; k + 1 < full.size(); ++k) mesh.triangles.push_back({full[0], full[k], full[k + 1]});
      continue;
    }
    // Collinear runs: fan from the centroid so no triangle degenerates.
    Vec3 c = Vec3::Zero();
    for (int id : loop) c += pts[id];
    c /= static_cast<double>(loop.size());
    const int ci = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(c);
    for (std::size_t k = 0; k < full.size(); ++k) {
      mesh.triangles.push_back({ci, full[k], full[(k + 1) % full.size()]});
    }
  }
  return mesh;
}

}  // namespace

TriangleMesh primitive_mesh(const Primitive& p, int segments) { return to_mesh(primitive_polygons(p, segments)); }

TriangleMesh solid_mesh(const Solid& solid, int segments) {
  std::vector<Polygon> polys = primitive_polygons(solid.base, segments);
  for (const Primitive& hole : solid.holes) {
    polys = subtract(polys, primitive_polygons(extend_hole(hole, solid.base), segments));
  }
  return to_mesh(polys);
}

std::vector<NamedMesh> assembly_meshes(const Assembly& assembly, int segments) {
  std::vector<NamedMesh> out;
  for (const PlacedPart& part : assembly.parts) out.push_back({part.name(), solid_mesh(part.solid(), segments)});
  return out;
}

TriangleMesh combined_mesh(const std::vector<NamedMesh>& parts) {
  TriangleMesh all;
  for (const NamedMesh& m : parts) all.append(m.mesh);
  return all;
}

}  // namespace craft
