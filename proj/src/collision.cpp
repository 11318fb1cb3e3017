#include "craft/collision.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <tuple>

namespace craft {

using nlohmann::json;

namespace {

constexpr double kEps = 1e-12;

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool empty() const { return hi < lo; }
  double clamp(double x) const { return std::clamp(x, lo, hi); }
};

// (x_p - cp)^2 + (x_q - cq)^2 <= r^2, p < q.
struct Disc {
  int p = 0;
  int q = 1;
  double cp = 0.0;
  double cq = 0.0;
  double r = 0.0;

  int axis() const { return 3 - p - q; }
  double center(int k) const { return k == p ? cp : cq; }
};

// Convex intersection of axis-aligned boxes and cylinders: three intervals
// plus the cross-section discs of the cylinders involved.
struct Piece {
  std::array<Interval, 3> iv;
  std::vector<Disc> discs;

  bool empty_intervals() const {
    return iv[0].empty() || iv[1].empty() || iv[2].empty();
  }
};

Piece piece_of(const Primitive& prim) {
  Piece piece;
  for (int a = 0; a < 3; ++a) piece.iv[a] = {prim.center[a] - prim.half[a], prim.center[a] + prim.half[a]};
  if (prim.kind == PrimKind::Cylinder) {
    auto [u, v] = transverse_axes(prim.axis);
    piece.discs.push_back({u, v, prim.center[u], prim.center[v], prim.radius()});
  }
  return piece;
}

Piece intersect(const Piece& a, const Piece& b) {
  Piece out;
  for (int k = 0; k < 3; ++k) out.iv[k] = {std::max(a.iv[k].lo, b.iv[k].lo), std::min(a.iv[k].hi, b.iv[k].hi)};
  out.discs = a.discs;
  out.discs.insert(out.discs.end(), b.discs.begin(), b.discs.end());
  return out;
}

using Vec2 = Eigen::Vector2d;

struct Circle {
  Vec2 c;
  double r;
};

// Finite superset of the extreme points of rect ∩ circles that maximize any
// axis-linear function or the distance from any of `targets`. Only points of
// the (closed) region are returned; an empty result means an empty region.
std::vector<Vec2> candidates_2d(const Interval& x, const Interval& y, const std::vector<Circle>& circles,
                                const std::vector<Vec2>& targets) {
  if (x.empty() || y.empty()) return {};
  std::vector<Vec2> cand{{x.lo, y.lo}, {x.lo, y.hi}, {x.hi, y.lo}, {x.hi, y.hi}};
  for (const Circle& c : circles) {
    for (double xv : {x.lo, x.hi}) {
      double d = xv - c.c.x();
      if (std::abs(d) <= c.r) {
        double s = std::sqrt(c.r * c.r - d * d);
        cand.emplace_back(xv, c.c.y() - s);
        cand.emplace_back(xv, c.c.y() + s);
      }
    }
    for (double yv : {y.lo, y.hi}) {
      double d = yv - c.c.y();
      if (std::abs(d) <= c.r) {
        double s = std::sqrt(c.r * c.r - d * d);
        cand.emplace_back(c.c.x() - s, yv);
        cand.emplace_back(c.c.x() + s, yv);
      }
    }
    cand.emplace_back(c.c.x() - c.r, c.c.y());
    cand.emplace_back(c.c.x() + c.r, c.c.y());
    cand.emplace_back(c.c.x(), c.c.y() - c.r);
    cand.emplace_back(c.c.x(), c.c.y() + c.r);
    for (const Vec2& t : targets) {
      Vec2 dir = c.c - t;
      double len = dir.norm();
      dir = len < 1e-15 ? Vec2(1.0, 0.0) : Vec2(dir / len);
      cand.push_back(c.c + c.r * dir);
    }
  }
  for (std::size_t i = 0; i < circles.size(); ++i) {
    for (std::size_t j = i + 1; j < circles.size(); ++j) {
      const Circle& a = circles[i];
      const Circle& b = circles[j];
      Vec2 d = b.c - a.c;
      double dist = d.norm();
      if (dist < 1e-15 || dist > a.r + b.r || dist < std::abs(a.r - b.r)) continue;
      double along = (a.r * a.r - b.r * b.r + dist * dist) / (2.0 * dist);
      double h = std::sqrt(std::max(0.0, a.r * a.r - along * along));
      Vec2 base = a.c + along * d / dist;
      Vec2 perp(-d.y() / dist, d.x() / dist);
      cand.push_back(base + h * perp);
      cand.push_back(base - h * perp);
    }
  }
  std::vector<Vec2> out;
  for (const Vec2& p : cand) {
    if (p.x() < x.lo - kEps || p.x() > x.hi + kEps || p.y() < y.lo - kEps || p.y() > y.hi + kEps) continue;
    bool inside = std::all_of(circles.begin(), circles.end(), [&](const Circle& c) {
      return (p - c.c).norm() <= c.r + kEps;
    });
    if (inside) out.push_back(p);
  }
  return out;
}

// Extreme points of two perpendicular cylinders (plus box limits). The axes of
// the cylinders are a1 and a2, w is the remaining axis: for fixed w the two
// remaining coordinates decouple into independent intervals.
class CrossedCylinders {
 public:
  CrossedCylinders(const Piece& piece, const Disc& d1, const Disc& d2) : piece_(piece), d1_(d1), d2_(d2) {
    a1_ = d1.axis();
    a2_ = d2.axis();
    w_ = 3 - a1_ - a2_;
    Interval w = piece.iv[w_];
    w.lo = std::max({w.lo, d1.center(w_) - d1.r, d2.center(w_) - d2.r});
    w.hi = std::min({w.hi, d1.center(w_) + d1.r, d2.center(w_) + d2.r});
    restrict(w, d1_, piece.iv[a2_], a2_);
    restrict(w, d2_, piece.iv[a1_], a1_);
    wrange_ = w;
  }

  bool empty() const { return wrange_.empty() || piece_.iv[a1_].empty() || piece_.iv[a2_].empty(); }

  std::vector<Vec3> points(const Primitive* hole) const {
    if (empty()) return {};
    std::vector<double> ws{wrange_.lo, wrange_.hi, wrange_.clamp(d1_.center(w_)), wrange_.clamp(d2_.center(w_))};
    add_breakpoints(ws, d1_, piece_.iv[a2_], a2_);
    add_breakpoints(ws, d2_, piece_.iv[a1_], a1_);
    if (hole && hole->kind == PrimKind::Cylinder) {
      const int ha = index(hole->axis);
      if (ha == a1_ || ha == a2_) {
        // The radial distance about a1 only involves (x_a2, w): maximize over
        // the projection rect(x_a2, w) ∩ disc1 (symmetrically for a2).
        const Disc& d = ha == a1_ ? d1_ : d2_;
        const int other = ha == a1_ ? a2_ : a1_;
        std::vector<Circle> circle{{Vec2(d.center(other), d.center(w_)), d.r}};
        Vec2 target(hole->center[other], hole->center[w_]);
        for (const Vec2& p : candidates_2d(piece_.iv[other], wrange_, circle, {target})) ws.push_back(p.y());
      } else {
        add_radial_about_w(ws, *hole);
      }
    }
    std::vector<Vec3> out;
    for (double w : ws) append_slice(out, w);
    return out;
  }

 private:
  static double half_chord(const Disc& d, int w_axis, double w) {
    double dw = w - d.center(w_axis);
    return std::sqrt(std::max(0.0, d.r * d.r - dw * dw));
  }

  // Narrows w to where the disc slice along `axis` meets `limit`.
  void restrict(Interval& w, const Disc& d, const Interval& limit, int axis) const {
    double c = d.center(axis);
    double tau = std::max(c - limit.hi, limit.lo - c);
    if (tau <= 0.0) return;
    if (tau > d.r) {
      w = {1.0, -1.0};
      return;
    }
    double reach = std::sqrt(d.r * d.r - tau * tau);
    w.lo = std::max(w.lo, d.center(w_) - reach);
    w.hi = std::min(w.hi, d.center(w_) + reach);
  }

  void add_breakpoints(std::vector<double>& ws, const Disc& d, const Interval& limit, int axis) const {
    for (double bound : {limit.lo, limit.hi}) {
      double off = bound - d.center(axis);
      if (std::abs(off) > d.r) continue;
      double reach = std::sqrt(d.r * d.r - off * off);
      for (double w : {d.center(w_) - reach, d.center(w_) + reach}) {
        if (w >= wrange_.lo && w <= wrange_.hi) ws.push_back(w);
      }
    }
  }

  std::pair<Interval, Interval> slice(double w) const {
    double s1 = half_chord(d1_, w_, w);
    double s2 = half_chord(d2_, w_, w);
    Interval j1 = piece_.iv[a1_];
    j1.lo = std::max(j1.lo, d2_.center(a1_) - s2);
    j1.hi = std::min(j1.hi, d2_.center(a1_) + s2);
    Interval j2 = piece_.iv[a2_];
    j2.lo = std::max(j2.lo, d1_.center(a2_) - s1);
    j2.hi = std::min(j2.hi, d1_.center(a2_) + s1);
    return {j1, j2};
  }

  void append_slice(std::vector<Vec3>& out, double w) const {
    auto [j1, j2] = slice(w);
    if (j1.hi < j1.lo - kEps || j2.hi < j2.lo - kEps) return;
    for (double x1 : {j1.lo, std::max(j1.lo, j1.hi)}) {
      for (double x2 : {j2.lo, std::max(j2.lo, j2.hi)}) {
        Vec3 p;
        p[a1_] = x1;
        p[a2_] = x2;
        p[w_] = w;
        out.push_back(p);
      }
    }
  }

  double radial_about_w(double w, const Primitive& hole) const {
    auto [j1, j2] = slice(w);
    double h1 = hole.center[a1_];
    double h2 = hole.center[a2_];
    double r1 = std::max(std::abs(j1.lo - h1), std::abs(j1.hi - h1));
    double r2 = std::max(std::abs(j2.lo - h2), std::abs(j2.hi - h2));
    return r1 * r1 + r2 * r2;
  }

  // No closed form: dense scan of w followed by golden-section refinement.
  void add_radial_about_w(std::vector<double>& ws, const Primitive& hole) const {
    constexpr int kSamples = 2048;
    const double span = wrange_.hi - wrange_.lo;
    int best = 0;
    double best_value = -1.0;
    for (int i = 0; i <= kSamples; ++i) {
      double w = wrange_.lo + span * i / kSamples;
      double value = radial_about_w(w, hole);
      if (value > best_value) {
        best_value = value;
        best = i;
      }
      ws.push_back(w);
    }
    double lo = wrange_.lo + span * std::max(0, best - 1) / kSamples;
    double hi = wrange_.lo + span * std::min(kSamples, best + 1) / kSamples;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 60; ++it) {
      double m1 = hi - g * (hi - lo);
      double m2 = lo + g * (hi - lo);
      if (radial_about_w(m1, hole) < radial_about_w(m2, hole)) {
        lo = m1;
      } else {
        hi = m2;
      }
    }
    ws.push_back(0.5 * (lo + hi));
  }

  const Piece& piece_;
  Disc d1_;
  Disc d2_;
  int a1_ = 0;
  int a2_ = 1;
  int w_ = 2;
  Interval wrange_;
};

// Finite subset of the closed piece containing the maximizers of every
// axis-linear function and, when `hole` is a cylinder, of the distance from
// the hole axis. Empty iff the piece is empty.
std::vector<Vec3> extreme_points(const Piece& piece, const Primitive* hole) {
  if (piece.empty_intervals()) return {};
  std::vector<Vec3> out;
  if (piece.discs.empty()) {
    for (int i = 0; i < 8; ++i) {
      out.emplace_back(i & 1 ? piece.iv[0].hi : piece.iv[0].lo, i & 2 ? piece.iv[1].hi : piece.iv[1].lo,
                       i & 4 ? piece.iv[2].hi : piece.iv[2].lo);
    }
    return out;
  }
  const Disc& first = piece.discs.front();
  bool coplanar = std::all_of(piece.discs.begin(), piece.discs.end(),
                              [&](const Disc& d) { return d.p == first.p && d.q == first.q; });
  if (coplanar) {
    const int p = first.p, q = first.q, a = first.axis();
    std::vector<Circle> circles;
    for (const Disc& d : piece.discs) circles.push_back({Vec2(d.cp, d.cq), d.r});
    std::vector<Vec2> targets;
    if (hole && hole->kind == PrimKind::Cylinder && index(hole->axis) == a) {
      targets.emplace_back(hole->center[p], hole->center[q]);
    }
    for (const Vec2& c : candidates_2d(piece.iv[p], piece.iv[q], circles, targets)) {
      for (double z : {piece.iv[a].lo, piece.iv[a].hi}) {
        Vec3 pt;
        pt[p] = c.x();
        pt[q] = c.y();
        pt[a] = z;
        out.push_back(pt);
      }
    }
    return out;
  }
  return CrossedCylinders(piece, piece.discs[0], piece.discs[1]).points(hole);
}

Aabb bounds_of(const std::vector<Vec3>& pts) {
  Aabb box{pts.front(), pts.front()};
  for (const Vec3& p : pts) box = box.merge({p, p});
  return box;
}

bool contained(const std::vector<Vec3>& pts, const Primitive& hole) {
  for (const Vec3& p : pts) {
    Vec3 d = (p - hole.center).cwiseAbs();
    if (hole.kind == PrimKind::Box) {
      if ((d.array() > hole.half.array() + kEps).any()) return false;
    } else {
      auto [u, v] = transverse_axes(hole.axis);
      if (d[index(hole.axis)] > hole.half_length() + kEps) return false;
      if (std::hypot(d[u], d[v]) > hole.radius() + kEps) return false;
    }
  }
  return true;
}

}  // namespace

std::optional<Overlap> pair_overlap(const Solid& a, const Solid& b, double tolerance) {
  const double t = 0.5 * tolerance;
  const Piece core = intersect(piece_of(a.base.offset(-t)), piece_of(b.base.offset(-t)));
  std::vector<Vec3> pts = extreme_points(core, nullptr);
  if (pts.empty()) return std::nullopt;

  std::vector<Primitive> holes;
  for (const Primitive& h : a.holes) holes.push_back(h.offset(t));
  for (const Primitive& h : b.holes) holes.push_back(h.offset(t));

  // Exempt when a single hole swallows the whole overlap. An overlap covered
  // only by the union of several holes is still reported.
  std::vector<Vec3> probes = pts;
  for (const Primitive& hole : holes) {
    std::vector<Vec3> hp = extreme_points(core, &hole);
    if (contained(hp, hole)) return std::nullopt;
    probes.insert(probes.end(), hp.begin(), hp.end());
  }

  Overlap out;
  const Piece full = intersect(piece_of(a.base), piece_of(b.base));
  const Aabb box = bounds_of(extreme_points(full, nullptr));
  out.depth = box.size().minCoeff();
  out.witness = bounds_of(pts).center();
  double best = -std::numeric_limits<double>::infinity();
  for (const Vec3& p : probes) {
    double clearance = std::numeric_limits<double>::infinity();
    for (const Primitive& hole : holes) clearance = std::min(clearance, hole.sdf(p));
    if (clearance > best) {
      best = clearance;
      out.witness = p;
    }
    if (holes.empty()) break;
  }
  return out;
}

CollisionReport validate_collisions(const Assembly& assembly) {
  std::vector<Solid> solids;
  for (const PlacedPart& p : assembly.parts) solids.push_back(p.solid());
  CollisionReport report;
  for (std::size_t i = 0; i < solids.size(); ++i) {
    for (std::size_t j = i + 1; j < solids.size(); ++j) {
      auto hit = pair_overlap(solids[i], solids[j]);
      if (!hit) continue;
      std::string a = assembly.parts[i].name();
      std::string b = assembly.parts[j].name();
      if (b < a) std::swap(a, b);
      report.pairs.push_back({a, b, hit->depth, hit->witness});
    }
  }
  std::sort(report.pairs.begin(), report.pairs.end(),
            [](const CollisionPair& x, const CollisionPair& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
  return report;
}

json to_json(const CollisionReport& report) {
  json pairs = json::array();
  for (const CollisionPair& p : report.pairs) {
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"depth_m", p.depth_m},
                     {"point", json::array({p.point.x(), p.point.y(), p.point.z()})}});
  }
  return {{"ok", report.ok()}, {"pairs", std::move(pairs)}};
}

}  // namespace craft
