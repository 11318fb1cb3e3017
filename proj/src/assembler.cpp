#include "craft/assembler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

namespace craft {

using nlohmann::json;

namespace {

double side_sign(Side s) { return static_cast<double>(static_cast<int>(s)); }

// Hole geometry relative to its owner's center.
struct LocalHole {
  std::string modification;
  Axis axis = Axis::Z;
  Vec3 offset = Vec3::Zero();
  bool cylindrical = true;
  double radius = 0.0;
  double side = 0.0;
  double depth = 0.0;
  bool through = false;

  Vec3 half() const {
    Vec3 h = Vec3::Constant(cylindrical ? radius : 0.5 * side);
    h[index(axis)] = 0.5 * depth;
    return h;
  }
};

struct PartInfo {
  const PartSpec* spec = nullptr;
  const ObjectType* object = nullptr;
  ResolvedOrientation orientation;
  Vec3 half = Vec3::Zero();
  std::vector<LocalHole> holes;

  const LocalHole* hole(std::string_view name) const {
    for (const auto& h : holes) {
      if (h.modification == name) return &h;
    }
    return nullptr;
  }
};

LocalHole carve(const ModificationSpec& mod, const PartInfo& owner, const std::vector<const PartInfo*>& inserters) {
  LocalHole hole;
  hole.modification = mod.name;
  hole.axis = mod.hole_axis();
  const Vec3& extent = owner.orientation.extents;
  for (int a = 0; a < 3; ++a) {
    const HoleAlign& align = mod.align[a];
    if (align.through) {
      switch (align.span) {
        case HoleSpan::Full:
          hole.depth = extent[a];
          hole.through = true;
          break;
        case HoleSpan::HalfFromHigh:
          hole.depth = 0.5 * extent[a];
          hole.offset[a] = 0.25 * extent[a];
          break;
        case HoleSpan::HalfFromLow:
          hole.depth = 0.5 * extent[a];
          hole.offset[a] = -0.25 * extent[a];
          break;
      }
    } else {
      hole.offset[a] = side_sign(align.position) * 0.25 * extent[a];
    }
  }

  auto [u, v] = transverse_axes(hole.axis);
  double width = 0.0;
  bool any_cylinder = false;
  for (const PartInfo* ins : inserters) {
    width = std::max({width, ins->orientation.extents[u], ins->orientation.extents[v]});
    any_cylinder = any_cylinder || ins->orientation.shape == Shape::Cylinder;
  }
  if (inserters.empty()) {
    hole.cylindrical = true;
    hole.radius = kDefaultHoleRadius;
  } else if (any_cylinder) {
    hole.cylindrical = true;
    hole.radius = 0.5 * width + kHoleClearance;
  } else {
    hole.cylindrical = false;
    hole.side = width + 2.0 * kHoleClearance;
  }

  Vec3 lo = hole.offset - hole.half();
  Vec3 hi = hole.offset + hole.half();
  if ((lo.array() < -owner.half.array() - 1e-9).any() || (hi.array() > owner.half.array() + 1e-9).any()) {
    throw PlacementError(std::string(placement_codes::kHoleExceedsOwner), owner.spec->name, "",
                         owner.spec->name + "." + mod.name + " does not fit inside " + owner.spec->name);
  }
  return hole;
}

// Center of `current` given a SURFACE connection of `current` onto a placed
// `target`. Written as (t + s*ht) - s*hc so mirrored plans mirror exactly.
Vec3 surface_center(const ConnectionSpec& conn, const Vec3& hc, const Vec3& t, const Vec3& ht) {
  Vec3 c = Vec3::Zero();
  const int n = index(conn.to_face.axis);
  const double s = side_sign(conn.to_face.side);
  c[n] = (t[n] - s * ht[n]) - s * hc[n];
  for (int k = 0; k < 3; ++k) {
    if (k == n) continue;
    const double a = side_sign(conn.align[k]);
    c[k] = a == 0.0 ? t[k] : (t[k] + a * ht[k]) - a * hc[k];
  }
  return c;
}

// Inverse of surface_center: the target's center given the placed current part.
Vec3 surface_target_center(const ConnectionSpec& conn, const Vec3& c, const Vec3& hc, const Vec3& ht) {
  Vec3 t = Vec3::Zero();
  const int n = index(conn.to_face.axis);
  const double s = side_sign(conn.to_face.side);
  t[n] = (c[n] + s * hc[n]) + s * ht[n];
  for (int k = 0; k < 3; ++k) {
    if (k == n) continue;
    const double a = side_sign(conn.align[k]);
    t[k] = a == 0.0 ? c[k] : (c[k] + a * hc[k]) - a * ht[k];
  }
  return t;
}

std::string describe(const PartSpec& part, const ConnectionSpec& conn) {
  return part.name + " -> " + conn.to_part;
}

}  // namespace

ResolvedOrientation resolve_orientation(const PartSpec& spec, const ObjectType& obj) {
  ResolvedOrientation out;
  out.shape = obj.shape;
  if (obj.shape == Shape::Cuboid) {
    const auto& dims = std::get<std::array<double, 3>>(spec.orientation);
    for (int a = 0; a < 3; ++a) out.extents[a] = dims[a] * kMmToM;
    out.axis = Axis::Z;
    return out;
  }
  out.axis = std::get<Axis>(spec.orientation);
  out.extents = Vec3::Constant(2.0 * obj.radius_mm() * kMmToM);
  out.extents[index(out.axis)] = obj.length_mm() * kMmToM;
  return out;
}

Solid PlacedPart::solid() const {
  Solid s{base, {}};
  for (const HoleRegion& h : holes) s.holes.push_back(h.primitive());
  return s;
}

const HoleRegion* PlacedPart::find_hole(std::string_view modification) const {
  for (const HoleRegion& h : holes) {
    if (h.modification == modification) return &h;
  }
  return nullptr;
}

const PlacedPart* Assembly::find(std::string_view name) const {
  std::size_t i = index_of(name);
  return i < parts.size() ? &parts[i] : nullptr;
}

std::size_t Assembly::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].name() == name) return i;
  }
  return parts.size();
}

Aabb Assembly::bounds() const {
  Aabb box = parts.front().aabb();
  for (const PlacedPart& p : parts) box = box.merge(p.aabb());
  return box;
}

json PlacementError::to_json() const {
  return {{"code", code_}, {"part", part_}, {"to_part", to_part_}, {"message", what()}};
}

Assembly build_assembly(const CraftPlan& plan, const Catalog& catalog) {
  const std::size_t n = plan.parts.size();
  std::vector<PartInfo> info(n);
  std::map<std::string, std::size_t, std::less<>> by_name;
  for (std::size_t i = 0; i < n; ++i) {
    info[i].spec = &plan.parts[i];
    info[i].object = &catalog.lookup(plan.parts[i].available_obj);
    info[i].orientation = resolve_orientation(plan.parts[i], *info[i].object);
    info[i].half = 0.5 * info[i].orientation.extents;
    by_name.emplace(plan.parts[i].name, i);
  }

  // Holes depend only on their owner and inserters, so carve them up front.
  std::map<std::pair<std::size_t, std::string>, std::vector<const PartInfo*>> inserters;
  for (std::size_t i = 0; i < n; ++i) {
    for (const ConnectionSpec& conn : plan.parts[i].connections) {
      if (conn.contact == ContactType::Inserted) {
        inserters[{by_name.at(conn.to_part), conn.to_modification}].push_back(&info[i]);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const ModificationSpec& mod : plan.parts[i].modifications) {
      auto it = inserters.find({i, mod.name});
      static const std::vector<const PartInfo*> none;
      info[i].holes.push_back(carve(mod, info[i], it == inserters.end() ? none : it->second));
    }
  }

  std::vector<std::optional<Vec3>> center(n);
  center[0] = Vec3(0.0, 0.0, info[0].half.z());

  auto try_place = [&](std::size_t i) -> bool {
    const PartSpec& part = plan.parts[i];
    for (const ConnectionSpec& conn : part.connections) {
      std::size_t j = by_name.at(conn.to_part);
      if (!center[j]) continue;
      if (conn.contact == ContactType::Surface) {
        center[i] = surface_center(conn, info[i].half, *center[j], info[j].half);
      } else {
        center[i] = *center[j] + info[j].hole(conn.to_modification)->offset;
      }
      return true;
    }
    // Connections declared by placed parts towards this one.
    for (std::size_t j = 0; j < n; ++j) {
      if (!center[j]) continue;
      for (const ConnectionSpec& conn : plan.parts[j].connections) {
        if (conn.to_part != part.name) continue;
        if (conn.contact == ContactType::Surface) {
          center[i] = surface_target_center(conn, *center[j], info[j].half, info[i].half);
        } else {
          center[i] = *center[j] - info[i].hole(conn.to_modification)->offset;
        }
        return true;
      }
    }
    return false;
  };

  for (bool progress = true; progress;) {
    progress = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!center[i] && try_place(i)) progress = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!center[i]) {
      throw PlacementError(std::string(placement_codes::kUnplaceable), plan.parts[i].name, "",
                           plan.parts[i].name + " has no connection path to " + plan.parts[0].name);
    }
  }

  // Every declared connection must hold geometrically.
  for (std::size_t i = 0; i < n; ++i) {
    const PartSpec& part = plan.parts[i];
    for (const ConnectionSpec& conn : part.connections) {
      std::size_t j = by_name.at(conn.to_part);
      const Vec3& c = *center[i];
      const Vec3& t = *center[j];
      const Vec3& hc = info[i].half;
      const Vec3& ht = info[j].half;
      bool ok = true;
      std::string why;
      if (conn.contact == ContactType::Surface) {
        const int a = index(conn.to_face.axis);
        const double s = side_sign(conn.to_face.side);
        if (std::abs((c[a] + s * hc[a]) - (t[a] - s * ht[a])) > kContactTolerance) {
          ok = false;
          why = "faces are not coplanar";
        }
        for (int k = 0; k < 3 && ok; ++k) {
          if (k == a) continue;
          double overlap = std::min(c[k] + hc[k], t[k] + ht[k]) - std::max(c[k] - hc[k], t[k] - ht[k]);
          if (overlap <= kContactTolerance) {
            ok = false;
            why = "faces do not overlap";
          }
        }
      } else {
        const LocalHole& hole = *info[j].hole(conn.to_modification);
        if (info[i].orientation.shape == Shape::Cylinder && info[i].orientation.axis != hole.axis) {
          ok = false;
          why = "cylinder axis differs from the hole axis";
        } else {
          Vec3 hole_center = t + hole.offset;
          auto [u, v] = transverse_axes(hole.axis);
          if (std::abs(c[u] - hole_center[u]) > kContactTolerance ||
              std::abs(c[v] - hole_center[v]) > kContactTolerance) {
            ok = false;
            why = "part is not centered on the hole axis";
          }
        }
      }
      if (!ok) {
        throw PlacementError(std::string(placement_codes::kInconsistentConnection), part.name, conn.to_part,
                             describe(part, conn) + ": " + why);
      }
    }
  }

  double min_z = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) min_z = std::min(min_z, center[i]->z() - info[i].half.z());
  const Vec3 drop(0.0, 0.0, -min_z);

  Assembly assembly;
  for (std::size_t i = 0; i < n; ++i) {
    PlacedPart placed;
    placed.spec = plan.parts[i];
    placed.object = *info[i].object;
    const Vec3 c = *center[i] + drop;
    if (info[i].orientation.shape == Shape::Cuboid) {
      placed.base = Primitive::box(c, info[i].half);
    } else {
      const Axis axis = info[i].orientation.axis;
      placed.base = Primitive::cylinder(c, axis, info[i].half[transverse_axes(axis).first],
                                        info[i].half[index(axis)]);
    }
    for (const LocalHole& h : info[i].holes) {
      HoleRegion region;
      region.owner = plan.parts[i].name;
      region.modification = h.modification;
      region.axis = h.axis;
      region.center = c + h.offset;
      region.cylindrical = h.cylindrical;
      region.radius = h.radius;
      region.side = h.side;
      region.depth = h.depth;
      region.through = h.through;
      placed.holes.push_back(std::move(region));
    }
    if (placed.base.aabb().lo.z() <= 1e-9) assembly.ground.push_back(placed.name());
    assembly.parts.push_back(std::move(placed));
  }
  for (const PartSpec& part : plan.parts) {
    for (const ConnectionSpec& conn : part.connections) assembly.edges.push_back({part.name, conn.to_part, conn});
  }
  return assembly;
}

namespace {

std::vector<std::vector<std::string>> components(const std::vector<std::string>& names,
                                                 const std::vector<std::pair<std::string, std::string>>& links) {
  std::vector<std::size_t> parent(names.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto pos = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
  };
  for (const auto& [a, b] : links) {
    std::size_t ia = pos(a), ib = pos(b);
    if (ia == names.size() || ib == names.size()) continue;
    std::size_t ra = find(ia), rb = find(ib);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::map<std::size_t, std::vector<std::string>> groups;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::size_t r = find(i);
    if (!groups.contains(r)) order.push_back(r);
    groups[r].push_back(names[i]);
  }
  std::vector<std::vector<std::string>> out;
  for (std::size_t r : order) out.push_back(std::move(groups[r]));
  return out;
}

}  // namespace

ConnectivityReport connectivity_check(const Assembly& assembly) {
  std::vector<std::string> names;
  for (const PlacedPart& p : assembly.parts) names.push_back(p.name());
  std::vector<std::pair<std::string, std::string>> links;
  for (const Edge& e : assembly.edges) links.emplace_back(e.from, e.to);
  return {components(names, links)};
}

ConnectivityReport plan_connectivity(const CraftPlan& plan) {
  std::vector<std::string> names;
  std::vector<std::pair<std::string, std::string>> links;
  for (const PartSpec& p : plan.parts) {
    names.push_back(p.name);
    for (const ConnectionSpec& c : p.connections) links.emplace_back(p.name, c.to_part);
  }
  return {components(names, links)};
}

json to_json(const ConnectivityReport& report) {
  return {{"ok", report.ok()}, {"components", report.components}};
}

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

json assembly_to_json(const Assembly& assembly) {
  json parts = json::array();
  for (const PlacedPart& p : assembly.parts) {
    json holes = json::array();
    for (const HoleRegion& h : p.holes) {
      json hole{{"modification", h.modification},
                {"axis", axis_name(h.axis)},
                {"center", vec_json(h.center)},
                {"depth", h.depth},
                {"through", h.through}};
      if (h.cylindrical) {
        hole["cross_section"] = "circle";
        hole["radius"] = h.radius;
      } else {
        hole["cross_section"] = "square";
        hole["side"] = h.side;
      }
      holes.push_back(std::move(hole));
    }
    json part{{"name", p.name()},
              {"object", p.object.id},
              {"shape", to_string(p.object.shape)},
              {"center", vec_json(p.base.center)},
              {"extents", vec_json(p.extents())},
              {"holes", std::move(holes)},
              {"exec_function", p.spec.exec_function}};
    if (p.base.kind == PrimKind::Cylinder) part["axis"] = axis_name(p.base.axis);
    parts.push_back(std::move(part));
  }
  json edges = json::array();
  for (const Edge& e : assembly.edges) {
    edges.push_back({{"from", e.from},
                     {"to", e.to},
                     {"contact", e.connection.contact == ContactType::Surface ? "SURFACE" : "INSERTED"},
                     {"joint", e.connection.joint == JointType::Fixed ? "FIXED" : "NON_FIXED"}});
  }
  return {{"parts", std::move(parts)}, {"edges", std::move(edges)}, {"ground", assembly.ground}};
}

}  // namespace craft
