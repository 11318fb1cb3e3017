#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "craft/catalog.hpp"
#include "craft/errors.hpp"
#include "craft/geometry.hpp"
#include "craft/plan.hpp"

namespace craft {

inline constexpr double kMmToM = 1e-3;
inline constexpr double kContactTolerance = 1e-6;  // m
inline constexpr double kHoleClearance = 1e-3;     // m
inline constexpr double kDefaultHoleRadius = 5e-3;  // m, hole with no inserter

struct ResolvedOrientation {
  Vec3 extents = Vec3::Zero();  // full world-axis extents, m
  Axis axis = Axis::Z;          // cylinder principal axis
  Shape shape = Shape::Cuboid;
};

ResolvedOrientation resolve_orientation(const PartSpec& spec, const ObjectType& obj);

struct PlacedPart {
  PartSpec spec;
  ObjectType object;
  Primitive base;
  std::vector<HoleRegion> holes;

  const std::string& name() const { return spec.name; }
  Vec3 extents() const { return 2.0 * base.half; }
  Aabb aabb() const { return base.aabb(); }
  Solid solid() const;
  const HoleRegion* find_hole(std::string_view modification) const;
};

// One plan connection: `from` declared it, pointing at `to`.
struct Edge {
  std::string from;
  std::string to;
  ConnectionSpec connection;
};

struct Assembly {
  std::vector<PlacedPart> parts;  // plan order
  std::vector<Edge> edges;        // plan order
  std::vector<std::string> ground;

  const PlacedPart* find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // parts.size() if absent
  Aabb bounds() const;
};

namespace placement_codes {
inline constexpr std::string_view kUnplaceable = "Unplaceable";
inline constexpr std::string_view kInconsistentConnection = "InconsistentConnection";
inline constexpr std::string_view kHoleExceedsOwner = "HoleExceedsOwner";
}  // namespace placement_codes

class PlacementError : public Error {
 public:
  PlacementError(std::string code, std::string part, std::string to_part, const std::string& message)
      : Error(message), code_(std::move(code)), part_(std::move(part)), to_part_(std::move(to_part)) {}

  const std::string& code() const { return code_; }
  const std::string& part() const { return part_; }
  const std::string& to_part() const { return to_part_; }
  nlohmann::json to_json() const;

 private:
  std::string code_;
  std::string part_;
  std::string to_part_;
};

// Places every part and drops the assembly onto the ground plane (min z = 0).
// Holes are carved before placement.
// Throws PlacementError.
Assembly build_assembly(const CraftPlan& plan, const Catalog& catalog);

struct ConnectivityReport {
  std::vector<std::vector<std::string>> components;  // each in plan order
  bool ok() const { return components.size() <= 1; }
};

ConnectivityReport connectivity_check(const Assembly& assembly);
// Same check on the declared connection graph alone.
ConnectivityReport plan_connectivity(const CraftPlan& plan);
nlohmann::json to_json(const ConnectivityReport& report);

nlohmann::json assembly_to_json(const Assembly& assembly);

}  // namespace craft
