#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "craft/assembler.hpp"
#include "craft/geometry.hpp"

namespace craft {

struct Overlap {
  double depth = 0.0;  // smallest world-axis extent of the base-primitive overlap, m
  Vec3 witness = Vec3::Zero();
};

// Penetration of `a` and `b` deeper than `tolerance`, ignoring any part of the
// overlap that lies inside a hole of either solid. Touching faces never count.
std::optional<Overlap> pair_overlap(const Solid& a, const Solid& b, double tolerance = kContactTolerance);

struct CollisionPair {
  std::string a;
  std::string b;
  double depth_m = 0.0;
  Vec3 point = Vec3::Zero();
};

struct CollisionReport {
  std::vector<CollisionPair> pairs;  // sorted by (a, b), a < b
  bool ok() const { return pairs.empty(); }
};

CollisionReport validate_collisions(const Assembly& assembly);
nlohmann::json to_json(const CollisionReport& report);

}  // namespace craft
