#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "craft/assembler.hpp"
#include "craft/geometry.hpp"

namespace craft {

inline constexpr int kCylinderSegments = 64;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  Aabb bounds() const;  // over referenced and unreferenced vertices alike
  double area() const;
  double triangle_area(std::size_t t) const;
  double signed_volume() const;  // positive for outward-facing closed meshes
  void append(const TriangleMesh& other);
  TriangleMesh transformed(const Vec3& offset, double scale) const;  // scale * (p + offset)
};

// Each undirected edge is used by exactly two triangles, once in each
// direction.
bool is_watertight(const TriangleMesh& mesh);

// Wavefront OBJ: `v` and `f` records only; polygons are fan-triangulated and
// triangles with area below 1e-12 dropped. Throws ParseError, EmptyMesh.
TriangleMesh parse_obj(std::string_view text);
TriangleMesh load_mesh(const std::filesystem::path& path);  // also IoError

struct NamedMesh {
  std::string name;
  TriangleMesh mesh;
};

void write_obj(std::ostream& out, const std::vector<NamedMesh>& objects);
void save_obj(const std::filesystem::path& path, const std::vector<NamedMesh>& objects);

// Closed, outward-facing tessellation of a primitive.
TriangleMesh primitive_mesh(const Primitive& p, int segments = kCylinderSegments);
// Base primitive minus the holes via BSP boolean subtraction on the faceted
// shapes. Export only: collision and physics use the analytic solid.
TriangleMesh solid_mesh(const Solid& solid, int segments = kCylinderSegments);

// One mesh per part in plan order, named after the part.
std::vector<NamedMesh> assembly_meshes(const Assembly& assembly, int segments = kCylinderSegments);
TriangleMesh combined_mesh(const std::vector<NamedMesh>& parts);

}  // namespace craft
