#include <doctest.h>

#include <random>

#include "craft/assembler.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace craft;
using namespace craft::testing;
using nlohmann::json;

namespace {

const PlacedPart& part(const Assembly& a, std::string_view name) {
  const PlacedPart* p = a.find(name);
  REQUIRE(p != nullptr);
  return *p;
}

CraftPlan single(const std::string& text) { return plan_from_text(text); }

}  // namespace

TEST_CASE("resolve_orientation") {
  const Catalog& cat = default_catalog();
  PartSpec cyl;
  cyl.orientation = Axis::Z;
  auto r = resolve_orientation(cyl, cat.lookup("CYLINDER_R20_L100"));
  CHECK(r.extents.isApprox(Vec3(0.04, 0.04, 0.10)));
  CHECK(r.axis == Axis::Z);

  ObjectType bar{"BAR", Shape::Cuboid, {200, 40, 20}};
  PartSpec cub;
  cub.orientation = std::array<double, 3>{20, 200, 40};
  CHECK(resolve_orientation(cub, bar).extents.isApprox(Vec3(0.02, 0.20, 0.04)));
  cub.orientation = std::array<double, 3>{200, 40, 20};
  CHECK(resolve_orientation(cub, bar).extents.isApprox(Vec3(0.2, 0.04, 0.02)));
}

TEST_CASE("single part sits centered on the ground") {
  Assembly a = build_assembly(
      single(R"([{"Name": "BLOCK_1", "Available_obj": "CUBOID_50x50x50", "Orientation": [50, 50, 50],
                 "exec_function": false}])"),
      default_catalog());
  REQUIRE(a.parts.size() == 1);
  CHECK(a.parts[0].base.center.isApprox(Vec3(0, 0, 0.025)));
  CHECK(a.ground == std::vector<std::string>{"BLOCK_1"});
  CHECK(connectivity_check(a).ok());
}

TEST_CASE("golden table: legs flush under the tabletop corners") {
  Assembly a = fixture_assembly("golden_table");
  const PlacedPart& top = part(a, "TABLETOP_1");
  const Aabb tb = top.aabb();
  CHECK(top.base.center.x() == 0.0);
  CHECK(top.base.center.y() == 0.0);
  for (const char* name : {"LEG_1", "LEG_2", "LEG_3", "LEG_4"}) {
    const PlacedPart& leg = part(a, name);
    const Aabb lb = leg.aabb();
    CHECK(std::abs(lb.hi.z() - tb.lo.z()) <= 1e-12);
    CHECK(lb.lo.z() == 0.0);
    CHECK(leg.base.kind == PrimKind::Cylinder);
    CHECK(leg.base.axis == Axis::Z);
  }
  // LEG_1: FRONT / LEFT
  CHECK(std::abs(part(a, "LEG_1").aabb().hi.x() - tb.hi.x()) <= 1e-12);
  CHECK(std::abs(part(a, "LEG_1").aabb().hi.y() - tb.hi.y()) <= 1e-12);
  // LEG_4: BACK / RIGHT
  CHECK(std::abs(part(a, "LEG_4").aabb().lo.x() - tb.lo.x()) <= 1e-12);
  CHECK(std::abs(part(a, "LEG_4").aabb().lo.y() - tb.lo.y()) <= 1e-12);
  CHECK(a.ground.size() == 4);
  CHECK(connectivity_check(a).ok());
}

TEST_CASE("all-CENTER surface contact agrees on both tangent axes") {
  Assembly a = fixture_assembly("golden_hammer");
  const PlacedPart& head = part(a, "HEAD_1");
  const PlacedPart& handle = part(a, "HANDLE_1");
  CHECK(std::abs(head.base.center.y() - handle.base.center.y()) <= 1e-12);
  CHECK(std::abs(head.base.center.z() - handle.base.center.z()) <= 1e-12);
  // head's BACK face touches the handle's FRONT end
  CHECK(std::abs(head.aabb().lo.x() - handle.aabb().hi.x()) <= 1e-12);
  CHECK(a.ground == std::vector<std::string>{"HEAD_1"});
}

TEST_CASE("golden skateboard geometry") {
  Assembly a = fixture_assembly("golden_skateboard");
  // Hand computation (m): wheels r=0.015 sit on the ground, so the supports'
  // hole axis is at z=0.015; support 1 is flush with the deck front (x=0.125).
  const PlacedPart& axle = part(a, "AXLE_1");
  CHECK(axle.base.center.isApprox(Vec3(0.115, 0.0, 0.015), 1e-12));
  CHECK(axle.base.axis == Axis::Y);
  const PlacedPart& wheel = part(a, "WHEEL_1");
  CHECK(wheel.base.center.isApprox(Vec3(0.115, 0.03, 0.015), 1e-12));
  const HoleRegion* hole = wheel.find_hole("HOLE_1");
  REQUIRE(hole);
  CHECK(hole->through);
  CHECK(hole->axis == Axis::Y);
  CHECK(hole->cylindrical);
  CHECK(hole->radius == doctest::Approx(0.006));
  CHECK(hole->center.isApprox(wheel.base.center));
  CHECK(part(a, "DECK_1").aabb().lo.z() == doctest::Approx(0.025));
  CHECK(a.ground == std::vector<std::string>{"WHEEL_1", "WHEEL_2", "WHEEL_3", "WHEEL_4"});
  CHECK(connectivity_check(a).ok());
}

TEST_CASE("inserted parts lie inside their host holes (point sampling)") {
  std::mt19937_64 rng(99);
  for (const char* name : {"golden_skateboard"}) {
    Assembly a = fixture_assembly(name);
    int checked_edges = 0;
    for (const Edge& e : a.edges) {
      if (e.connection.contact != ContactType::Inserted) continue;
      const PlacedPart& ins = part(a, e.from);
      const PlacedPart& host = part(a, e.to);
      const Primitive hole = host.find_hole(e.connection.to_modification)->primitive();
      const Aabb box = ins.aabb().intersect(host.aabb());
      REQUIRE(!box.empty());
      std::uniform_real_distribution<double> u(0.0, 1.0);
      int inside = 0;
      while (inside < 10000) {
        Vec3 p = box.lo + (box.hi - box.lo).cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
        if (ins.base.sdf(p) > 0.0) continue;
        ++inside;
        REQUIRE(hole.sdf(p) <= 0.0);
      }
      ++checked_edges;
    }
    CHECK(checked_edges == 6);
  }
}

TEST_CASE("hole rules") {
  SUBCASE("half hole from the low face") {
    Assembly a = build_assembly(
        single(R"([{"Name": "BLOCK_1", "Available_obj": "CUBOID_100x100x100", "Orientation": [100, 100, 100],
                   "Modifications": [{"Name": "HOLE_1", "Type": "HOLE", "align_x": "FRONT",
                                      "align_y": "CENTER", "align_z": "LOW_HIGH_HALF"}],
                   "exec_function": false}])"),
        default_catalog());
    const HoleRegion& h = a.parts[0].holes[0];
    CHECK(h.depth == doctest::Approx(0.05));
    CHECK(!h.through);
    CHECK(h.center.z() - 0.5 * h.depth == doctest::Approx(0.0));  // flush with the bottom face
    CHECK(h.center.x() == doctest::Approx(0.025));                // quarter point toward FRONT
    CHECK(h.radius == doctest::Approx(kDefaultHoleRadius));
  }
  SUBCASE("cylinder inserter of radius 10 mm gets an 11 mm hole") {
    CraftPlan plan = single(R"([
      {"Name": "BLOCK_1", "Available_obj": "CUBOID_100x100x100", "Orientation": [100, 100, 100],
       "Modifications": [{"Name": "HOLE_1", "Type": "HOLE", "align_x": "CENTER",
                          "align_y": "CENTER", "align_z": "HIGH_LOW_FULL"}], "exec_function": false},
      {"Name": "PIN_1", "Available_obj": "CYLINDER_R10_L200", "Orientation": "TOP_BOTTOM",
       "Connections": [{"to_part": "BLOCK_1", "contact_type": "INSERTED", "to_modification": "HOLE_1"}],
       "exec_function": false}])");
    Assembly a = build_assembly(plan, default_catalog());
    CHECK(a.parts[0].holes[0].radius == doctest::Approx(0.011));
    CHECK(a.parts[0].holes[0].through);
    // protrudes symmetrically from the 0.1 m block: pin spans 0.2 m
    CHECK(a.parts[1].base.center.isApprox(a.parts[0].base.center, 1e-12));
  }
  SUBCASE("square hole for cuboid inserters") {
    CraftPlan plan = single(R"([
      {"Name": "BLOCK_1", "Available_obj": "CUBOID_100x100x100", "Orientation": [100, 100, 100],
       "Modifications": [{"Name": "HOLE_1", "Type": "HOLE", "align_x": "FRONT_BACK_FULL",
                          "align_y": "CENTER", "align_z": "CENTER"}], "exec_function": false},
      {"Name": "BAR_1", "Available_obj": "CUBOID_120x20x20", "Orientation": [120, 20, 20],
       "Connections": [{"to_part": "BLOCK_1", "contact_type": "INSERTED", "to_modification": "HOLE_1"}],
       "exec_function": false}])");
    Assembly a = build_assembly(plan, default_catalog());
    CHECK(!a.parts[0].holes[0].cylindrical);
    CHECK(a.parts[0].holes[0].side == doctest::Approx(0.022));
  }
  SUBCASE("hole wider than its owner") {
    CraftPlan plan = single(R"([
      {"Name": "PLATE_1", "Available_obj": "CUBOID_60x60x10", "Orientation": [60, 10, 60],
       "Modifications": [{"Name": "HOLE_1", "Type": "HOLE", "align_x": "CENTER",
                          "align_y": "RIGHT_LEFT_FULL", "align_z": "CENTER"}], "exec_function": false},
      {"Name": "DRUM_1", "Available_obj": "CYLINDER_R50_L50", "Orientation": "LEFT_RIGHT",
       "Connections": [{"to_part": "PLATE_1", "contact_type": "INSERTED", "to_modification": "HOLE_1"}],
       "exec_function": false}])");
    try {
      build_assembly(plan, default_catalog());
      FAIL("expected HoleExceedsOwner");
    } catch (const PlacementError& e) {
      CHECK(e.code() == "HoleExceedsOwner");
      CHECK(e.part() == "PLATE_1");
    }
  }
}

TEST_CASE("placement errors") {
  SUBCASE("disconnected part") {
    try {
      fixture_assembly("bad_two_components");
      FAIL("expected Unplaceable");
    } catch (const PlacementError& e) {
      CHECK(e.code() == "Unplaceable");
      CHECK(e.part() == "BLOCK_1");
    }
    auto report = plan_connectivity(fixture_plan("bad_two_components"));
    CHECK(!report.ok());
    REQUIRE(report.components.size() == 2);
    CHECK(report.components[0] ==
          std::vector<std::string>{"TABLETOP_1", "LEG_1", "LEG_2", "LEG_3", "LEG_4"});
    CHECK(report.components[1] == std::vector<std::string>{"BLOCK_1", "BLOCK_2"});
  }
  SUBCASE("contradicting second connection") {
    CraftPlan plan = fixture_plan("golden_table");
    ConnectionSpec extra = plan.parts[1].connections[0];
    extra.to_part = "LEG_2";
    extra.to_face = {Axis::Y, Side::High};
    plan.parts[1].connections.push_back(extra);
    try {
      build_assembly(plan, default_catalog());
      FAIL("expected InconsistentConnection");
    } catch (const PlacementError& e) {
      CHECK(e.code() == "InconsistentConnection");
      CHECK(e.part() == "LEG_1");
      CHECK(e.to_part() == "LEG_2");
    }
  }
  SUBCASE("cylinder axis across the hole") {
    CraftPlan plan = fixture_plan("golden_skateboard");
    for (PartSpec& p : plan.parts) {
      if (p.name == "AXLE_1") p.orientation = Axis::X;
    }
    CHECK_THROWS_AS(build_assembly(plan, default_catalog()), PlacementError);
  }
}

TEST_CASE("connectivity") {
  CraftPlan plan = single(R"([
    {"Name": "A_1", "Available_obj": "CUBOID_50x50x50", "Orientation": [50, 50, 50], "exec_function": false},
    {"Name": "B_1", "Available_obj": "CUBOID_50x50x50", "Orientation": [50, 50, 50], "exec_function": false}])");
  auto report = plan_connectivity(plan);
  CHECK(report.components.size() == 2);
  CHECK(to_json(report)["ok"] == false);
  for (const char* name : {"golden_table", "golden_hammer", "golden_skateboard", "golden_chair"}) {
    CHECK(connectivity_check(fixture_assembly(name)).ok());
  }
}

TEST_CASE("assembly JSON is byte-identical across builds") {
  for (const char* name : {"golden_table", "golden_hammer", "golden_skateboard"}) {
    std::string first = assembly_to_json(fixture_assembly(name)).dump();
    std::string second = assembly_to_json(fixture_assembly(name)).dump();
    CHECK(first == second);
  }
}

TEST_CASE("LEFT/RIGHT mirror of the golden chair is the exact Y-mirror") {
  CraftPlan plan = fixture_plan("golden_chair");
  Assembly a = build_assembly(plan, default_catalog());
  Assembly m = build_assembly(mirror_y(plan), default_catalog());
  REQUIRE(a.parts.size() == m.parts.size());
  bool any_off_axis = false;
  for (std::size_t i = 0; i < a.parts.size(); ++i) {
    const Vec3& c = a.parts[i].base.center;
    const Vec3& d = m.parts[i].base.center;
    CHECK(d.x() == c.x());
    CHECK(d.y() == -c.y());
    CHECK(d.z() == c.z());
    CHECK(m.parts[i].base.half == a.parts[i].base.half);
    any_off_axis = any_off_axis || c.y() != 0.0;
  }
  CHECK(any_off_axis);
  CHECK(m.ground == a.ground);
}
