#include <doctest.h>

#include <chrono>
#include <random>

#include "craft/collision.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace craft;
using namespace craft::testing;
using craft::testing::fixture_assembly;

namespace {

Solid solid(const Primitive& base, std::vector<Primitive> holes = {}) { return Solid{base, std::move(holes)}; }

Primitive unit_box(const Vec3& c) { return Primitive::box(c, Vec3(0.5, 0.5, 0.5)); }

}  // namespace

TEST_CASE("identical unit boxes overlap with depth 1") {
  auto hit = pair_overlap(solid(unit_box(Vec3::Zero())), solid(unit_box(Vec3::Zero())));
  REQUIRE(hit);
  CHECK(hit->depth == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("shared faces and edges are contact, not collision") {
  Solid a = solid(unit_box(Vec3::Zero()));
  CHECK_FALSE(pair_overlap(a, solid(unit_box(Vec3(1.0, 0, 0)))));
  CHECK_FALSE(pair_overlap(a, solid(unit_box(Vec3(1.0, 1.0, 0)))));
  CHECK_FALSE(pair_overlap(a, solid(unit_box(Vec3(1.0, 1.0, 1.0)))));
  CHECK_FALSE(pair_overlap(a, solid(unit_box(Vec3(1.0 + 1e-7, 0.3, 0)))));
  // Interpenetration within the tolerance is still contact.
  CHECK_FALSE(pair_overlap(a, solid(unit_box(Vec3(1.0 - 5e-7, 0, 0)))));
  auto deep = pair_overlap(a, solid(unit_box(Vec3(1.0 - 1e-3, 0, 0))));
  REQUIRE(deep);
  CHECK(deep->depth == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("cylinder resting on a box face") {
  Solid block = solid(Primitive::box(Vec3(0, 0, -0.05), Vec3(0.1, 0.1, 0.05)));
  Solid roller = solid(Primitive::cylinder(Vec3(0, 0, 0.02), Axis::Y, 0.02, 0.05));
  CHECK_FALSE(pair_overlap(block, roller));
  Solid sunk = solid(Primitive::cylinder(Vec3(0, 0, 0.019), Axis::Y, 0.02, 0.05));
  auto hit = pair_overlap(block, sunk);
  REQUIRE(hit);
  CHECK(hit->depth == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("axle inside a clearance hole is exempt") {
  // Wheel r = 30 mm along Y with an 11 mm through hole, axle r = 10 mm.
  Primitive wheel = Primitive::cylinder(Vec3::Zero(), Axis::Y, 0.03, 0.01);
  Primitive hole = Primitive::cylinder(Vec3::Zero(), Axis::Y, 0.011, 0.01);
  Solid holed = solid(wheel, {hole});
  Solid axle = solid(Primitive::cylinder(Vec3::Zero(), Axis::Y, 0.01, 0.1));
  CHECK_FALSE(pair_overlap(holed, axle));
  CHECK_FALSE(pair_overlap(axle, holed));

  // Too fat for the hole.
  Solid fat = solid(Primitive::cylinder(Vec3::Zero(), Axis::Y, 0.012, 0.1));
  auto hit = pair_overlap(holed, fat);
  REQUIRE(hit);
  CHECK(holed.sdf(hit->witness) <= 1e-9);
  CHECK(fat.sdf(hit->witness) <= 1e-9);

  // Off axis by 2 mm.
  Solid shifted = solid(Primitive::cylinder(Vec3(0.002, 0, 0), Axis::Y, 0.01, 0.1));
  CHECK(pair_overlap(holed, shifted));

  // Exactly the hole radius is contact along the whole bore.
  Solid snug = solid(Primitive::cylinder(Vec3::Zero(), Axis::Y, 0.011, 0.1));
  CHECK_FALSE(pair_overlap(holed, snug));
}

TEST_CASE("square hole in a box takes a square peg") {
  Primitive block = Primitive::box(Vec3::Zero(), Vec3(0.05, 0.05, 0.02));
  Primitive hole = Primitive::box(Vec3(0, 0, 0.01), Vec3(0.011, 0.011, 0.01));
  Solid holed = solid(block, {hole});
  CHECK_FALSE(pair_overlap(holed, solid(Primitive::box(Vec3(0, 0, 0.03), Vec3(0.01, 0.01, 0.03)))));
  // A half-depth hole: going deeper than its floor collides.
  CHECK(pair_overlap(holed, solid(Primitive::box(Vec3(0, 0, 0.0), Vec3(0.01, 0.01, 0.03)))));
}

TEST_CASE("crossed cylinders") {
  Solid x = solid(Primitive::cylinder(Vec3::Zero(), Axis::X, 0.01, 0.05));
  Solid y = solid(Primitive::cylinder(Vec3(0, 0, 0.02), Axis::Y, 0.01, 0.05));
  CHECK_FALSE(pair_overlap(x, y));
  Solid y2 = solid(Primitive::cylinder(Vec3(0, 0, 0.019), Axis::Y, 0.01, 0.05));
  auto hit = pair_overlap(x, y2);
  REQUIRE(hit);
  CHECK(hit->depth == doctest::Approx(1e-3).epsilon(1e-6));
  // End cap of one touching the side of the other.
  Solid z = solid(Primitive::cylinder(Vec3(0, 0, 0.06), Axis::Z, 0.005, 0.05));
  CHECK_FALSE(pair_overlap(solid(Primitive::cylinder(Vec3::Zero(), Axis::X, 0.01, 0.05)), z));
}

TEST_CASE("pair_overlap is symmetric and translation invariant") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    Scene s = random_scene(rng);
    auto ab = pair_overlap(s.a, s.b);
    auto ba = pair_overlap(s.b, s.a);
    REQUIRE(ab.has_value() == ba.has_value());
    if (ab) CHECK(ab->depth == doctest::Approx(ba->depth).epsilon(1e-9));

    Vec3 d(0.125, -0.25, 0.5);
    Solid a = s.a, b = s.b;
    a.base = a.base.translated(d);
    b.base = b.base.translated(d);
    for (auto& h : a.holes) h = h.translated(d);
    for (auto& h : b.holes) h = h.translated(d);
    auto moved = pair_overlap(a, b);
    REQUIRE(moved.has_value() == ab.has_value());
    if (ab) CHECK(moved->depth == doctest::Approx(ab->depth).epsilon(1e-6));
  }
}

TEST_CASE("randomized scenes agree with a sampling oracle") {
  std::mt19937_64 rng(20241016);
  std::mt19937_64 sampler(99);
  const auto start = std::chrono::steady_clock::now();
  int collisions = 0, mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    Scene s = random_scene(rng);
    auto hit = pair_overlap(s.a, s.b);
    Aabb region = s.a.base.aabb().intersect(s.b.base.aabb());
    bool sampled = sampled_collision(s.a, s.b, region, 50000, sampler);
    if (hit && !sampled) {
      // Thin overlaps: look again around the reported witness.
      Aabb local{hit->witness - Vec3::Constant(2e-3), hit->witness + Vec3::Constant(2e-3)};
      sampled = sampled_collision(s.a, s.b, local.intersect(region), 200000, sampler);
    }
    if (hit.has_value() != sampled) {
      ++mismatches;
      MESSAGE("scene " << i << " analytic=" << hit.has_value() << " sampled=" << sampled);
    }
    if (hit) {
      ++collisions;
      CHECK(s.a.sdf(hit->witness) <= 1e-9);
      CHECK(s.b.sdf(hit->witness) <= 1e-9);
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  MESSAGE("collisions " << collisions << "/200, " << secs << " s");
  CHECK(mismatches == 0);
  CHECK(collisions > 20);
  CHECK(collisions < 180);
  CHECK(secs < 30.0);
}

TEST_CASE("assemblies") {
  SUBCASE("golden plans are collision free") {
    for (const char* name : {"golden_table", "golden_hammer", "golden_chair", "golden_skateboard"}) {
      CollisionReport report = validate_collisions(fixture_assembly(name));
      INFO(name << " " << to_json(report).dump());
      CHECK(report.ok());
    }
  }
  SUBCASE("stacked shelves collide") {
    CollisionReport report = validate_collisions(fixture_assembly("bad_stacked_shelves"));
    REQUIRE_FALSE(report.ok());
    for (const auto& p : report.pairs) {
      CHECK(p.a < p.b);
      CHECK(p.depth_m > kContactTolerance);
    }
    auto j = to_json(report);
    CHECK(j["ok"] == false);
    CHECK(j["pairs"][0].contains("depth_m"));
    CHECK(j["pairs"][0]["point"].size() == 3);
  }
}
