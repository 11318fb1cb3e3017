#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "craft/errors.hpp"
#include "craft/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace craft;
using namespace craft::testing;

namespace {

TriangleMesh unit_box_mesh() { return primitive_mesh(Primitive::box(Vec3::Zero(), Vec3::Constant(0.5))); }

}  // namespace

TEST_CASE("closed-form examples") {
  const std::vector<Vec3> a{Vec3::Zero()};
  const std::vector<Vec3> b{Vec3(0.2, 0, 0)};
  CHECK(chamfer(a, b) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(chamfer(a, a) == 0.0);
  CHECK(hausdorff(a, a) == 0.0);
  CHECK(fscore(a, a) == 1.0);
  const std::vector<Vec3> b2{Vec3::Zero(), Vec3(1, 0, 0)};
  CHECK(hausdorff(a, b2) == 1.0);
  CHECK(hausdorff(b2, a) == 1.0);
  const std::vector<Vec3> far{Vec3(10, 0, 0)};
  CHECK(fscore(a, far) == 0.0);
  // half of A within the threshold of B, all of B within the threshold of A
  const std::vector<Vec3> ha{Vec3::Zero(), Vec3(5, 0, 0)};
  const std::vector<Vec3> hb{Vec3(0.05, 0, 0)};
  CHECK(fscore(ha, hb) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("k-d tree equals brute force on random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(1, 2000);
  for (int inst = 0; inst < 100; ++inst) {
    CAPTURE(inst);
    const bool clustered = inst % 3 == 0;
    const std::vector<Vec3> pts = random_points(rng, inst % 10 == 0 ? 2000 : size(rng), clustered);
    const std::vector<Vec3> queries = random_points(rng, 200, clustered);
    const KdTree tree(pts);
    for (const Vec3& q : queries) {
      const auto [idx, d] = tree.nearest(q);
      const double brute = directed_min(q, pts);
      CHECK(std::abs(d - brute) <= 1e-12);
      CHECK((pts[idx] - q).norm() == d);
    }
  }
}

TEST_CASE("metrics match the brute-force oracle") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> size(1, 2000);
  for (int inst = 0; inst < 100; ++inst) {
    CAPTURE(inst);
    const std::vector<Vec3> a = random_points(rng, inst % 7 == 0 ? 2000 : size(rng), inst % 2 == 0);
    const std::vector<Vec3> b = random_points(rng, inst % 5 == 0 ? 2000 : size(rng), inst % 3 == 0);
    const Oracle o = oracle(a, b, 0.1);
    const double c = chamfer(a, b);
    const double h = hausdorff(a, b);
    CHECK(std::abs(c - o.chamfer) <= 1e-12);
    CHECK(std::abs(h - o.hausdorff) <= 1e-12);
    CHECK(std::abs(fscore(a, b) - o.fscore) <= 1e-12);
    CHECK(c <= h);
    // symmetry
    CHECK(chamfer(b, a) == c);
    CHECK(hausdorff(b, a) == h);
    const double f = fscore(a, b);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("shifted copy matches the oracle") {
  std::mt19937_64 rng(5);
  const std::vector<Vec3> a = random_points(rng, 500, false);
  std::vector<Vec3> b = a;
  for (Vec3& p : b) p.x() += 0.05;
  const Oracle o = oracle(a, b, 0.1);
  CHECK(std::abs(chamfer(a, b) - o.chamfer) <= 1e-12);
  CHECK(std::abs(hausdorff(a, b) - o.hausdorff) <= 1e-12);
}

TEST_CASE("translation invariance") {
  std::mt19937_64 rng(6);
  const std::vector<Vec3> a = random_points(rng, 3000, false);
  const std::vector<Vec3> b = random_points(rng, 2500, true);
  const Vec3 t(0.25, -0.5, 0.125);  // dyadic: the shift is exact
  std::vector<Vec3> at = a, bt = b;
  for (Vec3& p : at) p += t;
  for (Vec3& p : bt) p += t;
  CHECK(std::abs(chamfer(a, b) - chamfer(at, bt)) <= 1e-12);
  CHECK(std::abs(hausdorff(a, b) - hausdorff(at, bt)) <= 1e-12);
  CHECK(fscore(a, b) == fscore(at, bt));
}

TEST_CASE("normalization") {
  const TriangleMesh box = primitive_mesh(Primitive::box(Vec3(3, 1, 2), Vec3(2, 0.5, 0.25)));
  const TriangleMesh n = normalize_mesh(box);
  CHECK(n.bounds().size().norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(n.bounds().center().norm() < 1e-14);
  const TriangleMesh twice = normalize_mesh(n);
  for (std::size_t i = 0; i < n.vertices.size(); ++i) CHECK((twice.vertices[i] - n.vertices[i]).norm() < 1e-12);
  const TriangleMesh scaled = normalize_mesh(box.transformed(Vec3::Zero(), 7.0));
  for (std::size_t i = 0; i < n.vertices.size(); ++i) CHECK((scaled.vertices[i] - n.vertices[i]).norm() < 1e-12);
  TriangleMesh flat;
  flat.vertices = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  flat.triangles = {{0, 1, 2}};
  CHECK_THROWS_AS(normalize_mesh(flat), DegenerateExtent);
}

TEST_CASE("surface sampling") {
  const TriangleMesh box = unit_box_mesh();
  const PointSample s = sample_surface(box, 1000, 3);
  REQUIRE(s.points.size() == 1000);
  int per_face[6] = {};
  for (const Vec3& p : s.points) {
    const Vec3 d = p.cwiseAbs();
    CHECK(d.maxCoeff() == doctest::Approx(0.5).epsilon(1e-12));
    int k = 0;
    d.maxCoeff(&k);
    ++per_face[2 * k + (p[k] > 0)];
  }
  for (int f : per_face) CHECK(f > 100);  // area weighting: about 167 each

  const PointSample a = sample_surface(box, kDefaultSampleCount, kDefaultSeed);
  const PointSample b = sample_surface(box, kDefaultSampleCount, kDefaultSeed);
  REQUIRE(a.points.size() == kDefaultSampleCount);
  bool identical = true;
  for (std::size_t i = 0; i < a.points.size(); ++i) identical = identical && a.points[i] == b.points[i];
  CHECK(identical);
  const PointSample c = sample_surface(box, 10, kDefaultSeed + 1);
  CHECK(c.points[0] != a.points[0]);
  CHECK_THROWS(sample_surface(box, 0, 1));
}

TEST_CASE("exterior sampling of assemblies") {
  SUBCASE("interpenetrating boxes") {
    Assembly asmb;
    PlacedPart p1, p2;
    p1.spec.name = "BLOCK_1";
    p1.base = Primitive::box(Vec3::Zero(), Vec3(0.05, 0.05, 0.05));
    p2.spec.name = "BLOCK_2";
    p2.base = Primitive::box(Vec3(0.05, 0.02, 0.01), Vec3(0.05, 0.05, 0.05));
    asmb.parts = {p1, p2};
    const PointSample s = sample_exterior(asmb, 2000, 4);
    CHECK(s.points.size() == 2000);
    for (const Vec3& p : s.points) {
      CHECK_FALSE(p1.base.sdf(p) < -1e-9);
      CHECK_FALSE(p2.base.sdf(p) < -1e-9);
    }
  }
  SUBCASE("enclosed part contributes no samples") {
    Assembly asmb;
    PlacedPart inner;
    inner.spec.name = "CORE_1";
    inner.base = Primitive::box(Vec3::Zero(), Vec3::Constant(0.01));
    PlacedPart outer;
    outer.spec.name = "SHELL_1";
    outer.base = Primitive::box(Vec3::Zero(), Vec3::Constant(0.1));
    asmb.parts = {inner, outer};
    const PointSample s = sample_exterior(asmb, 500, 4);
    CHECK(s.points.size() == 500);
    for (const Vec3& p : s.points) CHECK(p.cwiseAbs().maxCoeff() == doctest::Approx(0.1));
  }
  SUBCASE("golden table is deterministic") {
    const Assembly table = craft::testing::fixture_assembly("golden_table");
    const PointSample a = sample_exterior(table, 5000, 7);
    const PointSample b = sample_exterior(table, 5000, 7);
    CHECK(a.points == b.points);
  }
}

TEST_CASE("mesh comparison") {
  const TriangleMesh box = unit_box_mesh();
  MetricsOptions opt;
  opt.samples = 4000;
  const MetricsReport same = compare_meshes(box, box.transformed(Vec3(3, 4, 5), 2.5), opt);
  CHECK(same.chamfer < 0.02);
  CHECK(same.fscore > 0.99);
  const TriangleMesh slab = primitive_mesh(Primitive::box(Vec3::Zero(), Vec3(0.5, 0.5, 0.05)));
  const MetricsReport diff = compare_meshes(box, slab, opt);
  CHECK(diff.chamfer > same.chamfer);
  CHECK(diff.chamfer <= diff.hausdorff);
  const nlohmann::json j = to_json(diff);
  CHECK(j.at("seed") == kDefaultSeed);
  CHECK(j.contains("chamfer_variant"));
  CHECK(j.contains("normalization"));

  const Assembly table = craft::testing::fixture_assembly("golden_table");
  const TriangleMesh table_mesh = combined_mesh(assembly_meshes(table));
  const MetricsReport self = compare_to_assembly(table_mesh, table, opt);
  CHECK(self.chamfer < 0.03);
  CHECK(self.fscore > 0.95);
}
