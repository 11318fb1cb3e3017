#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "craft/catalog.hpp"
#include "craft/errors.hpp"

using namespace craft;
using nlohmann::json;

TEST_CASE("default catalog has 41 entries within the dimension range") {
  Catalog catalog = load_default_catalog();
  CHECK(catalog.size() == 41);
  int cuboids = 0, cylinders = 0;
  for (const ObjectType& obj : catalog.objects()) {
    (obj.shape == Shape::Cuboid ? cuboids : cylinders)++;
    for (double extent : obj.principal_extents_mm()) {
      CHECK(extent >= kMinDimensionMm);
      CHECK(extent <= kMaxDimensionMm);
    }
    CHECK(&catalog.lookup(obj.id) == &obj);
  }
  CHECK(cuboids == 25);
  CHECK(cylinders == 16);
}

TEST_CASE("lookup") {
  Catalog catalog = load_default_catalog();
  const ObjectType& cyl = catalog.lookup("CYLINDER_R20_L100");
  CHECK(cyl.shape == Shape::Cylinder);
  CHECK(cyl.radius_mm() == 20.0);
  CHECK(cyl.length_mm() == 100.0);
  CHECK(catalog.find("cylinder-r20-l100") == &cyl);
  CHECK_THROWS_AS(catalog.lookup("FOO"), UnknownObject);
}

TEST_CASE("empty object list") {
  Catalog catalog = parse_catalog(json::parse(R"({"objects": []})"));
  CHECK(catalog.empty());
  CHECK(catalog.find("CUBOID_200x40x10") == nullptr);
}

TEST_CASE("duplicate ids are rejected") {
  auto doc = json::parse(R"({"objects": [
    {"id": "C1", "shape": "CUBOID", "dims": [10, 20, 30]},
    {"id": "C1", "shape": "CYLINDER", "dims": [10, 20]}]})");
  CHECK_THROWS_AS(parse_catalog(doc), DuplicateId);
}

TEST_CASE("dimension range: user catalogs warn, default catalog rejects") {
  auto doc = json::parse(R"({"objects": [{"id": "BIG", "shape": "CUBOID", "dims": [10, 20, 300]}]})");
  std::vector<std::string> warnings;
  Catalog user = parse_catalog(doc, CatalogKind::User, &warnings);
  CHECK(user.size() == 1);
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(parse_catalog(doc, CatalogKind::Default), DimensionOutOfRange);
}

TEST_CASE("malformed entries") {
  CHECK_THROWS_AS(parse_catalog(json::parse(R"({"items": []})")), ParseError);
  CHECK_THROWS_AS(parse_catalog(json::parse(R"({"objects": [{"id": "A", "shape": "SPHERE", "dims": [1]}]})")),
                  ParseError);
  CHECK_THROWS_AS(parse_catalog(json::parse(R"({"objects": [{"id": "A", "shape": "CUBOID", "dims": [1, 2]}]})")),
                  ParseError);
  CHECK_THROWS_AS(parse_catalog(json::parse(R"({"objects": [{"id": "A", "shape": "CYLINDER", "dims": [0, 20]}]})")),
                  ParseError);
  CHECK_THROWS_AS(load_catalog("/nonexistent/catalog.json"), IoError);
}

TEST_CASE("round trip through JSON") {
  Catalog catalog = load_default_catalog();
  auto path = std::filesystem::temp_directory_path() / "craft_catalog_roundtrip.json";
  {
    std::ofstream out(path);
    out << catalog_to_json(catalog).dump(2);
  }
  CHECK(load_catalog(path, CatalogKind::Default) == catalog);
  std::filesystem::remove(path);
}
