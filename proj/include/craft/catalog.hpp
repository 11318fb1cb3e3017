#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace craft {

enum class Shape { Cuboid, Cylinder };

std::string_view to_string(Shape shape);

// One available object type. Dimensions are millimetres:
// cuboid -> {dx, dy, dz}, cylinder -> {radius, length}.
struct ObjectType {
  std::string id;
  Shape shape = Shape::Cuboid;
  std::vector<double> dims;

  double radius_mm() const { return dims.at(0); }
  double length_mm() const { return dims.at(1); }

  // Extents along the principal axes: the three cuboid dims, or the
  // cylinder's diameter and length.
  std::vector<double> principal_extents_mm() const;

  bool operator==(const ObjectType&) const = default;
};

// Upper-cases and maps '-' to '_'. Shared by catalog ids and plan tokens so
// that "cuboid_200x40x20" and "CUBOID_200X40X20" name the same object.
std::string normalize_token(std::string_view text);

class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<ObjectType> objects);

  const ObjectType& lookup(std::string_view id) const;
  const ObjectType* find(std::string_view id) const noexcept;

  std::span<const ObjectType> objects() const { return objects_; }
  std::size_t size() const { return objects_.size(); }
  bool empty() const { return objects_.empty(); }

  bool operator==(const Catalog& other) const { return objects_ == other.objects_; }

 private:
  std::vector<ObjectType> objects_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class CatalogKind { Default, User };

inline constexpr double kMinDimensionMm = 10.0;
inline constexpr double kMaxDimensionMm = 250.0;

// Out-of-range dimensions throw DimensionOutOfRange for the default catalog
// and are appended to `warnings` for user catalogs.
Catalog parse_catalog(const nlohmann::json& doc, CatalogKind kind = CatalogKind::User,
                      std::vector<std::string>* warnings = nullptr);
Catalog load_catalog(const std::filesystem::path& path, CatalogKind kind = CatalogKind::User,
                     std::vector<std::string>* warnings = nullptr);
nlohmann::json catalog_to_json(const Catalog& catalog);

// Human-readable listing used in prompts.
std::string render_catalog(const Catalog& catalog);

// Root of the shipped data files (catalog, templates, heuristics). Honors the
// CRAFT_DATA_DIR environment variable, else the path compiled into the build.
std::filesystem::path data_dir();
std::filesystem::path default_catalog_path();
Catalog load_default_catalog();

}  // namespace craft
