#include "craft/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "craft/errors.hpp"

#ifndef CRAFT_DATA_DIR
#define CRAFT_DATA_DIR "data"
#endif

namespace craft {

using nlohmann::json;

std::string_view to_string(Shape shape) {
  return shape == Shape::Cuboid ? "CUBOID" : "CYLINDER";
}

std::vector<double> ObjectType::principal_extents_mm() const {
  if (shape == Shape::Cuboid) return dims;
  return {2.0 * radius_mm(), length_mm()};
}

std::string normalize_token(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c == '-') {
      c = '_';
    } else {
      c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

Catalog::Catalog(std::vector<ObjectType> objects) : objects_(std::move(objects)) {
  index_.reserve(objects_.size());
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    auto [it, inserted] = index_.emplace(normalize_token(objects_[i].id), i);
    if (!inserted) throw DuplicateId(objects_[i].id);
  }
}

const ObjectType* Catalog::find(std::string_view id) const noexcept {
  auto it = index_.find(normalize_token(id));
  return it == index_.end() ? nullptr : &objects_[it->second];
}

const ObjectType& Catalog::lookup(std::string_view id) const {
  if (const ObjectType* obj = find(id)) return *obj;
  throw UnknownObject(std::string(id));
}

namespace {

ObjectType parse_object(const json& entry, std::size_t position) {
  const std::string where = "objects[" + std::to_string(position) + "]";
  if (!entry.is_object()) throw ParseError(where + ": expected an object");
  if (!entry.contains("id") || !entry["id"].is_string())
    throw ParseError(where + ": missing string field 'id'");
  if (!entry.contains("shape") || !entry["shape"].is_string())
    throw ParseError(where + ": missing string field 'shape'");
  if (!entry.contains("dims") || !entry["dims"].is_array())
    throw ParseError(where + ": missing array field 'dims'");

  ObjectType obj;
  obj.id = entry["id"].get<std::string>();
  const std::string shape = normalize_token(entry["shape"].get<std::string>());
  if (shape == "CUBOID") {
    obj.shape = Shape::Cuboid;
  } else if (shape == "CYLINDER") {
    obj.shape = Shape::Cylinder;
  } else {
    throw ParseError(where + ": unknown shape '" + shape + "'");
  }
  for (const json& d : entry["dims"]) {
    if (!d.is_number()) throw ParseError(where + ": dims must be numbers");
    obj.dims.push_back(d.get<double>());
  }
  const std::size_t expected = obj.shape == Shape::Cuboid ? 3 : 2;
  if (obj.dims.size() != expected) {
    throw ParseError(where + ": " + std::string(to_string(obj.shape)) + " needs " +
                     std::to_string(expected) + " dims");
  }
  for (double d : obj.dims) {
    if (!(d > 0.0) || !std::isfinite(d))
      throw ParseError(where + ": dimensions must be strictly positive");
  }
  return obj;
}

}  // namespace

Catalog parse_catalog(const json& doc, CatalogKind kind, std::vector<std::string>* warnings) {
  if (!doc.is_object() || !doc.contains("objects") || !doc["objects"].is_array())
    throw ParseError("catalog: expected {\"objects\": [...]}");

  std::vector<ObjectType> objects;
  std::size_t position = 0;
  for (const json& entry : doc["objects"]) {
    ObjectType obj = parse_object(entry, position++);
    for (double extent : obj.principal_extents_mm()) {
      if (extent >= kMinDimensionMm && extent <= kMaxDimensionMm) continue;
      std::ostringstream msg;
      msg << obj.id << ": principal extent " << extent << " mm outside [" << kMinDimensionMm
          << ", " << kMaxDimensionMm << "]";
      if (kind == CatalogKind::Default) throw DimensionOutOfRange(msg.str());
      if (warnings) warnings->push_back(msg.str());
    }
    objects.push_back(std::move(obj));
  }
  return Catalog(std::move(objects));
}

Catalog load_catalog(const std::filesystem::path& path, CatalogKind kind,
                     std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open catalog: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("catalog " + path.string() + ": " + e.what());
  }
  return parse_catalog(doc, kind, warnings);
}

json catalog_to_json(const Catalog& catalog) {
  json objects = json::array();
  for (const ObjectType& obj : catalog.objects()) {
    objects.push_back({{"id", obj.id}, {"shape", to_string(obj.shape)}, {"dims", obj.dims}});
  }
  return {{"objects", std::move(objects)}};
}

std::string render_catalog(const Catalog& catalog) {
  std::ostringstream out;
  for (const ObjectType& obj : catalog.objects()) {
    out << "- " << obj.id << ": ";
    if (obj.shape == Shape::Cuboid) {
      out << "cuboid " << obj.dims[0] << " x " << obj.dims[1] << " x " << obj.dims[2] << " mm";
    } else {
      out << "cylinder radius " << obj.dims[0] << " mm, length " << obj.dims[1] << " mm";
    }
    out << '\n';
  }
  return out.str();
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("CRAFT_DATA_DIR"); env && *env) return env;
  return CRAFT_DATA_DIR;
}

std::filesystem::path default_catalog_path() { return data_dir() / "catalog" / "default.json"; }

Catalog load_default_catalog() {
  return load_catalog(default_catalog_path(), CatalogKind::Default);
}

}  // namespace craft
