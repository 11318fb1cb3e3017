#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "craft/catalog.hpp"

namespace craft {

// World frame: +X = FRONT, +Y = LEFT, +Z = TOP (right-handed).
enum class Axis : int { X = 0, Y = 1, Z = 2 };

inline int index(Axis axis) { return static_cast<int>(axis); }
inline Axis axis_from_index(int i) { return static_cast<Axis>(i); }
std::string_view axis_name(Axis axis);  // "X" / "Y" / "Z"

// Position along one axis relative to a part: the low face, the center, or the
// high face. High is FRONT on X, LEFT on Y and TOP/HIGH on Z.
enum class Side : int { Low = -1, Center = 0, High = 1 };

struct Face {
  Axis axis = Axis::Z;
  Side side = Side::High;  // never Center
  Face opposite() const { return {axis, side == Side::High ? Side::Low : Side::High}; }
  bool operator==(const Face&) const = default;
};

enum class ContactType { Surface, Inserted };
enum class JointType { Fixed, NonFixed };
enum class HoleSpan { Full, HalfFromHigh, HalfFromLow };

// Per-axis alignment of a HOLE modification: either the through axis (with a
// span token) or a transverse position token.
struct HoleAlign {
  bool through = false;
  Side position = Side::Center;
  HoleSpan span = HoleSpan::Full;
  bool operator==(const HoleAlign&) const = default;
};

struct ModificationSpec {
  std::string name;  // HOLE_<n>
  std::array<HoleAlign, 3> align{};

  Axis hole_axis() const;
  bool operator==(const ModificationSpec&) const = default;
};

struct ConnectionSpec {
  std::string to_part;
  ContactType contact = ContactType::Surface;
  Face to_face{};                                // SURFACE only
  std::array<Side, 3> align{Side::Center, Side::Center, Side::Center};  // SURFACE only
  std::string to_modification;                   // INSERTED only
  JointType joint = JointType::Fixed;
  bool operator==(const ConnectionSpec&) const = default;
};

// Cuboid: world-axis dimensions (mm), a permutation of the catalog dims.
// Cylinder: the world axis of the principal axis.
using OrientationSpec = std::variant<std::array<double, 3>, Axis>;

struct PartSpec {
  std::string name;
  std::string available_obj;
  OrientationSpec orientation = Axis::Z;
  std::vector<ModificationSpec> modifications;
  std::vector<ConnectionSpec> connections;
  bool exec_function = false;

  const ModificationSpec* find_modification(std::string_view mod_name) const;
  bool operator==(const PartSpec&) const = default;
};

struct CraftPlan {
  std::vector<PartSpec> parts;

  const PartSpec* find(std::string_view name) const;
  bool operator==(const CraftPlan&) const = default;
};

struct FormatIssue {
  std::string part;
  std::string field;
  std::string code;
  std::string message;
};

struct FormatReport {
  std::vector<FormatIssue> errors;
  bool ok() const { return errors.empty(); }
  bool has_code(std::string_view code) const;
};

nlohmann::json to_json(const FormatReport& report);

struct ParseOutcome {
  std::optional<CraftPlan> plan;  // set iff report.ok()
  FormatReport report;
};

// Error codes carried in FormatIssue::code.
namespace codes {
inline constexpr std::string_view kJsonSyntax = "JsonSyntaxError";
inline constexpr std::string_view kMissingField = "MissingField";
inline constexpr std::string_view kUnknownToken = "UnknownToken";
inline constexpr std::string_view kUnknownObject = "UnknownObject";
inline constexpr std::string_view kBadOrientation = "BadOrientationPermutation";
inline constexpr std::string_view kDanglingReference = "DanglingReference";
inline constexpr std::string_view kDuplicateName = "DuplicateName";
inline constexpr std::string_view kBadNamePattern = "BadNamePattern";
inline constexpr std::string_view kAmbiguousHoleAxis = "AmbiguousHoleAxis";
}  // namespace codes

// Strips markdown code fences / surrounding prose, parses JSON, and
// normalizes every key and string value (upper-case, '-' -> '_').
// Throws JsonSyntaxError.
nlohmann::json normalize_raw(std::string_view raw);
nlohmann::json normalize_json(const nlohmann::json& value);

ParseOutcome parse_plan(const nlohmann::json& normalized, const Catalog& catalog);
// normalize_raw + parse_plan; a syntax error becomes a JsonSyntaxError issue.
ParseOutcome parse_plan_text(std::string_view raw, const Catalog& catalog);

nlohmann::json plan_to_json(const CraftPlan& plan);
std::string serialize_plan(const CraftPlan& plan);

// Token spellings.
std::string_view face_token(Face face);
std::string_view connection_align_token(Axis axis, Side side);
std::string_view hole_align_token(Axis axis, const HoleAlign& align);
std::string_view cylinder_axis_token(Axis axis);

}  // namespace craft
