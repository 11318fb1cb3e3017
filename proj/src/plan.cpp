#include "craft/plan.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <set>

#include "craft/errors.hpp"

namespace craft {

using nlohmann::json;

namespace {

struct TokenEntry {
  std::string_view token;
  Side side;
};

// Connection alignment tokens per axis (index = Axis).
constexpr std::array<std::array<TokenEntry, 3>, 3> kConnectionAlign{{
    {{{"FRONT", Side::High}, {"CENTER", Side::Center}, {"BACK", Side::Low}}},
    {{{"LEFT", Side::High}, {"CENTER", Side::Center}, {"RIGHT", Side::Low}}},
    {{{"TOP", Side::High}, {"CENTER", Side::Center}, {"BOTTOM", Side::Low}}},
}};

// Transverse hole position tokens per axis.
constexpr std::array<std::array<TokenEntry, 3>, 3> kHolePosition{{
    {{{"FRONT", Side::High}, {"CENTER", Side::Center}, {"BACK", Side::Low}}},
    {{{"LEFT", Side::High}, {"CENTER", Side::Center}, {"RIGHT", Side::Low}}},
    {{{"HIGH", Side::High}, {"CENTER", Side::Center}, {"LOW", Side::Low}}},
}};

struct SpanEntry {
  std::string_view token;
  HoleSpan span;
};

// "A_B_HALF" starts at face A, so FRONT_BACK_HALF starts on the high X face
// while RIGHT_LEFT_HALF starts on the low Y face.
constexpr std::array<std::array<SpanEntry, 3>, 3> kHoleSpan{{
    {{{"FRONT_BACK_FULL", HoleSpan::Full},
      {"FRONT_BACK_HALF", HoleSpan::HalfFromHigh},
      {"BACK_FRONT_HALF", HoleSpan::HalfFromLow}}},
    {{{"RIGHT_LEFT_FULL", HoleSpan::Full},
      {"RIGHT_LEFT_HALF", HoleSpan::HalfFromLow},
      {"LEFT_RIGHT_HALF", HoleSpan::HalfFromHigh}}},
    {{{"HIGH_LOW_FULL", HoleSpan::Full},
      {"HIGH_LOW_HALF", HoleSpan::HalfFromHigh},
      {"LOW_HIGH_HALF", HoleSpan::HalfFromLow}}},
}};

struct FaceEntry {
  std::string_view token;
  Face face;
};

constexpr std::array<FaceEntry, 6> kFaces{{
    {"TOP", {Axis::Z, Side::High}},
    {"BOTTOM", {Axis::Z, Side::Low}},
    {"RIGHT", {Axis::Y, Side::Low}},
    {"LEFT", {Axis::Y, Side::High}},
    {"FRONT", {Axis::X, Side::High}},
    {"BACK", {Axis::X, Side::Low}},
}};

constexpr std::array<std::string_view, 3> kCylinderAxis{"FRONT_BACK", "LEFT_RIGHT", "TOP_BOTTOM"};
constexpr std::array<std::string_view, 3> kAlignKeys{"ALIGN_X", "ALIGN_Y", "ALIGN_Z"};

template <typename Table>
std::string allowed_list(const Table& table) {
  std::string out;
  for (const auto& e : table) {
    if (!out.empty()) out += ", ";
    out += e.token;
  }
  return out;
}

std::string join_views(std::span<const std::string_view> items) {
  std::string out;
  for (auto s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

bool matches(const std::regex& re, const std::string& s) { return std::regex_match(s, re); }

const std::regex& part_name_pattern() {
  static const std::regex re("^[A-Z][A-Z0-9_]*_[0-9]+$");
  return re;
}

const std::regex& hole_name_pattern() {
  static const std::regex re("^HOLE_[0-9]+$");
  return re;
}

class IssueSink {
 public:
  explicit IssueSink(FormatReport& report) : report_(report) {}

  void add(const std::string& part, std::string field, std::string_view code, std::string message) {
    report_.errors.push_back({part, std::move(field), std::string(code), std::move(message)});
  }

 private:
  FormatReport& report_;
};

// Fetches a string field; records MissingField / UnknownToken on failure.
std::optional<std::string> string_field(const json& obj, std::string_view key, const std::string& part,
                                        const std::string& prefix, IssueSink& sink) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    sink.add(part, prefix + std::string(key), codes::kMissingField,
             "required field " + std::string(key) + " is missing");
    return std::nullopt;
  }
  if (!it->is_string()) {
    sink.add(part, prefix + std::string(key), codes::kUnknownToken,
             std::string(key) + " must be a string");
    return std::nullopt;
  }
  return it->get<std::string>();
}

struct RawPart {
  std::string label;
  std::optional<std::string> name;
  std::set<std::string> modification_names;
};

void parse_orientation(const json& obj, const ObjectType* object, PartSpec& part,
                       const std::string& label, IssueSink& sink) {
  auto it = obj.find("ORIENTATION");
  if (it == obj.end() || it->is_null()) {
    sink.add(label, "ORIENTATION", codes::kMissingField, "required field ORIENTATION is missing");
    return;
  }
  if (!object) return;  // unknown object already reported; nothing to check against

  if (object->shape == Shape::Cylinder) {
    if (!it->is_string()) {
      sink.add(label, "ORIENTATION", codes::kUnknownToken,
               "cylinder ORIENTATION must be one of " + join_views(kCylinderAxis));
      return;
    }
    const std::string token = it->get<std::string>();
    auto pos = std::find(kCylinderAxis.begin(), kCylinderAxis.end(), token);
    if (pos == kCylinderAxis.end()) {
      sink.add(label, "ORIENTATION", codes::kUnknownToken,
               "'" + token + "' is not one of " + join_views(kCylinderAxis));
      return;
    }
    part.orientation = axis_from_index(static_cast<int>(pos - kCylinderAxis.begin()));
    return;
  }

  if (!it->is_array() || it->size() != 3 ||
      !std::all_of(it->begin(), it->end(), [](const json& v) { return v.is_number(); })) {
    sink.add(label, "ORIENTATION", codes::kBadOrientation,
             "cuboid ORIENTATION must be [dim_x, dim_y, dim_z] in mm");
    return;
  }
  std::array<double, 3> dims{};
  for (int i = 0; i < 3; ++i) dims[i] = (*it)[i].get<double>();
  std::array<double, 3> given = dims;
  std::array<double, 3> catalog{object->dims[0], object->dims[1], object->dims[2]};
  std::sort(given.begin(), given.end());
  std::sort(catalog.begin(), catalog.end());
  for (int i = 0; i < 3; ++i) {
    if (std::abs(given[i] - catalog[i]) > 1e-9) {
      sink.add(label, "ORIENTATION", codes::kBadOrientation,
               "[" + (*it).dump().substr(1, (*it).dump().size() - 2) +
                   "] is not a permutation of the dimensions of " + object->id);
      return;
    }
  }
  part.orientation = dims;
}

std::optional<ModificationSpec> parse_modification(const json& obj, const std::string& label,
                                                   const std::string& prefix, IssueSink& sink) {
  if (!obj.is_object()) {
    sink.add(label, prefix, codes::kUnknownToken, "modification entry must be an object");
    return std::nullopt;
  }
  bool ok = true;
  ModificationSpec mod;
  if (auto name = string_field(obj, "NAME", label, prefix, sink)) {
    mod.name = *name;
    if (!matches(hole_name_pattern(), mod.name)) {
      sink.add(label, prefix + "NAME", codes::kBadNamePattern,
               "'" + mod.name + "' does not match HOLE_<numeral>");
      ok = false;
    }
  } else {
    ok = false;
  }
  if (auto type = string_field(obj, "TYPE", label, prefix, sink)) {
    if (*type != "HOLE") {
      sink.add(label, prefix + "TYPE", codes::kUnknownToken, "'" + *type + "' is not one of HOLE");
      ok = false;
    }
  } else {
    ok = false;
  }

  int through_count = 0;
  bool aligns_ok = true;
  for (int a = 0; a < 3; ++a) {
    auto token = string_field(obj, kAlignKeys[a], label, prefix, sink);
    if (!token) {
      aligns_ok = false;
      continue;
    }
    HoleAlign align;
    bool found = false;
    for (const auto& e : kHolePosition[a]) {
      if (e.token == *token) {
        align.position = e.side;
        found = true;
      }
    }
    for (const auto& e : kHoleSpan[a]) {
      if (e.token == *token) {
        align.through = true;
        align.span = e.span;
        found = true;
      }
    }
    if (!found) {
      sink.add(label, prefix + std::string(kAlignKeys[a]), codes::kUnknownToken,
               "'" + *token + "' is not one of " + allowed_list(kHolePosition[a]) + ", " +
                   allowed_list(kHoleSpan[a]));
      aligns_ok = false;
      continue;
    }
    if (align.through) ++through_count;
    mod.align[a] = align;
  }
  if (aligns_ok && through_count != 1) {
    sink.add(label, prefix + "ALIGN", codes::kAmbiguousHoleAxis,
             "exactly one of ALIGN_X/ALIGN_Y/ALIGN_Z must carry a *_FULL or *_HALF token, found " +
                 std::to_string(through_count));
    aligns_ok = false;
  }
  if (!ok || !aligns_ok) return std::nullopt;
  return mod;
}

std::optional<ConnectionSpec> parse_connection(const json& obj, const std::string& label,
                                               const std::string& prefix, IssueSink& sink) {
  if (!obj.is_object()) {
    sink.add(label, prefix, codes::kUnknownToken, "connection entry must be an object");
    return std::nullopt;
  }
  bool ok = true;
  ConnectionSpec conn;
  if (auto to = string_field(obj, "TO_PART", label, prefix, sink)) {
    conn.to_part = *to;
  } else {
    ok = false;
  }

  auto contact = string_field(obj, "CONTACT_TYPE", label, prefix, sink);
  if (!contact) return std::nullopt;
  if (*contact == "SURFACE") {
    conn.contact = ContactType::Surface;
    conn.joint = JointType::Fixed;
  } else if (*contact == "INSERTED") {
    conn.contact = ContactType::Inserted;
    conn.joint = JointType::NonFixed;
  } else {
    sink.add(label, prefix + "CONTACT_TYPE", codes::kUnknownToken,
             "'" + *contact + "' is not one of SURFACE, INSERTED");
    return std::nullopt;
  }

  if (conn.contact == ContactType::Surface) {
    if (auto face = string_field(obj, "TO_FACE", label, prefix, sink)) {
      auto it = std::find_if(kFaces.begin(), kFaces.end(),
                             [&](const FaceEntry& e) { return e.token == *face; });
      if (it == kFaces.end()) {
        sink.add(label, prefix + "TO_FACE", codes::kUnknownToken,
                 "'" + *face + "' is not one of " + allowed_list(kFaces));
        ok = false;
      } else {
        conn.to_face = it->face;
      }
    } else {
      ok = false;
    }
    for (int a = 0; a < 3; ++a) {
      auto token = string_field(obj, kAlignKeys[a], label, prefix, sink);
      if (!token) {
        ok = false;
        continue;
      }
      auto it = std::find_if(kConnectionAlign[a].begin(), kConnectionAlign[a].end(),
                             [&](const TokenEntry& e) { return e.token == *token; });
      if (it == kConnectionAlign[a].end()) {
        sink.add(label, prefix + std::string(kAlignKeys[a]), codes::kUnknownToken,
                 "'" + *token + "' is not one of " + allowed_list(kConnectionAlign[a]));
        ok = false;
      } else {
        conn.align[a] = it->side;
      }
    }
  } else {
    if (auto mod = string_field(obj, "TO_MODIFICATION", label, prefix, sink)) {
      conn.to_modification = *mod;
    } else {
      ok = false;
    }
  }

  if (auto it = obj.find("TYPE"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) {
      sink.add(label, prefix + "TYPE", codes::kUnknownToken, "TYPE must be FIXED or NON_FIXED");
      ok = false;
    } else if (*it == "FIXED") {
      conn.joint = JointType::Fixed;
    } else if (*it == "NON_FIXED") {
      conn.joint = JointType::NonFixed;
    } else {
      sink.add(label, prefix + "TYPE", codes::kUnknownToken,
               "'" + it->get<std::string>() + "' is not one of FIXED, NON_FIXED");
      ok = false;
    }
  }
  if (!ok) return std::nullopt;
  return conn;
}

template <typename Fn>
void for_each_entry(const json& obj, std::string_view key, const std::string& label, IssueSink& sink,
                    Fn&& fn) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  if (!it->is_array()) {
    sink.add(label, std::string(key), codes::kUnknownToken, std::string(key) + " must be a list");
    return;
  }
  for (std::size_t i = 0; i < it->size(); ++i) {
    fn((*it)[i], std::string(key) + "[" + std::to_string(i) + "].");
  }
}

const json* locate_parts(const json& doc) {
  if (doc.is_array()) return &doc;
  if (!doc.is_object()) return nullptr;
  if (auto it = doc.find("PARTS"); it != doc.end() && it->is_array()) return &*it;
  if (doc.contains("NAME")) return nullptr;  // a lone part; handled by caller
  for (const auto& [key, value] : doc.items()) {
    if (value.is_array() && !value.empty() && value[0].is_object()) return &value;
  }
  return nullptr;
}

std::string strip_fences(std::string_view raw) {
  auto open = raw.find("```");
  if (open != std::string_view::npos) {
    auto line_end = raw.find('\n', open);
    if (line_end != std::string_view::npos) {
      auto close = raw.find("```", line_end + 1);
      if (close != std::string_view::npos) return std::string(raw.substr(line_end + 1, close - line_end - 1));
      return std::string(raw.substr(line_end + 1));
    }
  }
  return std::string(raw);
}

}  // namespace

std::string_view axis_name(Axis axis) {
  static constexpr std::array<std::string_view, 3> names{"X", "Y", "Z"};
  return names[index(axis)];
}

Axis ModificationSpec::hole_axis() const {
  for (int a = 0; a < 3; ++a) {
    if (align[a].through) return axis_from_index(a);
  }
  return Axis::Z;
}

const ModificationSpec* PartSpec::find_modification(std::string_view mod_name) const {
  for (const auto& mod : modifications) {
    if (mod.name == mod_name) return &mod;
  }
  return nullptr;
}

const PartSpec* CraftPlan::find(std::string_view name) const {
  for (const auto& part : parts) {
    if (part.name == name) return &part;
  }
  return nullptr;
}

bool FormatReport::has_code(std::string_view code) const {
  return std::any_of(errors.begin(), errors.end(), [&](const FormatIssue& e) { return e.code == code; });
}

json to_json(const FormatReport& report) {
  json errors = json::array();
  for (const auto& e : report.errors) {
    errors.push_back({{"part", e.part}, {"field", e.field}, {"code", e.code}, {"message", e.message}});
  }
  return {{"ok", report.ok()}, {"errors", std::move(errors)}};
}

json normalize_json(const json& value) {
  if (value.is_object()) {
    json out = json::object();
    for (const auto& [key, item] : value.items()) out[normalize_token(key)] = normalize_json(item);
    return out;
  }
  if (value.is_array()) {
    json out = json::array();
    for (const auto& item : value) out.push_back(normalize_json(item));
    return out;
  }
  if (value.is_string()) return normalize_token(value.get<std::string>());
  return value;
}

json normalize_raw(std::string_view raw) {
  const std::string text = strip_fences(raw);
  json parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded()) {
    // LLMs sometimes wrap the payload in prose; retry on the outermost brackets.
    auto first = text.find_first_of("[{");
    auto last = text.find_last_of("]}");
    if (first != std::string::npos && last != std::string::npos && last > first) {
      parsed = json::parse(text.substr(first, last - first + 1), nullptr, false);
    }
  }
  if (parsed.is_discarded()) throw JsonSyntaxError("response is not valid JSON");
  return normalize_json(parsed);
}

ParseOutcome parse_plan(const json& doc, const Catalog& catalog) {
  ParseOutcome outcome;
  IssueSink sink(outcome.report);

  json wrapped;
  const json* parts = locate_parts(doc);
  if (!parts && doc.is_object() && doc.contains("NAME")) {
    wrapped = json::array({doc});
    parts = &wrapped;
  }
  if (!parts) {
    sink.add("", "PARTS", codes::kMissingField, "expected a list of parts");
    return outcome;
  }
  if (parts->empty()) {
    sink.add("", "PARTS", codes::kMissingField, "the plan must contain at least one part");
    return outcome;
  }

  CraftPlan plan;
  std::vector<RawPart> raw_parts;
  for (std::size_t i = 0; i < parts->size(); ++i) {
    const json& obj = (*parts)[i];
    RawPart raw;
    raw.label = "#" + std::to_string(i);
    if (!obj.is_object()) {
      sink.add(raw.label, "", codes::kUnknownToken, "part entry must be an object");
      raw_parts.push_back(std::move(raw));
      continue;
    }
    PartSpec part;
    if (auto it = obj.find("NAME"); it != obj.end() && it->is_string()) raw.label = it->get<std::string>();
    const std::string& label = raw.label;

    if (auto name = string_field(obj, "NAME", label, "", sink)) {
      part.name = *name;
      raw.name = *name;
      if (!matches(part_name_pattern(), *name)) {
        sink.add(label, "NAME", codes::kBadNamePattern, "'" + *name + "' does not match <TYPE>_<numeral>");
      }
    }

    const ObjectType* object = nullptr;
    if (auto id = string_field(obj, "AVAILABLE_OBJ", label, "", sink)) {
      object = catalog.find(*id);
      if (!object) {
        sink.add(label, "AVAILABLE_OBJ", codes::kUnknownObject, "'" + *id + "' is not in the catalog");
      } else {
        part.available_obj = normalize_token(object->id);
      }
    }

    parse_orientation(obj, object, part, label, sink);

    for_each_entry(obj, "MODIFICATIONS", label, sink, [&](const json& m, const std::string& prefix) {
      if (m.is_object()) {
        if (auto it = m.find("NAME"); it != m.end() && it->is_string()) {
          if (!raw.modification_names.insert(it->get<std::string>()).second) {
            sink.add(label, prefix + "NAME", codes::kDuplicateName,
                     "modification name '" + it->get<std::string>() + "' repeated");
          }
        }
      }
      if (auto mod = parse_modification(m, label, prefix, sink)) part.modifications.push_back(*mod);
    });

    for_each_entry(obj, "CONNECTIONS", label, sink, [&](const json& c, const std::string& prefix) {
      if (auto conn = parse_connection(c, label, prefix, sink)) part.connections.push_back(*conn);
    });

    if (auto it = obj.find("EXEC_FUNCTION"); it == obj.end() || it->is_null()) {
      sink.add(label, "EXEC_FUNCTION", codes::kMissingField, "required field EXEC_FUNCTION is missing");
    } else if (!it->is_boolean()) {
      sink.add(label, "EXEC_FUNCTION", codes::kUnknownToken, "EXEC_FUNCTION must be true or false");
    } else {
      part.exec_function = it->get<bool>();
    }

    raw_parts.push_back(std::move(raw));
    plan.parts.push_back(std::move(part));
  }

  // Names and references.
  std::map<std::string, const RawPart*> by_name;
  for (const RawPart& raw : raw_parts) {
    if (!raw.name) continue;
    if (!by_name.emplace(*raw.name, &raw).second) {
      sink.add(*raw.name, "NAME", codes::kDuplicateName, "part name '" + *raw.name + "' repeated");
    }
  }
  for (const PartSpec& part : plan.parts) {
    for (std::size_t c = 0; c < part.connections.size(); ++c) {
      const ConnectionSpec& conn = part.connections[c];
      const std::string prefix = "CONNECTIONS[" + std::to_string(c) + "].";
      if (conn.to_part == part.name) {
        sink.add(part.name, prefix + "TO_PART", codes::kDanglingReference, "a part cannot connect to itself");
        continue;
      }
      auto target = by_name.find(conn.to_part);
      if (target == by_name.end()) {
        sink.add(part.name, prefix + "TO_PART", codes::kDanglingReference,
                 "no part named '" + conn.to_part + "'");
        continue;
      }
      if (conn.contact == ContactType::Inserted &&
          !target->second->modification_names.contains(conn.to_modification)) {
        sink.add(part.name, prefix + "TO_MODIFICATION", codes::kDanglingReference,
                 "'" + conn.to_part + "' has no modification '" + conn.to_modification + "'");
      }
    }
  }

  if (outcome.report.ok()) outcome.plan = std::move(plan);
  return outcome;
}

ParseOutcome parse_plan_text(std::string_view raw, const Catalog& catalog) {
  try {
    return parse_plan(normalize_raw(raw), catalog);
  } catch (const JsonSyntaxError& e) {
    ParseOutcome outcome;
    outcome.report.errors.push_back({"", "", std::string(codes::kJsonSyntax), e.what()});
    return outcome;
  }
}

std::string_view face_token(Face face) {
  for (const auto& e : kFaces) {
    if (e.face == face) return e.token;
  }
  return "TOP";
}

std::string_view connection_align_token(Axis axis, Side side) {
  for (const auto& e : kConnectionAlign[index(axis)]) {
    if (e.side == side) return e.token;
  }
  return "CENTER";
}

std::string_view hole_align_token(Axis axis, const HoleAlign& align) {
  if (align.through) {
    for (const auto& e : kHoleSpan[index(axis)]) {
      if (e.span == align.span) return e.token;
    }
  }
  for (const auto& e : kHolePosition[index(axis)]) {
    if (e.side == align.position) return e.token;
  }
  return "CENTER";
}

std::string_view cylinder_axis_token(Axis axis) { return kCylinderAxis[index(axis)]; }

json plan_to_json(const CraftPlan& plan) {
  json parts = json::array();
  for (const PartSpec& part : plan.parts) {
    json p;
    p["NAME"] = part.name;
    p["AVAILABLE_OBJ"] = part.available_obj;
    if (const auto* dims = std::get_if<std::array<double, 3>>(&part.orientation)) {
      p["ORIENTATION"] = *dims;
    } else {
      p["ORIENTATION"] = cylinder_axis_token(std::get<Axis>(part.orientation));
    }
    json mods = json::array();
    for (const auto& mod : part.modifications) {
      json m{{"NAME", mod.name}, {"TYPE", "HOLE"}};
      for (int a = 0; a < 3; ++a) m[kAlignKeys[a]] = hole_align_token(axis_from_index(a), mod.align[a]);
      mods.push_back(std::move(m));
    }
    p["MODIFICATIONS"] = std::move(mods);
    json conns = json::array();
    for (const auto& conn : part.connections) {
      json c{{"TO_PART", conn.to_part}};
      if (conn.contact == ContactType::Surface) {
        c["CONTACT_TYPE"] = "SURFACE";
        c["TO_FACE"] = face_token(conn.to_face);
        for (int a = 0; a < 3; ++a) c[kAlignKeys[a]] = connection_align_token(axis_from_index(a), conn.align[a]);
      } else {
        c["CONTACT_TYPE"] = "INSERTED";
        c["TO_MODIFICATION"] = conn.to_modification;
      }
      c["TYPE"] = conn.joint == JointType::Fixed ? "FIXED" : "NON_FIXED";
      conns.push_back(std::move(c));
    }
    p["CONNECTIONS"] = std::move(conns);
    p["EXEC_FUNCTION"] = part.exec_function;
    parts.push_back(std::move(p));
  }
  return parts;
}

std::string serialize_plan(const CraftPlan& plan) { return plan_to_json(plan).dump(2); }

}  // namespace craft
