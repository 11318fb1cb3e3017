#include <doctest.h>

#include <random>
#include <set>

#include "craft/catalog.hpp"
#include "craft/errors.hpp"
#include "craft/plan.hpp"
#include "oracles.hpp"

using namespace craft;
using namespace craft::testing;


namespace {

const Catalog& catalog() {
  static const Catalog c = load_default_catalog();
  return c;
}

const char* kHammer = R"([
  {"Name": "Handle_1", "Available_obj": "CYLINDER_R10_L200", "Orientation": "front-back",
   "Modifications": [], "Connections": [], "exec_function": false},
  {"Name": "Head_1", "Available_obj": "CUBOID_30x30x80", "Orientation": [30, 30, 80],
   "Modifications": [],
   "Connections": [{"to_part": "Handle_1", "contact_type": "Surface", "to_face": "BACK",
                    "align_x": "CENTER", "align_y": "CENTER", "align_z": "CENTER"}],
   "exec_function": true}
])";

json hammer() { return normalize_raw(kHammer); }

std::vector<std::string> codes_of(const FormatReport& report) {
  std::vector<std::string> out;
  for (const auto& e : report.errors) out.push_back(e.code);
  return out;
}

bool has_issue(const FormatReport& r, std::string_view code, std::string_view field) {
  for (const auto& e : r.errors) {
    if (e.code == code && e.field == field) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("normalize_raw upper-cases keys and string values") {
  json doc = normalize_raw(R"({"align-x": "Top_Bottom", "n": 3, "flag": true, "list": ["a-b"]})");
  CHECK(doc.contains("ALIGN_X"));
  CHECK(doc["ALIGN_X"] == "TOP_BOTTOM");
  CHECK(doc["N"] == 3);
  CHECK(doc["FLAG"] == true);
  CHECK(doc["LIST"][0] == "A_B");
  CHECK(normalize_json(doc) == doc);
}

TEST_CASE("normalize_raw strips code fences and surrounding prose") {
  CHECK(normalize_raw("```json\n[{\"a\": 1}]\n```") == json::parse(R"([{"A": 1}])"));
  CHECK(normalize_raw("Here is the plan:\n[{\"a\": 1}]\nGood luck.") == json::parse(R"([{"A": 1}])"));
  CHECK_THROWS_AS(normalize_raw("no json here"), JsonSyntaxError);
  auto outcome = parse_plan_text("{broken", catalog());
  CHECK(!outcome.report.ok());
  CHECK(outcome.report.has_code(codes::kJsonSyntax));
}

TEST_CASE("golden hammer parses") {
  auto outcome = parse_plan(hammer(), catalog());
  REQUIRE(outcome.report.ok());
  REQUIRE(outcome.plan);
  const CraftPlan& plan = *outcome.plan;
  REQUIRE(plan.parts.size() == 2);
  CHECK(plan.parts[0].name == "HANDLE_1");
  CHECK(std::get<Axis>(plan.parts[0].orientation) == Axis::X);
  CHECK(plan.parts[1].connections[0].to_face == Face{Axis::X, Side::Low});
  CHECK(plan.parts[1].connections[0].joint == JointType::Fixed);
  CHECK(plan.parts[1].exec_function);
}

TEST_CASE("plan wrapped in an object or given as a single part") {
  json wrapped{{"PARTS", hammer()}};
  CHECK(parse_plan(wrapped, catalog()).report.ok());
  json single = hammer()[0];
  auto outcome = parse_plan(single, catalog());
  CHECK(outcome.report.ok());
  CHECK(outcome.plan->parts.size() == 1);
  CHECK(parse_plan(json::array(), catalog()).report.has_code(codes::kMissingField));
  CHECK(parse_plan(json(42), catalog()).report.has_code(codes::kMissingField));
}

TEST_CASE("cuboid orientation must permute catalog dimensions") {
  json doc = normalize_raw(R"([{"Name": "BAR_1", "Available_obj": "CUBOID_200x40x10",
                                "Orientation": [40, 200, 10], "exec_function": false}])");
  CHECK(parse_plan(doc, catalog()).report.ok());
  doc[0]["ORIENTATION"] = {40, 200, 25};
  auto outcome = parse_plan(doc, catalog());
  CHECK(!outcome.plan);
  CHECK(codes_of(outcome.report) == std::vector<std::string>{"BadOrientationPermutation"});
  doc[0]["ORIENTATION"] = "TOP_BOTTOM";
  CHECK(parse_plan(doc, catalog()).report.has_code(codes::kBadOrientation));
}

TEST_CASE("cylinder orientation tokens") {
  json doc = normalize_raw(R"([{"Name": "AXLE_1", "Available_obj": "CYLINDER_R5_L80",
                                "Orientation": "LEFT_RIGHT", "exec_function": false}])");
  auto outcome = parse_plan(doc, catalog());
  REQUIRE(outcome.plan);
  CHECK(std::get<Axis>(outcome.plan->parts[0].orientation) == Axis::Y);
  doc[0]["ORIENTATION"] = "UP_DOWN";
  CHECK(has_issue(parse_plan(doc, catalog()).report, codes::kUnknownToken, "ORIENTATION"));
}

TEST_CASE("missing ALIGN_Y on a surface contact") {
  json doc = hammer();
  doc[1]["CONNECTIONS"][0].erase("ALIGN_Y");
  auto outcome = parse_plan(doc, catalog());
  CHECK(!outcome.plan);
  REQUIRE(outcome.report.errors.size() == 1);
  CHECK(outcome.report.errors[0].code == "MissingField");
  CHECK(outcome.report.errors[0].field == "CONNECTIONS[0].ALIGN_Y");
  CHECK(outcome.report.errors[0].part == "HEAD_1");
}

TEST_CASE("all violations are reported") {
  json doc = hammer();
  doc[0]["AVAILABLE_OBJ"] = "CYLINDER_R99_L1";
  doc[1]["CONNECTIONS"][0]["TO_FACE"] = "UPSIDE";
  doc[1]["CONNECTIONS"][0]["TO_PART"] = "HANDLE_9";
  doc[1].erase("EXEC_FUNCTION");
  auto outcome = parse_plan(doc, catalog());
  CHECK(has_issue(outcome.report, codes::kUnknownObject, "AVAILABLE_OBJ"));
  CHECK(has_issue(outcome.report, codes::kUnknownToken, "CONNECTIONS[0].TO_FACE"));
  CHECK(has_issue(outcome.report, codes::kMissingField, "EXEC_FUNCTION"));
  // the connection with a bad face is dropped before reference checking
  CHECK(outcome.report.errors.size() == 3);
}

TEST_CASE("reference checks") {
  SUBCASE("unknown part") {
    json doc = hammer();
    doc[1]["CONNECTIONS"][0]["TO_PART"] = "HANDLE_9";
    CHECK(has_issue(parse_plan(doc, catalog()).report, codes::kDanglingReference, "CONNECTIONS[0].TO_PART"));
  }
  SUBCASE("self reference") {
    json doc = hammer();
    doc[1]["CONNECTIONS"][0]["TO_PART"] = "HEAD_1";
    CHECK(has_issue(parse_plan(doc, catalog()).report, codes::kDanglingReference, "CONNECTIONS[0].TO_PART"));
  }
  SUBCASE("unknown modification") {
    json doc = hammer();
    doc[1]["CONNECTIONS"][0] = {{"TO_PART", "HANDLE_1"}, {"CONTACT_TYPE", "INSERTED"}, {"TO_MODIFICATION", "HOLE_1"}};
    CHECK(has_issue(parse_plan(doc, catalog()).report, codes::kDanglingReference,
                    "CONNECTIONS[0].TO_MODIFICATION"));
  }
  SUBCASE("duplicate names") {
    json doc = hammer();
    doc[1]["NAME"] = "HANDLE_1";
    doc[1]["CONNECTIONS"] = json::array();
    CHECK(parse_plan(doc, catalog()).report.has_code(codes::kDuplicateName));
  }
  SUBCASE("name pattern") {
    json doc = hammer();
    doc[1]["NAME"] = "HEAD";
    CHECK(has_issue(parse_plan(doc, catalog()).report, codes::kBadNamePattern, "NAME"));
    doc[1]["NAME"] = "SIDE_PANEL_2";
    CHECK(parse_plan(doc, catalog()).report.ok());
  }
}

TEST_CASE("modifications") {
  json doc = normalize_raw(R"([{"Name": "BLOCK_1", "Available_obj": "CUBOID_100x100x100",
    "Orientation": [100, 100, 100],
    "Modifications": [{"Name": "Hole_1", "Type": "HOLE", "align_x": "FRONT",
                       "align_y": "CENTER", "align_z": "LOW_HIGH_HALF"}],
    "exec_function": false}])");
  auto outcome = parse_plan(doc, catalog());
  REQUIRE(outcome.plan);
  const ModificationSpec& mod = outcome.plan->parts[0].modifications[0];
  CHECK(mod.hole_axis() == Axis::Z);
  CHECK(mod.align[2].span == HoleSpan::HalfFromLow);
  CHECK(mod.align[0].position == Side::High);

  SUBCASE("two through axes") {
    doc[0]["MODIFICATIONS"][0]["ALIGN_X"] = "FRONT_BACK_FULL";
    CHECK(parse_plan(doc, catalog()).report.has_code(codes::kAmbiguousHoleAxis));
  }
  SUBCASE("no through axis") {
    doc[0]["MODIFICATIONS"][0]["ALIGN_Z"] = "HIGH";
    CHECK(parse_plan(doc, catalog()).report.has_code(codes::kAmbiguousHoleAxis));
  }
  SUBCASE("token from the wrong axis") {
    doc[0]["MODIFICATIONS"][0]["ALIGN_Y"] = "HIGH";
    CHECK(has_issue(parse_plan(doc, catalog()).report, codes::kUnknownToken, "MODIFICATIONS[0].ALIGN_Y"));
  }
  SUBCASE("bad type and name") {
    doc[0]["MODIFICATIONS"][0]["TYPE"] = "SLOT";
    doc[0]["MODIFICATIONS"][0]["NAME"] = "CUT_1";
    auto report = parse_plan(doc, catalog()).report;
    CHECK(has_issue(report, codes::kUnknownToken, "MODIFICATIONS[0].TYPE"));
    CHECK(has_issue(report, codes::kBadNamePattern, "MODIFICATIONS[0].NAME"));
  }
  SUBCASE("duplicate modification names") {
    doc[0]["MODIFICATIONS"].push_back(doc[0]["MODIFICATIONS"][0]);
    CHECK(parse_plan(doc, catalog()).report.has_code(codes::kDuplicateName));
  }
}

TEST_CASE("joint type defaults and overrides") {
  json doc = normalize_raw(R"([
    {"Name": "WHEEL_1", "Available_obj": "CYLINDER_R15_L20", "Orientation": "LEFT_RIGHT",
     "Modifications": [{"Name": "HOLE_1", "Type": "HOLE", "align_x": "CENTER",
                        "align_y": "RIGHT_LEFT_FULL", "align_z": "CENTER"}],
     "exec_function": true},
    {"Name": "AXLE_1", "Available_obj": "CYLINDER_R5_L80", "Orientation": "LEFT_RIGHT",
     "Connections": [{"to_part": "WHEEL_1", "contact_type": "INSERTED", "to_modification": "HOLE_1"}],
     "exec_function": false}])");
  auto outcome = parse_plan(doc, catalog());
  REQUIRE(outcome.plan);
  CHECK(outcome.plan->parts[1].connections[0].joint == JointType::NonFixed);
  doc[1]["CONNECTIONS"][0]["TYPE"] = "FIXED";
  CHECK(parse_plan(doc, catalog()).plan->parts[1].connections[0].joint == JointType::Fixed);
  doc[1]["CONNECTIONS"][0]["TYPE"] = "GLUED";
  CHECK(parse_plan(doc, catalog()).report.has_code(codes::kUnknownToken));

  json surface = hammer();
  CHECK(parse_plan(surface, catalog()).plan->parts[1].connections[0].joint == JointType::Fixed);
  surface[1]["CONNECTIONS"][0]["TYPE"] = "NON_FIXED";
  CHECK(parse_plan(surface, catalog()).plan->parts[1].connections[0].joint == JointType::NonFixed);
}

TEST_CASE("serialize round trip") {
  CraftPlan plan = *parse_plan(hammer(), catalog()).plan;
  std::string text = serialize_plan(plan);
  auto again = parse_plan_text(text, catalog());
  REQUIRE(again.plan);
  CHECK(*again.plan == plan);
  CHECK(serialize_plan(*again.plan) == text);
  json doc = json::parse(text);
  CHECK(doc[0]["MODIFICATIONS"] == json::array());
  CHECK(doc[0]["EXEC_FUNCTION"] == false);
  CHECK(doc[1]["CONNECTIONS"][0]["TYPE"] == "FIXED");
}

TEST_CASE("token spellings stay inside the template vocabulary") {
  const std::set<std::string> faces{"TOP", "BOTTOM", "RIGHT", "LEFT", "FRONT", "BACK"};
  const std::array<std::set<std::string>, 3> conn{{{"FRONT", "CENTER", "BACK"},
                                                   {"RIGHT", "CENTER", "LEFT"},
                                                   {"TOP", "CENTER", "BOTTOM"}}};
  const std::array<std::set<std::string>, 3> hole{
      {{"FRONT", "CENTER", "BACK", "FRONT_BACK_FULL", "FRONT_BACK_HALF", "BACK_FRONT_HALF"},
       {"RIGHT", "CENTER", "LEFT", "RIGHT_LEFT_FULL", "RIGHT_LEFT_HALF", "LEFT_RIGHT_HALF"},
       {"HIGH", "CENTER", "LOW", "HIGH_LOW_FULL", "HIGH_LOW_HALF", "LOW_HIGH_HALF"}}};
  for (int a = 0; a < 3; ++a) {
    Axis axis = axis_from_index(a);
    for (Side side : {Side::Low, Side::Center, Side::High}) {
      CHECK(conn[a].contains(std::string(connection_align_token(axis, side))));
      CHECK(hole[a].contains(std::string(hole_align_token(axis, {false, side, HoleSpan::Full}))));
      if (side != Side::Center) CHECK(faces.contains(std::string(face_token({axis, side}))));
    }
    for (HoleSpan span : {HoleSpan::Full, HoleSpan::HalfFromHigh, HoleSpan::HalfFromLow}) {
      CHECK(hole[a].contains(std::string(hole_align_token(axis, {true, Side::Center, span}))));
    }
  }
  CHECK(cylinder_axis_token(Axis::Z) == "TOP_BOTTOM");
}

TEST_CASE("fuzz: normalization is idempotent and parsing never throws") {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 1000; ++i) {
    json doc = random_json(rng, 0);
    json once = normalize_json(doc);
    CHECK(normalize_json(once) == once);
    ParseOutcome outcome;
    CHECK_NOTHROW(outcome = parse_plan(once, catalog()));
    CHECK(outcome.report.ok() == outcome.plan.has_value());
    CHECK_NOTHROW(parse_plan_text(doc.dump(), catalog()));
  }
}
