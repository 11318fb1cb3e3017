#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "craft/assembler.hpp"
#include "craft/physics.hpp"

namespace craft {

enum class SimFunction { Hit, Support, Rolling };

std::string_view to_string(SimFunction f);
std::optional<SimFunction> parse_function(std::string_view text);  // case-insensitive

enum class FailureReason {
  None,
  PartSeparated,
  NewGroundContact,
  InsufficientRotation,
  InsufficientDistance,
  Veered,
  MovedUnderLoad,
  PegMissed,
  PegOutsideHole,
  NumericalDivergence,
};

std::string_view to_string(FailureReason r);

struct BodyPose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

struct TrajectorySample {
  double t = 0.0;
  std::vector<BodyPose> poses;  // one per body, world order
};

struct SimOutcome {
  SimFunction function = SimFunction::Rolling;
  bool success = false;
  FailureReason failure_reason = FailureReason::None;
  std::string detail;  // offending part or connection
  double time = 0.0;   // simulated time at the verdict, s

  std::vector<std::string> body_ids;
  std::vector<TrajectorySample> trajectories;
  std::vector<std::pair<std::string, double>> cumulative_rotation;  // rad, per flagged part

  // rolling: craft centroid dx; support: largest part displacement;
  // hit: descent of the peg top.
  double displacement = 0.0;
  double lateral = 0.0;  // rolling: centroid dy when dx first reached the target
  bool peg_contact = false;
};

nlohmann::json to_json(const SimOutcome& outcome, bool include_trajectories = false);

// Overrides fields of `config` from a JSON object keyed by field name
// ("timestep", "duration", "friction", ...); unknown keys throw Error.
void update_from_json(SimConfig& config, const nlohmann::json& doc);
nlohmann::json to_json(const SimConfig& config);

// Two parts of a declared connection that live on different bodies: the
// connection anchor expressed in both body frames.
struct SeparationWatch {
  std::string a;
  std::string b;
  std::size_t body_a = 0;
  std::size_t body_b = 0;
  Vec3 local_a = Vec3::Zero();
  Vec3 local_b = Vec3::Zero();
};

struct CompiledCraft {
  World world;
  std::size_t craft_bodies = 0;   // bodies [0, craft_bodies) belong to the craft
  std::vector<std::string> parts;  // plan order
  std::vector<std::size_t> part_body;
  std::vector<Primitive> part_local;  // base primitive in its body frame
  std::vector<bool> exec;
  std::vector<std::size_t> edge_count;
  std::vector<SeparationWatch> watches;
  std::vector<bool> initial_ground;

  Vec3 part_center(std::size_t i) const;
  double part_lowest_z(std::size_t i) const;
  Vec3 centroid() const;  // mass-weighted over the craft bodies
  // Records which parts touch the ground plane now.
  void record_ground();
};

// Scales the assembly, merges FIXED clusters into bodies and turns each
// NON_FIXED INSERTED connection into a revolute joint about the hole axis.
CompiledCraft compile_bodies(const Assembly& assembly, const SimConfig& config);

struct Failure {
  FailureReason reason = FailureReason::None;
  std::string detail;
};

// Shared failure conditions: separated connection, new ground contact, and
// numerical divergence.
std::optional<Failure> check_failure_conditions(const CompiledCraft& craft);

struct RunOptions {
  std::ostream* trace = nullptr;  // one JSON object per step
  int sample_every = 10;          // steps between stored trajectory samples
};

SimOutcome run_rolling_test(const Assembly& assembly, const SimConfig& config = {}, const RunOptions& options = {});
SimOutcome run_support_test(const Assembly& assembly, const SimConfig& config = {}, const RunOptions& options = {});
SimOutcome run_hit_test(const Assembly& assembly, const SimConfig& config = {}, const RunOptions& options = {});
SimOutcome run_function_test(const Assembly& assembly, SimFunction function, const SimConfig& config = {},
                             const RunOptions& options = {});

}  // namespace craft
