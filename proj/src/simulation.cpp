#include "craft/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <type_traits>

namespace craft {

using nlohmann::json;

namespace {

Primitive scaled(const Primitive& p, double s) {
  Primitive out = p;
  out.center *= s;
  out.half *= s;
  return out;
}

Solid scaled(const Solid& solid, double s) {
  Solid out{scaled(solid.base, s), {}};
  for (const Primitive& h : solid.holes) out.holes.push_back(scaled(h, s));
  return out;
}

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json quat(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

// Drives the step loop: trajectory samples, trace lines and the shared
// failure checks.
class Runner {
 public:
  Runner(CompiledCraft& craft, SimOutcome& out, const RunOptions& options)
      : craft_(craft), out_(out), options_(options) {
    for (const RigidBody& b : craft.world.bodies()) out.body_ids.push_back(b.id);
    record();
  }

  // Steps once; returns false once a shared failure condition fired.
  bool step() {
    craft_.world.step();
    ++steps_;
    out_.time = craft_.world.time();
    record();
    if (auto f = check_failure_conditions(craft_)) {
      fail(f->reason, f->detail);
      return false;
    }
    return true;
  }

  void fail(FailureReason reason, std::string detail) {
    out_.success = false;
    out_.failure_reason = reason;
    out_.detail = std::move(detail);
  }

 private:
  void record() {
    const World& w = craft_.world;
    if (steps_ % std::max(1, options_.sample_every) == 0) {
      TrajectorySample s;
      s.t = w.time();
      for (const RigidBody& b : w.bodies()) s.poses.push_back({b.position, b.orientation});
      out_.trajectories.push_back(std::move(s));
    }
    if (options_.trace) {
      json bodies = json::array();
      for (const RigidBody& b : w.bodies()) {
        bodies.push_back({{"id", b.id}, {"p", vec(b.position)}, {"q", quat(b.orientation)}});
      }
      *options_.trace << json{{"t", w.time()}, {"bodies", std::move(bodies)}}.dump() << '\n';
    }
  }

  CompiledCraft& craft_;
  SimOutcome& out_;
  const RunOptions& options_;
  long steps_ = 0;
};

std::size_t steps_for(double seconds, double dt) { return static_cast<std::size_t>(std::llround(seconds / dt)); }

// Angular speed of a flagged part about its joint axis relative to the joint
// partner; parts without a joint use their own cylinder axis (or Y).
double relative_spin(const CompiledCraft& craft, std::size_t part) {
  const World& world = craft.world;
  const std::size_t body = craft.part_body[part];
  for (const RevoluteJoint& j : world.joints()) {
    if (j.a != body && j.b != body) continue;
    const Vec3 axis = world.body(j.a).direction_to_world(j.local_axis_a).normalized();
    const std::size_t other = j.a == body ? j.b : j.a;
    return (world.body(body).angular_velocity - world.body(other).angular_velocity).dot(axis);
  }
  const Primitive& p = craft.part_local[part];
  const Vec3 axis = p.kind == PrimKind::Cylinder ? world.body(body).direction_to_world(Vec3::Unit(index(p.axis)))
                                                 : Vec3::UnitY();
  return world.body(body).angular_velocity.dot(axis);
}

}  // namespace

std::string_view to_string(SimFunction f) {
  switch (f) {
    case SimFunction::Hit: return "hit";
    case SimFunction::Support: return "support";
    case SimFunction::Rolling: return "rolling";
  }
  return "rolling";
}

std::optional<SimFunction> parse_function(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "hit") return SimFunction::Hit;
  if (lower == "support") return SimFunction::Support;
  if (lower == "rolling") return SimFunction::Rolling;
  return std::nullopt;
}

std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::None: return "NONE";
    case FailureReason::PartSeparated: return "PART_SEPARATED";
    case FailureReason::NewGroundContact: return "NEW_GROUND_CONTACT";
    case FailureReason::InsufficientRotation: return "INSUFFICIENT_ROTATION";
    case FailureReason::InsufficientDistance: return "INSUFFICIENT_DISTANCE";
    case FailureReason::Veered: return "VEERED";
    case FailureReason::MovedUnderLoad: return "MOVED_UNDER_LOAD";
    case FailureReason::PegMissed: return "PEG_MISSED";
    case FailureReason::PegOutsideHole: return "PEG_OUTSIDE_HOLE";
    case FailureReason::NumericalDivergence: return "NUMERICAL_DIVERGENCE";
  }
  return "NONE";
}

json to_json(const SimOutcome& o, bool include_trajectories) {
  json j{{"function", to_string(o.function)},
         {"success", o.success},
         {"failure_reason", to_string(o.failure_reason)},
         {"detail", o.detail},
         {"time_s", o.time},
         {"displacement_m", o.displacement}};
  if (o.function == SimFunction::Rolling) {
    json rot = json::object();
    for (const auto& [part, rad] : o.cumulative_rotation) rot[part] = rad;
    j["cumulative_rotation_rad"] = std::move(rot);
    j["lateral_m"] = o.lateral;
  }
  if (o.function == SimFunction::Hit) j["peg_contact"] = o.peg_contact;
  if (include_trajectories) {
    json traj = json::array();
    for (const TrajectorySample& s : o.trajectories) {
      json poses = json::array();
      for (std::size_t i = 0; i < s.poses.size(); ++i) {
        poses.push_back({{"id", i < o.body_ids.size() ? o.body_ids[i] : std::to_string(i)},
                         {"p", vec(s.poses[i].position)},
                         {"q", quat(s.poses[i].orientation)}});
      }
      traj.push_back({{"t", s.t}, {"bodies", std::move(poses)}});
    }
    j["trajectories"] = std::move(traj);
  }
  return j;
}

Vec3 CompiledCraft::part_center(std::size_t i) const {
  return world.body(part_body[i]).to_world(part_local[i].center);
}

double CompiledCraft::part_lowest_z(std::size_t i) const { return lowest_z(part_local[i], world.body(part_body[i])); }

Vec3 CompiledCraft::centroid() const {
  Vec3 sum = Vec3::Zero();
  double mass = 0.0;
  for (std::size_t i = 0; i < craft_bodies; ++i) {
    const RigidBody& b = world.body(i);
    sum += b.mass * b.position;
    mass += b.mass;
  }
  return mass > 0.0 ? Vec3(sum / mass) : sum;
}

void CompiledCraft::record_ground() {
  initial_ground.assign(parts.size(), false);
  const double h = world.config().ground_contact_height;
  for (std::size_t i = 0; i < parts.size(); ++i) initial_ground[i] = part_lowest_z(i) <= h;
}

CompiledCraft compile_bodies(const Assembly& assembly, const SimConfig& config) {
  config.validate();
  const double s = config.scale;
  const std::size_t n = assembly.parts.size();

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (const Edge& e : assembly.edges) {
    if (e.connection.joint != JointType::Fixed) continue;
    std::size_t a = find_root(parent, assembly.index_of(e.from));
    std::size_t b = find_root(parent, assembly.index_of(e.to));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }

  CompiledCraft craft;
  craft.world = World(config);
  craft.part_body.assign(n, 0);
  craft.part_local.resize(n);
  craft.edge_count.assign(n, 0);
  std::vector<std::size_t> body_of_root(n, n);
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) {
    craft.parts.push_back(assembly.parts[i].name());
    craft.exec.push_back(assembly.parts[i].spec.exec_function);
    std::size_t r = find_root(parent, i);
    if (body_of_root[r] == n) {
      body_of_root[r] = members.size();
      members.emplace_back();
    }
    members[body_of_root[r]].push_back(i);
    craft.part_body[i] = body_of_root[r];
  }
  for (const auto& group : members) {
    std::vector<std::pair<std::string, Solid>> solids;
    for (std::size_t i : group) solids.emplace_back(assembly.parts[i].name(), scaled(assembly.parts[i].solid(), s));
    RigidBody body = make_body(assembly.parts[group.front()].name(), solids, config.part_mass);
    for (std::size_t k = 0; k < group.size(); ++k) craft.part_local[group[k]] = body.shapes[k].local;
    craft.world.add_body(std::move(body));
  }
  craft.craft_bodies = members.size();

  for (const Edge& e : assembly.edges) {
    const std::size_t from = assembly.index_of(e.from);
    const std::size_t to = assembly.index_of(e.to);
    ++craft.edge_count[from];
    ++craft.edge_count[to];
    if (e.connection.contact != ContactType::Inserted || e.connection.joint != JointType::NonFixed) continue;
    const std::size_t ba = craft.part_body[from];
    const std::size_t bb = craft.part_body[to];
    const HoleRegion* hole = assembly.parts[to].find_hole(e.connection.to_modification);
    if (ba == bb || hole == nullptr) continue;
    craft.world.add_revolute(ba, bb, s * hole->center, Vec3::Unit(index(hole->axis)));
  }

  for (const Edge& e : assembly.edges) {
    const std::size_t from = assembly.index_of(e.from);
    const std::size_t to = assembly.index_of(e.to);
    const std::size_t ba = craft.part_body[from];
    const std::size_t bb = craft.part_body[to];
    if (ba == bb) continue;
    Vec3 anchor;
    const HoleRegion* hole = e.connection.contact == ContactType::Inserted
                                 ? assembly.parts[to].find_hole(e.connection.to_modification)
                                 : nullptr;
    if (hole) {
      anchor = s * hole->center;
    } else {
      anchor = s * assembly.parts[from].aabb().intersect(assembly.parts[to].aabb()).center();
    }
    // Between hinged bodies only points on the hinge axis stay put.
    for (const RevoluteJoint& j : craft.world.joints()) {
      if (std::minmax(j.a, j.b) != std::minmax(ba, bb)) continue;
      const RigidBody& body = craft.world.body(j.a);
      const Vec3 p0 = body.to_world(j.local_anchor_a);
      const Vec3 axis = body.direction_to_world(j.local_axis_a).normalized();
      anchor = p0 + (anchor - p0).dot(axis) * axis;
      break;
    }
    craft.watches.push_back({e.from, e.to, ba, bb, craft.world.body(ba).to_local(anchor),
                             craft.world.body(bb).to_local(anchor)});
  }
  craft.record_ground();
  return craft;
}

std::optional<Failure> check_failure_conditions(const CompiledCraft& craft) {
  const World& w = craft.world;
  if (w.diverged()) return Failure{FailureReason::NumericalDivergence, ""};
  for (const SeparationWatch& s : craft.watches) {
    const double drift = (w.body(s.body_a).to_world(s.local_a) - w.body(s.body_b).to_world(s.local_b)).norm();
    if (drift > w.config().separation_threshold) return Failure{FailureReason::PartSeparated, s.a + "-" + s.b};
  }
  const double h = w.config().ground_contact_height;
  for (std::size_t i = 0; i < craft.parts.size(); ++i) {
    if (!craft.initial_ground[i] && craft.part_lowest_z(i) <= h) {
      return Failure{FailureReason::NewGroundContact, craft.parts[i]};
    }
  }
  return std::nullopt;
}

SimOutcome run_rolling_test(const Assembly& assembly, const SimConfig& config, const RunOptions& options) {
  CompiledCraft craft = compile_bodies(assembly, config);
  SimOutcome out;
  out.function = SimFunction::Rolling;
  Runner runner(craft, out, options);

  const std::size_t driver = static_cast<std::size_t>(
      std::max_element(craft.edge_count.begin(), craft.edge_count.end()) - craft.edge_count.begin());
  std::vector<double> rotation(craft.parts.size(), 0.0);
  const Vec3 start = craft.centroid();
  bool reached = false;
  bool failed = false;
  const double dt = config.timestep;
  for (std::size_t k = 0, steps = steps_for(config.duration, dt); k < steps; ++k) {
    RigidBody& body = craft.world.body(craft.part_body[driver]);
    body.apply_force(Vec3(config.rolling_force, 0.0, 0.0), craft.part_center(driver));
    if (!runner.step()) {
      failed = true;
      break;
    }
    for (std::size_t i = 0; i < craft.parts.size(); ++i) {
      if (craft.exec[i]) rotation[i] += relative_spin(craft, i) * dt;
    }
    const Vec3 c = craft.centroid();
    out.displacement = c.x() - start.x();
    if (!reached && out.displacement >= config.rolling_distance) {
      reached = true;
      out.lateral = c.y() - start.y();
    }
  }
  for (std::size_t i = 0; i < craft.parts.size(); ++i) {
    if (craft.exec[i]) out.cumulative_rotation.emplace_back(craft.parts[i], std::abs(rotation[i]));
  }
  if (failed) return out;

  for (const auto& [part, rad] : out.cumulative_rotation) {
    if (rad < 2.0 * std::numbers::pi) {
      runner.fail(FailureReason::InsufficientRotation, part);
      return out;
    }
  }
  if (!reached) {
    runner.fail(FailureReason::InsufficientDistance, "");
  } else if (std::abs(out.lateral) > config.veer_limit) {
    runner.fail(FailureReason::Veered, "");
  } else {
    out.success = true;
  }
  return out;
}

SimOutcome run_support_test(const Assembly& assembly, const SimConfig& config, const RunOptions& options) {
  CompiledCraft craft = compile_bodies(assembly, config);
  SimOutcome out;
  out.function = SimFunction::Support;
  Runner runner(craft, out, options);

  std::vector<Vec3> start;
  std::vector<std::pair<std::size_t, Vec3>> loads;  // body, body-frame point
  for (std::size_t i = 0; i < craft.parts.size(); ++i) {
    start.push_back(craft.part_center(i));
    if (!craft.exec[i]) continue;
    const Primitive& p = craft.part_local[i];
    loads.emplace_back(craft.part_body[i], p.center + Vec3(0.0, 0.0, p.half.z()));
  }
  const Vec3 start_centroid = craft.centroid();

  for (std::size_t k = 0, steps = steps_for(config.duration, config.timestep); k < steps; ++k) {
    for (const auto& [b, local] : loads) {
      RigidBody& body = craft.world.body(b);
      body.apply_force(Vec3(0.0, 0.0, -config.support_force), body.to_world(local));
    }
    if (!runner.step()) return out;
    for (std::size_t i = 0; i < craft.parts.size(); ++i) {
      const double d = (craft.part_center(i) - start[i]).norm();
      out.displacement = std::max(out.displacement, d);
      if (d >= config.support_tolerance) {
        runner.fail(FailureReason::MovedUnderLoad, craft.parts[i]);
        return out;
      }
    }
    if ((craft.centroid() - start_centroid).norm() >= config.support_tolerance) {
      runner.fail(FailureReason::MovedUnderLoad, "");
      return out;
    }
  }
  out.success = true;
  return out;
}

SimOutcome run_hit_test(const Assembly& assembly, const SimConfig& config, const RunOptions& options) {
  CompiledCraft craft = compile_bodies(assembly, config);
  SimOutcome out;
  out.function = SimFunction::Hit;
  const double s = config.scale;

  // Footprint of the flagged parts (all parts when none is flagged).
  bool any_exec = std::any_of(craft.exec.begin(), craft.exec.end(), [](bool b) { return b; });
  Aabb target{Vec3::Constant(std::numeric_limits<double>::infinity()),
              Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (std::size_t i = 0; i < assembly.parts.size(); ++i) {
    if (any_exec && !craft.exec[i]) continue;
    const Aabb box = assembly.parts[i].aabb();
    target = target.merge({s * box.lo, s * box.hi});
  }

  const double top = config.block_height;
  const double peg_top0 = top + config.peg_gap + config.peg_length;
  const Vec3 shift(-target.center().x(), -target.center().y(), peg_top0 + config.craft_clearance - target.lo.z());
  for (std::size_t i = 0; i < craft.craft_bodies; ++i) craft.world.body(i).position += shift;

  RigidBody& root = craft.world.body(craft.part_body[0]);
  root.motion = Motion::Kinematic;
  root.inv_mass = 0.0;
  root.inv_inertia.setZero();
  root.velocity = Vec3(0.0, 0.0, -config.drive_speed);

  const double half = 0.5 * config.block_size;
  Primitive block = Primitive::box(Vec3(0.0, 0.0, 0.5 * top), Vec3(half, half, 0.5 * top));
  Primitive hole = Primitive::cylinder(Vec3(0.0, 0.0, top - 0.5 * config.hole_depth), Axis::Z, config.hole_radius,
                                       0.5 * config.hole_depth);
  craft.world.add_body(make_body("BLOCK", {{"BLOCK", Solid{block, {hole}}}}, config.part_mass, Motion::Static));
  Primitive peg_shape = Primitive::cylinder(Vec3(0.0, 0.0, top + config.peg_gap + 0.5 * config.peg_length), Axis::Z,
                                            config.peg_radius, 0.5 * config.peg_length);
  const std::size_t peg =
      craft.world.add_body(make_body("PEG", {{"PEG", Solid{peg_shape, {}}}}, config.part_mass));
  craft.world.body(peg).gravity = false;
  craft.record_ground();

  Runner runner(craft, out, options);
  const Vec3 half_axis(0.0, 0.0, 0.5 * config.peg_length);
  // The drive stops once the flagged parts could have pushed the peg to the
  // floor of the hole; the run then settles briefly.
  const double travel = config.craft_clearance + config.peg_gap + config.hole_depth;
  const double stop_time = travel / config.drive_speed;
  const double end_time = std::min(config.duration, stop_time + 0.5);
  for (std::size_t k = 0, steps = steps_for(end_time, config.timestep); k < steps; ++k) {
    if (craft.world.time() >= stop_time) craft.world.body(craft.part_body[0]).velocity.setZero();
    if (!runner.step()) return out;
    RigidBody& p = craft.world.body(peg);
    for (std::size_t b = 0; b < craft.craft_bodies && !out.peg_contact; ++b) {
      if (craft.world.touched(b, peg)) out.peg_contact = true;
    }
    if (!p.gravity && (out.peg_contact || craft.world.touched(peg, peg + 1) || craft.world.touched(peg - 1, peg) ||
                       craft.world.touched(peg, kGround))) {
      p.gravity = true;
    }
    const Vec3 upper = p.to_world(half_axis);
    const Vec3 lower = p.to_world(-half_axis);
    out.displacement = peg_top0 - upper.z();
    if (std::hypot(lower.x(), lower.y()) > config.hole_radius) {
      runner.fail(FailureReason::PegOutsideHole, "");
      return out;
    }
    if (out.displacement >= 0.5 * config.hole_depth && std::hypot(p.position.x(), p.position.y()) <= config.hole_radius) {
      out.success = true;
      return out;
    }
  }
  runner.fail(out.peg_contact ? FailureReason::InsufficientDistance : FailureReason::PegMissed, "");
  return out;
}

SimOutcome run_function_test(const Assembly& assembly, SimFunction function, const SimConfig& config,
                             const RunOptions& options) {
  switch (function) {
    case SimFunction::Hit: return run_hit_test(assembly, config, options);
    case SimFunction::Support: return run_support_test(assembly, config, options);
    case SimFunction::Rolling: return run_rolling_test(assembly, config, options);
  }
  return run_rolling_test(assembly, config, options);
}

namespace {

// Every configurable field, by its JSON name.
template <typename F>
void for_each_field(SimConfig& c, F&& f) {
  f("timestep", c.timestep);
  f("scale", c.scale);
  f("part_mass", c.part_mass);
  f("friction", c.friction);
  f("gravity", c.gravity);
  f("duration", c.duration);
  f("rolling_force", c.rolling_force);
  f("support_force", c.support_force);
  f("restitution", c.restitution);
  f("solver_iterations", c.solver_iterations);
  f("baumgarte", c.baumgarte);
  f("slop", c.slop);
  f("separation_threshold", c.separation_threshold);
  f("ground_contact_height", c.ground_contact_height);
  f("divergence_speed", c.divergence_speed);
  f("rolling_distance", c.rolling_distance);
  f("veer_limit", c.veer_limit);
  f("support_tolerance", c.support_tolerance);
  f("drive_speed", c.drive_speed);
  f("peg_radius", c.peg_radius);
  f("peg_length", c.peg_length);
  f("peg_gap", c.peg_gap);
  f("hole_radius", c.hole_radius);
  f("hole_depth", c.hole_depth);
  f("block_size", c.block_size);
  f("block_height", c.block_height);
  f("craft_clearance", c.craft_clearance);
}

}  // namespace

void update_from_json(SimConfig& config, const json& doc) {
  if (!doc.is_object()) throw Error("simulation settings must be a JSON object");
  std::size_t used = 0;
  for_each_field(config, [&](const char* name, auto& field) {
    if (auto it = doc.find(name); it != doc.end()) {
      if (!it->is_number()) throw Error(std::string("simulation setting '") + name + "' must be a number");
      field = it->template get<std::remove_reference_t<decltype(field)>>();
      ++used;
    }
  });
  if (used != doc.size()) {
    for (const auto& [key, value] : doc.items()) {
      bool known = false;
      for_each_field(config, [&](const char* name, auto&) { known = known || key == name; });
      if (!known) throw Error("unknown simulation setting '" + key + "'");
    }
  }
  config.validate();
}

json to_json(const SimConfig& config) {
  json out = json::object();
  SimConfig copy = config;
  for_each_field(copy, [&](const char* name, auto& field) { out[name] = field; });
  return out;
}

}  // namespace craft
