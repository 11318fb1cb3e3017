#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "craft/geometry.hpp"

namespace craft {

using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

struct SimConfig {
  double timestep = 1.0 / 500.0;  // s
  double scale = 10.0;            // applied to every assembly length
  double part_mass = 10.0;        // kg
  double friction = 0.5;
  double gravity = 9.81;  // m/s^2, along -Z
  double duration = 5.0;  // s
  double rolling_force = 200.0;  // N, +X
  double support_force = 50.0;   // N per flagged part, -Z
  double restitution = 0.0;
  int solver_iterations = 10;
  double baumgarte = 0.2;
  double slop = 1e-4;  // m
  double separation_threshold = 0.05;  // m
  double ground_contact_height = 1e-4;  // m
  double divergence_speed = 1e3;  // m/s

  // rolling
  double rolling_distance = 1.0;  // m
  double veer_limit = 0.3;        // m
  // support
  double support_tolerance = 0.01;  // m
  // hit
  double drive_speed = 0.5;  // m/s
  double peg_radius = 0.1;
  double peg_length = 0.5;
  double peg_gap = 0.05;        // peg lower end above the block top
  double hole_radius = 0.12;
  double hole_depth = 0.4;
  double block_size = 1.0;      // footprint edge
  double block_height = 0.5;
  double craft_clearance = 0.10;  // exec parts above the peg top

  void validate() const;  // throws Error
};

enum class Motion { Dynamic, Static, Kinematic };

// A primitive attached to a body, expressed in the body frame.
struct BodyShape {
  std::string part;
  Primitive local;
  std::vector<Primitive> holes;
  std::vector<Vec3> samples;  // surface points used for body-body contact

  Solid solid() const { return {local, holes}; }
};

struct RigidBody {
  std::string id;
  std::vector<BodyShape> shapes;
  Motion motion = Motion::Dynamic;
  bool gravity = true;

  double mass = 0.0;
  double inv_mass = 0.0;
  Mat3 inertia = Mat3::Identity();  // body frame, about the centre of mass
  Mat3 inv_inertia = Mat3::Zero();

  Vec3 position = Vec3::Zero();  // centre of mass
  Quat orientation = Quat::Identity();
  Vec3 velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();

  Vec3 force = Vec3::Zero();  // accumulated until the next step
  Vec3 torque = Vec3::Zero();

  bool movable() const { return motion == Motion::Dynamic; }
  Vec3 to_world(const Vec3& local) const { return position + orientation * local; }
  Vec3 to_local(const Vec3& world) const { return orientation.conjugate() * (world - position); }
  Vec3 direction_to_world(const Vec3& local) const { return orientation * local; }
  Mat3 inv_inertia_world() const;
  Vec3 point_velocity(const Vec3& world) const;
  double kinetic_energy() const;

  void apply_force(const Vec3& f, const Vec3& world_point);
  void apply_torque(const Vec3& t) { torque += t; }
};

// Builds a body from world-space solids of equal mass. The body frame is
// world-aligned at construction with its origin at the centre of mass.
RigidBody make_body(std::string id, const std::vector<std::pair<std::string, Solid>>& parts, double mass_per_part,
                    Motion motion = Motion::Dynamic);

struct RevoluteJoint {
  std::size_t a = 0;
  std::size_t b = 0;
  Vec3 local_anchor_a = Vec3::Zero();
  Vec3 local_anchor_b = Vec3::Zero();
  Vec3 local_axis_a = Vec3::UnitZ();
  Vec3 local_axis_b = Vec3::UnitZ();
};

inline constexpr std::size_t kGround = static_cast<std::size_t>(-1);

struct Contact {
  std::size_t a = 0;        // pushed along +normal
  std::size_t b = kGround;  // kGround for the ground plane
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // from b towards a
  double gap = 0.0;             // negative when penetrating
  double normal_impulse = 0.0;
  std::uint64_t feature = 0;  // stable across steps while the same pair of features touches
};

class World {
 public:
  explicit World(SimConfig config = {});

  std::size_t add_body(RigidBody body);
  // Hinge between two bodies through a world anchor and axis, taken at the
  // current poses. Jointed bodies do not collide with each other.
  std::size_t add_revolute(std::size_t a, std::size_t b, const Vec3& anchor, const Vec3& axis);

  void step();

  const SimConfig& config() const { return config_; }
  double time() const { return time_; }
  std::vector<RigidBody>& bodies() { return bodies_; }
  const std::vector<RigidBody>& bodies() const { return bodies_; }
  RigidBody& body(std::size_t i) { return bodies_[i]; }
  const RigidBody& body(std::size_t i) const { return bodies_[i]; }
  const std::vector<RevoluteJoint>& joints() const { return joints_; }
  const std::vector<Contact>& contacts() const { return contacts_; }
  bool jointed(std::size_t a, std::size_t b) const;
  // Whether a and b exchanged a normal impulse during the last step.
  bool touched(std::size_t a, std::size_t b) const;
  bool diverged() const { return diverged_; }

  double energy() const;  // kinetic + gravitational potential of dynamic bodies
  Vec3 momentum() const;

 private:
  void collect_contacts();
  void ground_contacts(std::size_t i);
  void pair_contacts(std::size_t i, std::size_t j);

  SimConfig config_;
  std::vector<RigidBody> bodies_;
  std::vector<RevoluteJoint> joints_;
  std::vector<Contact> contacts_;
  std::set<std::pair<std::size_t, std::size_t>> jointed_;
  std::set<std::pair<std::size_t, std::size_t>> touched_;
  // Accumulated impulses of the previous step, keyed by Contact::feature.
  struct Cached {
    double normal = 0.0;
    Vec3 friction = Vec3::Zero();
  };
  std::unordered_map<std::uint64_t, Cached> warm_;
  double time_ = 0.0;
  bool diverged_ = false;
};

// Lowest world z of a body-frame primitive on `body`.
double lowest_z(const Primitive& local, const RigidBody& body);

}  // namespace craft
