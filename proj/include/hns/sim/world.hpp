#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hns/common/rng.hpp"
#include "hns/sim/geom.hpp"

namespace hns {

enum class BodyKind : uint8_t { agent, box, ramp, wall, pellet, cylinder, site };
enum class Elevation : uint8_t { ground, raised };

struct Body {
  int id = -1;
  BodyKind kind = BodyKind::box;
  Vec2 pos;
  double heading = 0.0;  // radians
  Vec2 vel;              // meters per step
  double ang_vel = 0.0;  // radians per step
  Vec2 half;             // half extents; agents use half.x as radius
  bool elongated = false;
  Elevation elevation = Elevation::ground;
  bool movable = false;
  bool lockable = true;  // environments can exclude bodies from locking
  int locked_by_team = -1;
  int grabbed_by = -1;
  int team = -1;        // agents only
  bool active = true;   // pellets flip to false when consumed

  double radius() const { return half.x; }
  bool locked() const { return locked_by_team >= 0; }
  bool is_rect() const { return kind == BodyKind::box || kind == BodyKind::ramp || kind == BodyKind::wall; }
  bool is_disc() const { return kind == BodyKind::agent || kind == BodyKind::cylinder || kind == BodyKind::pellet; }
  Obb obb() const { return Obb{pos, half, heading}; }
};

// Five force bins per movement axis and for torque: {-1,-0.5,0,+0.5,+1}.
struct ActionTriple {
  int move_x = 2;
  int move_y = 2;
  int torque = 2;
  bool grab = false;
  bool lock = false;
};

struct RayHit {
  double distance = 0.0;
  int body_id = -1;
};

struct WorldConfig {
  double bounds = 18.0;  // side of the play square, centered on the origin
  int horizon = 240;
  double accel = 0.25;         // force bin value to velocity delta
  double torque_accel = 0.15;  // torque bin value to angular velocity delta
  double damping = 0.25;       // velocity fraction removed each step
  double max_speed = 1.0;          // agents, meters per step
  double max_speed_grabbed = 0.8;  // agents towing a body
  double grab_radius = 1.5;
  double grab_cone_half = M_PI / 4.0;           // 90 degree frontal window
  double vision_cone_half = 135.0 * M_PI / 360.0;  // 135 degree cone
  double lidar_range = 25.0;
  int lidar_rays = 30;
  int mtv_iterations = 4;
  double max_substep_travel = 0.2;  // collision substep granularity, meters
};

// Top-down rigid world with a two-level elevation field. One instance is
// owned by one execution context; distinct worlds are independent.
class World {
 public:
  World() = default;
  World(const WorldConfig& cfg, uint64_t seed);

  int add_body(Body b);  // assigns and returns the id
  Body& body(int id);
  const Body& body(int id) const;
  std::vector<Body>& bodies() { return bodies_; }
  const std::vector<Body>& bodies() const { return bodies_; }

  int t() const { return t_; }
  int horizon() const { return cfg_.horizon; }
  double bounds() const { return cfg_.bounds; }
  const WorldConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

  // Advances one timestep. Agents missing from `mobility` are mobile;
  // immobilized agents have their whole action ignored.
  void step(const std::map<int, ActionTriple>& actions, const std::map<int, bool>& mobility = {});

  // Returns bound/affected body id, or -1.
  int attempt_grab(int agent_id);
  int attempt_lock(int agent_id);
  void release_grab(int agent_id);

  RayHit raycast(const Vec2& origin, double direction, double max_range, Elevation elev) const;
  std::vector<double> compute_lidar(int agent_id) const;
  // Mask aligned with bodies() order; self and sites are always visible,
  // inactive bodies never are.
  std::vector<uint8_t> compute_visibility(int agent_id) const;
  void update_elevation();

  bool out_of_bounds(const Body& b) const {
    double h = cfg_.bounds / 2.0;
    return std::fabs(b.pos.x) > h || std::fabs(b.pos.y) > h;
  }

  std::vector<uint8_t> snapshot() const;
  static World from_snapshot(const std::vector<uint8_t>& bytes, const WorldConfig& cfg);

 private:
  RayHit raycast_impl(const Vec2& origin, double direction, double max_range, Elevation elev,
                      int ignore_id) const;
  bool pair_collides(const Body& a, const Body& b) const;
  void resolve_collisions();
  void apply_correction(Body& b, const Vec2& delta);
  bool grab_eligible(const Body& agent, const Body& target) const;
  bool in_reach_cone(const Body& agent, const Body& target) const;

  WorldConfig cfg_;
  Rng rng_;
  std::vector<Body> bodies_;
  int t_ = 0;
};

}  // namespace hns
