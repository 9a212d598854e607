#include "hns/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hns/common/binio.hpp"

namespace hns {

static constexpr uint64_t kSnapMagic = 0x48534e534e415031ULL;  // "HSNSNAP1"
static constexpr uint32_t kSnapVersion = 1;

World::World(const WorldConfig& cfg, uint64_t seed) : cfg_(cfg), rng_(seed) {}

int World::add_body(Body b) {
  b.id = static_cast<int>(bodies_.size());
  if (b.kind == BodyKind::wall || b.kind == BodyKind::site || b.kind == BodyKind::cylinder ||
      b.kind == BodyKind::pellet)
    b.movable = false;
  bodies_.push_back(b);
  return b.id;
}

Body& World::body(int id) {
  if (id < 0 || id >= static_cast<int>(bodies_.size())) throw std::invalid_argument("unknown body id");
  return bodies_[static_cast<size_t>(id)];
}

const Body& World::body(int id) const {
  if (id < 0 || id >= static_cast<int>(bodies_.size())) throw std::invalid_argument("unknown body id");
  return bodies_[static_cast<size_t>(id)];
}

bool World::in_reach_cone(const Body& agent, const Body& target) const {
  Vec2 d = target.pos - agent.pos;
  if (d.norm() > cfg_.grab_radius) return false;
  double ang = std::atan2(d.y, d.x);
  return std::fabs(wrap_angle(ang - agent.heading)) <= cfg_.grab_cone_half;
}

bool World::grab_eligible(const Body& agent, const Body& target) const {
  if (target.kind == BodyKind::agent || !target.movable || !target.active) return false;
  if (target.locked()) return false;
  if (target.grabbed_by >= 0 && target.grabbed_by != agent.id) return false;
  return in_reach_cone(agent, target);
}

int World::attempt_grab(int agent_id) {
  Body& agent = body(agent_id);
  if (agent.kind != BodyKind::agent) throw std::invalid_argument("grab: not an agent");
  for (const Body& b : bodies_)
    if (b.grabbed_by == agent_id) return -1;  // already holding
  int best = -1;
  double best_d = 1e300;
  for (const Body& b : bodies_) {
    if (b.id == agent_id || !grab_eligible(agent, b)) continue;
    double d = (b.pos - agent.pos).norm();
    if (d < best_d) {
      best_d = d;
      best = b.id;
    }
  }
  if (best >= 0) bodies_[static_cast<size_t>(best)].grabbed_by = agent_id;
  return best;
}

void World::release_grab(int agent_id) {
  for (Body& b : bodies_)
    if (b.grabbed_by == agent_id) {
      b.grabbed_by = -1;
      b.vel = {0.0, 0.0};
    }
}

int World::attempt_lock(int agent_id) {
  Body& agent = body(agent_id);
  if (agent.kind != BodyKind::agent) throw std::invalid_argument("lock: not an agent");
  int best = -1;
  double best_d = 1e300;
  for (const Body& b : bodies_) {
    if (b.kind != BodyKind::box && b.kind != BodyKind::ramp) continue;
    if (!b.lockable || !b.active) continue;
    if (!in_reach_cone(agent, b)) continue;
    double d = (b.pos - agent.pos).norm();
    if (d < best_d) {
      best_d = d;
      best = b.id;
    }
  }
  if (best < 0) return -1;
  Body& tgt = bodies_[static_cast<size_t>(best)];
  if (!tgt.locked()) {
    // Locking freezes the body and severs any grab hold on it.
    tgt.locked_by_team = agent.team;
    tgt.grabbed_by = -1;
    tgt.vel = {0.0, 0.0};
    tgt.ang_vel = 0.0;
    return best;
  }
  if (tgt.locked_by_team == agent.team) {
    tgt.locked_by_team = -1;
    return best;
  }
  return -1;  // held by the other team
}

static bool movable_now(const Body& b) { return b.movable && !b.locked() && b.active; }

bool World::pair_collides(const Body& a, const Body& b) const {
  if (!a.active || !b.active) return false;
  if (a.kind == BodyKind::pellet || b.kind == BodyKind::pellet) return false;
  if (a.kind == BodyKind::site || b.kind == BodyKind::site) return false;
  if (!movable_now(a) && !movable_now(b)) return false;
  if (a.grabbed_by == b.id || b.grabbed_by == a.id) return false;
  bool a_agent = a.kind == BodyKind::agent, b_agent = b.kind == BodyKind::agent;
  if (a_agent && b_agent) return a.elevation == b.elevation;
  if (a_agent || b_agent) {
    const Body& agent = a_agent ? a : b;
    const Body& other = a_agent ? b : a;
    if (other.kind == BodyKind::ramp) return false;  // ramps are walkable
    if (other.kind == BodyKind::cylinder) return true;
    // Raised agents traverse wall and box footprints.
    return agent.elevation == Elevation::ground;
  }
  return true;
}

void World::apply_correction(Body& b, const Vec2& delta) {
  b.pos += delta;
  // Rigid coupling: a correction on either end of a grab pair moves both.
  if (b.grabbed_by >= 0) {
    bodies_[static_cast<size_t>(b.grabbed_by)].pos += delta;
  } else if (b.kind == BodyKind::agent) {
    for (Body& held : bodies_)
      if (held.grabbed_by == b.id) held.pos += delta;
  }
}

void World::resolve_collisions() {
  size_t n = bodies_.size();
  for (int iter = 0; iter < cfg_.mtv_iterations; ++iter) {
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i + 1; j < n; ++j) {
        Body& a = bodies_[i];
        Body& b = bodies_[j];
        if (!pair_collides(a, b)) continue;
        std::optional<Mtv> mtv;  // push b away from a
        if (a.is_disc() && b.is_disc()) {
          mtv = circle_circle_mtv(a.pos, a.radius(), b.pos, b.radius());
        } else if (a.is_rect() && b.is_rect()) {
          mtv = obb_obb_mtv(a.obb(), b.obb());
        } else if (a.is_disc()) {
          mtv = circle_obb_mtv(a.pos, a.radius(), b.obb());
          if (mtv) mtv->dir = mtv->dir * -1.0;  // computed as push-a; flip to push-b
        } else {
          mtv = circle_obb_mtv(b.pos, b.radius(), a.obb());
        }
        if (!mtv) continue;
        bool ma = movable_now(a), mb = movable_now(b);
        if (ma && mb) {
          Vec2 half_push = mtv->dir * (mtv->depth * 0.5);
          apply_correction(b, half_push);
          apply_correction(a, half_push * -1.0);
        } else if (mb) {
          apply_correction(b, mtv->dir * mtv->depth);
        } else if (ma) {
          apply_correction(a, mtv->dir * (-mtv->depth));
        }
      }
    }
  }
}

void World::step(const std::map<int, ActionTriple>& actions, const std::map<int, bool>& mobility) {
  if (t_ >= cfg_.horizon) throw std::runtime_error("step: episode is over");
  for (const auto& [id, a] : actions) {
    const Body& b = body(id);  // throws on unknown id
    if (b.kind != BodyKind::agent) throw std::invalid_argument("step: action for non-agent body");
    if (a.move_x < 0 || a.move_x > 4 || a.move_y < 0 || a.move_y > 4 || a.torque < 0 || a.torque > 4)
      throw std::invalid_argument("step: action bin out of range");
  }

  auto mobile = [&](int id) {
    auto it = mobility.find(id);
    return it == mobility.end() || it->second;
  };

  // Binding flags first, in agent id order, so this step's physics sees them.
  for (const auto& [id, act] : actions) {
    ActionTriple a = mobile(id) ? act : ActionTriple{};
    if (a.lock) attempt_lock(id);
    if (a.grab) {
      bool holding = false;
      for (const Body& b : bodies_)
        if (b.grabbed_by == id) holding = true;
      if (!holding) attempt_grab(id);
    } else {
      release_grab(id);
    }
  }

  // Forces in the agent's local frame.
  for (const auto& [id, act] : actions) {
    if (!mobile(id)) continue;
    Body& agent = body(id);
    double fx = (act.move_x - 2) * 0.5;
    double fy = (act.move_y - 2) * 0.5;
    double tq = (act.torque - 2) * 0.5;
    agent.vel += rotate({fx * cfg_.accel, fy * cfg_.accel}, agent.heading);
    agent.ang_vel += tq * cfg_.torque_accel;
  }

  // Damping and speed caps.
  for (Body& b : bodies_) {
    if (!movable_now(b)) continue;
    b.vel = b.vel * (1.0 - cfg_.damping);
    b.ang_vel *= (1.0 - cfg_.damping);
    if (b.kind == BodyKind::agent) {
      bool holding = false;
      for (const Body& o : bodies_)
        if (o.grabbed_by == b.id) holding = true;
      double cap = holding ? cfg_.max_speed_grabbed : cfg_.max_speed;
      double sp = b.vel.norm();
      if (sp > cap) b.vel = b.vel * (cap / sp);
    }
  }
  // Grabbed bodies inherit the grabber's velocity exactly.
  for (Body& b : bodies_)
    if (b.grabbed_by >= 0) b.vel = bodies_[static_cast<size_t>(b.grabbed_by)].vel;

  // Substepped integration so fast bodies cannot tunnel.
  double vmax = 0.0;
  for (const Body& b : bodies_)
    if (movable_now(b)) vmax = std::max(vmax, b.vel.norm());
  int substeps = std::max(1, static_cast<int>(std::ceil(vmax / cfg_.max_substep_travel)));
  double inv = 1.0 / substeps;
  for (Body& b : bodies_)
    if (movable_now(b) && b.kind == BodyKind::agent) b.heading = wrap_angle(b.heading + b.ang_vel);
  for (int s = 0; s < substeps; ++s) {
    for (Body& b : bodies_) {
      if (!movable_now(b)) continue;
      if (b.grabbed_by >= 0) continue;  // moved with its grabber below
      Vec2 dp = b.vel * inv;
      b.pos += dp;
      for (Body& held : bodies_)
        if (held.grabbed_by == b.id) held.pos += dp;
    }
    resolve_collisions();
  }

  update_elevation();
  ++t_;
}

void World::update_elevation() {
  for (Body& agent : bodies_) {
    if (agent.kind != BodyKind::agent) continue;
    bool on_ramp = false, on_support = false;
    for (const Body& b : bodies_) {
      if (!b.active) continue;
      if (b.kind == BodyKind::ramp && circle_obb_overlap(agent.pos, agent.radius(), b.obb())) on_ramp = true;
      if ((b.kind == BodyKind::box || b.kind == BodyKind::wall) &&
          circle_obb_overlap(agent.pos, agent.radius(), b.obb()))
        on_support = true;
    }
    if (on_ramp)
      agent.elevation = Elevation::raised;
    else if (agent.elevation == Elevation::raised && on_support)
      agent.elevation = Elevation::raised;
    else
      agent.elevation = Elevation::ground;
  }
}

static bool ray_opaque(const Body& b, Elevation elev) {
  if (!b.active) return false;
  switch (b.kind) {
    case BodyKind::wall:
    case BodyKind::box:
    case BodyKind::ramp:
    case BodyKind::pellet:
      return elev == Elevation::ground;
    case BodyKind::cylinder:
    case BodyKind::agent:
      return true;
    case BodyKind::site:
      return false;
  }
  return false;
}

RayHit World::raycast_impl(const Vec2& origin, double direction, double max_range, Elevation elev,
                           int ignore_id) const {
  Vec2 dir{std::cos(direction), std::sin(direction)};
  RayHit hit{max_range, -1};
  for (const Body& b : bodies_) {
    if (b.id == ignore_id || !ray_opaque(b, elev)) continue;
    std::optional<double> t;
    if (b.is_rect())
      t = ray_obb(origin, dir, max_range, b.obb());
    else
      t = ray_circle(origin, dir, max_range, b.pos, b.radius());
    if (t && *t < hit.distance) {
      hit.distance = *t;
      hit.body_id = b.id;
    }
  }
  return hit;
}

RayHit World::raycast(const Vec2& origin, double direction, double max_range, Elevation elev) const {
  if (max_range <= 0.0) throw std::invalid_argument("raycast: max_range must be positive");
  return raycast_impl(origin, direction, max_range, elev, -1);
}

std::vector<double> World::compute_lidar(int agent_id) const {
  const Body& agent = body(agent_id);
  if (agent.kind != BodyKind::agent) throw std::invalid_argument("lidar: not an agent");
  std::vector<double> out(static_cast<size_t>(cfg_.lidar_rays));
  for (int k = 0; k < cfg_.lidar_rays; ++k) {
    double ang = agent.heading + k * (2.0 * M_PI / cfg_.lidar_rays);
    out[static_cast<size_t>(k)] =
        raycast_impl(agent.pos, ang, cfg_.lidar_range, agent.elevation, agent_id).distance;
  }
  return out;
}

std::vector<uint8_t> World::compute_visibility(int agent_id) const {
  const Body& agent = body(agent_id);
  if (agent.kind != BodyKind::agent) throw std::invalid_argument("visibility: not an agent");
  std::vector<uint8_t> mask(bodies_.size(), 0);
  for (const Body& b : bodies_) {
    size_t idx = static_cast<size_t>(b.id);
    if (b.id == agent_id) {
      mask[idx] = 1;
      continue;
    }
    if (!b.active) continue;
    if (b.kind == BodyKind::site) {
      mask[idx] = 1;  // task markers are always known
      continue;
    }
    Vec2 d = b.pos - agent.pos;
    double dist = d.norm();
    if (dist > 0.0) {
      double ang = std::atan2(d.y, d.x);
      if (std::fabs(wrap_angle(ang - agent.heading)) > cfg_.vision_cone_half) continue;
    }
    bool blocked = false;
    if (dist > 0.0) {
      Vec2 dir = d * (1.0 / dist);
      for (const Body& occ : bodies_) {
        if (occ.id == b.id || occ.id == agent_id || !occ.active) continue;
        bool occludes =
            agent.elevation == Elevation::ground
                ? (occ.kind == BodyKind::wall || occ.kind == BodyKind::box || occ.kind == BodyKind::ramp)
                : occ.kind == BodyKind::cylinder;
        if (!occludes) continue;
        std::optional<double> t;
        if (occ.is_rect())
          t = ray_obb(agent.pos, dir, dist, occ.obb());
        else
          t = ray_circle(agent.pos, dir, dist, occ.pos, occ.radius());
        if (t && *t < dist) {
          blocked = true;
          break;
        }
      }
    }
    if (!blocked) mask[idx] = 1;
  }
  return mask;
}

std::vector<uint8_t> World::snapshot() const {
  ByteWriter w;
  w.u64(kSnapMagic);
  w.u32(kSnapVersion);
  w.i32(t_);
  w.i32(cfg_.horizon);
  w.f64(cfg_.bounds);
  w.u64(rng_.state());
  w.u64(rng_.inc());
  w.u32(static_cast<uint32_t>(bodies_.size()));
  for (const Body& b : bodies_) {
    w.i32(b.id);
    w.u8(static_cast<uint8_t>(b.kind));
    w.u8(b.elongated ? 1 : 0);
    w.u8(static_cast<uint8_t>(b.elevation));
    w.u8(b.movable ? 1 : 0);
    w.u8(b.lockable ? 1 : 0);
    w.u8(b.active ? 1 : 0);
    w.i32(b.team);
    w.i32(b.locked_by_team);
    w.i32(b.grabbed_by);
    w.f64(b.pos.x);
    w.f64(b.pos.y);
    w.f64(b.heading);
    w.f64(b.vel.x);
    w.f64(b.vel.y);
    w.f64(b.ang_vel);
    w.f64(b.half.x);
    w.f64(b.half.y);
  }
  return w.take();
}

World World::from_snapshot(const std::vector<uint8_t>& bytes, const WorldConfig& cfg) {
  ByteReader r(bytes);
  if (r.u64() != kSnapMagic) throw std::runtime_error("snapshot: bad magic");
  uint32_t version = r.u32();
  if (version != kSnapVersion) throw std::runtime_error("snapshot: unsupported version");
  World w(cfg, 0);
  w.t_ = r.i32();
  w.cfg_.horizon = r.i32();
  w.cfg_.bounds = r.f64();
  uint64_t state = r.u64();
  uint64_t inc = r.u64();
  w.rng_.restore(state, inc);
  uint32_t n = r.u32();
  w.bodies_.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    Body& b = w.bodies_[i];
    b.id = r.i32();
    b.kind = static_cast<BodyKind>(r.u8());
    b.elongated = r.u8() != 0;
    b.elevation = static_cast<Elevation>(r.u8());
    b.movable = r.u8() != 0;
    b.lockable = r.u8() != 0;
    b.active = r.u8() != 0;
    b.team = r.i32();
    b.locked_by_team = r.i32();
    b.grabbed_by = r.i32();
    b.pos.x = r.f64();
    b.pos.y = r.f64();
    b.heading = r.f64();
    b.vel.x = r.f64();
    b.vel.y = r.f64();
    b.ang_vel = r.f64();
    b.half.x = r.f64();
    b.half.y = r.f64();
  }
  return w;
}

}  // namespace hns
