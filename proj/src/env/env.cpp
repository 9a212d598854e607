#include "hns/env/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace hns::env {

namespace {

constexpr const char* kVariantNames[] = {
    "hide_and_seek",  "quadrant",        "hns_food",
    "dynamic_food",   "food_protection", "object_counting",
    "lock_and_return", "sequential_lock", "blueprint",
    "shelter",
};

// Table row properties for the randomization ladder.
struct LevelTraits {
  bool solo;         // 1v1 instead of sampled team sizes
  bool fixed_boxes;  // exactly 7 boxes, 3 elongated + 4 cubic
  bool walls;        // random rooms; otherwise no walls at all
  bool loc_random;   // random placements; otherwise one frozen arrangement
};

LevelTraits level_traits(RandLevel lv) {
  switch (lv) {
    case RandLevel::full: return {false, false, true, true};
    case RandLevel::solo_teams: return {true, false, true, true};
    case RandLevel::fixed_boxes: return {true, true, true, true};
    case RandLevel::teams_no_walls: return {false, false, false, true};
    case RandLevel::solo_no_walls: return {true, false, false, true};
    case RandLevel::fixed_boxes_no_walls: return {true, true, false, true};
    case RandLevel::all_fixed: return {true, true, false, false};
  }
  return {false, false, true, true};
}

bool body_is_round(const Body& b) {
  return b.kind == BodyKind::agent || b.kind == BodyKind::cylinder ||
         b.kind == BodyKind::pellet;
}

double bounding_radius(const Body& b) {
  return body_is_round(b) ? b.radius() : b.half.norm();
}

Obb inflated(const Body& b, double by) {
  return Obb{b.pos, {b.half.x + by, b.half.y + by}, b.heading};
}

// Overlap with a small clearance so reset states are strictly separated.
bool bodies_overlap(const Body& a, const Body& b) {
  const double cl = 0.05;
  bool ra = body_is_round(a), rb = body_is_round(b);
  if (ra && rb)
    return (a.pos - b.pos).norm() < a.radius() + b.radius() + cl;
  if (ra) return circle_obb_overlap(a.pos, a.radius() + cl, b.obb());
  if (rb) return circle_obb_overlap(b.pos, b.radius() + cl, a.obb());
  return obb_obb_mtv(inflated(a, cl / 2.0), inflated(b, cl / 2.0)).has_value();
}

std::array<Vec2, 4> rect_corners(const Body& b) {
  Obb o = b.obb();
  return {o.to_world({b.half.x, b.half.y}), o.to_world({b.half.x, -b.half.y}),
          o.to_world({-b.half.x, b.half.y}),
          o.to_world({-b.half.x, -b.half.y})};
}

// Object-counting scene: one pinned observer, six scripted boxes on separate
// lanes (lane spacing exceeds the box diagonal footprint in y, so crossing
// boxes never touch), and two side occluders the boxes end up behind.
constexpr double kCountingAgentY = -2.0;
constexpr double kCountingWallX = 6.0;
constexpr double kCountingLaneY0 = 1.5;
constexpr double kCountingLaneDy = 1.05;
constexpr double kCountingSlotX0 = -2.5;
constexpr double kCountingSlotDx = 1.0;

}  // namespace

const char* variant_name(Variant v) { return kVariantNames[(int)v]; }

Variant variant_from_name(const std::string& s) {
  for (int i = 0; i < (int)std::size(kVariantNames); ++i)
    if (s == kVariantNames[i]) return (Variant)i;
  throw std::invalid_argument("unknown environment variant: " + s);
}

namespace {
constexpr const char* kRandLevelNames[] = {
    "full",          "solo_teams",           "fixed_boxes", "teams_no_walls",
    "solo_no_walls", "fixed_boxes_no_walls", "all_fixed",
};
}  // namespace

const char* rand_level_name(RandLevel r) { return kRandLevelNames[(int)r]; }

RandLevel rand_level_from_name(const std::string& s) {
  for (int i = 0; i < (int)std::size(kRandLevelNames); ++i)
    if (s == kRandLevelNames[i]) return (RandLevel)i;
  throw std::invalid_argument("unknown randomization level: " + s);
}

EnvConfig EnvConfig::defaults(Variant v) {
  EnvConfig c;
  c.variant = v;
  switch (v) {
    case Variant::hide_and_seek:
    case Variant::hns_food:
      break;  // 1-3 vs 1-3, 3-9 boxes (>=3 elongated), 2 ramps, 240 @ 0.4 prep
    case Variant::quadrant:
      c.n_hiders = {2, 2};
      c.n_seekers = {2, 2};
      c.n_boxes = {2, 2};
      c.min_elongated = 0;
      c.n_ramps = 1;
      break;
    case Variant::dynamic_food:
      c.n_hiders = {3, 3};
      c.n_seekers = {2, 2};
      c.n_boxes = {8, 8};
      c.min_elongated = 8;
      c.n_ramps = 0;
      break;
    case Variant::food_protection:
      c.n_hiders = {3, 3};
      c.n_seekers = {2, 2};
      c.n_boxes = {7, 7};
      c.min_elongated = 7;
      c.n_ramps = 0;
      c.horizon = 200;
      c.prep_fraction = 0.5;
      break;
    case Variant::object_counting:
      c.n_hiders = {1, 1};
      c.n_seekers = {0, 0};
      c.n_boxes = {6, 6};
      c.min_elongated = 0;
      c.n_ramps = 0;
      c.horizon = 120;
      c.prep_fraction = 0.0;
      break;
    case Variant::lock_and_return:
      c.n_hiders = {1, 1};
      c.n_seekers = {0, 0};
      c.n_boxes = {1, 1};
      c.min_elongated = 0;
      c.n_ramps = 0;
      c.horizon = 120;
      c.prep_fraction = 0.0;
      break;
    case Variant::sequential_lock:
      c.n_hiders = {1, 1};
      c.n_seekers = {0, 0};
      c.n_boxes = {4, 4};
      c.min_elongated = 0;
      c.n_ramps = 3;
      c.horizon = 120;
      c.prep_fraction = 0.0;
      break;
    case Variant::blueprint:
      c.n_hiders = {1, 1};
      c.n_seekers = {0, 0};
      c.n_boxes = {8, 8};
      c.min_elongated = 0;
      c.n_ramps = 0;
      c.horizon = 240;
      c.prep_fraction = 0.0;
      break;
    case Variant::shelter:
      c.n_hiders = {1, 1};
      c.n_seekers = {0, 0};
      c.n_boxes = {8, 8};
      c.min_elongated = 3;
      c.n_ramps = 0;
      c.horizon = 150;
      c.prep_fraction = 0.0;
      break;
  }
  return c;
}

Env::Env(const EnvConfig& cfg) : cfg_(cfg) { reset(cfg.seed); }

bool Env::single_agent_task() const {
  switch (cfg_.variant) {
    case Variant::object_counting:
    case Variant::lock_and_return:
    case Variant::sequential_lock:
    case Variant::blueprint:
    case Variant::shelter:
      return true;
    default:
      return false;
  }
}

bool Env::agent_mobile(int idx, bool prep) const {
  switch (cfg_.variant) {
    case Variant::hide_and_seek:
    case Variant::quadrant:
    case Variant::hns_food:
    case Variant::dynamic_food:
      return is_hider(idx) || !prep;  // prep immobilizes seekers
    case Variant::food_protection:
      if (!is_hider(idx)) return !prep;
      return t_ < cfg_.horizon - 60;  // hiders frozen for the collection window
    default:
      return true;
  }
}

void Env::build_layout(Rng& rng) {
  double h = cfg_.bounds / 2.0;
  switch (cfg_.variant) {
    case Variant::hide_and_seek:
    case Variant::hns_food: {
      if (level_traits(cfg_.randomization_level).walls) {
        layout_ = make_rooms(cfg_.bounds, rng.randint(1, 4), true, true, rng);
      } else {
        layout_ = RoomLayout{};
        layout_.exterior = false;
        layout_.rooms = {{-h, -h, h, h}};
      }
      break;
    }
    case Variant::quadrant:
      layout_ = make_quadrant(cfg_.bounds, rng);
      break;
    case Variant::dynamic_food:
      layout_ = RoomLayout{};
      layout_.exterior = false;
      layout_.rooms = {{-h, -h, h, h}};
      break;
    case Variant::lock_and_return:
      layout_ = make_rooms(cfg_.bounds, 6, true, true, rng);
      break;
    case Variant::sequential_lock:
      layout_ = make_rooms(cfg_.bounds, 3, true, false, rng);
      break;
    case Variant::object_counting:
      layout_ = make_rooms(cfg_.bounds, 1, true, true, rng);
      layout_.walls.push_back(
          {{kCountingWallX, 4.25}, {kWallHalfThickness, 3.75}});
      layout_.walls.push_back(
          {{-kCountingWallX, 4.25}, {kWallHalfThickness, 3.75}});
      break;
    default:  // food_protection, blueprint, shelter: outer walls only
      layout_ = make_rooms(cfg_.bounds, 1, true, true, rng);
      break;
  }
}

bool Env::placement_clear(const Body& b) const {
  for (const Body& other : world_.bodies()) {
    bool consider;
    switch (b.kind) {
      case BodyKind::pellet:
        consider =
            other.kind == BodyKind::wall || other.kind == BodyKind::pellet;
        break;
      case BodyKind::site:
        consider = other.kind == BodyKind::site;
        break;
      default:
        consider = other.kind != BodyKind::pellet && other.kind != BodyKind::site;
        break;
    }
    if (consider && bodies_overlap(b, other)) return false;
  }
  return true;
}

int Env::place_one(Body proto, const std::vector<Rect>& regions, Rng& rng,
                   bool random_heading) {
  double h = cfg_.bounds / 2.0;
  std::vector<Rect> fallback{{-h, -h, h, h}};
  const std::vector<Rect>& regs = regions.empty() ? fallback : regions;
  double margin = bounding_radius(proto) + kWallHalfThickness + 0.05;
  double total_area = 0.0;
  for (const Rect& r : regs) total_area += r.area();
  while (placement_budget_ > 0) {
    --placement_budget_;
    double u = rng.uniform(0.0, total_area);
    const Rect* pick = &regs.back();
    for (const Rect& r : regs) {
      if (u < r.area()) {
        pick = &r;
        break;
      }
      u -= r.area();
    }
    proto.pos = pick->sample(rng, margin);
    proto.heading = random_heading ? rng.uniform(-M_PI, M_PI) : 0.0;
    if (placement_clear(proto)) return world_.add_body(proto);
  }
  throw ResetError("reset: body placement failed after exhausting 1000 attempts");
}

void Env::reset(uint64_t seed) {
  Rng root(seed, 0x656e76);
  Rng layout_rng = root.fork(1);
  Rng count_rng = root.fork(2);
  Rng place_rng = root.fork(3);
  env_rng_ = root.fork(4);
  uint64_t world_seed = root.next_u64();

  bool hns_family =
      cfg_.variant == Variant::hide_and_seek || cfg_.variant == Variant::hns_food;
  LevelTraits tr = level_traits(cfg_.randomization_level);
  if (hns_family && !tr.loc_random) place_rng = Rng(0x0f1ced, 7);

  try {
    build_layout(layout_rng);
  } catch (const std::runtime_error& err) {
    throw ResetError(err.what());
  }

  WorldConfig wc;
  wc.bounds = cfg_.bounds;
  wc.horizon = cfg_.horizon;
  world_ = World(wc, world_seed);
  agent_ids_.clear();
  box_ids_.clear();
  ramp_ids_.clear();
  pellet_ids_.clear();
  site_ids_.clear();
  cylinder_id_ = -1;
  placement_budget_ = 1000;

  for (const WallPiece& w : layout_.walls) {
    Body b;
    b.kind = BodyKind::wall;
    b.pos = w.center;
    b.half = w.half;
    world_.add_body(b);
  }

  // episode counts
  n_hiders_ = hns_family && tr.solo ? 1 : cfg_.n_hiders.sample(count_rng);
  n_seekers_ = hns_family && tr.solo ? 1 : cfg_.n_seekers.sample(count_rng);
  int n_boxes = hns_family && tr.fixed_boxes ? 7 : cfg_.n_boxes.sample(count_rng);

  std::vector<uint8_t> elong(n_boxes, 0);
  bool shape_random = hns_family && !tr.fixed_boxes;
  if (shape_random) {
    int count = 0;
    for (int j = 0; j < n_boxes; ++j) {
      elong[j] = count_rng.chance(0.5);
      count += elong[j];
    }
    for (int j = 0; j < n_boxes && count < cfg_.min_elongated; ++j)
      if (!elong[j]) {
        elong[j] = 1;
        ++count;
      }
  } else {
    for (int j = 0; j < std::min(cfg_.min_elongated, n_boxes); ++j) elong[j] = 1;
  }

  if (cfg_.variant == Variant::object_counting) {
    // fully scripted scene, fixed poses
    Body ag;
    ag.kind = BodyKind::agent;
    ag.movable = true;
    ag.half = {kAgentRadius, kAgentRadius};
    ag.team = 0;
    ag.pos = {0.0, kCountingAgentY};
    ag.heading = M_PI / 2.0;
    agent_ids_.push_back(world_.add_body(ag));
    counting_dirs_.assign(n_boxes, 0);
    counting_label_ = 0;
    for (int j = 0; j < n_boxes; ++j) {
      counting_dirs_[j] = count_rng.chance(0.5);
      counting_label_ += counting_dirs_[j];
      Body b;
      b.kind = BodyKind::box;
      b.movable = true;
      b.half = {kBoxHalf, kBoxHalf};
      b.pos = {kCountingSlotX0 + j * kCountingSlotDx,
               kCountingLaneY0 + j * kCountingLaneDy};
      b.vel = {counting_dirs_[j] ? -kCountingSpeed : kCountingSpeed, 0.0};
      box_ids_.push_back(world_.add_body(b));
    }
  } else {
    for (int j = 0; j < n_boxes; ++j) {
      Body b;
      b.kind = BodyKind::box;
      b.movable = true;
      b.elongated = elong[j];
      b.half = elong[j] ? Vec2{kElongatedHalfLong, kBoxHalf}
                        : Vec2{kBoxHalf, kBoxHalf};
      box_ids_.push_back(place_one(b, layout_.spawn.boxes, place_rng, true));
    }

    for (int j = 0; j < cfg_.n_ramps; ++j) {
      Body b;
      b.kind = BodyKind::ramp;
      b.movable = true;
      b.half = {kRampHalf, kRampHalf};
      b.lockable = cfg_.variant != Variant::quadrant;
      std::vector<Rect> regs;
      if (cfg_.variant == Variant::sequential_lock)
        regs = {layout_.rooms[j % layout_.rooms.size()]};
      else if (cfg_.variant == Variant::quadrant)
        regs = place_rng.chance(0.5) ? std::vector<Rect>{layout_.rooms[0]}
                                     : layout_.spawn.seekers;
      ramp_ids_.push_back(place_one(b, regs, place_rng, true));
    }

    if (cfg_.variant == Variant::shelter) {
      Body b;
      b.kind = BodyKind::cylinder;
      b.half.x = count_rng.uniform(1.5, 2.0) / 2.0;
      b.half.y = b.half.x;
      double h = cfg_.bounds / 2.0;
      double c = b.half.x + kShelterWallClearance;
      cylinder_id_ =
          place_one(b, {{-h + c, -h + c, h - c, h - c}}, place_rng, false);
    }

    int n_pellets = 0;
    double region_half = 0.0;
    if (cfg_.variant == Variant::hns_food) {
      n_pellets = 5;
      region_half = cfg_.bounds / 8.0;
    } else if (cfg_.variant == Variant::dynamic_food) {
      n_pellets = 1;
      region_half = cfg_.bounds / 10.0;
    } else if (cfg_.variant == Variant::food_protection) {
      n_pellets = 50;
      region_half = cfg_.bounds / 3.0;
    }
    pellet_region_ = {-region_half, -region_half, region_half, region_half};
    for (int j = 0; j < n_pellets; ++j) {
      Body b;
      b.kind = BodyKind::pellet;
      b.half = {kPelletRadius, kPelletRadius};
      pellet_ids_.push_back(place_one(b, {pellet_region_}, place_rng, false));
    }

    if (cfg_.variant == Variant::blueprint) {
      int k = count_rng.randint(1, 4);
      for (int j = 0; j < k; ++j) {
        Body b;
        b.kind = BodyKind::site;
        b.half = {kSiteHalf, kSiteHalf};
        site_ids_.push_back(place_one(b, {}, place_rng, true));
      }
    }

    for (int j = 0; j < n_hiders_ + n_seekers_; ++j) {
      bool hider = j < n_hiders_;
      Body b;
      b.kind = BodyKind::agent;
      b.movable = true;
      b.half = {kAgentRadius, kAgentRadius};
      b.team = hider ? 0 : 1;
      const std::vector<Rect>& regs =
          hider ? layout_.spawn.hiders : layout_.spawn.seekers;
      agent_ids_.push_back(place_one(b, regs, place_rng, true));
    }
  }

  prep_steps_ = (int)std::llround(cfg_.horizon * cfg_.prep_fraction);
  t_ = 0;
  done_ = false;

  start_pos_ = world_.body(agent_ids_[0]).pos;
  prev_agent_pos_ = start_pos_;
  lr_locked_prev_ = false;
  lock_order_.clear();
  sl_locked_prev_.clear();
  if (cfg_.variant == Variant::sequential_lock) {
    lock_order_.resize(box_ids_.size());
    for (int j = 0; j < (int)lock_order_.size(); ++j) lock_order_[j] = j;
    for (int j = (int)lock_order_.size() - 1; j > 0; --j)
      std::swap(lock_order_[j], lock_order_[count_rng.randint(0, j)]);
    sl_locked_prev_.assign(box_ids_.size(), 0);
    refresh_sequential_lockable();
  }

  trace_.frames.clear();
  if (record_trace_) push_frame(in_prep());
}

void Env::script_counting_motion() {
  for (int j = 0; j < (int)box_ids_.size(); ++j) {
    Body& b = world_.body(box_ids_[j]);
    double dir = counting_dirs_[j] ? -1.0 : 1.0;
    b.pos.x += dir * kCountingSpeed;
    b.vel = {dir * kCountingSpeed, 0.0};
    if (std::abs(b.pos.x) >= kCountingStopX) {
      b.pos.x = dir < 0 ? -kCountingStopX : kCountingStopX;
      b.vel = {0.0, 0.0};
    }
  }
}

StepResult Env::step(const std::vector<ActionTriple>& actions) {
  if (done_) throw std::runtime_error("step: episode already finished");
  if ((int)actions.size() != n_agents())
    throw std::invalid_argument("step: one action per agent required");
  bool prep = in_prep();

  StepResult out;
  out.rewards.assign(n_agents(), 0.0f);

  if (cfg_.variant == Variant::object_counting) {
    script_counting_motion();
    ++t_;
    done_ = t_ >= cfg_.horizon;
    out.done = done_;
    if (record_trace_) push_frame(prep);
    return out;
  }

  std::map<int, ActionTriple> acts;
  std::map<int, bool> mobility;
  for (int i = 0; i < n_agents(); ++i) {
    acts[agent_ids_[i]] = actions[i];
    mobility[agent_ids_[i]] = agent_mobile(i, prep);
  }
  world_.step(acts, mobility);
  ++t_;
  bool terminal = t_ >= cfg_.horizon;

  switch (cfg_.variant) {
    case Variant::hide_and_seek:
      out.rewards = hide_seek_reward(*this, prep);
      break;
    case Variant::quadrant:
      out.rewards = hide_seek_reward(*this, prep);
      if (!prep) apply_quadrant_object_penalty(out);
      break;
    case Variant::hns_food:
      out.rewards = hide_seek_reward(*this, prep);
      if (!prep) apply_static_food(out);
      break;
    case Variant::dynamic_food:
      out.rewards = hide_seek_reward(*this, prep);
      apply_dynamic_food(out, prep);
      break;
    case Variant::food_protection:
      apply_food_protection(out, prep);
      break;
    case Variant::lock_and_return:
      apply_lock_return(out, terminal);
      break;
    case Variant::sequential_lock:
      apply_sequential_lock(out);
      break;
    case Variant::blueprint:
      apply_blueprint(out);
      break;
    case Variant::shelter:
      out.rewards[0] = (float)(-kShelterRayScale * shelter_exposed_rays(*this));
      break;
    default:
      break;
  }

  done_ = done_ || terminal;
  out.done = done_;
  if (record_trace_) push_frame(prep);
  return out;
}

void Env::push_frame(bool prep) {
  TraceFrame f;
  f.prep = prep;
  for (int b : box_ids_) {
    f.box_pos.push_back(world_.body(b).pos);
    f.box_locked.push_back(world_.body(b).locked());
  }
  for (int r : ramp_ids_) {
    f.ramp_pos.push_back(world_.body(r).pos);
    f.ramp_locked.push_back(world_.body(r).locked());
  }
  trace_.frames.push_back(std::move(f));
}

void Env::push_entity_row(EntityBlock& blk, const Body& me, const Body& b,
                          const std::vector<uint8_t>& vis) const {
  ++blk.count;
  blk.visible.push_back(b.active ? vis[b.id] : 0);
  float row[kEntityDim] = {};
  if (b.active) {
    Vec2 dp = rotate(b.pos - me.pos, -me.heading);
    Vec2 dv = rotate(b.vel, -me.heading);
    double dh = wrap_angle(b.heading - me.heading);
    row[0] = (float)dp.x;
    row[1] = (float)dp.y;
    row[2] = (float)dv.x;
    row[3] = (float)dv.y;
    row[4] = (float)std::cos(dh);
    row[5] = (float)std::sin(dh);
    row[6] = (float)b.half.x;
    row[7] = (float)b.half.y;
    row[8] = b.elevation == Elevation::raised ? 1.0f : 0.0f;
    row[9] = b.locked() ? 1.0f : 0.0f;
    row[10] = b.locked() && b.locked_by_team == me.team ? 1.0f : 0.0f;
    if (b.kind == BodyKind::agent)
      row[11] = b.team == me.team ? 1.0f : 0.0f;
    else
      row[11] = b.grabbed_by >= 0 ? 1.0f : 0.0f;
  }
  blk.feats.insert(blk.feats.end(), row, row + kEntityDim);
}

void Env::push_site_row(EntityBlock& blk, const Body& me, const Body& s) const {
  ++blk.count;
  blk.visible.push_back(1);  // construction targets are task knowledge
  float row[kEntityDim] = {};
  Vec2 dp = rotate(s.pos - me.pos, -me.heading);
  row[0] = (float)dp.x;
  row[1] = (float)dp.y;
  auto corners = rect_corners(s);
  for (int c = 0; c < 4; ++c) {
    Vec2 dc = rotate(corners[c] - me.pos, -me.heading);
    row[2 + 2 * c] = (float)dc.x;
    row[3 + 2 * c] = (float)dc.y;
  }
  blk.feats.insert(blk.feats.end(), row, row + kEntityDim);
}

Observation Env::observe(int agent_idx, bool omniscient) const {
  const Body& me = world_.body(agent_ids_.at(agent_idx));
  std::vector<uint8_t> vis;
  if (omniscient)
    vis.assign(world_.bodies().size(), 1);
  else
    vis = world_.compute_visibility(me.id);

  Observation o;
  o.self = {(float)me.pos.x,
            (float)me.pos.y,
            (float)me.vel.x,
            (float)me.vel.y,
            (float)std::cos(me.heading),
            (float)std::sin(me.heading),
            (float)me.team,
            (float)prep_remaining()};
  std::vector<double> lid = world_.compute_lidar(me.id);
  o.lidar.assign(lid.begin(), lid.end());

  EntityBlock& agents = o.entities[kClassAgent];
  for (int i = 0; i < n_agents(); ++i)
    if (i != agent_idx) push_entity_row(agents, me, world_.body(agent_ids_[i]), vis);
  if (single_agent_task()) {
    // stand-in teammate row: zero features, unmasked, keeps the
    // agent block shaped like a hide-and-seek observation
    ++agents.count;
    agents.visible.push_back(1);
    agents.feats.insert(agents.feats.end(), kEntityDim, 0.0f);
  }

  for (int b : box_ids_)
    push_entity_row(o.entities[kClassBox], me, world_.body(b), vis);
  for (int r : ramp_ids_)
    push_entity_row(o.entities[kClassRamp], me, world_.body(r), vis);
  for (int p : pellet_ids_)
    push_entity_row(o.entities[kClassPellet], me, world_.body(p), vis);
  if (cylinder_id_ >= 0)
    push_entity_row(o.entities[kClassCylinder], me, world_.body(cylinder_id_), vis);
  for (int s : site_ids_) push_site_row(o.entities[kClassSite], me, world_.body(s));
  return o;
}

BehaviorStats behavior_stats(const EpisodeTrace& trace) {
  BehaviorStats s;
  if (trace.frames.empty()) return s;
  size_t nb = trace.frames[0].box_pos.size();
  size_t nr = trace.frames[0].ramp_pos.size();
  for (size_t j = 0; j < nb; ++j) {
    double path = 0, prep_path = 0;
    for (size_t k = 1; k < trace.frames.size(); ++k) {
      double d =
          (trace.frames[k].box_pos[j] - trace.frames[k - 1].box_pos[j]).norm();
      path += d;
      if (trace.frames[k].prep) prep_path += d;
    }
    s.box_move = std::max(s.box_move, path);
    s.box_move_prep = std::max(s.box_move_prep, prep_path);
  }
  for (size_t j = 0; j < nr; ++j) {
    double path = 0, prep_path = 0;
    for (size_t k = 1; k < trace.frames.size(); ++k) {
      double d =
          (trace.frames[k].ramp_pos[j] - trace.frames[k - 1].ramp_pos[j]).norm();
      path += d;
      if (trace.frames[k].prep) prep_path += d;
    }
    s.ramp_move = std::max(s.ramp_move, path);
    s.ramp_move_prep = std::max(s.ramp_move_prep, prep_path);
  }
  const TraceFrame& last = trace.frames.back();
  for (uint8_t lk : last.box_locked) s.boxes_locked_end += lk;
  for (uint8_t lk : last.ramp_locked) s.ramps_locked_end += lk;
  for (size_t k = trace.frames.size(); k-- > 0;) {
    if (!trace.frames[k].prep) continue;
    for (uint8_t lk : trace.frames[k].box_locked) s.boxes_locked_prep_end += lk;
    for (uint8_t lk : trace.frames[k].ramp_locked) s.ramps_locked_prep_end += lk;
    break;
  }
  return s;
}

}  // namespace hns::env
