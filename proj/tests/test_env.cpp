#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "hns/env/env.hpp"

using namespace hns;
using namespace hns::env;

namespace {

ActionTriple act(int mx, int my, int tq, bool grab = false, bool lock = false) {
  ActionTriple a;
  a.move_x = mx;
  a.move_y = my;
  a.torque = tq;
  a.grab = grab;
  a.lock = lock;
  return a;
}

std::vector<ActionTriple> zeros(int n) { return std::vector<ActionTriple>(n); }

void teleport(World& w, int id, Vec2 p, double heading) {
  Body& b = w.body(id);
  b.pos = p;
  b.heading = heading;
  b.vel = {0, 0};
  b.ang_vel = 0;
}

double face(const Vec2& from, const Vec2& to) {
  return std::atan2(to.y - from.y, to.x - from.x);
}

std::vector<ActionTriple> random_actions(int n, Rng& rng) {
  std::vector<ActionTriple> acts(n);
  for (auto& a : acts) {
    a.move_x = rng.randint(0, 4);
    a.move_y = rng.randint(0, 4);
    a.torque = rng.randint(0, 4);
    a.grab = rng.chance(0.3);
    a.lock = rng.chance(0.2);
  }
  return acts;
}

bool round_body(const Body& b) {
  return b.kind == BodyKind::agent || b.kind == BodyKind::cylinder ||
         b.kind == BodyKind::pellet;
}

// strict pairwise overlap, written independently of the placement check
bool strict_overlap(const Body& a, const Body& b) {
  if (round_body(a) && round_body(b))
    return (a.pos - b.pos).norm() < a.radius() + b.radius();
  if (round_body(a)) return circle_obb_overlap(a.pos, a.radius(), b.obb());
  if (round_body(b)) return circle_obb_overlap(b.pos, b.radius(), a.obb());
  return obb_obb_mtv(a.obb(), b.obb()).has_value();
}

bool colliding_kind(const Body& b) {
  return b.kind != BodyKind::pellet && b.kind != BodyKind::site;
}

// independent restatement of the hide-and-seek reward rules
std::vector<float> hide_seek_oracle(const Env& e, bool prep) {
  std::vector<float> r(e.n_agents(), 0.0f);
  if (prep) return r;
  bool seen = false;
  for (int s = e.n_hiders(); s < e.n_agents() && !seen; ++s) {
    auto vis = e.world().compute_visibility(e.agent_id(s));
    for (int h = 0; h < e.n_hiders(); ++h) seen = seen || vis[e.agent_id(h)];
  }
  for (int i = 0; i < e.n_agents(); ++i) {
    if (e.is_hider(i))
      r[i] = seen ? -1.0f : 1.0f;
    else
      r[i] = seen ? 1.0f : -1.0f;
    const Body& b = e.world().body(e.agent_id(i));
    double half = e.config().bounds / 2.0;
    if (std::abs(b.pos.x) > half || std::abs(b.pos.y) > half) r[i] -= 10.0f;
  }
  return r;
}

const Rect* find_room(const RoomLayout& lay, const Vec2& p) {
  for (const Rect& r : lay.rooms)
    if (r.contains(p)) return &r;
  return nullptr;
}

}  // namespace

TEST_CASE("config: hide and seek defaults") {
  EnvConfig c = EnvConfig::defaults(Variant::hide_and_seek);
  CHECK(c.n_hiders.lo == 1);
  CHECK(c.n_hiders.hi == 3);
  CHECK(c.n_seekers.lo == 1);
  CHECK(c.n_seekers.hi == 3);
  CHECK(c.n_boxes.lo == 3);
  CHECK(c.n_boxes.hi == 9);
  CHECK(c.min_elongated == 3);
  CHECK(c.n_ramps == 2);
  CHECK(c.horizon == 240);
  CHECK(c.prep_fraction == doctest::Approx(0.4));
  CHECK(c.bounds == doctest::Approx(18.0));
  CHECK(variant_from_name(variant_name(c.variant)) == c.variant);
}

TEST_CASE("reset: same seed reproduces the world, different seed differs") {
  Env a(EnvConfig::defaults(Variant::hide_and_seek));
  Env b(EnvConfig::defaults(Variant::hide_and_seek));
  a.reset(123);
  b.reset(123);
  CHECK(a.world().snapshot() == b.world().snapshot());
  b.reset(124);
  CHECK(a.world().snapshot() != b.world().snapshot());
}

TEST_CASE("reset: counts, separation and containment over many seeds") {
  Env e(EnvConfig::defaults(Variant::hide_and_seek));
  bool saw_interior = false, saw_open = false;
  for (uint64_t seed = 0; seed < 300; ++seed) {
    e.reset(seed);
    int n_boxes = (int)e.box_ids().size();
    CHECK(n_boxes >= 3);
    CHECK(n_boxes <= 9);
    int elong = 0;
    for (int id : e.box_ids()) elong += e.world().body(id).elongated;
    CHECK(elong >= 3);
    CHECK(e.n_hiders() >= 1);
    CHECK(e.n_hiders() <= 3);
    CHECK(e.n_seekers() >= 1);
    CHECK(e.n_seekers() <= 3);
    CHECK((int)e.ramp_ids().size() == 2);
    if (e.layout().walls.size() > 4) saw_interior = true;
    if (e.layout().walls.size() == 4) saw_open = true;

    const auto& bodies = e.world().bodies();
    double half = e.config().bounds / 2.0;
    for (const Body& b : bodies) {
      if (b.kind == BodyKind::wall) continue;
      CHECK(std::abs(b.pos.x) < half);
      CHECK(std::abs(b.pos.y) < half);
    }
    for (size_t i = 0; i < bodies.size(); ++i)
      for (size_t j = i + 1; j < bodies.size(); ++j) {
        if (!colliding_kind(bodies[i]) || !colliding_kind(bodies[j])) continue;
        // wall pieces abut and cross at junctions by design
        if (bodies[i].kind == BodyKind::wall && bodies[j].kind == BodyKind::wall)
          continue;
        CAPTURE(seed);
        CAPTURE(i);
        CAPTURE(j);
        CHECK(!strict_overlap(bodies[i], bodies[j]));
      }
  }
  CHECK(saw_interior);
  CHECK(saw_open);
}

TEST_CASE("reset: randomization ladder changes counts, walls and placement") {
  EnvConfig c = EnvConfig::defaults(Variant::hide_and_seek);

  c.randomization_level = RandLevel::solo_teams;
  Env solo(c);
  for (uint64_t s = 0; s < 20; ++s) {
    solo.reset(s);
    CHECK(solo.n_hiders() == 1);
    CHECK(solo.n_seekers() == 1);
  }

  c.randomization_level = RandLevel::fixed_boxes;
  Env fb(c);
  for (uint64_t s = 0; s < 20; ++s) {
    fb.reset(s);
    CHECK((int)fb.box_ids().size() == 7);
    int elong = 0;
    for (int id : fb.box_ids()) elong += fb.world().body(id).elongated;
    CHECK(elong == 3);
  }

  c.randomization_level = RandLevel::teams_no_walls;
  Env nw(c);
  for (uint64_t s = 0; s < 20; ++s) {
    nw.reset(s);
    CHECK(nw.layout().walls.empty());
  }

  c.randomization_level = RandLevel::all_fixed;
  Env ax(c);
  ax.reset(7);
  std::vector<Vec2> pos;
  for (const Body& b : ax.world().bodies()) pos.push_back(b.pos);
  ax.reset(99);
  for (size_t i = 0; i < pos.size(); ++i) {
    CHECK(ax.world().bodies()[i].pos.x == pos[i].x);
    CHECK(ax.world().bodies()[i].pos.y == pos[i].y);
  }
}

TEST_CASE("reset: impossible placement raises the reset error") {
  EnvConfig c = EnvConfig::defaults(Variant::hide_and_seek);
  c.bounds = 4.0;
  c.n_boxes = {9, 9};
  REQUIRE_THROWS_AS([&] { Env e(c); }(), ResetError);
}

TEST_CASE("prep: seekers are pinned and every reward is zero") {
  EnvConfig c = EnvConfig::defaults(Variant::hide_and_seek);
  c.n_hiders = {1, 1};
  c.n_seekers = {1, 1};
  c.randomization_level = RandLevel::solo_no_walls;
  Env e(c);
  e.reset(5);
  REQUIRE(e.in_prep());
  // out-of-bounds hider must still earn exactly zero during prep
  teleport(e.world(), e.agent_id(0), {20.0, 20.0}, 0.0);
  Vec2 seeker_before = e.world().body(e.agent_id(1)).pos;
  for (int k = 0; k < 5; ++k) {
    auto out = e.step({act(4, 4, 2), act(4, 4, 2)});
    for (float r : out.rewards) CHECK(r == 0.0f);
  }
  Vec2 seeker_after = e.world().body(e.agent_id(1)).pos;
  CHECK(seeker_after.x == seeker_before.x);
  CHECK(seeker_after.y == seeker_before.y);
  // the hider was free to move the whole time
  CHECK(e.world().body(e.agent_id(0)).pos.x != 20.0);
}

TEST_CASE("hide and seek reward: scripted rule composition") {
  EnvConfig c = EnvConfig::defaults(Variant::hide_and_seek);
  c.n_hiders = {1, 1};
  c.n_seekers = {1, 1};
  c.prep_fraction = 0.0;
  c.randomization_level = RandLevel::solo_no_walls;
  Env e(c);
  e.reset(11);
  for (int id : e.box_ids()) teleport(e.world(), id, {-8, -8}, 0);
  for (int id : e.ramp_ids()) teleport(e.world(), id, {8, -8}, 0);

  // hidden: seeker in a corner facing away from the hider
  teleport(e.world(), e.agent_id(0), {4, 4}, 0.0);
  teleport(e.world(), e.agent_id(1), {-6, -6}, face({-6, -6}, {-9, -9}));
  auto out = e.step(zeros(2));
  CHECK(out.rewards[0] == 1.0f);
  CHECK(out.rewards[1] == -1.0f);

  // seen: seeker staring straight at the hider
  teleport(e.world(), e.agent_id(1), {2, 4}, face({2, 4}, {4, 4}));
  out = e.step(zeros(2));
  CHECK(out.rewards[0] == -1.0f);
  CHECK(out.rewards[1] == 1.0f);

  // hidden again, but the seeker wandered out of the arena
  teleport(e.world(), e.agent_id(1), {10.5, 10.5}, face({10.5, 10.5}, {12, 12}));
  out = e.step(zeros(2));
  CHECK(out.rewards[0] == 1.0f);
  CHECK(out.rewards[1] == -11.0f);
}

TEST_CASE("hide and seek reward: randomized states agree with the rule oracle") {
  EnvConfig c = EnvConfig::defaults(Variant::hide_and_seek);
  c.prep_fraction = 0.0;
  Env e(c);
  e.reset(3);
  Rng rng(99);
  int steps = 0;
  for (int k = 0; k < 300; ++k) {
    if (e.done()) {
      e.reset(1000 + k);
      steps = 0;
    }
    if (rng.chance(0.2)) {
      int idx = rng.randint(0, e.n_agents() - 1);
      teleport(e.world(), e.agent_id(idx),
               {rng.uniform(-10, 10), rng.uniform(-10, 10)},
               rng.uniform(-M_PI, M_PI));
    }
    auto out = e.step(random_actions(e.n_agents(), rng));
    ++steps;
    auto expect = hide_seek_oracle(e, false);
    bool any_oob = false;
    for (int i = 0; i < e.n_agents(); ++i) {
      CHECK(out.rewards[i] == expect[i]);
      if (expect[i] < -1.0f || expect[i] > 1.0f) any_oob = true;
    }
    if (!any_oob) {
      double hiders = 0, seekers = 0;
      for (int i = 0; i < e.n_agents(); ++i)
        (e.is_hider(i) ? hiders : seekers) += out.rewards[i];
      CHECK(hiders / e.n_hiders() + seekers / e.n_seekers() ==
            doctest::Approx(0.0).epsilon(1e-12));
    }
  }
  CHECK(steps > 0);
}

TEST_CASE("quadrant: spawn constraints hold across seeds") {
  Env e(EnvConfig::defaults(Variant::quadrant));
  for (uint64_t seed = 0; seed < 500; ++seed) {
    e.reset(seed);
    const Rect& room = e.layout().rooms[0];
    CAPTURE(seed);
    for (int id : e.box_ids()) {
      const Body& b = e.world().body(id);
      CHECK(room.contains(b.pos, 0.5));
      CHECK(!b.elongated);
      CHECK(b.lockable);
    }
    for (int id : e.ramp_ids()) CHECK(!e.world().body(id).lockable);
    REQUIRE(e.n_hiders() == 2);
    REQUIRE(e.n_seekers() == 2);
    for (int s = e.n_hiders(); s < e.n_agents(); ++s) {
      const Body& b = e.world().body(e.agent_id(s));
      CHECK((b.pos.x < 0.0 || b.pos.y > 0.0));
    }
    size_t doors = e.layout().doors.size();
    CHECK(doors >= 1);
    CHECK(doors <= 2);
  }
}

TEST_CASE("quadrant: carrying an object out adds the holder penalty") {
  EnvConfig c = EnvConfig::defaults(Variant::quadrant);
  c.prep_fraction = 0.0;
  Env e(c);
  e.reset(21);
  int box = e.box_ids()[0];
  int holder = e.agent_id(0);
  // park everyone else far inside so only the holder composes penalties
  teleport(e.world(), e.agent_id(1), {-7, -7}, 0);
  teleport(e.world(), e.agent_id(2), {-7, 7}, M_PI);
  teleport(e.world(), e.agent_id(3), {-5, 5}, M_PI);
  teleport(e.world(), box, {5, -5}, 0);
  e.step(zeros(4));
  teleport(e.world(), holder, {3.8, -5}, 0.0);  // facing +x toward the box
  auto out = e.step({act(2, 2, 2, true, false), act(2, 2, 2), act(2, 2, 2),
                     act(2, 2, 2)});
  REQUIRE(e.world().body(box).grabbed_by == holder);
  // drag the pair outside and keep holding
  teleport(e.world(), holder, {10.2, -5}, 0.0);
  teleport(e.world(), box, {11.5, -5}, 0.0);
  out = e.step({act(2, 2, 2, true, false), act(2, 2, 2), act(2, 2, 2),
                act(2, 2, 2)});
  REQUIRE(e.world().body(box).grabbed_by == holder);
  auto base = hide_seek_oracle(e, false);
  CHECK(out.rewards[0] == base[0] - 10.0f);  // object penalty on top
  for (int i = 1; i < 4; ++i) CHECK(out.rewards[i] == base[i]);
}

TEST_CASE("hns_food: pellet pay requires hidden, near and seen") {
  EnvConfig c = EnvConfig::defaults(Variant::hns_food);
  c.n_hiders = {1, 1};
  c.n_seekers = {1, 1};
  c.prep_fraction = 0.0;
  c.randomization_level = RandLevel::solo_no_walls;
  Env e(c);
  e.reset(31);
  REQUIRE(e.pellet_ids().size() == 5);
  for (int id : e.box_ids()) teleport(e.world(), id, {-8, -8}, 0);
  for (int id : e.ramp_ids()) teleport(e.world(), id, {8, -8}, 0);
  for (int id : e.pellet_ids()) teleport(e.world(), id, {7, 7}, 0);
  int hider = e.agent_id(0), seeker = e.agent_id(1);
  teleport(e.world(), seeker, {-6, 6}, face({-6, 6}, {-9, 9}));

  // one pellet in reach and in view: hide-and-seek +1 plus one food unit
  teleport(e.world(), hider, {0, 0}, 0.0);
  teleport(e.world(), e.pellet_ids()[0], {0.5, 0}, 0.0);
  auto out = e.step(zeros(2));
  CHECK(out.rewards[0] == 2.0f);
  CHECK(out.rewards[1] == -1.0f);
  CHECK(out.pellets_eaten == 1);

  // same geometry but the hider faces away: pellet out of the vision cone
  teleport(e.world(), hider, {0, 0}, M_PI);
  out = e.step(zeros(2));
  CHECK(out.rewards[0] == 1.0f);
  CHECK(out.pellets_eaten == 0);

  // two pellets eligible at once
  teleport(e.world(), hider, {0, 0}, 0.0);
  teleport(e.world(), e.pellet_ids()[1], {0.4, 0.3}, 0.0);
  out = e.step(zeros(2));
  CHECK(out.rewards[0] == 3.0f);
  CHECK(out.pellets_eaten == 2);

  // a seen hider forfeits both reward streams
  teleport(e.world(), seeker, {-2, 0}, face({-2, 0}, {0, 0}));
  out = e.step(zeros(2));
  CHECK(out.rewards[0] == -1.0f);
  CHECK(out.rewards[1] == 1.0f);
  CHECK(out.pellets_eaten == 0);
}

TEST_CASE("dynamic_food: contact consumes and respawns the single pellet") {
  EnvConfig c = EnvConfig::defaults(Variant::dynamic_food);
  c.prep_fraction = 0.0;
  Env e(c);
  e.reset(41);
  REQUIRE(e.pellet_ids().size() == 1);
  REQUIRE(e.n_hiders() == 3);
  REQUIRE(e.n_seekers() == 2);
  REQUIRE(e.ramp_ids().empty());
  for (int id : e.box_ids()) {
    CHECK(e.world().body(id).elongated);
    teleport(e.world(), id, {-8, -8}, 0);
  }
  CHECK(e.layout().walls.empty());
  int pellet = e.pellet_ids()[0];
  teleport(e.world(), e.agent_id(0), {0, 0}, 0.0);
  teleport(e.world(), e.agent_id(1), {3, 3}, 0.0);
  teleport(e.world(), e.agent_id(2), {3, -3}, 0.0);
  teleport(e.world(), e.agent_id(3), {-8, 8}, face({-8, 8}, {-9, 9}));
  teleport(e.world(), e.agent_id(4), {8, 8}, face({8, 8}, {9, 9}));
  teleport(e.world(), pellet, {0.5, 0}, 0.0);

  auto out = e.step(zeros(5));
  CHECK(out.rewards[0] == 2.0f);
  CHECK(out.rewards[1] == 2.0f);
  CHECK(out.rewards[2] == 2.0f);
  CHECK(out.pellets_eaten == 1);
  const Body& pb = e.world().body(pellet);
  CHECK(pb.active);
  double half_region = e.config().bounds / 10.0;
  CHECK(std::abs(pb.pos.x) <= half_region);
  CHECK(std::abs(pb.pos.y) <= half_region);
  bool moved = pb.pos.x != 0.5 || pb.pos.y != 0.0;
  CHECK(moved);

  // consumption still happens when the team is seen, but pays nothing
  teleport(e.world(), e.agent_id(3), {-2, 0}, face({-2, 0}, {0, 0}));
  teleport(e.world(), pellet, {0.5, 0}, 0.0);
  out = e.step(zeros(5));
  CHECK(out.rewards[0] == -1.0f);
  CHECK(out.pellets_eaten == 1);
  bool moved_again =
      e.world().body(pellet).pos.x != 0.5 || e.world().body(pellet).pos.y != 0.0;
  CHECK(moved_again);
}

TEST_CASE("food_protection: prep shields pellets, then seekers harvest") {
  Env e(EnvConfig::defaults(Variant::food_protection));
  e.reset(51);
  REQUIRE(e.prep_steps() == 100);
  REQUIRE(e.config().horizon == 200);
  REQUIRE(e.pellet_ids().size() == 50);
  int pellet = e.pellet_ids()[0];
  int seeker = e.agent_id(3);
  // keep hiders well inside so no boundary penalty fires
  teleport(e.world(), e.agent_id(0), {-3, 0}, 0);
  teleport(e.world(), e.agent_id(1), {-3, 2}, 0);
  teleport(e.world(), e.agent_id(2), {-3, -2}, 0);
  teleport(e.world(), seeker, {5.2, 5.2}, 0);
  teleport(e.world(), e.agent_id(4), {6.5, -6.5}, 0);
  for (int p : e.pellet_ids()) teleport(e.world(), p, {-6, 6}, 0);
  teleport(e.world(), pellet, {5.2, 5.5}, 0.0);  // under the parked seeker

  while (e.in_prep()) {
    auto out = e.step(zeros(5));
    for (float r : out.rewards) CHECK(r == 0.0f);
    CHECK(e.world().body(pellet).active);
  }
  auto out = e.step(zeros(5));  // first post-prep transition
  CHECK(!e.world().body(pellet).active);
  CHECK(out.pellets_eaten == 1);
  CHECK(out.rewards[0] == -3.0f);
  CHECK(out.rewards[1] == -3.0f);
  CHECK(out.rewards[2] == -3.0f);
  CHECK(out.rewards[3] == 3.0f);
  CHECK(out.rewards[4] == 3.0f);

  // boundary penalty for a hider hugging the wall
  teleport(e.world(), e.agent_id(0), {8.0, 0}, 0.0);
  out = e.step(zeros(5));
  CHECK(out.rewards[0] == -1.0f);
  CHECK(out.rewards[1] == 0.0f);

  // final window: hiders frozen, seekers still free
  while (e.t() < e.config().horizon - 60) e.step(zeros(5));
  teleport(e.world(), e.agent_id(0), {0, 0}, 0.0);
  teleport(e.world(), seeker, {0, -4}, 0.0);
  Vec2 hider_before = e.world().body(e.agent_id(0)).pos;
  Vec2 seeker_before = e.world().body(seeker).pos;
  e.step({act(4, 2, 2), act(2, 2, 2), act(2, 2, 2), act(4, 2, 2), act(2, 2, 2)});
  CHECK(e.world().body(e.agent_id(0)).pos.x == hider_before.x);
  CHECK(e.world().body(seeker).pos.x > seeker_before.x);
}

TEST_CASE("lock_and_return: bonuses, shaping and the terminal penalty") {
  Env e(EnvConfig::defaults(Variant::lock_and_return));
  e.reset(61);
  REQUIRE(e.layout().rooms.size() == 6);
  REQUIRE(e.box_ids().size() == 1);
  REQUIRE(e.n_agents() == 1);
  int box = e.box_ids()[0];
  int agent = e.agent_id(0);

  const Rect* room = find_room(e.layout(), e.world().body(box).pos);
  REQUIRE(room != nullptr);
  Vec2 spot = room->center();
  teleport(e.world(), box, spot, 0.0);
  e.step(zeros(1));  // settle any wall contact from the teleport
  Vec2 box_pos = e.world().body(box).pos;
  teleport(e.world(), agent, {box_pos.x + 1.1, box_pos.y},
           face({box_pos.x + 1.1, box_pos.y}, box_pos));
  e.step(zeros(1));  // settle shaping against the relocated agent

  auto out = e.step({act(2, 2, 2, false, true)});
  REQUIRE(e.world().body(box).locked());
  CHECK(out.rewards[0] == 5.0f);

  out = e.step({act(2, 2, 2, false, true)});  // toggle unlocks
  REQUIRE(!e.world().body(box).locked());
  CHECK(out.rewards[0] == -5.0f);

  // success stream: stand exactly at the start with the box locked
  teleport(e.world(), box, {e.start_pos().x + 1.1, e.start_pos().y}, 0.0);
  teleport(e.world(), agent, e.start_pos(), 0.0);
  e.step(zeros(1));
  teleport(e.world(), agent, e.start_pos(), 0.0);
  out = e.step({act(2, 2, 2, false, true)});
  REQUIRE(e.world().body(box).locked());
  CHECK(out.rewards[0] == doctest::Approx(6.0f).epsilon(1e-4));
  CHECK(out.success);
  float bonus = 0;
  for (int k = 0; k < 10; ++k) {
    out = e.step(zeros(1));
    bonus += out.rewards[0];
    CHECK(out.success);
  }
  CHECK(bonus == doctest::Approx(10.0f).epsilon(1e-4));

  // terminal penalty when the box is never locked
  Env f(EnvConfig::defaults(Variant::lock_and_return));
  f.reset(62);
  StepResult last;
  while (!f.done()) last = f.step(zeros(1));
  CHECK(last.rewards[0] == doctest::Approx(-5.0f).epsilon(1e-4));
  CHECK(!last.success);
}

TEST_CASE("sequential_lock: hidden order gates which box will lock") {
  Env e(EnvConfig::defaults(Variant::sequential_lock));
  e.reset(71);
  REQUIRE(e.layout().rooms.size() == 3);
  REQUIRE(e.layout().doors.empty());
  REQUIRE(e.box_ids().size() == 4);
  REQUIRE(e.ramp_ids().size() == 3);
  for (int j = 0; j < 3; ++j) {
    const Body& ramp = e.world().body(e.ramp_ids()[j]);
    CHECK(e.layout().rooms[j].contains(ramp.pos));
  }
  const auto& order = e.lock_order();
  REQUIRE(order.size() == 4);

  // spread bodies out so lock attempts have a single candidate
  Vec2 spots[4] = {{-6, -6}, {6, -6}, {-6, 6}, {6, 6}};
  for (int j = 0; j < 4; ++j) teleport(e.world(), e.box_ids()[j], spots[j], 0.0);
  for (int j = 0; j < 3; ++j)
    teleport(e.world(), e.ramp_ids()[j], {-8.0 + 8.0 * j, 0.0}, 0.0);
  e.step(zeros(1));
  auto lock_near = [&](int j) {
    Vec2 bp = e.world().body(e.box_ids()[j]).pos;
    teleport(e.world(), e.agent_id(0), {bp.x + 1.1, bp.y},
             face({bp.x + 1.1, bp.y}, bp));
    e.step(zeros(1));
    return e.step({act(2, 2, 2, false, true)});
  };

  // wrong box first: stays unlocked, no bonus
  auto out = lock_near(order[1]);
  CHECK(!e.world().body(e.box_ids()[order[1]]).locked());
  CHECK(std::abs(out.rewards[0]) < 1.0f);

  float bonus_total = 0;
  for (int j = 0; j < 4; ++j) {
    out = lock_near(order[j]);
    CHECK(e.world().body(e.box_ids()[order[j]]).locked());
    bonus_total += out.rewards[0];
  }
  CHECK(bonus_total == doctest::Approx(20.0f + 1.0f).epsilon(1e-3));
  CHECK(out.success);  // the final lock completes the set
  out = e.step(zeros(1));
  CHECK(out.rewards[0] == doctest::Approx(1.0f).epsilon(1e-6));
  CHECK(out.success);

  // unlocking early boxes reopens the sequence at the first gap
  out = lock_near(order[0]);
  CHECK(!e.world().body(e.box_ids()[order[0]]).locked());
  CHECK(out.rewards[0] <= doctest::Approx(-5.0f + 1.0f));
  out = lock_near(order[1]);
  CHECK(!e.world().body(e.box_ids()[order[1]]).locked());
  // order[1] is open but not next, so it refuses to lock again
  CHECK(!e.world().body(e.box_ids()[order[1]]).lockable);
  CHECK(e.world().body(e.box_ids()[order[0]]).lockable);
  out = lock_near(order[1]);
  CHECK(!e.world().body(e.box_ids()[order[1]]).locked());

  // a do-nothing policy collects nothing but shaping, which is zero
  Env f(EnvConfig::defaults(Variant::sequential_lock));
  f.reset(72);
  double total = 0;
  while (!f.done()) total += f.step(zeros(1)).rewards[0];
  CHECK(std::abs(total) < 1e-6);
}

TEST_CASE("smooth min: closed forms and bounds") {
  CHECK(smooth_min({0.7}, -1.5) == doctest::Approx(0.7).epsilon(1e-12));
  double expect = std::exp(-1.5) / (1.0 + std::exp(-1.5));
  CHECK(smooth_min({0.0, 1.0}, -1.5) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(smooth_min({0.0, 1.0}, -1.5) == doctest::Approx(0.18242552).epsilon(1e-6));

  Rng rng(7);
  for (int k = 0; k < 1000; ++k) {
    int n = rng.randint(1, 12);
    std::vector<double> d(n);
    for (double& x : d) x = rng.uniform(0.0, 25.0);
    double mean = 0;
    for (double x : d) mean += x;
    mean /= n;
    double mn = *std::min_element(d.begin(), d.end());
    CHECK(smooth_min(d, 0.0) == doctest::Approx(mean).epsilon(1e-9));
    double sm = smooth_min(d, -1.5);
    CHECK(sm >= mn - 1e-12);
    CHECK(sm <= mean + 1e-12);
    CHECK(smooth_min(d, -1e4) == doctest::Approx(mn).epsilon(1e-6));
  }
}

TEST_CASE("blueprint: geometry evaluation against a hand-built scene") {
  Env e(EnvConfig::defaults(Variant::blueprint));
  uint64_t seed = 0;
  while (true) {
    e.reset(seed);
    if (e.site_ids().size() == 1) break;
    ++seed;
  }
  REQUIRE(e.box_ids().size() == 8);
  for (int id : e.box_ids()) CHECK(!e.world().body(id).elongated);

  teleport(e.world(), e.site_ids()[0], {0, 0}, 0.0);
  for (size_t j = 1; j < e.box_ids().size(); ++j)
    teleport(e.world(), e.box_ids()[j], {200.0 + 5.0 * j, 200.0}, 0.0);
  teleport(e.world(), e.box_ids()[0], {2.0, 0.0}, 0.0);

  BlueprintEval ev = blueprint_eval(e);
  CHECK(!ev.complete);
  // independent recomputation over the numerically relevant near box
  Vec2 site_c[4] = {{0.5, 0.5}, {0.5, -0.5}, {-0.5, 0.5}, {-0.5, -0.5}};
  Vec2 box_c[4] = {{2.5, 0.5}, {2.5, -0.5}, {1.5, 0.5}, {1.5, -0.5}};
  double sum = 0;
  for (const Vec2& sc : site_c) {
    std::vector<double> d;
    for (const Vec2& bc : box_c) d.push_back((sc - bc).norm());
    sum += smooth_min(d, -1.5);
  }
  CHECK(ev.mean_corner_dist == doctest::Approx(sum / 4.0).epsilon(1e-3));

  // exact cover completes the task and pays 3 per site
  teleport(e.world(), e.box_ids()[0], {0, 0}, 0.0);
  CHECK(blueprint_eval(e).complete);
  auto out = e.step(zeros(1));
  CHECK(out.done);
  CHECK(out.success);
  CHECK(out.rewards[0] > 2.9f);

  // per-step reward is the scaled penalty of the mean corner distance
  Env f(EnvConfig::defaults(Variant::blueprint));
  f.reset(200);
  auto o2 = f.step(zeros(1));
  BlueprintEval ev2 = blueprint_eval(f);
  CHECK(o2.rewards[0] ==
        doctest::Approx(-0.05 * ev2.mean_corner_dist).epsilon(1e-5));
  CHECK(o2.rewards[0] <= 0.0f);
}

TEST_CASE("blueprint: site count range and pairwise separation") {
  Env e(EnvConfig::defaults(Variant::blueprint));
  std::set<int> seen;
  for (uint64_t s = 0; s < 60; ++s) {
    e.reset(s);
    int k = (int)e.site_ids().size();
    CHECK(k >= 1);
    CHECK(k <= 4);
    seen.insert(k);
    for (size_t i = 0; i < e.site_ids().size(); ++i)
      for (size_t j = i + 1; j < e.site_ids().size(); ++j)
        CHECK(!obb_obb_mtv(e.world().body(e.site_ids()[i]).obb(),
                           e.world().body(e.site_ids()[j]).obb())
                   .has_value());
  }
  CHECK(seen.size() == 4);
}

namespace {

// segment-vs-rectangle test built from edge crossings and containment,
// deliberately not the slab method the library uses
bool seg_hits_obb(const Vec2& a, const Vec2& b, const Obb& o) {
  auto side = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
  };
  auto seg_seg = [&](const Vec2& p1, const Vec2& p2, const Vec2& p3,
                     const Vec2& p4) {
    double d1 = side(p3, p4, p1), d2 = side(p3, p4, p2);
    double d3 = side(p1, p2, p3), d4 = side(p1, p2, p4);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
  };
  Vec2 c[4] = {o.to_world({o.half.x, o.half.y}), o.to_world({o.half.x, -o.half.y}),
               o.to_world({-o.half.x, -o.half.y}),
               o.to_world({-o.half.x, o.half.y})};
  for (int i = 0; i < 4; ++i)
    if (seg_seg(a, b, c[i], c[(i + 1) % 4])) return true;
  return point_in_obb(a, o) || point_in_obb(b, o);
}

int shelter_oracle(const Env& e) {
  const Body& cyl = e.world().body(e.cylinder_id());
  double h = e.config().bounds / 2.0;
  int n = 0;
  for (int k = 0; k < 100; ++k) {
    double s = k / 100.0 * 8.0 * h;
    int sidei = (int)(s / (2.0 * h));
    double ofs = std::fmod(s, 2.0 * h) - h;
    Vec2 o;
    if (sidei == 0)
      o = {ofs, -h};
    else if (sidei == 1)
      o = {h, ofs};
    else if (sidei == 2)
      o = {-ofs, h};
    else
      o = {-h, -ofs};
    // clip the segment at the cylinder surface
    Vec2 d = cyl.pos - o;
    double len = d.norm();
    Vec2 hit = o + d * ((len - cyl.radius()) / len);
    bool blocked = false;
    for (int id : e.box_ids())
      if (seg_hits_obb(o, hit, e.world().body(id).obb())) blocked = true;
    if (!blocked) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("shelter: ray census matches the segment oracle") {
  Env e(EnvConfig::defaults(Variant::shelter));
  e.reset(81);
  REQUIRE(e.cylinder_id() >= 0);
  int elong = 0;
  for (int id : e.box_ids()) elong += e.world().body(id).elongated;
  CHECK(elong == 3);
  CHECK(e.box_ids().size() == 8);
  double diam = e.world().body(e.cylinder_id()).radius() * 2.0;
  CHECK(diam >= 1.5);
  CHECK(diam <= 2.0);

  // boxes parked beyond the walls cannot block interior rays
  for (size_t j = 0; j < e.box_ids().size(); ++j)
    teleport(e.world(), e.box_ids()[j], {12.0 + 3.0 * j, 14.0}, 0.0);
  CHECK(shelter_exposed_rays(e) == 100);
  auto out = e.step(zeros(1));
  CHECK(out.rewards[0] == doctest::Approx(-0.1f).epsilon(1e-9));

  // a hand-built full enclosure drives the census to zero
  Body& cyl = e.world().body(e.cylinder_id());
  cyl.pos = {0, 0};
  cyl.half = {0.75, 0.75};
  teleport(e.world(), e.box_ids()[0], {0, 1.3}, 0.0);    // elongated north
  teleport(e.world(), e.box_ids()[1], {0, -1.3}, 0.0);   // elongated south
  teleport(e.world(), e.box_ids()[2], {1.3, 0}, M_PI_2);  // elongated east
  for (int j = 0; j < 5; ++j)
    teleport(e.world(), e.box_ids()[3 + j], {-1.3, -1.9 + 0.95 * j}, 0.0);
  CHECK(shelter_exposed_rays(e) == 0);
  CHECK(shelter_oracle(e) == 0);

  // random configurations agree exactly with the independent census
  Rng rng(5);
  for (uint64_t s = 0; s < 40; ++s) {
    e.reset(300 + s);
    for (int k = 0; k < 3; ++k) e.step(random_actions(1, rng));
    int fast = shelter_exposed_rays(e);
    int slow = shelter_oracle(e);
    CAPTURE(s);
    CHECK(fast == slow);
    auto r = e.step(zeros(1));
    CHECK(r.rewards[0] <= 0.0f);
    CHECK(r.rewards[0] >= -0.1f);
  }
}

TEST_CASE("object_counting: scripted boxes, labels and masking") {
  Env e(EnvConfig::defaults(Variant::object_counting));
  e.reset(91);
  REQUIRE(e.box_ids().size() == 6);
  REQUIRE(e.n_agents() == 1);

  int left = 0;
  for (int id : e.box_ids())
    if (e.world().body(id).vel.x < 0) ++left;
  CHECK(left == e.counting_label());

  Observation o0 = e.observe(0);
  int visible0 = 0;
  for (uint8_t v : o0.entities[kClassBox].visible) visible0 += v;
  CHECK(visible0 == 6);

  Vec2 agent_before = e.world().body(e.agent_id(0)).pos;
  StepResult out;
  while (!e.done()) out = e.step({act(4, 4, 4, true, true)});
  CHECK(e.t() == 120);
  for (float r : out.rewards) CHECK(r == 0.0f);
  Vec2 agent_after = e.world().body(e.agent_id(0)).pos;
  CHECK(agent_before.x == agent_after.x);  // pinned in place
  CHECK(agent_before.y == agent_after.y);

  Observation o1 = e.observe(0);
  for (uint8_t v : o1.entities[kClassBox].visible) CHECK(v == 0);
  for (int id : e.box_ids())
    CHECK(std::abs(e.world().body(id).pos.x) == doctest::Approx(8.0));

  // same seed, same label
  Env f(EnvConfig::defaults(Variant::object_counting));
  f.reset(91);
  CHECK(f.counting_label() == e.counting_label());
}

TEST_CASE("object_counting: labels follow the six-coin distribution") {
  Env e(EnvConfig::defaults(Variant::object_counting));
  const int n = 20000;
  int bins[7] = {0};
  for (int s = 0; s < n; ++s) {
    e.reset(40000 + s);
    ++bins[e.counting_label()];
  }
  const double coeff[7] = {1, 6, 15, 20, 15, 6, 1};
  double chi2 = 0;
  for (int k = 0; k < 7; ++k) {
    double expect = n * coeff[k] / 64.0;
    chi2 += (bins[k] - expect) * (bins[k] - expect) / expect;
  }
  CHECK(chi2 < 22.46);  // df 6 at the 0.001 level
}

TEST_CASE("transfer observations keep the hide-and-seek shape") {
  auto shape_match = [](const Observation& a, const Observation& b) {
    CHECK(a.self.size() == b.self.size());
    CHECK(a.lidar.size() == b.lidar.size());
    for (int cls : {kClassAgent, kClassBox, kClassRamp, kClassPellet}) {
      CHECK(a.entities[cls].count == b.entities[cls].count);
      CHECK(a.entities[cls].feats.size() == b.entities[cls].feats.size());
    }
  };
  auto hns_ref = [](int boxes, int ramps) {
    EnvConfig c = EnvConfig::defaults(Variant::hide_and_seek);
    c.n_hiders = {1, 1};
    c.n_seekers = {1, 1};
    c.n_boxes = {boxes, boxes};
    c.min_elongated = 0;
    c.n_ramps = ramps;
    Env e(c);
    e.reset(1);
    return e.observe(0);
  };

  Env lr(EnvConfig::defaults(Variant::lock_and_return));
  lr.reset(2);
  shape_match(lr.observe(0), hns_ref(1, 0));
  Observation o = lr.observe(0);
  CHECK(o.self[7] == 0.0f);  // no preparation phase to report
  REQUIRE(o.entities[kClassAgent].count == 1);
  CHECK(o.entities[kClassAgent].visible[0] == 1);
  for (int j = 0; j < kEntityDim; ++j)
    CHECK(o.entities[kClassAgent].row(0)[j] == 0.0f);

  Env sl(EnvConfig::defaults(Variant::sequential_lock));
  sl.reset(2);
  shape_match(sl.observe(0), hns_ref(4, 3));

  Env oc(EnvConfig::defaults(Variant::object_counting));
  oc.reset(2);
  shape_match(oc.observe(0), hns_ref(6, 0));

  Env sh(EnvConfig::defaults(Variant::shelter));
  sh.reset(2);
  shape_match(sh.observe(0), hns_ref(8, 0));
  CHECK(sh.observe(0).entities[kClassCylinder].count == 1);

  Env bp(EnvConfig::defaults(Variant::blueprint));
  bp.reset(2);
  shape_match(bp.observe(0), hns_ref(8, 0));
  Observation obp = bp.observe(0);
  CHECK(obp.entities[kClassSite].count == (int)bp.site_ids().size());
  // site rows carry the center plus four corners in the agent frame
  const Body& me = bp.world().body(bp.agent_id(0));
  const Body& site = bp.world().body(bp.site_ids()[0]);
  const float* row = obp.entities[kClassSite].row(0);
  Vec2 rel = rotate(site.pos - me.pos, -me.heading);
  CHECK(row[0] == doctest::Approx(rel.x).epsilon(1e-5));
  CHECK(row[1] == doctest::Approx(rel.y).epsilon(1e-5));
}

TEST_CASE("observations: entity features sit in the observer frame") {
  EnvConfig c = EnvConfig::defaults(Variant::hide_and_seek);
  c.n_hiders = {1, 1};
  c.n_seekers = {1, 1};
  c.n_boxes = {3, 3};
  c.prep_fraction = 0.0;
  c.randomization_level = RandLevel::solo_no_walls;
  Env e(c);
  e.reset(7);
  int hider = e.agent_id(0);
  int box = e.box_ids()[0];
  teleport(e.world(), hider, {1.0, 1.0}, M_PI_2);
  teleport(e.world(), box, {1.0, 4.0}, M_PI_2);
  Observation o = e.observe(0);
  const float* row = o.entities[kClassBox].row(0);
  CHECK(row[0] == doctest::Approx(3.0).epsilon(1e-6));  // ahead = +x local
  CHECK(row[1] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(row[4] == doctest::Approx(1.0).epsilon(1e-6));  // aligned headings
  CHECK(o.self[6] == 0.0f);
  CHECK(o.lidar.size() == 30);
}

TEST_CASE("behavior stats: path lengths and lock counts from a trace") {
  EpisodeTrace tr;
  TraceFrame f0;
  f0.prep = true;
  f0.box_pos = {{0, 0}, {5, 5}};
  f0.box_locked = {0, 0};
  f0.ramp_pos = {{-3, 0}};
  f0.ramp_locked = {0};
  TraceFrame f1 = f0;
  f1.box_pos[0] = {3, 0};  // 3 m during prep
  f1.box_locked = {1, 1};
  TraceFrame f2 = f1;
  f2.prep = false;
  f2.box_pos[0] = {3, 1};  // 1 m after prep
  f2.box_locked = {1, 0};
  f2.ramp_pos[0] = {-3, 0.5};
  tr.frames = {f0, f1, f2};

  BehaviorStats s = behavior_stats(tr);
  CHECK(s.box_move_prep == doctest::Approx(3.0));
  CHECK(s.box_move == doctest::Approx(4.0));
  CHECK(s.ramp_move == doctest::Approx(0.5));
  CHECK(s.ramp_move_prep == doctest::Approx(0.0));
  CHECK(s.boxes_locked_prep_end == 2);
  CHECK(s.boxes_locked_end == 1);
  CHECK(s.ramps_locked_end == 0);

  // a static episode records zero movement
  Env e(EnvConfig::defaults(Variant::hide_and_seek));
  e.set_record_trace(true);
  e.reset(17);
  for (int k = 0; k < 10; ++k) e.step(zeros(e.n_agents()));
  CHECK(e.trace().frames.size() == 11);
  BehaviorStats st = behavior_stats(e.trace());
  CHECK(st.box_move == 0.0);
  CHECK(st.ramp_move == 0.0);
}

TEST_CASE("prep silence holds for every variant with a preparation phase") {
  for (Variant v : {Variant::hide_and_seek, Variant::quadrant, Variant::hns_food,
                    Variant::dynamic_food, Variant::food_protection}) {
    Env e(EnvConfig::defaults(v));
    e.reset(23);
    REQUIRE(e.prep_steps() > 0);
    Rng rng(5);
    for (int k = 0; k < 10; ++k) {
      auto out = e.step(random_actions(e.n_agents(), rng));
      CAPTURE(variant_name(v));
      for (float r : out.rewards) CHECK(r == 0.0f);
    }
  }
}

TEST_CASE("determinism: seeded episodes replay rewards and snapshots") {
  EnvConfig c = EnvConfig::defaults(Variant::hide_and_seek);
  Env a(c), b(c);
  a.reset(555);
  b.reset(555);
  Rng ra(42), rb(42);
  for (int k = 0; k < 50; ++k) {
    auto oa = a.step(random_actions(a.n_agents(), ra));
    auto ob = b.step(random_actions(b.n_agents(), rb));
    REQUIRE(oa.rewards.size() == ob.rewards.size());
    for (size_t i = 0; i < oa.rewards.size(); ++i)
      CHECK(oa.rewards[i] == ob.rewards[i]);
    CHECK(a.world().snapshot() == b.world().snapshot());
  }
}
