#include <algorithm>
#include <cmath>

#include "hns/env/env.hpp"

namespace hns::env {

bool all_hiders_hidden(const Env& e) {
  for (int s = e.n_hiders(); s < e.n_agents(); ++s) {
    std::vector<uint8_t> vis = e.world().compute_visibility(e.agent_id(s));
    for (int h = 0; h < e.n_hiders(); ++h)
      if (vis[e.agent_id(h)]) return false;
  }
  return true;
}

std::vector<float> hide_seek_reward(const Env& e, bool prep) {
  std::vector<float> r((size_t)e.n_agents(), 0.0f);
  if (prep) return r;
  bool hidden = all_hiders_hidden(e);
  for (int i = 0; i < e.n_agents(); ++i) {
    r[i] = e.is_hider(i) == hidden ? 1.0f : -1.0f;
    if (e.world().out_of_bounds(e.world().body(e.agent_id(i))))
      r[i] -= (float)kOutOfBoundsPenalty;
  }
  return r;
}

void Env::apply_quadrant_object_penalty(StepResult& out) {
  auto penalize_holder = [&](int id) {
    const Body& o = world_.body(id);
    if (o.grabbed_by < 0 || !world_.out_of_bounds(o)) return;
    for (int i = 0; i < n_agents(); ++i)
      if (agent_ids_[i] == o.grabbed_by)
        out.rewards[i] -= (float)kOutOfBoundsPenalty;
  };
  for (int b : box_ids_) penalize_holder(b);
  for (int r : ramp_ids_) penalize_holder(r);
}

void Env::apply_static_food(StepResult& out) {
  if (!all_hiders_hidden(*this)) return;
  std::vector<std::vector<uint8_t>> vis(n_hiders_);
  for (int h = 0; h < n_hiders_; ++h)
    vis[h] = world_.compute_visibility(agent_ids_[h]);
  int eaten = 0;
  for (int p : pellet_ids_) {
    const Body& pb = world_.body(p);
    bool eligible = false;
    for (int h = 0; h < n_hiders_ && !eligible; ++h) {
      const Body& hb = world_.body(agent_ids_[h]);
      eligible = (pb.pos - hb.pos).norm() <= kEatRadius && vis[h][p];
    }
    if (eligible) ++eaten;
  }
  for (int h = 0; h < n_hiders_; ++h) out.rewards[h] += (float)eaten;
  out.pellets_eaten += eaten;
}

void Env::apply_dynamic_food(StepResult& out, bool prep) {
  Body& pb = world_.body(pellet_ids_[0]);
  int eater = -1;
  for (int h = 0; h < n_hiders_ && eater < 0; ++h)
    if ((world_.body(agent_ids_[h]).pos - pb.pos).norm() <= kEatRadius) eater = h;
  if (eater < 0) return;
  if (!prep && all_hiders_hidden(*this) &&
      world_.compute_visibility(agent_ids_[eater])[pb.id])
    for (int h = 0; h < n_hiders_; ++h) out.rewards[h] += 1.0f;
  // consumed either way; the replacement appears elsewhere in the region
  pb.pos = pellet_region_.sample(env_rng_, kPelletRadius);
  pb.vel = {0.0, 0.0};
  ++out.pellets_eaten;
}

void Env::apply_food_protection(StepResult& out, bool prep) {
  if (prep) return;  // pellets are safe and rewards silent during prep
  int eaten = 0;
  for (int p : pellet_ids_) {
    Body& pb = world_.body(p);
    if (!pb.active) continue;
    for (int s = n_hiders_; s < n_agents(); ++s) {
      if ((world_.body(agent_ids_[s]).pos - pb.pos).norm() <= kEatRadius) {
        pb.active = false;
        ++eaten;
        break;
      }
    }
  }
  if (eaten)
    for (int i = 0; i < n_agents(); ++i)
      out.rewards[i] += (float)(kProtectionFoodReward * eaten) *
                        (is_hider(i) ? -1.0f : 1.0f);
  double lim = cfg_.bounds / 2.0 - kBoundaryMargin;
  for (int h = 0; h < n_hiders_; ++h) {
    const Body& hb = world_.body(agent_ids_[h]);
    if (std::abs(hb.pos.x) > lim || std::abs(hb.pos.y) > lim)
      out.rewards[h] -= 1.0f;
  }
  out.pellets_eaten += eaten;
}

void Env::apply_lock_return(StepResult& out, bool terminal) {
  const Body& box = world_.body(box_ids_[0]);
  const Body& ag = world_.body(agent_ids_[0]);
  bool locked = box.locked();
  double r = 0.0;
  if (locked != lr_locked_prev_) r += locked ? kLockBonus : -kLockBonus;
  Vec2 target = locked ? start_pos_ : box.pos;
  r += kShapingCoeff *
       ((prev_agent_pos_ - target).norm() - (ag.pos - target).norm());
  if (locked && (ag.pos - start_pos_).norm() <= kReturnRadius) {
    r += 1.0;
    out.success = true;
  }
  if (terminal && !locked) r -= kLockBonus;
  lr_locked_prev_ = locked;
  prev_agent_pos_ = ag.pos;
  out.rewards[0] = (float)r;
}

void Env::refresh_sequential_lockable() {
  int next = -1;
  for (int j : lock_order_)
    if (!world_.body(box_ids_[j]).locked()) {
      next = j;
      break;
    }
  for (int j = 0; j < (int)box_ids_.size(); ++j) {
    Body& b = world_.body(box_ids_[j]);
    b.lockable = b.locked() || j == next;
  }
}

void Env::apply_sequential_lock(StepResult& out) {
  double r = 0.0;
  for (int j = 0; j < (int)box_ids_.size(); ++j) {
    bool lk = world_.body(box_ids_[j]).locked();
    if (lk != (bool)sl_locked_prev_[j]) r += lk ? kLockBonus : -kLockBonus;
    sl_locked_prev_[j] = lk;
  }
  refresh_sequential_lockable();
  int next = -1;
  for (int j : lock_order_)
    if (!world_.body(box_ids_[j]).locked()) {
      next = j;
      break;
    }
  const Body& ag = world_.body(agent_ids_[0]);
  if (next < 0) {
    r += 1.0;
    out.success = true;
  } else {
    Vec2 target = world_.body(box_ids_[next]).pos;
    r += kShapingCoeff *
         ((prev_agent_pos_ - target).norm() - (ag.pos - target).norm());
  }
  prev_agent_pos_ = ag.pos;
  out.rewards[0] = (float)r;
}

double smooth_min(const std::vector<double>& d, double alpha) {
  double m = *std::min_element(d.begin(), d.end());
  double num = 0.0, den = 0.0;
  for (double x : d) {
    double w = std::exp(alpha * (x - m));  // shifted for overflow safety
    num += x * w;
    den += w;
  }
  return num / den;
}

BlueprintEval blueprint_eval(const Env& e) {
  std::vector<Vec2> box_corners, box_centers;
  for (int id : e.box_ids()) {
    const Body& b = e.world().body(id);
    box_centers.push_back(b.pos);
    Obb o = b.obb();
    box_corners.push_back(o.to_world({b.half.x, b.half.y}));
    box_corners.push_back(o.to_world({b.half.x, -b.half.y}));
    box_corners.push_back(o.to_world({-b.half.x, b.half.y}));
    box_corners.push_back(o.to_world({-b.half.x, -b.half.y}));
  }
  BlueprintEval ev;
  ev.complete = true;
  double sum = 0.0;
  int m = 0;
  std::vector<double> d(box_corners.size());
  for (int id : e.site_ids()) {
    const Body& s = e.world().body(id);
    double center_best = 1e30;
    for (const Vec2& c : box_centers)
      center_best = std::min(center_best, (c - s.pos).norm());
    if (center_best > kBlueprintDmin) ev.complete = false;
    Obb o = s.obb();
    const Vec2 local[4] = {{s.half.x, s.half.y},
                           {s.half.x, -s.half.y},
                           {-s.half.x, s.half.y},
                           {-s.half.x, -s.half.y}};
    for (const Vec2& lc : local) {
      Vec2 corner = o.to_world(lc);
      for (size_t j = 0; j < box_corners.size(); ++j)
        d[j] = (box_corners[j] - corner).norm();
      sum += smooth_min(d, kBlueprintAlpha);
      ++m;
      if (*std::min_element(d.begin(), d.end()) > kBlueprintDmin)
        ev.complete = false;
    }
  }
  ev.mean_corner_dist = m ? sum / m : 0.0;
  return ev;
}

void Env::apply_blueprint(StepResult& out) {
  BlueprintEval ev = blueprint_eval(*this);
  // distance term as a penalty so shrinking it is an improvement
  out.rewards[0] = (float)(-kBlueprintDistScale * ev.mean_corner_dist);
  if (ev.complete) {
    out.rewards[0] += (float)(kBlueprintBonusPerSite * site_ids_.size());
    done_ = true;
    out.success = true;
  }
}

int shelter_exposed_rays(const Env& e) {
  const Body& cyl = e.world().body(e.cylinder_id());
  double h = e.config().bounds / 2.0;
  int n = 0;
  for (int k = 0; k < kShelterRays; ++k) {
    double s = (double)k / kShelterRays * 8.0 * h;
    int side = (int)(s / (2.0 * h));
    double ofs = std::fmod(s, 2.0 * h) - h;
    Vec2 o;
    switch (side) {
      case 0: o = {ofs, -h}; break;
      case 1: o = {h, ofs}; break;
      case 2: o = {-ofs, h}; break;
      default: o = {-h, -ofs}; break;
    }
    Vec2 dir = cyl.pos - o;
    double dist = dir.norm();
    dir = dir * (1.0 / dist);
    auto t_cyl = ray_circle(o, dir, dist + 1.0, cyl.pos, cyl.radius());
    if (!t_cyl) continue;
    bool blocked = false;
    for (int b : e.box_ids()) {
      if (ray_obb(o, dir, *t_cyl, e.world().body(b).obb())) {
        blocked = true;
        break;
      }
    }
    if (!blocked) ++n;
  }
  return n;
}

}  // namespace hns::env
