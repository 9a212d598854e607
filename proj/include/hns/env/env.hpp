#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hns/env/layout.hpp"
#include "hns/sim/world.hpp"

namespace hns::env {

enum class Variant {
  hide_and_seek,
  quadrant,
  hns_food,
  dynamic_food,
  food_protection,
  object_counting,
  lock_and_return,
  sequential_lock,
  blueprint,
  shelter,
};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& s);

struct IntRange {
  int lo = 0, hi = 0;
  int sample(Rng& rng) const { return lo >= hi ? lo : rng.randint(lo, hi); }
};

// Environment-randomization ladder, most to least random. Only the
// hide_and_seek and hns_food variants consult it; the other variants carry
// fixed setups of their own.
enum class RandLevel {
  full,                  // teams 1-3, 3-9 boxes, random shapes/locations/rooms
  solo_teams,            // 1v1, otherwise full
  fixed_boxes,           // 1v1, 7 boxes of fixed shape
  teams_no_walls,        // teams 1-3, no walls at all
  solo_no_walls,         // 1v1, no walls
  fixed_boxes_no_walls,  // 1v1, 7 fixed boxes, no walls
  all_fixed,             // 1v1, 7 fixed boxes, fixed locations, no walls
};

const char* rand_level_name(RandLevel r);
RandLevel rand_level_from_name(const std::string& s);

struct EnvConfig {
  Variant variant = Variant::hide_and_seek;
  IntRange n_hiders{1, 3};
  IntRange n_seekers{1, 3};
  IntRange n_boxes{3, 9};
  int min_elongated = 3;
  int n_ramps = 2;
  RandLevel randomization_level = RandLevel::full;
  int horizon = 240;
  double prep_fraction = 0.4;
  double bounds = 18.0;
  uint64_t seed = 0;

  static EnvConfig defaults(Variant v);
};

// Body geometry shared by every variant.
inline constexpr double kAgentRadius = 0.4;
inline constexpr double kBoxHalf = 0.5;
inline constexpr double kElongatedHalfLong = 1.5;
inline constexpr double kRampHalf = 0.7;
inline constexpr double kPelletRadius = 0.15;
inline constexpr double kSiteHalf = 0.5;

// Reward and interaction constants.
inline constexpr double kEatRadius = 0.75;
inline constexpr double kBoundaryMargin = 1.5;
inline constexpr double kOutOfBoundsPenalty = 10.0;
inline constexpr double kProtectionFoodReward = 3.0;
inline constexpr double kLockBonus = 5.0;
inline constexpr double kShapingCoeff = 0.5;
inline constexpr double kReturnRadius = 0.1;
inline constexpr double kBlueprintAlpha = -1.5;
inline constexpr double kBlueprintDistScale = 0.05;
inline constexpr double kBlueprintDmin = 0.1;
inline constexpr double kBlueprintBonusPerSite = 3.0;
inline constexpr int kShelterRays = 100;
inline constexpr double kShelterRayScale = 0.001;
inline constexpr double kShelterWallClearance = 2.5;
inline constexpr double kCountingSpeed = 0.15;
inline constexpr double kCountingStopX = 8.0;

// Observation layout. Entity features sit in the observer's local frame:
// [dx, dy, dvx, dvy, cos dh, sin dh, half_x, half_y, raised, locked,
//  locked_by_my_team, extra] where extra is same-team for agents and
// grabbed for boxes/ramps. Site rows instead carry
// [dx, dy, corner1 .. corner4 (dx, dy each), 0, 0].
inline constexpr int kSelfDim = 8;
inline constexpr int kEntityDim = 12;
inline constexpr int kEntityClasses = 6;

enum EntityClass : int {
  kClassAgent = 0,
  kClassBox,
  kClassRamp,
  kClassPellet,
  kClassCylinder,
  kClassSite,
};

struct EntityBlock {
  int count = 0;
  std::vector<float> feats;      // count x kEntityDim, row-major
  std::vector<uint8_t> visible;  // per row

  const float* row(int i) const { return feats.data() + (size_t)i * kEntityDim; }
};

struct Observation {
  std::vector<float> self;   // kSelfDim
  std::vector<float> lidar;  // one distance per ray
  std::array<EntityBlock, kEntityClasses> entities;
};

struct StepResult {
  std::vector<float> rewards;  // per agent, hiders first
  bool done = false;
  int pellets_eaten = 0;
  bool success = false;  // variant-specific success condition held this step
};

// Thrown when rejection sampling cannot place every body; re-seed and retry.
struct ResetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TraceFrame {
  std::vector<Vec2> box_pos, ramp_pos;
  std::vector<uint8_t> box_locked, ramp_locked;
  bool prep = false;  // frame was produced during the preparation phase
};

struct EpisodeTrace {
  std::vector<TraceFrame> frames;  // frame 0 is the reset state
};

struct BehaviorStats {
  double box_move = 0, box_move_prep = 0;    // max path length over boxes
  double ramp_move = 0, ramp_move_prep = 0;  // max path length over ramps
  int boxes_locked_end = 0, boxes_locked_prep_end = 0;
  int ramps_locked_end = 0, ramps_locked_prep_end = 0;
};

BehaviorStats behavior_stats(const EpisodeTrace& trace);

class Env {
 public:
  explicit Env(const EnvConfig& cfg);

  // Rebuilds the world from the seed; identical seeds produce identical
  // layouts. Throws ResetError when placement rejection exhausts its budget.
  void reset(uint64_t seed);

  // One action per agent, hiders first. Rewards follow the variant rules and
  // are evaluated on the post-step state.
  StepResult step(const std::vector<ActionTriple>& actions);

  // omniscient drops the visibility masking (inactive bodies stay hidden);
  // the centralized value input is built this way
  Observation observe(int agent_idx, bool omniscient = false) const;

  const EnvConfig& config() const { return cfg_; }
  const RoomLayout& layout() const { return layout_; }
  World& world() { return world_; }
  const World& world() const { return world_; }

  int n_agents() const { return (int)agent_ids_.size(); }
  int n_hiders() const { return n_hiders_; }
  int n_seekers() const { return n_seekers_; }
  int agent_id(int idx) const { return agent_ids_.at(idx); }
  bool is_hider(int idx) const { return idx < n_hiders_; }

  int t() const { return t_; }
  bool done() const { return done_; }
  int prep_steps() const { return prep_steps_; }
  bool in_prep() const { return t_ < prep_steps_; }
  double prep_remaining() const {
    return prep_steps_ > 0 && t_ < prep_steps_
               ? (double)(prep_steps_ - t_) / prep_steps_
               : 0.0;
  }

  const std::vector<int>& box_ids() const { return box_ids_; }
  const std::vector<int>& ramp_ids() const { return ramp_ids_; }
  const std::vector<int>& pellet_ids() const { return pellet_ids_; }
  const std::vector<int>& site_ids() const { return site_ids_; }
  int cylinder_id() const { return cylinder_id_; }

  // Variant-specific episode state.
  int counting_label() const { return counting_label_; }  // boxes gone left
  Vec2 start_pos() const { return start_pos_; }           // lock_and_return
  const std::vector<int>& lock_order() const { return lock_order_; }

  void set_record_trace(bool on) { record_trace_ = on; }
  const EpisodeTrace& trace() const { return trace_; }

 private:
  bool single_agent_task() const;
  bool agent_mobile(int idx, bool prep) const;
  void build_layout(Rng& rng);
  void place_bodies(Rng& count_rng, Rng& place_rng);
  int place_one(Body proto, const std::vector<Rect>& regions, Rng& rng,
                bool random_heading);
  bool placement_clear(const Body& b) const;
  void push_frame(bool prep);
  void script_counting_motion();

  void apply_quadrant_object_penalty(StepResult& out);
  void apply_static_food(StepResult& out);
  void apply_dynamic_food(StepResult& out, bool prep);
  void apply_food_protection(StepResult& out, bool prep);
  void apply_lock_return(StepResult& out, bool terminal);
  void apply_sequential_lock(StepResult& out);
  void apply_blueprint(StepResult& out);
  void refresh_sequential_lockable();

  void push_entity_row(EntityBlock& blk, const Body& me, const Body& b,
                       const std::vector<uint8_t>& vis) const;
  void push_site_row(EntityBlock& blk, const Body& me, const Body& s) const;

  EnvConfig cfg_;
  World world_;
  RoomLayout layout_;
  std::vector<int> agent_ids_, box_ids_, ramp_ids_, pellet_ids_, site_ids_;
  int cylinder_id_ = -1;
  int n_hiders_ = 0, n_seekers_ = 0;
  int prep_steps_ = 0, t_ = 0;
  bool done_ = false;
  int placement_budget_ = 0;
  Rng env_rng_;  // runtime randomness (pellet respawn)
  Rect pellet_region_;

  Vec2 start_pos_;
  Vec2 prev_agent_pos_;
  bool lr_locked_prev_ = false;
  std::vector<int> lock_order_;
  std::vector<uint8_t> sl_locked_prev_;
  std::vector<int> counting_dirs_;  // 1 = moving left
  int counting_label_ = 0;

  bool record_trace_ = false;
  EpisodeTrace trace_;
};

// Hide-and-seek team reward on the current world state: zeros during prep,
// otherwise +-1 by the all-hidden test plus the out-of-bounds penalty.
std::vector<float> hide_seek_reward(const Env& e, bool prep);

// True when no seeker currently sees any hider.
bool all_hiders_hidden(const Env& e);

// Exponentially weighted softmin: alpha = 0 gives the arithmetic mean,
// alpha -> -inf the true minimum. Inputs must be non-empty.
double smooth_min(const std::vector<double>& d, double alpha);

struct BlueprintEval {
  double mean_corner_dist = 0;  // mean over site corners of the softmin
  bool complete = false;        // every site and site corner matched
};

BlueprintEval blueprint_eval(const Env& e);

// Number of the evenly spaced boundary rays aimed at the cylinder center that
// reach it without crossing a box.
int shelter_exposed_rays(const Env& e);

}  // namespace hns::env
