#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hns/env/env.hpp"
#include "hns/policy/policy.hpp"
#include "hns/rl/ppo.hpp"

namespace hns::rollout {

// Stateless seed derivation: identical inputs give identical streams on
// every worker regardless of history.
uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c = 0);

enum class TeamFilter { both, hiders, seekers };

const char* team_filter_name(TeamFilter t);
TeamFilter team_filter_from_name(const std::string& s);

// Per-worker extension point for intrinsic-reward modules. reward() is
// evaluated on the pre-step state of every recorded agent. on_broadcast runs
// after the worker adopted the broadcast parameters; obs_norm stays valid and
// unchanged until the next broadcast.
struct WorkerHook {
  virtual ~WorkerHook() = default;
  virtual void on_broadcast(const std::vector<uint8_t>& extra,
                            const rl::ObsNormalizer& obs_norm) {
    (void)extra;
    (void)obs_norm;
  }
  virtual void episode_start() {}
  virtual float reward(const env::Env& e, int agent_idx,
                       const env::Observation& obs) {
    (void)e;
    (void)agent_idx;
    (void)obs;
    return 0.0f;
  }
};

// Bookkeeping for one completed episode. Rewards are the extrinsic episode
// sums even when the hook replaces them in the training signal.
struct EpisodeStats {
  int steps = 0;
  double hider_reward = 0;
  double seeker_reward = 0;
  double intrinsic_reward = 0;
  env::BehaviorStats behavior;
  bool success = false;  // variant success condition held at least once
};

struct RolloutResult {
  // slot-major: all of one agent stream's windows (time ordered) before the
  // next stream's, hider slots first
  std::vector<rl::Window> windows;
  std::vector<EpisodeStats> episodes;  // complete episodes only
  int64_t env_steps = 0;
  int64_t agent_steps = 0;
  int reset_failures = 0;
};

// Runs the current policy for n_steps environment steps, chaining episodes,
// and cuts each recorded agent stream into fixed windows. Episode boundaries
// inside a window carry done flags; a mid-episode cut bootstraps with the
// next value (a one-off value forward when the stream ends on the cut).
// Sub-window tails are dropped. Every agent always acts; the filter only
// selects which streams are recorded.
RolloutResult collect_rollout(const env::EnvConfig& ecfg, const ParamStore& ps,
                              const policy::AgentNets& nets,
                              const rl::ObsNormalizer& obs_norm,
                              const rl::NormalizerState& vtarg_norm,
                              const rl::PPOConfig& rlcfg, int n_steps,
                              uint64_t seed, TeamFilter team = TeamFilter::both,
                              WorkerHook* hook = nullptr,
                              bool replace_extrinsic = false);

// GAE per window, then fixed-length slices; the final chunk of a ragged
// window is short.
std::vector<rl::Chunk> chunk_windows(const std::vector<rl::Window>& windows,
                                     const rl::PPOConfig& cfg);

}  // namespace hns::rollout
