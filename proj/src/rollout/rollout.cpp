#include "hns/rollout/rollout.hpp"

#include <map>
#include <memory>
#include <stdexcept>
#include <utility>

#include "hns/nn/tape.hpp"

namespace hns::rollout {

namespace {

uint64_t splitmix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr const char* kTeamFilterNames[] = {"both", "hiders", "seekers"};

// One agent stream. Slots are keyed (team, within-team index) so an agent
// keeps its stream across episodes even when team sizes vary; absent slots
// simply pause at an episode boundary.
struct Slot {
  bool recorded = false;
  Tensor pi_state;
  Tensor vf_state;
  std::vector<rl::StepSample> stream;
  std::vector<Tensor> pi_ckpts;  // chunk-grid recurrent states
  std::vector<Tensor> vf_ckpts;
  float phantom = 0.0f;  // V after the final sample, for a boundary cut
};

}  // namespace

uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

const char* team_filter_name(TeamFilter t) { return kTeamFilterNames[(int)t]; }

TeamFilter team_filter_from_name(const std::string& s) {
  for (int i = 0; i < 3; ++i)
    if (s == kTeamFilterNames[i]) return (TeamFilter)i;
  throw std::invalid_argument("unknown team filter: " + s);
}

RolloutResult collect_rollout(const env::EnvConfig& ecfg, const ParamStore& ps,
                              const policy::AgentNets& nets,
                              const rl::ObsNormalizer& obs_norm,
                              const rl::NormalizerState& vtarg_norm,
                              const rl::PPOConfig& rlcfg, int n_steps,
                              uint64_t seed, TeamFilter team, WorkerHook* hook,
                              bool replace_extrinsic) {
  RolloutResult out;
  if (n_steps <= 0) return out;

  Rng act_rng(mix_seed(seed, 1));
  std::map<std::pair<int, int>, Slot> slots;
  std::unique_ptr<env::Env> env;
  env::EnvConfig cfg = ecfg;
  int episode = 0;
  EpisodeStats ep;

  auto reset_env = [&] {
    for (int retry = 0; retry < 64; ++retry) {
      uint64_t s = mix_seed(seed, 2 + (uint64_t)episode, (uint64_t)retry);
      try {
        if (!env) {
          cfg.seed = s;
          env = std::make_unique<env::Env>(cfg);
          env->set_record_trace(true);
          env->reset(s);  // again, so the trace includes the reset frame
        } else {
          env->reset(s);
        }
        return;
      } catch (const env::ResetError&) {
        ++out.reset_failures;
      }
    }
    throw env::ResetError("collect_rollout: placement failed 64 seeds in a row");
  };

  auto episode_begin = [&] {
    for (int i = 0; i < env->n_agents(); ++i) {
      int t = env->is_hider(i) ? 0 : 1;
      int ti = t == 0 ? i : i - env->n_hiders();
      Slot& sl = slots[{t, ti}];
      sl.recorded = team == TeamFilter::both ||
                    (team == TeamFilter::hiders) == (t == 0);
      sl.pi_state = nets.pi.initial_state();
      sl.vf_state = nets.vf.initial_state();
    }
    ep = EpisodeStats{};
    if (hook) hook->episode_start();
  };

  reset_env();
  episode_begin();

  struct Pending {
    Slot* slot;
    int agent;
    env::Observation pi_obs;
    env::Observation vf_obs;
    float logp;
    float value;
    float hook_r;
  };

  for (int step = 0; step < n_steps; ++step) {
    int n = env->n_agents();
    std::vector<ActionTriple> acts(n);
    std::vector<Pending> pend;
    pend.reserve(n);
    for (int i = 0; i < n; ++i) {
      int t = env->is_hider(i) ? 0 : 1;
      Slot& sl = slots[{t, t == 0 ? i : i - env->n_hiders()}];
      env::Observation pi_raw = env->observe(i, false);

      if (sl.recorded) {
        size_t p = sl.stream.size();
        if ((int)(p % (size_t)rlcfg.window) % rlcfg.chunk_len == 0) {
          sl.pi_ckpts.push_back(sl.pi_state);
          sl.vf_ckpts.push_back(sl.vf_state);
        }
      }

      // every agent acts so the sampling stream is filter-independent
      Tape tp(&ps, nullptr);
      policy::ForwardRefs f =
          nets.pi.forward(tp, obs_norm.apply(pi_raw), tp.input(sl.pi_state));
      policy::SampledAction sa =
          policy::sample_actions(policy::extract_distribution(f), act_rng);
      acts[i] = sa.act;
      sl.pi_state = *f.hc->v;

      if (sl.recorded) {
        env::Observation vf_raw = env->observe(i, true);
        Tape tv(&ps, nullptr);
        policy::ForwardRefs fv =
            nets.vf.forward(tv, obs_norm.apply(vf_raw), tv.input(sl.vf_state));
        float value = vtarg_norm.denorm(0, fv.value->v->d[0]);
        sl.vf_state = *fv.hc->v;
        float hr = hook ? hook->reward(*env, i, pi_raw) : 0.0f;
        pend.push_back({&sl, i, std::move(pi_raw), std::move(vf_raw), sa.logp,
                        value, hr});
      }
    }

    env::StepResult sr = env->step(acts);
    ++out.env_steps;
    out.agent_steps += (int64_t)pend.size();
    ++ep.steps;
    for (int i = 0; i < n; ++i)
      (env->is_hider(i) ? ep.hider_reward : ep.seeker_reward) += sr.rewards[i];
    if (sr.success) ep.success = true;

    for (Pending& p : pend) {
      rl::StepSample ss;
      ss.pi_obs = std::move(p.pi_obs);
      ss.vf_obs = std::move(p.vf_obs);
      ss.act = acts[p.agent];
      ss.logp_old = p.logp;
      ss.reward =
          replace_extrinsic ? p.hook_r : sr.rewards[p.agent] + p.hook_r;
      ss.value = p.value;
      ss.done = sr.done ? 1 : 0;
      ep.intrinsic_reward += p.hook_r;
      p.slot->stream.push_back(std::move(ss));
    }

    if (sr.done) {
      ep.behavior = env::behavior_stats(env->trace());
      out.episodes.push_back(ep);
      ++episode;
      if (step + 1 < n_steps) {
        reset_env();
        episode_begin();
      }
    }
  }

  // a stream cut exactly at a window boundary mid-episode bootstraps off the
  // live post-step state
  for (auto& [key, sl] : slots) {
    size_t len = sl.stream.size();
    if (len < (size_t)rlcfg.window || len % (size_t)rlcfg.window != 0 ||
        sl.stream.back().done)
      continue;
    int idx = key.first == 0 ? key.second : env->n_hiders() + key.second;
    Tape tv(&ps, nullptr);
    policy::ForwardRefs fv = nets.vf.forward(
        tv, obs_norm.apply(env->observe(idx, true)), tv.input(sl.vf_state));
    sl.phantom = vtarg_norm.denorm(0, fv.value->v->d[0]);
  }

  int spw = (rlcfg.window + rlcfg.chunk_len - 1) / rlcfg.chunk_len;
  for (auto& [key, sl] : slots) {
    size_t n_win = sl.stream.size() / (size_t)rlcfg.window;
    for (size_t w = 0; w < n_win; ++w) {
      rl::Window win;
      size_t a = w * (size_t)rlcfg.window;
      size_t b = a + (size_t)rlcfg.window;
      win.steps.assign(std::make_move_iterator(sl.stream.begin() + a),
                       std::make_move_iterator(sl.stream.begin() + b));
      win.pi_states.assign(sl.pi_ckpts.begin() + w * spw,
                           sl.pi_ckpts.begin() + (w + 1) * spw);
      win.vf_states.assign(sl.vf_ckpts.begin() + w * spw,
                           sl.vf_ckpts.begin() + (w + 1) * spw);
      if (win.steps.back().done)
        win.v_boot = 0.0f;
      else if (b < sl.stream.size())
        win.v_boot = sl.stream[b].value;
      else
        win.v_boot = sl.phantom;
      out.windows.push_back(std::move(win));
    }
  }
  return out;
}

std::vector<rl::Chunk> chunk_windows(const std::vector<rl::Window>& windows,
                                     const rl::PPOConfig& cfg) {
  std::vector<rl::Chunk> out;
  for (const rl::Window& w : windows) {
    std::vector<rl::Chunk> cs = rl::make_chunks(w, cfg);
    for (rl::Chunk& c : cs) out.push_back(std::move(c));
  }
  return out;
}

}  // namespace hns::rollout
