#pragma once

#include <array>
#include <string>
#include <vector>

#include "hns/env/env.hpp"
#include "hns/nn/param_store.hpp"
#include "hns/nn/tape.hpp"

namespace hns::policy {

inline constexpr int kMoveBins = 5;
inline constexpr int kCatHeads = 3;  // move_x, move_y, torque
inline constexpr int kCountingClasses = 7;
inline constexpr int kCountingHidden = 64;

// Width preset for both networks. Attention head size is width/heads, so the
// large preset gives 4 heads of 32. The lidar convolution feeds the self
// vector; everything downstream sees x_self = self + flattened conv channels.
struct PolicyConfig {
  int self_dim = env::kSelfDim;
  int lidar_rays = 30;
  int lidar_channels = 2;
  int lidar_kernel = 3;
  int entity_dim = env::kEntityDim;
  int embed = 32;
  int mlp = 64;
  int lstm = 64;
  int heads = 4;
  bool use_attention = true;  // false = pooling-only ablation

  int x_self_dim() const { return self_dim + lidar_rays * lidar_channels; }

  static PolicyConfig desk() { return PolicyConfig{}; }
  static PolicyConfig paper() {
    PolicyConfig c;
    c.lidar_channels = 8;
    c.embed = 128;
    c.mlp = 256;
    c.lstm = 256;
    return c;
  }
};

// Plain probabilities for one agent-step, used by samplers and tests.
struct ActionDistribution {
  std::array<std::array<float, kMoveBins>, kCatHeads> cat;
  std::array<float, 2> bern;  // p(grab), p(lock)
};

struct SampledAction {
  ActionTriple act;
  float logp = 0.0f;     // joint log-probability over all five heads
  float entropy = 0.0f;  // sum of head entropies
};

// Tape references produced by one forward step. Action heads exist on the
// policy network, the value head on the value network; unused refs are null.
struct ForwardRefs {
  std::array<Tape::Ref, kCatHeads> cat_logits{};  // each [1 x kMoveBins]
  Tape::Ref grab_logit = nullptr;                 // [1 x 1]
  Tape::Ref lock_logit = nullptr;                 // [1 x 1]
  Tape::Ref value = nullptr;                      // [1 x 1]
  Tape::Ref features = nullptr;                   // [1 x feature_dim]
  Tape::Ref h = nullptr;                          // [1 x lstm] hidden half
  Tape::Ref hc = nullptr;                         // [1 x 2*lstm] next state
};

// One trunk: conv + per-type embeddings + masked attention + pool + dense +
// LSTM, then either action heads or a scalar value head. The policy and
// value networks are two instances with disjoint name prefixes.
// feature_dim > 0 selects a stateless variant: the LSTM and heads are
// replaced by one linear projection of the trunk output (hc is ignored).
class Net {
 public:
  Net(const PolicyConfig& cfg, std::string prefix, bool action_heads,
      bool value_head, int feature_dim = 0);

  void init_params(ParamStore& ps, Rng& rng) const;
  Tensor initial_state() const;  // zeros [1 x 2*lstm]
  ForwardRefs forward(Tape& t, const env::Observation& obs, Tape::Ref hc) const;

  const PolicyConfig& config() const { return cfg_; }
  const std::string& prefix() const { return pfx_; }
  // tensors resampled when the networks move to a transfer task
  std::vector<std::string> transfer_reinit_names() const;

 private:
  std::string key(const std::string& suffix) const { return pfx_ + "." + suffix; }

  PolicyConfig cfg_;
  std::string pfx_;
  bool action_heads_;
  bool value_head_;
  int feature_dim_;
};

// Policy ("pi") and omniscient value ("vf") pair over one parameter store.
struct AgentNets {
  Net pi;
  Net vf;

  explicit AgentNets(const PolicyConfig& cfg)
      : pi(cfg, "pi", true, false), vf(cfg, "vf", false, true) {}
  void init_params(ParamStore& ps, Rng& rng) const {
    pi.init_params(ps, rng);
    vf.init_params(ps, rng);
  }
};

ActionDistribution extract_distribution(const ForwardRefs& f);
SampledAction sample_actions(const ActionDistribution& d, Rng& rng);
float action_log_prob(const ActionDistribution& d, const ActionTriple& a);

// Differentiable joint log-probability and entropy of a taken action.
struct ActionStatsRefs {
  Tape::Ref logp;     // [1 x 1]
  Tape::Ref entropy;  // [1 x 1]
};
ActionStatsRefs action_stats(Tape& t, const ForwardRefs& f, const ActionTriple& a);

// Resamples the final dense layer and its layernorm on both networks and
// clears their optimizer moments; every other tensor is untouched.
void reinit_for_transfer(ParamStore& ps, const AgentNets& nets, Rng& rng);
void freeze_prefix(ParamStore& ps, const std::string& prefix);
// Classification head for the box-counting probe, read off the LSTM hidden
// state: layernorm -> dense 64 -> relu -> 7-way logits.
void attach_counting_head(ParamStore& ps, const PolicyConfig& cfg, Rng& rng);
// Input is detached: gradients never reach the frozen trunk.
Tape::Ref counting_forward(Tape& t, Tape::Ref lstm_h);

}  // namespace hns::policy
