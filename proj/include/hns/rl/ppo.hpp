#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "hns/policy/policy.hpp"
#include "hns/rl/gae.hpp"
#include "hns/rl/normalizer.hpp"

namespace hns::rl {

struct PPOConfig {
  float clip = 0.2f;
  float ent_coeff = 0.01f;
  float value_coeff = 1.0f;
  float gamma = 0.998f;
  float lam = 0.95f;
  int window = 160;     // transitions per spliced window
  int chunk_len = 10;   // BPTT truncation length
  int buffer_capacity = 4096;
  int minibatch = 512;
  int substeps = 16;
  int max_reuse = 4;    // optimization steps a chunk may participate in
  int grad_groups = 16; // fixed reduction groups, merged in index order
  int threads = 1;
  AdamConfig adam;

  static PPOConfig desk() { return PPOConfig{}; }
  static PPOConfig paper() {
    PPOConfig c;
    c.buffer_capacity = 320000;
    c.minibatch = 64000;
    c.substeps = 60;
    return c;
  }
};

// One agent-timestep as the optimizer sees it: the masked policy view, the
// full-state value view, and what the behavior policy did.
struct StepSample {
  env::Observation pi_obs;
  env::Observation vf_obs;
  ActionTriple act;
  float logp_old = 0;
  float reward = 0;
  float value = 0;    // de-normalized V(s) recorded at rollout time
  uint8_t done = 0;   // this transition ended its episode
};

// T consecutive transitions of one agent stream, possibly spliced across one
// episode boundary. LSTM states are checkpointed at every chunk start.
struct Window {
  std::vector<StepSample> steps;
  std::vector<Tensor> pi_states;  // one per chunk, ceil(T / chunk_len)
  std::vector<Tensor> vf_states;
  float v_boot = 0;  // V of the state after the last transition, 0 at an end
};

struct Chunk {
  std::vector<StepSample> steps;  // chunk_len entries
  Tensor pi_state0;
  Tensor vf_state0;
  std::vector<float> adv;  // raw advantages, z-scored per optimization step
  std::vector<float> ret;
  int reuse = 0;
};

// GAE over the whole window, then slicing into fixed-length chunks.
std::vector<Chunk> make_chunks(const Window& w, const PPOConfig& cfg);

// FIFO chunk store with eviction accounting.
class ChunkBuffer {
 public:
  explicit ChunkBuffer(size_t capacity) : capacity_(capacity) {}

  void push(Chunk&& c);
  void evict_if(const std::function<bool(const Chunk&)>& pred);
  size_t size() const { return chunks_.size(); }
  size_t capacity() const { return capacity_; }
  int64_t inserted() const { return inserted_; }
  int64_t evicted() const { return evicted_; }
  Chunk& at(size_t i) { return chunks_[i]; }
  const Chunk& at(size_t i) const { return chunks_[i]; }
  void clear() { chunks_.clear(); }

 private:
  std::deque<Chunk> chunks_;
  size_t capacity_;
  int64_t inserted_ = 0;
  int64_t evicted_ = 0;
};

struct ChunkLossStats {
  double policy_term = 0;   // clipped surrogate, already negated
  double value_term = 0;    // mean squared error to normalized targets
  double entropy = 0;       // mean entropy per step
  double clip_count = 0;    // steps with |ratio - 1| > clip
  int steps = 0;
};

// Builds the differentiable PPO loss for one chunk on the given tape.
// Advantages are standardized with the supplied buffer moments.
Tape::Ref chunk_loss(Tape& t, const policy::AgentNets& nets, const Chunk& c,
                     const ObsNormalizer& obs_norm,
                     const NormalizerState& vtarg_norm, float adv_mean,
                     float adv_std, const PPOConfig& cfg, ChunkLossStats* stats);

struct OptimStats {
  double loss = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
  double grad_norm = 0;
  size_t buffer_size = 0;
  int64_t evicted_total = 0;
  int substeps_run = 0;
  bool ran = false;
};

// One optimization step: buffer-wide advantage standardization, then
// `substeps` minibatches (drawn without replacement inside a substep) with
// normalizer updates, gradient reduction over fixed groups, and Adam.
// Chunks touched this step age by one reuse; chunks at the cap are evicted.
// Returns ran = false when the buffer holds fewer chunks than one minibatch.
OptimStats optimize_step(ParamStore& ps, const policy::AgentNets& nets,
                         ChunkBuffer& buffer, ObsNormalizer& obs_norm,
                         NormalizerState& vtarg_norm, const PPOConfig& cfg,
                         Rng& rng);

}  // namespace hns::rl
