#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hns/common/binio.hpp"
#include "hns/rl/ppo.hpp"

namespace hns::rollout {

// Aggregate statistics carried with each rollout batch; sums over the
// complete episodes a worker finished, plus stream accounting.
struct BatchStats {
  int episodes = 0;
  double hider_reward = 0;
  double seeker_reward = 0;
  double intrinsic_reward = 0;
  double box_move = 0, box_move_prep = 0;
  double ramp_move = 0, ramp_move_prep = 0;
  int64_t boxes_locked_end = 0, boxes_locked_prep_end = 0;
  int64_t ramps_locked_end = 0, ramps_locked_prep_end = 0;
  int64_t successes = 0;
  int64_t env_steps = 0;
  int64_t agent_steps = 0;
  int reset_failures = 0;

  void merge(const BatchStats& o);
};

struct RolloutBatch {
  int worker_id = 0;
  int64_t param_version = 0;  // parameters these chunks were generated under
  int64_t seq = 0;            // per-worker emission counter
  std::vector<rl::Chunk> chunks;
  BatchStats stats;
};

// Broadcast sequence numbers strictly increase; param_version only moves
// when the learner actually optimized.
struct ParamBroadcast {
  int64_t seq = 0;
  int64_t param_version = 0;
  std::vector<uint8_t> payload;  // pack_state output
  std::vector<uint8_t> extra;    // auxiliary module state, opaque here
};

void write_tensor(ByteWriter& w, const Tensor& t);
Tensor read_tensor(ByteReader& r);
void write_observation(ByteWriter& w, const env::Observation& o);
env::Observation read_observation(ByteReader& r);
void write_chunk(ByteWriter& w, const rl::Chunk& c);
rl::Chunk read_chunk(ByteReader& r);

std::vector<uint8_t> encode_batch(const RolloutBatch& b);
RolloutBatch decode_batch(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_broadcast(const ParamBroadcast& b);
ParamBroadcast decode_broadcast(const std::vector<uint8_t>& bytes);

// Parameters plus both normalizers in one self-describing blob.
std::vector<uint8_t> pack_state(const ParamStore& ps,
                                const rl::ObsNormalizer& obs_norm,
                                const rl::NormalizerState& vtarg_norm,
                                const std::string& metadata,
                                bool with_opt_state);
// Returns the packed metadata string.
std::string unpack_state(const std::vector<uint8_t>& bytes, ParamStore& ps,
                         rl::ObsNormalizer& obs_norm,
                         rl::NormalizerState& vtarg_norm);

void save_checkpoint(const std::string& path, const ParamStore& ps,
                     const rl::ObsNormalizer& obs_norm,
                     const rl::NormalizerState& vtarg_norm,
                     const std::string& metadata,
                     const std::vector<uint8_t>& extra = {});
std::string load_checkpoint(const std::string& path, ParamStore& ps,
                            rl::ObsNormalizer& obs_norm,
                            rl::NormalizerState& vtarg_norm,
                            std::vector<uint8_t>* extra = nullptr);

}  // namespace hns::rollout
