#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "hns/common/kvconfig.hpp"
#include "hns/rollout/channel.hpp"
#include "hns/rollout/rollout.hpp"
#include "hns/rollout/serial.hpp"

namespace hns::rollout {

// Full experiment description. to_kv/from_kv expose every hyperparameter as
// flat dotted keys; runtime plumbing (paths, transport, timeouts) stays out.
struct TrainConfig {
  env::EnvConfig env = env::EnvConfig::defaults(env::Variant::hide_and_seek);
  rl::PPOConfig rl;
  policy::PolicyConfig net;

  int workers = 2;
  int rollout_steps = 1600;  // environment steps per worker per round
  int rounds = 100;
  TeamFilter train_team = TeamFilter::both;
  std::string intrinsic = "none";
  uint64_t seed = 0;
  int checkpoint_every = 10;  // rounds between checkpoints; 0 disables
  int max_version_lag = 4;

  std::string out_dir;
  std::string transport = "local";  // "local" or "tcp"
  bool inline_workers = false;      // run workers on the learner thread
  int port = 0;                     // tcp listen port, 0 = ephemeral
  int recv_timeout_ms = 60000;
  int heartbeat_ms = 60000;

  KvConfig to_kv() const;
  static TrainConfig from_kv(const KvConfig& kv);
};

// Extension points for intrinsic-reward modules. make_worker_hook runs once
// per worker; learner_update sees every accepted batch before it enters the
// buffer; extra_payload rides along with each parameter broadcast.
struct TrainHooks {
  std::function<std::unique_ptr<WorkerHook>(int worker_id)> make_worker_hook;
  std::function<void(const RolloutBatch& batch, const rl::ObsNormalizer& on,
                     Rng& rng)>
      learner_update;
  std::function<std::vector<uint8_t>()> extra_payload;
  bool replace_extrinsic = false;
};

struct IngestAudit {
  int64_t accepted = 0;
  int64_t rejected_stale = 0;
  int64_t rejected_dup = 0;
  int64_t seq_gaps = 0;
};

// Admits one worker batch into the buffer. Duplicate sequence numbers are
// dropped, gaps are counted but admitted, and batches older than
// current_version - max_lag are dropped whole. Returns chunks admitted.
int ingest_batch(rl::ChunkBuffer& buf, RolloutBatch&& batch,
                 int64_t current_version, int max_lag, int64_t& expected_seq,
                 IngestAudit& audit);

struct TrainResult {
  int rounds_run = 0;
  int64_t env_steps = 0;
  int64_t agent_steps = 0;
  int64_t final_version = 0;
  std::string final_checkpoint;
};

// Lockstep self-play training: broadcast parameters, collect one batch per
// worker, optimize, repeat. The three execution modes (inline, threaded over
// in-process channels, threaded over loopback TCP) produce identical
// metrics and checkpoints bit for bit.
TrainResult run_training(const TrainConfig& cfg, const TrainHooks& hooks = {});

// Worker side of the protocol: announce the worker id, then serve rounds
// until a stop message, a closed channel, or heartbeat_ms of silence.
void run_worker_loop(Channel& ch, int worker_id, const TrainConfig& cfg,
                     const TrainHooks& hooks);

}  // namespace hns::rollout
