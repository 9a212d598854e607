#include "hns/rollout/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "json.hpp"

namespace hns::rollout {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Per-worker replica of everything a round needs; the same code path backs
// the inline, threaded, and socket execution modes.
struct WorkerState {
  int worker_id;
  ParamStore ps;
  policy::AgentNets nets;
  rl::ObsNormalizer on;
  rl::NormalizerState vt{1};
  std::unique_ptr<WorkerHook> hook;

  WorkerState(const TrainConfig& cfg, int id, const TrainHooks& hooks)
      : worker_id(id), nets(cfg.net), on(cfg.net.lidar_rays) {
    if (hooks.make_worker_hook) hook = hooks.make_worker_hook(id);
  }

  RolloutBatch round(const TrainConfig& cfg, const ParamBroadcast& pb,
                     bool replace_extrinsic) {
    unpack_state(pb.payload, ps, on, vt);
    if (hook) hook->on_broadcast(pb.extra, on);
    RolloutResult res = collect_rollout(
        cfg.env, ps, nets, on, vt, cfg.rl, cfg.rollout_steps,
        mix_seed(cfg.seed, 1000 + (uint64_t)worker_id, (uint64_t)pb.seq),
        cfg.train_team, hook.get(), replace_extrinsic);

    RolloutBatch b;
    b.worker_id = worker_id;
    b.param_version = pb.param_version;
    b.seq = pb.seq;
    b.chunks = chunk_windows(res.windows, cfg.rl);
    b.stats.episodes = (int)res.episodes.size();
    for (const EpisodeStats& e : res.episodes) {
      b.stats.hider_reward += e.hider_reward;
      b.stats.seeker_reward += e.seeker_reward;
      b.stats.intrinsic_reward += e.intrinsic_reward;
      b.stats.box_move += e.behavior.box_move;
      b.stats.box_move_prep += e.behavior.box_move_prep;
      b.stats.ramp_move += e.behavior.ramp_move;
      b.stats.ramp_move_prep += e.behavior.ramp_move_prep;
      b.stats.boxes_locked_end += e.behavior.boxes_locked_end;
      b.stats.boxes_locked_prep_end += e.behavior.boxes_locked_prep_end;
      b.stats.ramps_locked_end += e.behavior.ramps_locked_end;
      b.stats.ramps_locked_prep_end += e.behavior.ramps_locked_prep_end;
      if (e.success) ++b.stats.successes;
    }
    b.stats.env_steps = res.env_steps;
    b.stats.agent_steps = res.agent_steps;
    b.stats.reset_failures = res.reset_failures;
    return b;
  }
};

// Coarse emergence label from per-episode means of the behavior statistics:
// prep-phase locking marks fort building, locked ramps mark the defensive
// stages, and main-phase object movement separates the tool-use stages.
const char* phase_tag(const BatchStats& s) {
  double n = std::max(1, s.episodes);
  double boxes_prep = (double)s.boxes_locked_prep_end / n;
  double ramps_prep = (double)s.ramps_locked_prep_end / n;
  if (boxes_prep < 0.5) return "running_and_chasing";
  if (ramps_prep >= 0.5) {
    if (boxes_prep >= 3.5) return "surf_defense";
    if (s.box_move / n >= 2.0) return "box_surfing";
    return "ramp_defense";
  }
  if (s.ramp_move / n >= 2.0) return "ramp_use";
  return "fort_building";
}

TrainResult run_learner(
    const TrainConfig& cfg, const TrainHooks& hooks,
    const std::function<void(const ParamBroadcast&)>& broadcast_all,
    const std::function<bool(int, RolloutBatch&)>& recv_from) {
  TrainResult out;
  Rng init_rng(mix_seed(cfg.seed, 0));
  ParamStore ps;
  policy::AgentNets nets(cfg.net);
  nets.init_params(ps, init_rng);
  rl::ObsNormalizer on(cfg.net.lidar_rays);
  rl::NormalizerState vt(1);
  rl::ChunkBuffer buffer((size_t)cfg.rl.buffer_capacity);
  Rng learner_rng(mix_seed(cfg.seed, 0xbeef));
  int64_t version = 0;
  std::vector<int64_t> expected_seq(cfg.workers, 0);
  IngestAudit audit;

  fs::path outp(cfg.out_dir);
  std::ofstream metrics;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(outp / "checkpoints");
    cfg.to_kv().save((outp / "config.kv").string());
    metrics.open(outp / "metrics.ndjson");
  }

  std::string phase = "running_and_chasing";
  auto extra = [&] {
    return hooks.extra_payload ? hooks.extra_payload() : std::vector<uint8_t>{};
  };

  for (int r = 0; r < cfg.rounds; ++r) {
    ParamBroadcast pb;
    pb.seq = r;
    pb.param_version = version;
    pb.payload = pack_state(ps, on, vt, "", false);
    pb.extra = extra();
    broadcast_all(pb);

    BatchStats rs;
    for (int w = 0; w < cfg.workers; ++w) {
      RolloutBatch b;
      if (!recv_from(w, b)) continue;  // timeout-skip keeps the round moving
      if (hooks.learner_update) hooks.learner_update(b, on, learner_rng);
      BatchStats bs = b.stats;
      int64_t before = audit.accepted;
      ingest_batch(buffer, std::move(b), version, cfg.max_version_lag,
                   expected_seq[w], audit);
      if (audit.accepted > before) rs.merge(bs);
    }
    out.env_steps += rs.env_steps;
    out.agent_steps += rs.agent_steps;

    rl::OptimStats os =
        rl::optimize_step(ps, nets, buffer, on, vt, cfg.rl, learner_rng);
    if (os.ran) ++version;
    phase = phase_tag(rs);
    ++out.rounds_run;

    if (metrics.is_open()) {
      double epn = std::max(1, rs.episodes);
      json j;
      j["round"] = r + 1;
      j["version"] = version;
      j["phase"] = phase;
      j["env_steps"] = out.env_steps;
      j["episodes"] = rs.episodes;
      j["loss"] = os.loss;
      j["policy_loss"] = os.policy_loss;
      j["value_loss"] = os.value_loss;
      j["entropy"] = os.entropy;
      j["clip_fraction"] = os.clip_fraction;
      j["grad_norm"] = os.grad_norm;
      j["buffer"] = (int)buffer.size();
      j["reward_hider"] = rs.hider_reward / epn;
      j["reward_seeker"] = rs.seeker_reward / epn;
      j["reward_intrinsic"] = rs.intrinsic_reward / epn;
      j["box_move"] = rs.box_move / epn;
      j["box_move_prep"] = rs.box_move_prep / epn;
      j["ramp_move"] = rs.ramp_move / epn;
      j["ramp_move_prep"] = rs.ramp_move_prep / epn;
      j["boxes_locked_end"] = (double)rs.boxes_locked_end / epn;
      j["boxes_locked_prep_end"] = (double)rs.boxes_locked_prep_end / epn;
      j["ramps_locked_end"] = (double)rs.ramps_locked_end / epn;
      j["ramps_locked_prep_end"] = (double)rs.ramps_locked_prep_end / epn;
      j["successes"] = rs.successes;
      j["reset_failures"] = rs.reset_failures;
      metrics << j.dump() << "\n";
    }

    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
        (r + 1) % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "round_%06d.ckpt", r + 1);
      json meta{{"round", r + 1}, {"version", version}, {"phase", phase}};
      save_checkpoint((outp / "checkpoints" / name).string(), ps, on, vt,
                      meta.dump(), extra());
    }
  }

  out.final_version = version;
  if (!cfg.out_dir.empty()) {
    json meta{{"round", out.rounds_run},
              {"version", version},
              {"phase", phase}};
    out.final_checkpoint = (outp / "checkpoints" / "final.ckpt").string();
    save_checkpoint(out.final_checkpoint, ps, on, vt, meta.dump(), extra());
  }
  return out;
}

}  // namespace

KvConfig TrainConfig::to_kv() const {
  KvConfig kv;
  kv.set("env.variant", std::string(env::variant_name(env.variant)));
  kv.set("env.n_hiders.lo", (int64_t)env.n_hiders.lo);
  kv.set("env.n_hiders.hi", (int64_t)env.n_hiders.hi);
  kv.set("env.n_seekers.lo", (int64_t)env.n_seekers.lo);
  kv.set("env.n_seekers.hi", (int64_t)env.n_seekers.hi);
  kv.set("env.n_boxes.lo", (int64_t)env.n_boxes.lo);
  kv.set("env.n_boxes.hi", (int64_t)env.n_boxes.hi);
  kv.set("env.min_elongated", (int64_t)env.min_elongated);
  kv.set("env.n_ramps", (int64_t)env.n_ramps);
  kv.set("env.randomization",
         std::string(env::rand_level_name(env.randomization_level)));
  kv.set("env.horizon", (int64_t)env.horizon);
  kv.set("env.prep_fraction", env.prep_fraction);
  kv.set("env.bounds", env.bounds);

  kv.set("rl.clip", (double)rl.clip);
  kv.set("rl.ent_coeff", (double)rl.ent_coeff);
  kv.set("rl.value_coeff", (double)rl.value_coeff);
  kv.set("rl.gamma", (double)rl.gamma);
  kv.set("rl.lam", (double)rl.lam);
  kv.set("rl.window", (int64_t)rl.window);
  kv.set("rl.chunk_len", (int64_t)rl.chunk_len);
  kv.set("rl.buffer", (int64_t)rl.buffer_capacity);
  kv.set("rl.minibatch", (int64_t)rl.minibatch);
  kv.set("rl.substeps", (int64_t)rl.substeps);
  kv.set("rl.max_reuse", (int64_t)rl.max_reuse);
  kv.set("rl.grad_groups", (int64_t)rl.grad_groups);
  kv.set("rl.threads", (int64_t)rl.threads);
  kv.set("rl.adam.lr", (double)rl.adam.lr);
  kv.set("rl.adam.beta1", (double)rl.adam.beta1);
  kv.set("rl.adam.beta2", (double)rl.adam.beta2);
  kv.set("rl.adam.eps", (double)rl.adam.eps);
  kv.set("rl.adam.clip_norm", (double)rl.adam.clip_norm);
  kv.set("rl.adam.weight_decay", (double)rl.adam.weight_decay);

  kv.set("net.self_dim", (int64_t)net.self_dim);
  kv.set("net.lidar_rays", (int64_t)net.lidar_rays);
  kv.set("net.lidar_channels", (int64_t)net.lidar_channels);
  kv.set("net.lidar_kernel", (int64_t)net.lidar_kernel);
  kv.set("net.entity_dim", (int64_t)net.entity_dim);
  kv.set("net.embed", (int64_t)net.embed);
  kv.set("net.mlp", (int64_t)net.mlp);
  kv.set("net.lstm", (int64_t)net.lstm);
  kv.set("net.heads", (int64_t)net.heads);
  kv.set("net.attention", net.use_attention);

  kv.set("trainer.workers", (int64_t)workers);
  kv.set("trainer.rollout_steps", (int64_t)rollout_steps);
  kv.set("trainer.rounds", (int64_t)rounds);
  kv.set("trainer.team", std::string(team_filter_name(train_team)));
  kv.set("trainer.intrinsic", intrinsic);
  kv.set("trainer.seed", (int64_t)seed);
  kv.set("trainer.checkpoint_every", (int64_t)checkpoint_every);
  kv.set("trainer.max_version_lag", (int64_t)max_version_lag);
  return kv;
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv) {
  TrainConfig c;
  c.env.variant = env::variant_from_name(
      kv.get_str("env.variant", env::variant_name(c.env.variant)));
  c.env.n_hiders.lo = (int)kv.get_i64("env.n_hiders.lo", c.env.n_hiders.lo);
  c.env.n_hiders.hi = (int)kv.get_i64("env.n_hiders.hi", c.env.n_hiders.hi);
  c.env.n_seekers.lo = (int)kv.get_i64("env.n_seekers.lo", c.env.n_seekers.lo);
  c.env.n_seekers.hi = (int)kv.get_i64("env.n_seekers.hi", c.env.n_seekers.hi);
  c.env.n_boxes.lo = (int)kv.get_i64("env.n_boxes.lo", c.env.n_boxes.lo);
  c.env.n_boxes.hi = (int)kv.get_i64("env.n_boxes.hi", c.env.n_boxes.hi);
  c.env.min_elongated =
      (int)kv.get_i64("env.min_elongated", c.env.min_elongated);
  c.env.n_ramps = (int)kv.get_i64("env.n_ramps", c.env.n_ramps);
  c.env.randomization_level = env::rand_level_from_name(kv.get_str(
      "env.randomization", env::rand_level_name(c.env.randomization_level)));
  c.env.horizon = (int)kv.get_i64("env.horizon", c.env.horizon);
  c.env.prep_fraction = kv.get_f64("env.prep_fraction", c.env.prep_fraction);
  c.env.bounds = kv.get_f64("env.bounds", c.env.bounds);

  c.rl.clip = (float)kv.get_f64("rl.clip", c.rl.clip);
  c.rl.ent_coeff = (float)kv.get_f64("rl.ent_coeff", c.rl.ent_coeff);
  c.rl.value_coeff = (float)kv.get_f64("rl.value_coeff", c.rl.value_coeff);
  c.rl.gamma = (float)kv.get_f64("rl.gamma", c.rl.gamma);
  c.rl.lam = (float)kv.get_f64("rl.lam", c.rl.lam);
  c.rl.window = (int)kv.get_i64("rl.window", c.rl.window);
  c.rl.chunk_len = (int)kv.get_i64("rl.chunk_len", c.rl.chunk_len);
  c.rl.buffer_capacity = (int)kv.get_i64("rl.buffer", c.rl.buffer_capacity);
  c.rl.minibatch = (int)kv.get_i64("rl.minibatch", c.rl.minibatch);
  c.rl.substeps = (int)kv.get_i64("rl.substeps", c.rl.substeps);
  c.rl.max_reuse = (int)kv.get_i64("rl.max_reuse", c.rl.max_reuse);
  c.rl.grad_groups = (int)kv.get_i64("rl.grad_groups", c.rl.grad_groups);
  c.rl.threads = (int)kv.get_i64("rl.threads", c.rl.threads);
  c.rl.adam.lr = (float)kv.get_f64("rl.adam.lr", c.rl.adam.lr);
  c.rl.adam.beta1 = (float)kv.get_f64("rl.adam.beta1", c.rl.adam.beta1);
  c.rl.adam.beta2 = (float)kv.get_f64("rl.adam.beta2", c.rl.adam.beta2);
  c.rl.adam.eps = (float)kv.get_f64("rl.adam.eps", c.rl.adam.eps);
  c.rl.adam.clip_norm =
      (float)kv.get_f64("rl.adam.clip_norm", c.rl.adam.clip_norm);
  c.rl.adam.weight_decay =
      (float)kv.get_f64("rl.adam.weight_decay", c.rl.adam.weight_decay);

  c.net.self_dim = (int)kv.get_i64("net.self_dim", c.net.self_dim);
  c.net.lidar_rays = (int)kv.get_i64("net.lidar_rays", c.net.lidar_rays);
  c.net.lidar_channels =
      (int)kv.get_i64("net.lidar_channels", c.net.lidar_channels);
  c.net.lidar_kernel =
      (int)kv.get_i64("net.lidar_kernel", c.net.lidar_kernel);
  c.net.entity_dim = (int)kv.get_i64("net.entity_dim", c.net.entity_dim);
  c.net.embed = (int)kv.get_i64("net.embed", c.net.embed);
  c.net.mlp = (int)kv.get_i64("net.mlp", c.net.mlp);
  c.net.lstm = (int)kv.get_i64("net.lstm", c.net.lstm);
  c.net.heads = (int)kv.get_i64("net.heads", c.net.heads);
  c.net.use_attention = kv.get_bool("net.attention", c.net.use_attention);

  c.workers = (int)kv.get_i64("trainer.workers", c.workers);
  c.rollout_steps = (int)kv.get_i64("trainer.rollout_steps", c.rollout_steps);
  c.rounds = (int)kv.get_i64("trainer.rounds", c.rounds);
  c.train_team = team_filter_from_name(
      kv.get_str("trainer.team", team_filter_name(c.train_team)));
  c.intrinsic = kv.get_str("trainer.intrinsic", c.intrinsic);
  c.seed = (uint64_t)kv.get_i64("trainer.seed", (int64_t)c.seed);
  c.checkpoint_every =
      (int)kv.get_i64("trainer.checkpoint_every", c.checkpoint_every);
  c.max_version_lag =
      (int)kv.get_i64("trainer.max_version_lag", c.max_version_lag);
  return c;
}

int ingest_batch(rl::ChunkBuffer& buf, RolloutBatch&& batch,
                 int64_t current_version, int max_lag, int64_t& expected_seq,
                 IngestAudit& audit) {
  if (batch.seq < expected_seq) {
    ++audit.rejected_dup;
    return 0;
  }
  if (batch.seq > expected_seq) ++audit.seq_gaps;
  expected_seq = batch.seq + 1;
  if (batch.param_version < current_version - max_lag) {
    ++audit.rejected_stale;
    return 0;
  }
  int n = (int)batch.chunks.size();
  for (rl::Chunk& c : batch.chunks) buf.push(std::move(c));
  ++audit.accepted;
  return n;
}

void run_worker_loop(Channel& ch, int worker_id, const TrainConfig& cfg,
                     const TrainHooks& hooks) {
  WorkerState ws(cfg, worker_id, hooks);
  ByteWriter hello;
  hello.i32(worker_id);
  if (!ch.send(MsgType::heartbeat, hello.take())) return;
  for (;;) {
    MsgType t;
    std::vector<uint8_t> payload;
    if (!ch.recv(t, payload, cfg.heartbeat_ms)) break;  // learner is gone
    if (t == MsgType::stop) break;
    if (t != MsgType::param_broadcast) continue;
    ParamBroadcast pb = decode_broadcast(payload);
    try {
      RolloutBatch b = ws.round(cfg, pb, hooks.replace_extrinsic);
      if (!ch.send(MsgType::rollout_batch, encode_batch(b))) break;
    } catch (const std::exception&) {
      // a failed round sends nothing; the learner's timeout moves on
    }
  }
}

TrainResult run_training(const TrainConfig& cfg, const TrainHooks& hooks) {
  if (cfg.inline_workers) {
    std::vector<std::unique_ptr<WorkerState>> ws;
    for (int w = 0; w < cfg.workers; ++w)
      ws.push_back(std::make_unique<WorkerState>(cfg, w, hooks));
    ParamBroadcast current;
    return run_learner(
        cfg, hooks, [&](const ParamBroadcast& pb) { current = pb; },
        [&](int w, RolloutBatch& out) {
          out = ws[w]->round(cfg, current, hooks.replace_extrinsic);
          return true;
        });
  }

  int W = cfg.workers;
  std::vector<std::unique_ptr<Channel>> chan(W);
  std::vector<std::thread> threads;
  std::unique_ptr<TcpListener> listener;

  if (cfg.transport == "tcp") {
    listener = std::make_unique<TcpListener>((uint16_t)cfg.port);
    uint16_t port = listener->port();
    for (int w = 0; w < W; ++w)
      threads.emplace_back([w, port, &cfg, &hooks] {
        std::unique_ptr<Channel> ch = tcp_connect("127.0.0.1", port, 10000);
        if (ch) run_worker_loop(*ch, w, cfg, hooks);
      });
    // the first heartbeat carries the worker id; connections can arrive in
    // any order
    for (int k = 0; k < W; ++k) {
      std::unique_ptr<Channel> ch = listener->accept(10000);
      if (!ch) continue;
      MsgType t;
      std::vector<uint8_t> payload;
      if (!ch->recv(t, payload, 10000) || t != MsgType::heartbeat ||
          payload.size() < 4)
        continue;
      ByteReader rd(payload);
      int wid = rd.i32();
      if (wid >= 0 && wid < W && !chan[wid]) chan[wid] = std::move(ch);
    }
  } else {
    for (int w = 0; w < W; ++w) {
      auto [learner_end, worker_end] = local_channel_pair();
      chan[w] = std::move(learner_end);
      std::shared_ptr<Channel> wch = std::move(worker_end);
      threads.emplace_back(
          [wch, w, &cfg, &hooks] { run_worker_loop(*wch, w, cfg, hooks); });
    }
  }

  TrainResult result = run_learner(
      cfg, hooks,
      [&](const ParamBroadcast& pb) {
        std::vector<uint8_t> msg = encode_broadcast(pb);
        for (auto& c : chan)
          if (c) c->send(MsgType::param_broadcast, msg);
      },
      [&](int w, RolloutBatch& out) {
        Channel* c = chan[w].get();
        if (!c) return false;
        auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(cfg.recv_timeout_ms);
        for (;;) {
          auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                          deadline - std::chrono::steady_clock::now())
                          .count();
          if (left <= 0) return false;
          MsgType t;
          std::vector<uint8_t> payload;
          if (!c->recv(t, payload, (int)left)) return false;
          if (t != MsgType::rollout_batch) continue;  // stray heartbeats
          out = decode_batch(payload);
          return true;
        }
      });

  for (auto& c : chan)
    if (c) c->send(MsgType::stop, {});
  for (auto& c : chan)
    if (c) c->close();
  for (std::thread& th : threads) th.join();
  return result;
}

}  // namespace hns::rollout
