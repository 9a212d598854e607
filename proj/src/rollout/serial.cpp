#include "hns/rollout/serial.hpp"

#include <stdexcept>

namespace hns::rollout {

void BatchStats::merge(const BatchStats& o) {
  episodes += o.episodes;
  hider_reward += o.hider_reward;
  seeker_reward += o.seeker_reward;
  intrinsic_reward += o.intrinsic_reward;
  box_move += o.box_move;
  box_move_prep += o.box_move_prep;
  ramp_move += o.ramp_move;
  ramp_move_prep += o.ramp_move_prep;
  boxes_locked_end += o.boxes_locked_end;
  boxes_locked_prep_end += o.boxes_locked_prep_end;
  ramps_locked_end += o.ramps_locked_end;
  ramps_locked_prep_end += o.ramps_locked_prep_end;
  successes += o.successes;
  env_steps += o.env_steps;
  agent_steps += o.agent_steps;
  reset_failures += o.reset_failures;
}

void write_tensor(ByteWriter& w, const Tensor& t) {
  w.u32((uint32_t)t.rows);
  w.u32((uint32_t)t.cols);
  w.f32s(t.d);
}

Tensor read_tensor(ByteReader& r) {
  uint32_t rows = r.u32();
  uint32_t cols = r.u32();
  Tensor t((int)rows, (int)cols);
  r.f32s(t.d, (size_t)rows * cols);
  return t;
}

void write_observation(ByteWriter& w, const env::Observation& o) {
  w.u32((uint32_t)o.self.size());
  w.f32s(o.self);
  w.u32((uint32_t)o.lidar.size());
  w.f32s(o.lidar);
  for (int c = 0; c < env::kEntityClasses; ++c) {
    const auto& b = o.entities[c];
    w.u32((uint32_t)b.count);
    w.f32s(b.feats);
    w.raw(b.visible.data(), b.visible.size());
  }
}

env::Observation read_observation(ByteReader& r) {
  env::Observation o;
  r.f32s(o.self, r.u32());
  r.f32s(o.lidar, r.u32());
  for (int c = 0; c < env::kEntityClasses; ++c) {
    auto& b = o.entities[c];
    b.count = (int)r.u32();
    r.f32s(b.feats, (size_t)b.count * env::kEntityDim);
    b.visible.resize(b.count);
    for (int i = 0; i < b.count; ++i) b.visible[i] = r.u8();
  }
  return o;
}

namespace {

void write_step(ByteWriter& w, const rl::StepSample& s) {
  write_observation(w, s.pi_obs);
  write_observation(w, s.vf_obs);
  w.u8((uint8_t)s.act.move_x);
  w.u8((uint8_t)s.act.move_y);
  w.u8((uint8_t)s.act.torque);
  w.u8(s.act.grab ? 1 : 0);
  w.u8(s.act.lock ? 1 : 0);
  w.f32(s.logp_old);
  w.f32(s.reward);
  w.f32(s.value);
  w.u8(s.done);
}

rl::StepSample read_step(ByteReader& r) {
  rl::StepSample s;
  s.pi_obs = read_observation(r);
  s.vf_obs = read_observation(r);
  s.act.move_x = r.u8();
  s.act.move_y = r.u8();
  s.act.torque = r.u8();
  s.act.grab = r.u8() != 0;
  s.act.lock = r.u8() != 0;
  s.logp_old = r.f32();
  s.reward = r.f32();
  s.value = r.f32();
  s.done = r.u8();
  return s;
}

void write_stats(ByteWriter& w, const BatchStats& s) {
  w.i32(s.episodes);
  w.f64(s.hider_reward);
  w.f64(s.seeker_reward);
  w.f64(s.intrinsic_reward);
  w.f64(s.box_move);
  w.f64(s.box_move_prep);
  w.f64(s.ramp_move);
  w.f64(s.ramp_move_prep);
  w.i64(s.boxes_locked_end);
  w.i64(s.boxes_locked_prep_end);
  w.i64(s.ramps_locked_end);
  w.i64(s.ramps_locked_prep_end);
  w.i64(s.successes);
  w.i64(s.env_steps);
  w.i64(s.agent_steps);
  w.i32(s.reset_failures);
}

BatchStats read_stats(ByteReader& r) {
  BatchStats s;
  s.episodes = r.i32();
  s.hider_reward = r.f64();
  s.seeker_reward = r.f64();
  s.intrinsic_reward = r.f64();
  s.box_move = r.f64();
  s.box_move_prep = r.f64();
  s.ramp_move = r.f64();
  s.ramp_move_prep = r.f64();
  s.boxes_locked_end = r.i64();
  s.boxes_locked_prep_end = r.i64();
  s.ramps_locked_end = r.i64();
  s.ramps_locked_prep_end = r.i64();
  s.successes = r.i64();
  s.env_steps = r.i64();
  s.agent_steps = r.i64();
  s.reset_failures = r.i32();
  return s;
}

}  // namespace

void write_chunk(ByteWriter& w, const rl::Chunk& c) {
  w.u32((uint32_t)c.steps.size());
  for (const auto& s : c.steps) write_step(w, s);
  write_tensor(w, c.pi_state0);
  write_tensor(w, c.vf_state0);
  w.f32s(c.adv);
  w.f32s(c.ret);
  w.i32(c.reuse);
}

rl::Chunk read_chunk(ByteReader& r) {
  rl::Chunk c;
  uint32_t n = r.u32();
  c.steps.reserve(n);
  for (uint32_t i = 0; i < n; ++i) c.steps.push_back(read_step(r));
  c.pi_state0 = read_tensor(r);
  c.vf_state0 = read_tensor(r);
  r.f32s(c.adv, n);
  r.f32s(c.ret, n);
  c.reuse = r.i32();
  return c;
}

std::vector<uint8_t> encode_batch(const RolloutBatch& b) {
  ByteWriter w;
  w.i32(b.worker_id);
  w.i64(b.param_version);
  w.i64(b.seq);
  w.u32((uint32_t)b.chunks.size());
  for (const auto& c : b.chunks) write_chunk(w, c);
  write_stats(w, b.stats);
  return w.take();
}

RolloutBatch decode_batch(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  RolloutBatch b;
  b.worker_id = r.i32();
  b.param_version = r.i64();
  b.seq = r.i64();
  uint32_t n = r.u32();
  b.chunks.reserve(n);
  for (uint32_t i = 0; i < n; ++i) b.chunks.push_back(read_chunk(r));
  b.stats = read_stats(r);
  return b;
}

std::vector<uint8_t> encode_broadcast(const ParamBroadcast& b) {
  ByteWriter w;
  w.i64(b.seq);
  w.i64(b.param_version);
  w.u64(b.payload.size());
  w.raw(b.payload.data(), b.payload.size());
  w.u64(b.extra.size());
  w.raw(b.extra.data(), b.extra.size());
  return w.take();
}

ParamBroadcast decode_broadcast(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  ParamBroadcast b;
  b.seq = r.i64();
  b.param_version = r.i64();
  uint64_t pn = r.u64();
  b.payload.resize(pn);
  for (uint64_t i = 0; i < pn; ++i) b.payload[i] = r.u8();
  uint64_t en = r.u64();
  b.extra.resize(en);
  for (uint64_t i = 0; i < en; ++i) b.extra[i] = r.u8();
  return b;
}

std::vector<uint8_t> pack_state(const ParamStore& ps,
                                const rl::ObsNormalizer& obs_norm,
                                const rl::NormalizerState& vtarg_norm,
                                const std::string& metadata,
                                bool with_opt_state) {
  ByteWriter w;
  std::vector<uint8_t> params = ps.save_bytes(metadata, with_opt_state);
  w.u64(params.size());
  w.raw(params.data(), params.size());
  obs_norm.save(w);
  vtarg_norm.save(w);
  return w.take();
}

std::string unpack_state(const std::vector<uint8_t>& bytes, ParamStore& ps,
                         rl::ObsNormalizer& obs_norm,
                         rl::NormalizerState& vtarg_norm) {
  ByteReader r(bytes);
  uint64_t n = r.u64();
  std::vector<uint8_t> params(n);
  for (uint64_t i = 0; i < n; ++i) params[i] = r.u8();
  std::string metadata = ps.load_bytes(params);
  obs_norm.load(r);
  vtarg_norm.load(r);
  return metadata;
}

namespace {
constexpr uint32_t kCkptMagic = 0x31534e48;  // "HNS1"
}

void save_checkpoint(const std::string& path, const ParamStore& ps,
                     const rl::ObsNormalizer& obs_norm,
                     const rl::NormalizerState& vtarg_norm,
                     const std::string& metadata,
                     const std::vector<uint8_t>& extra) {
  ByteWriter w;
  w.u32(kCkptMagic);
  std::vector<uint8_t> payload =
      pack_state(ps, obs_norm, vtarg_norm, metadata, true);
  w.u64(payload.size());
  w.raw(payload.data(), payload.size());
  w.u64(extra.size());
  w.raw(extra.data(), extra.size());
  write_file_bytes(path, w.bytes());
}

std::string load_checkpoint(const std::string& path, ParamStore& ps,
                            rl::ObsNormalizer& obs_norm,
                            rl::NormalizerState& vtarg_norm,
                            std::vector<uint8_t>* extra) {
  std::vector<uint8_t> bytes = read_file_bytes(path);
  ByteReader r(bytes);
  if (r.u32() != kCkptMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint64_t pn = r.u64();
  std::vector<uint8_t> payload(pn);
  for (uint64_t i = 0; i < pn; ++i) payload[i] = r.u8();
  uint64_t en = r.u64();
  std::vector<uint8_t> ex(en);
  for (uint64_t i = 0; i < en; ++i) ex[i] = r.u8();
  if (extra) *extra = std::move(ex);
  return unpack_state(payload, ps, obs_norm, vtarg_norm);
}

}  // namespace hns::rollout
