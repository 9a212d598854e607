#include "hns/nn/param_store.hpp"

#include <cmath>
#include <stdexcept>

#include "hns/common/binio.hpp"

namespace hns {

static constexpr uint64_t kCkptMagic = 0x48534e434b505431ULL;  // "HSNCKPT1"
static constexpr uint32_t kCkptVersion = 1;

Tensor& ParamStore::create(const std::string& name, int rows, int cols, Init init, Rng& rng, bool decay) {
  if (entries_.count(name)) throw std::runtime_error("param already exists: " + name);
  ParamEntry e;
  e.value = Tensor(rows, cols);
  e.grad = Tensor(rows, cols);
  e.m = Tensor(rows, cols);
  e.v = Tensor(rows, cols);
  e.decay = decay;
  switch (init) {
    case Init::zeros:
      break;
    case Init::ones:
      e.value.fill(1.0f);
      break;
    case Init::xavier: {
      double limit = std::sqrt(6.0 / (rows + cols));
      for (float& x : e.value.d) x = static_cast<float>(rng.uniform(-limit, limit));
      break;
    }
  }
  return entries_.emplace(name, std::move(e)).first->second.value;
}

ParamEntry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::runtime_error("unknown param: " + name);
  return it->second;
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::runtime_error("unknown param: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.zero();
}

float ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [name, e] : entries_) {
    if (!e.trainable) continue;
    for (float g : e.grad.d) s += static_cast<double>(g) * g;
  }
  return static_cast<float>(std::sqrt(s));
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  for (const auto& [name, e] : entries_) {
    if (e.trainable && !all_finite(e.grad))
      throw std::runtime_error("non-finite gradient in param: " + name);
  }
  float norm = grad_norm();
  float scale = 1.0f;
  if (cfg.clip_norm > 0.0f && norm > cfg.clip_norm) scale = cfg.clip_norm / norm;

  ++step_;
  double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(step_));

  for (auto& [name, e] : entries_) {
    if (!e.trainable) continue;
    for (size_t i = 0; i < e.value.d.size(); ++i) {
      float g = e.grad.d[i] * scale;
      e.m.d[i] = cfg.beta1 * e.m.d[i] + (1.0f - cfg.beta1) * g;
      e.v.d[i] = cfg.beta2 * e.v.d[i] + (1.0f - cfg.beta2) * g * g;
      float mhat = static_cast<float>(e.m.d[i] / bc1);
      float vhat = static_cast<float>(e.v.d[i] / bc2);
      e.value.d[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      if (e.decay && cfg.weight_decay > 0.0f) e.value.d[i] -= cfg.lr * cfg.weight_decay * e.value.d[i];
    }
  }
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

size_t ParamStore::total_params() const {
  size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

std::vector<uint8_t> ParamStore::save_bytes(const std::string& metadata, bool with_opt_state) const {
  ByteWriter w;
  w.u64(kCkptMagic);
  w.u32(kCkptVersion);
  w.str(metadata);
  w.u8(with_opt_state ? 1 : 0);
  w.i64(step_);
  w.u32(static_cast<uint32_t>(entries_.size()));
  for (const auto& [name, e] : entries_) {
    w.str(name);
    w.u32(static_cast<uint32_t>(e.value.rows));
    w.u32(static_cast<uint32_t>(e.value.cols));
    uint8_t flags = (e.trainable ? 1 : 0) | (e.decay ? 2 : 0);
    w.u8(flags);
    w.f32s(e.value.d);
    if (with_opt_state) {
      w.f32s(e.m.d);
      w.f32s(e.v.d);
    }
  }
  return w.take();
}

std::string ParamStore::load_bytes(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  if (r.u64() != kCkptMagic) throw std::runtime_error("checkpoint: bad magic");
  uint32_t version = r.u32();
  if (version != kCkptVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  std::string metadata = r.str();
  bool with_opt = r.u8() != 0;
  step_ = r.i64();
  uint32_t n = r.u32();
  bool creating = entries_.empty();
  if (!creating && n != entries_.size()) throw std::runtime_error("checkpoint: entry count mismatch");
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    int rows = static_cast<int>(r.u32());
    int cols = static_cast<int>(r.u32());
    uint8_t flags = r.u8();
    ParamEntry* e;
    if (creating) {
      ParamEntry fresh;
      fresh.value = Tensor(rows, cols);
      fresh.grad = Tensor(rows, cols);
      fresh.m = Tensor(rows, cols);
      fresh.v = Tensor(rows, cols);
      e = &entries_.emplace(name, std::move(fresh)).first->second;
    } else {
      auto it = entries_.find(name);
      if (it == entries_.end()) throw std::runtime_error("checkpoint: unexpected param " + name);
      e = &it->second;
      if (e->value.rows != rows || e->value.cols != cols)
        throw std::runtime_error("checkpoint: shape mismatch for " + name);
    }
    e->trainable = (flags & 1) != 0;
    e->decay = (flags & 2) != 0;
    size_t n_elems = static_cast<size_t>(rows) * static_cast<size_t>(cols);
    r.f32s(e->value.d, n_elems);
    if (with_opt) {
      r.f32s(e->m.d, n_elems);
      r.f32s(e->v.d, n_elems);
    }
  }
  return metadata;
}

void ParamStore::save_file(const std::string& path, const std::string& metadata, bool with_opt_state) const {
  write_file_bytes(path, save_bytes(metadata, with_opt_state));
}

std::string ParamStore::load_file(const std::string& path) { return load_bytes(read_file_bytes(path)); }

void ParamStore::copy_values_from(const ParamStore& other) {
  for (auto& [name, e] : entries_) {
    const ParamEntry& src = other.entry(name);
    if (!e.value.same_shape(src.value)) throw std::runtime_error("copy_values_from: shape mismatch for " + name);
    e.value.d = src.value.d;
  }
}

}  // namespace hns
