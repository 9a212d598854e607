#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hns/common/rng.hpp"
#include "hns/nn/tensor.hpp"

namespace hns {

enum class Init { zeros, ones, xavier };

struct ParamEntry {
  Tensor value;
  Tensor grad;
  Tensor m;  // adam first moment
  Tensor v;  // adam second moment
  bool trainable = true;
  bool decay = false;  // decoupled weight decay applies to this tensor
};

struct AdamConfig {
  float lr = 3e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float clip_norm = 5.0f;      // global gradient norm ceiling; <=0 disables
  float weight_decay = 1e-6f;  // applied only to entries flagged decay
};

// Named parameter tensors plus their optimizer state. Iteration order is the
// sorted name order of std::map, which keeps serialization and global-norm
// reductions stable across runs.
class ParamStore {
 public:
  Tensor& create(const std::string& name, int rows, int cols, Init init, Rng& rng, bool decay = false);

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  ParamEntry& entry(const std::string& name);
  const ParamEntry& entry(const std::string& name) const;
  Tensor& value(const std::string& name) { return entry(name).value; }
  const Tensor& value(const std::string& name) const { return entry(name).value; }
  Tensor& grad(const std::string& name) { return entry(name).grad; }

  void zero_grads();
  float grad_norm() const;  // l2 norm over trainable entries
  // One optimizer update; throws if any trainable gradient is non-finite.
  void adam_step(const AdamConfig& cfg);
  int64_t opt_steps() const { return step_; }

  std::vector<std::string> names() const;
  size_t total_params() const;
  size_t count() const { return entries_.size(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Versioned binary image: header, caller metadata (json text), then each
  // entry as (name, shape, flags, value floats [, adam moments]) in name order.
  std::vector<uint8_t> save_bytes(const std::string& metadata, bool with_opt_state = true) const;
  // Loads into an empty store (creating entries) or an initialized one
  // (shapes must match). Returns the stored metadata text.
  std::string load_bytes(const std::vector<uint8_t>& bytes);
  void save_file(const std::string& path, const std::string& metadata, bool with_opt_state = true) const;
  std::string load_file(const std::string& path);

  void copy_values_from(const ParamStore& other);

 private:
  std::map<std::string, ParamEntry> entries_;
  int64_t step_ = 0;  // completed adam steps, for bias correction
};

}  // namespace hns
