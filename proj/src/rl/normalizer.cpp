#include "hns/rl/normalizer.hpp"

#include <cmath>
#include <stdexcept>

namespace hns::rl {

void NormalizerState::update_batch(const float* samples, size_t n) {
  if (n == 0) return;
  int D = dim();
  for (int j = 0; j < D; ++j) {
    double m = 0;
    for (size_t i = 0; i < n; ++i) m += samples[i * D + j];
    m /= (double)n;
    double v = 0;
    for (size_t i = 0; i < n; ++i) {
      double d = samples[i * D + j] - m;
      v += d * d;
    }
    v /= (double)n;
    mean[j] = decay * mean[j] + (1.0 - decay) * m;
    var[j] = decay * var[j] + (1.0 - decay) * v;
  }
  ++updates;
}

float NormalizerState::norm(int j, float x) const {
  double sd = std::sqrt(var[j] < 1e-8 ? 1e-8 : var[j]);
  return (float)(((double)x - mean[j]) / sd);
}

float NormalizerState::denorm(int j, float y) const {
  double sd = std::sqrt(var[j] < 1e-8 ? 1e-8 : var[j]);
  return (float)((double)y * sd + mean[j]);
}

void NormalizerState::save(ByteWriter& w) const {
  w.u32((uint32_t)dim());
  w.f64(decay);
  w.i64(updates);
  for (double m : mean) w.f64(m);
  for (double v : var) w.f64(v);
}

void NormalizerState::load(ByteReader& r) {
  uint32_t D = r.u32();
  decay = r.f64();
  updates = r.i64();
  mean.assign(D, 0.0);
  var.assign(D, 0.0);
  for (uint32_t j = 0; j < D; ++j) mean[j] = r.f64();
  for (uint32_t j = 0; j < D; ++j) var[j] = r.f64();
}

env::Observation ObsNormalizer::apply(const env::Observation& o) const {
  env::Observation n = o;
  for (size_t j = 0; j < n.self.size(); ++j)
    n.self[j] = self.norm((int)j, n.self[j]);
  // lidar channels share the per-ray statistics
  int rays = lidar.dim();
  for (size_t j = 0; j < n.lidar.size(); ++j)
    n.lidar[j] = lidar.norm((int)(j % rays), n.lidar[j]);
  for (int c = 0; c < env::kEntityClasses; ++c) {
    auto& blk = n.entities[c];
    for (int i = 0; i < blk.count; ++i)
      for (int j = 0; j < env::kEntityDim; ++j)
        blk.feats[(size_t)i * env::kEntityDim + j] =
            entity[c].norm(j, blk.feats[(size_t)i * env::kEntityDim + j]);
  }
  return n;
}

void ObsNormalizer::update_batch(
    const std::vector<const env::Observation*>& batch) {
  if (batch.empty()) return;
  std::vector<float> rows;
  rows.reserve(batch.size() * self.dim());
  for (const auto* o : batch)
    rows.insert(rows.end(), o->self.begin(), o->self.end());
  self.update_batch(rows.data(), batch.size());

  rows.clear();
  size_t lidar_rows = 0;
  int rays = lidar.dim();
  for (const auto* o : batch) {
    for (size_t j = 0; j + rays <= o->lidar.size(); j += rays) {
      rows.insert(rows.end(), o->lidar.begin() + j,
                  o->lidar.begin() + j + rays);
      ++lidar_rows;
    }
  }
  lidar.update_batch(rows.data(), lidar_rows);

  // masked rows carry zeroed placeholders, so only visible rows feed the
  // entity statistics
  for (int c = 0; c < env::kEntityClasses; ++c) {
    rows.clear();
    size_t n = 0;
    for (const auto* o : batch) {
      const auto& blk = o->entities[c];
      for (int i = 0; i < blk.count; ++i) {
        if (!blk.visible[i]) continue;
        auto row = blk.feats.begin() + (size_t)i * env::kEntityDim;
        rows.insert(rows.end(), row, row + env::kEntityDim);
        ++n;
      }
    }
    if (n > 0) entity[c].update_batch(rows.data(), n);
  }
}

void ObsNormalizer::save(ByteWriter& w) const {
  self.save(w);
  lidar.save(w);
  for (const auto& e : entity) e.save(w);
}

void ObsNormalizer::load(ByteReader& r) {
  self.load(r);
  lidar.load(r);
  for (auto& e : entity) e.load(r);
}

}  // namespace hns::rl
