#pragma once

#include <vector>

#include "hns/common/binio.hpp"
#include "hns/env/env.hpp"

namespace hns::rl {

// Exponentially decayed per-dimension moment estimates. One update is one
// optimization substep: batch moments are blended in at rate 1 - decay.
struct NormalizerState {
  std::vector<double> mean;
  std::vector<double> var;
  double decay = 1.0 - 1e-5;
  int64_t updates = 0;

  NormalizerState() = default;
  explicit NormalizerState(int dim) : mean(dim, 0.0), var(dim, 1.0) {}

  int dim() const { return (int)mean.size(); }
  // samples: n rows of dim() values, row-major
  void update_batch(const float* samples, size_t n);
  float norm(int j, float x) const;
  float denorm(int j, float y) const;

  void save(ByteWriter& w) const;
  void load(ByteReader& r);
};

// Shared observation scaler: self vector, lidar, and one state per entity
// class. Masked rows are normalized like any other; masking keeps them inert.
struct ObsNormalizer {
  NormalizerState self{env::kSelfDim};
  NormalizerState lidar;
  std::array<NormalizerState, env::kEntityClasses> entity;

  explicit ObsNormalizer(int lidar_rays = 30) : lidar(lidar_rays) {
    for (auto& e : entity) e = NormalizerState(env::kEntityDim);
  }

  env::Observation apply(const env::Observation& o) const;
  // one optimization substep worth of statistics from policy-view rows
  void update_batch(const std::vector<const env::Observation*>& batch);

  void save(ByteWriter& w) const;
  void load(ByteReader& r);
};

}  // namespace hns::rl
