#include "hns/rl/gae.hpp"

#include <cmath>
#include <stdexcept>

namespace hns::rl {

GaeOut gae_targets(const std::vector<float>& reward,
                   const std::vector<float>& value,
                   const std::vector<uint8_t>& done, float v_boot, float gamma,
                   float lam) {
  size_t T = reward.size();
  if (value.size() != T || done.size() != T || T == 0)
    throw std::invalid_argument("gae_targets: mismatched window");
  GaeOut out;
  out.adv.resize(T);
  out.ret.resize(T);
  float running = 0;
  for (size_t i = T; i-- > 0;) {
    float next_v = done[i] ? 0.0f : (i + 1 == T ? v_boot : value[i + 1]);
    float delta = reward[i] + gamma * next_v - value[i];
    float carry = done[i] || i + 1 == T ? 0.0f : running;
    running = delta + gamma * lam * carry;
    out.adv[i] = running;
    out.ret[i] = running + value[i];
  }
  return out;
}

void normalize_inplace(std::vector<float>& xs) {
  if (xs.size() < 2) {
    for (auto& x : xs) x = 0;
    return;
  }
  double mean = 0;
  for (float x : xs) mean += x;
  mean /= (double)xs.size();
  double var = 0;
  for (float x : xs) var += (x - mean) * (x - mean);
  var /= (double)xs.size();
  double sd = std::sqrt(var);
  if (sd < 1e-8) {
    for (auto& x : xs) x = 0;
    return;
  }
  for (auto& x : xs) x = (float)((x - mean) / sd);
}

}  // namespace hns::rl
