#pragma once

#include <cstdint>
#include <vector>

namespace hns::rl {

struct GaeOut {
  std::vector<float> adv;  // generalized advantage estimates
  std::vector<float> ret;  // TD(lambda) value targets adv + V
};

// Reverse-recurrence advantage estimation over one window. done[t] set means
// transition t finished its episode: the value bootstrap and the recurrence
// both stop there and restart on the next step. v_boot is V of the state
// after the final transition, used only when the window ends mid-episode.
GaeOut gae_targets(const std::vector<float>& reward,
                   const std::vector<float>& value,
                   const std::vector<uint8_t>& done, float v_boot, float gamma,
                   float lam);

// Buffer-wide z-scoring with a 1e-8 std floor; degenerate buffers map to 0.
void normalize_inplace(std::vector<float>& xs);

}  // namespace hns::rl
