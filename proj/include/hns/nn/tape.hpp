#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hns/nn/param_store.hpp"
#include "hns/nn/tensor.hpp"

namespace hns {

// Per-worker gradient accumulator keyed by parameter name. Workers fill
// private sinks which are merged in fixed index order, so the reduction
// result does not depend on thread scheduling.
struct GradSink {
  std::map<std::string, Tensor> g;
  void accumulate(const std::string& name, const Tensor& grad);
  void add_from(const GradSink& other);
  void add_into(ParamStore& ps) const;
  void clear() { g.clear(); }
};

// Reverse-mode tape over float32 matrices. Each op computes its value
// eagerly and records a closure that scatters the output gradient back to
// its inputs; backward() replays closures in reverse creation order, which
// is already a topological order. One backward pass per tape.
class Tape {
 public:
  struct Node {
    Tensor owned_v;
    const Tensor* v = nullptr;  // &owned_v, or an external parameter tensor
    Tensor g;
    std::function<void()> back;
  };
  using Ref = Node*;  // stable: nodes live in a deque

  Tape(const ParamStore* params, GradSink* sink, bool check_finite = true);

  Ref input(const Tensor& x);
  Ref constant(const Tensor& x) { return input(x); }
  Ref scalar(float v);
  Ref param(const std::string& name);

  Ref matmul(Ref a, Ref b);
  Ref linear(Ref x, Ref w, Ref b);  // x*w + b with b broadcast over rows
  Ref add(Ref a, Ref b);
  Ref sub(Ref a, Ref b);
  Ref mul(Ref a, Ref b);
  Ref scale(Ref a, float s);
  Ref add_scalar(Ref a, float s);
  Ref relu(Ref a);
  Ref tanh_(Ref a);
  Ref sigmoid_(Ref a);
  Ref exp_(Ref a);
  Ref log_(Ref a);
  Ref square(Ref a);
  Ref clamp(Ref a, float lo, float hi);
  Ref min_pair(Ref a, Ref b);  // elementwise min; ties route gradient to a
  Ref layernorm(Ref x, Ref gain, Ref bias);  // per-row, population variance
  // x [Cin x L], k [Cout x Cin*kernel], b [1 x Cout]; circular padding.
  Ref circular_conv1d(Ref x, Ref k, Ref b, int kernel);
  // x [1 x D], hc [1 x 2H] = [h, c]; returns next [h, c]. Gate order i,f,g,o.
  Ref lstm_step(Ref x, Ref hc, Ref wx, Ref wh, Ref b);
  // Masked multi-head self-attention. Masked entries are excluded as keys;
  // a fully masked row yields zeros.
  Ref attention(Ref x, Ref wq, Ref wk, Ref wv, const std::vector<uint8_t>& mask, int n_heads);
  Ref masked_mean_rows(Ref x, const std::vector<uint8_t>& mask);  // [NxD] -> [1xD]
  Ref concat_rows(const std::vector<Ref>& parts);
  Ref concat_cols(Ref a, Ref b);
  Ref concat_broadcast_row(Ref a, Ref b);  // a [1xA] prepended to every row of b [NxB]
  Ref slice_cols(Ref x, int c0, int c1);
  Ref slice_rows(Ref x, int r0, int r1);
  Ref reshape_row(Ref x);  // [RxC] -> [1xR*C], row-major
  Ref sum_all(Ref x);
  Ref mean_all(Ref x);
  Ref add_n(const std::vector<Ref>& xs);
  Ref logsoftmax_rows(Ref x);
  Ref pick(Ref x, int r, int c);
  // z [1x1] logit of a coin; returns [1x2] = [log prob of bit, entropy].
  Ref bernoulli_stats(Ref z, int bit);
  Ref detach(Ref x);

  void backward(Ref loss, float seed = 1.0f);
  size_t size() const { return nodes_.size(); }

 private:
  Ref alloc(int rows, int cols);
  void finish(Ref n, const char* opname);

  std::deque<Node> nodes_;
  std::map<std::string, Ref> param_cache_;
  const ParamStore* params_;
  GradSink* sink_;
  bool check_finite_;
  bool backward_done_ = false;
};

}  // namespace hns
