#include "hns/nn/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace hns {

void GradSink::accumulate(const std::string& name, const Tensor& grad) {
  auto it = g.find(name);
  if (it == g.end()) {
    g.emplace(name, grad);
    return;
  }
  if (!it->second.same_shape(grad)) throw std::logic_error("grad sink shape mismatch: " + name);
  for (size_t i = 0; i < grad.d.size(); ++i) it->second.d[i] += grad.d[i];
}

void GradSink::add_from(const GradSink& other) {
  for (const auto& [name, t] : other.g) accumulate(name, t);
}

void GradSink::add_into(ParamStore& ps) const {
  for (const auto& [name, t] : g) {
    Tensor& dst = ps.grad(name);
    if (!dst.same_shape(t)) throw std::logic_error("grad shape mismatch: " + name);
    for (size_t i = 0; i < t.d.size(); ++i) dst.d[i] += t.d[i];
  }
}

static void require(bool cond, const char* msg) {
  if (!cond) throw std::logic_error(msg);
}

static float softplus(float z) {
  // log(1 + e^z) without overflow for large |z|.
  if (z > 0.0f) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

Tape::Tape(const ParamStore* params, GradSink* sink, bool check_finite)
    : params_(params), sink_(sink), check_finite_(check_finite) {}

Tape::Ref Tape::alloc(int rows, int cols) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.owned_v = Tensor(rows, cols);
  n.v = &n.owned_v;
  n.g = Tensor(rows, cols);
  return &n;
}

void Tape::finish(Ref n, const char* opname) {
  if (check_finite_ && !all_finite(*n->v))
    throw std::runtime_error(std::string("non-finite output in op: ") + opname);
}

Tape::Ref Tape::input(const Tensor& x) {
  Ref n = alloc(x.rows, x.cols);
  n->owned_v = x;
  finish(n, "input");
  return n;
}

Tape::Ref Tape::scalar(float v) {
  Ref n = alloc(1, 1);
  n->owned_v.d[0] = v;
  finish(n, "scalar");
  return n;
}

Tape::Ref Tape::param(const std::string& name) {
  auto it = param_cache_.find(name);
  if (it != param_cache_.end()) return it->second;
  require(params_ != nullptr, "tape has no param store");
  const Tensor& val = params_->value(name);
  nodes_.emplace_back();
  Node& node = nodes_.back();
  node.v = &val;
  node.g = Tensor(val.rows, val.cols);
  Ref n = &node;
  if (sink_ != nullptr) {
    GradSink* sink = sink_;
    node.back = [n, sink, name]() { sink->accumulate(name, n->g); };
  }
  param_cache_[name] = n;
  return n;
}

Tape::Ref Tape::matmul(Ref a, Ref b) {
  require(a->v->cols == b->v->rows, "matmul: inner dims differ");
  int N = a->v->rows, K = a->v->cols, M = b->v->cols;
  Ref out = alloc(N, M);
  const Tensor& av = *a->v;
  const Tensor& bv = *b->v;
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < K; ++k) {
      float aik = av.at(i, k);
      if (aik == 0.0f) continue;
      for (int j = 0; j < M; ++j) out->owned_v.at(i, j) += aik * bv.at(k, j);
    }
  out->back = [a, b, out, N, K, M]() {
    const Tensor& g = out->g;
    const Tensor& av = *a->v;
    const Tensor& bv = *b->v;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < M; ++j) {
        float gij = g.at(i, j);
        if (gij == 0.0f) continue;
        for (int k = 0; k < K; ++k) {
          a->g.at(i, k) += gij * bv.at(k, j);
          b->g.at(k, j) += av.at(i, k) * gij;
        }
      }
  };
  finish(out, "matmul");
  return out;
}

Tape::Ref Tape::linear(Ref x, Ref w, Ref b) {
  require(x->v->cols == w->v->rows, "linear: inner dims differ");
  require(b->v->rows == 1 && b->v->cols == w->v->cols, "linear: bias shape");
  int N = x->v->rows, K = x->v->cols, M = w->v->cols;
  Ref out = alloc(N, M);
  const Tensor& xv = *x->v;
  const Tensor& wv = *w->v;
  const Tensor& bv = *b->v;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) out->owned_v.at(i, j) = bv.at(0, j);
    for (int k = 0; k < K; ++k) {
      float xik = xv.at(i, k);
      if (xik == 0.0f) continue;
      for (int j = 0; j < M; ++j) out->owned_v.at(i, j) += xik * wv.at(k, j);
    }
  }
  out->back = [x, w, b, out, N, K, M]() {
    const Tensor& g = out->g;
    const Tensor& xv = *x->v;
    const Tensor& wv = *w->v;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < M; ++j) {
        float gij = g.at(i, j);
        if (gij == 0.0f) continue;
        b->g.at(0, j) += gij;
        for (int k = 0; k < K; ++k) {
          x->g.at(i, k) += gij * wv.at(k, j);
          w->g.at(k, j) += xv.at(i, k) * gij;
        }
      }
  };
  finish(out, "linear");
  return out;
}

Tape::Ref Tape::add(Ref a, Ref b) {
  require(a->v->same_shape(*b->v), "add: shape mismatch");
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = a->v->d[i] + b->v->d[i];
  out->back = [a, b, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) {
      a->g.d[i] += out->g.d[i];
      b->g.d[i] += out->g.d[i];
    }
  };
  finish(out, "add");
  return out;
}

Tape::Ref Tape::sub(Ref a, Ref b) {
  require(a->v->same_shape(*b->v), "sub: shape mismatch");
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = a->v->d[i] - b->v->d[i];
  out->back = [a, b, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) {
      a->g.d[i] += out->g.d[i];
      b->g.d[i] -= out->g.d[i];
    }
  };
  finish(out, "sub");
  return out;
}

Tape::Ref Tape::mul(Ref a, Ref b) {
  require(a->v->same_shape(*b->v), "mul: shape mismatch");
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = a->v->d[i] * b->v->d[i];
  out->back = [a, b, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) {
      a->g.d[i] += out->g.d[i] * b->v->d[i];
      b->g.d[i] += out->g.d[i] * a->v->d[i];
    }
  };
  finish(out, "mul");
  return out;
}

Tape::Ref Tape::scale(Ref a, float s) {
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = a->v->d[i] * s;
  out->back = [a, out, s]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) a->g.d[i] += out->g.d[i] * s;
  };
  finish(out, "scale");
  return out;
}

Tape::Ref Tape::add_scalar(Ref a, float s) {
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = a->v->d[i] + s;
  out->back = [a, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) a->g.d[i] += out->g.d[i];
  };
  finish(out, "add_scalar");
  return out;
}

Tape::Ref Tape::relu(Ref a) {
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = a->v->d[i] > 0.0f ? a->v->d[i] : 0.0f;
  out->back = [a, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i)
      if (a->v->d[i] > 0.0f) a->g.d[i] += out->g.d[i];
  };
  finish(out, "relu");
  return out;
}

Tape::Ref Tape::tanh_(Ref a) {
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = std::tanh(a->v->d[i]);
  out->back = [a, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) {
      float t = out->v->d[i];
      a->g.d[i] += out->g.d[i] * (1.0f - t * t);
    }
  };
  finish(out, "tanh");
  return out;
}

Tape::Ref Tape::sigmoid_(Ref a) {
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = 1.0f / (1.0f + std::exp(-a->v->d[i]));
  out->back = [a, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) {
      float s = out->v->d[i];
      a->g.d[i] += out->g.d[i] * s * (1.0f - s);
    }
  };
  finish(out, "sigmoid");
  return out;
}

Tape::Ref Tape::exp_(Ref a) {
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = std::exp(a->v->d[i]);
  out->back = [a, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) a->g.d[i] += out->g.d[i] * out->v->d[i];
  };
  finish(out, "exp");
  return out;
}

Tape::Ref Tape::log_(Ref a) {
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = std::log(a->v->d[i]);
  out->back = [a, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) a->g.d[i] += out->g.d[i] / a->v->d[i];
  };
  finish(out, "log");
  return out;
}

Tape::Ref Tape::square(Ref a) {
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] = a->v->d[i] * a->v->d[i];
  out->back = [a, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) a->g.d[i] += out->g.d[i] * 2.0f * a->v->d[i];
  };
  finish(out, "square");
  return out;
}

Tape::Ref Tape::clamp(Ref a, float lo, float hi) {
  require(lo <= hi, "clamp: lo > hi");
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i) {
    float x = a->v->d[i];
    out->owned_v.d[i] = x < lo ? lo : (x > hi ? hi : x);
  }
  out->back = [a, out, lo, hi]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) {
      float x = a->v->d[i];
      if (x >= lo && x <= hi) a->g.d[i] += out->g.d[i];
    }
  };
  finish(out, "clamp");
  return out;
}

Tape::Ref Tape::min_pair(Ref a, Ref b) {
  require(a->v->same_shape(*b->v), "min_pair: shape mismatch");
  Ref out = alloc(a->v->rows, a->v->cols);
  for (size_t i = 0; i < out->owned_v.d.size(); ++i)
    out->owned_v.d[i] = a->v->d[i] <= b->v->d[i] ? a->v->d[i] : b->v->d[i];
  out->back = [a, b, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) {
      if (a->v->d[i] <= b->v->d[i])
        a->g.d[i] += out->g.d[i];
      else
        b->g.d[i] += out->g.d[i];
    }
  };
  finish(out, "min_pair");
  return out;
}

Tape::Ref Tape::layernorm(Ref x, Ref gain, Ref bias) {
  int N = x->v->rows, D = x->v->cols;
  require(gain->v->rows == 1 && gain->v->cols == D, "layernorm: gain shape");
  require(bias->v->rows == 1 && bias->v->cols == D, "layernorm: bias shape");
  constexpr float eps = 1e-5f;
  Ref out = alloc(N, D);
  Tensor xhat(N, D);
  std::vector<float> inv_std(N);
  for (int i = 0; i < N; ++i) {
    float mean = 0.0f;
    for (int j = 0; j < D; ++j) mean += x->v->at(i, j);
    mean /= static_cast<float>(D);
    float var = 0.0f;
    for (int j = 0; j < D; ++j) {
      float dxj = x->v->at(i, j) - mean;
      var += dxj * dxj;
    }
    var /= static_cast<float>(D);
    float is = 1.0f / std::sqrt(var + eps);
    inv_std[i] = is;
    for (int j = 0; j < D; ++j) {
      float xh = (x->v->at(i, j) - mean) * is;
      xhat.at(i, j) = xh;
      out->owned_v.at(i, j) = gain->v->at(0, j) * xh + bias->v->at(0, j);
    }
  }
  out->back = [x, gain, bias, out, xhat = std::move(xhat), inv_std = std::move(inv_std), N, D]() {
    for (int i = 0; i < N; ++i) {
      float m1 = 0.0f, m2 = 0.0f;
      for (int j = 0; j < D; ++j) {
        float dxh = out->g.at(i, j) * gain->v->at(0, j);
        m1 += dxh;
        m2 += dxh * xhat.at(i, j);
      }
      m1 /= static_cast<float>(D);
      m2 /= static_cast<float>(D);
      for (int j = 0; j < D; ++j) {
        float gij = out->g.at(i, j);
        float dxh = gij * gain->v->at(0, j);
        x->g.at(i, j) += (dxh - m1 - xhat.at(i, j) * m2) * inv_std[i];
        gain->g.at(0, j) += gij * xhat.at(i, j);
        bias->g.at(0, j) += gij;
      }
    }
  };
  finish(out, "layernorm");
  return out;
}

Tape::Ref Tape::circular_conv1d(Ref x, Ref k, Ref b, int kernel) {
  int cin = x->v->rows, L = x->v->cols;
  int cout = k->v->rows;
  require(k->v->cols == cin * kernel, "conv1d: kernel shape");
  require(b->v->rows == 1 && b->v->cols == cout, "conv1d: bias shape");
  require(kernel <= L, "conv1d: kernel wider than signal");
  int half = kernel / 2;
  Ref out = alloc(cout, L);
  for (int co = 0; co < cout; ++co)
    for (int i = 0; i < L; ++i) {
      float acc = b->v->at(0, co);
      for (int ci = 0; ci < cin; ++ci)
        for (int j = 0; j < kernel; ++j) {
          int idx = (i + j - half + L) % L;
          acc += k->v->at(co, ci * kernel + j) * x->v->at(ci, idx);
        }
      out->owned_v.at(co, i) = acc;
    }
  out->back = [x, k, b, out, cin, cout, L, kernel, half]() {
    for (int co = 0; co < cout; ++co)
      for (int i = 0; i < L; ++i) {
        float gci = out->g.at(co, i);
        if (gci == 0.0f) continue;
        b->g.at(0, co) += gci;
        for (int ci = 0; ci < cin; ++ci)
          for (int j = 0; j < kernel; ++j) {
            int idx = (i + j - half + L) % L;
            x->g.at(ci, idx) += gci * k->v->at(co, ci * kernel + j);
            k->g.at(co, ci * kernel + j) += gci * x->v->at(ci, idx);
          }
      }
  };
  finish(out, "circular_conv1d");
  return out;
}

Tape::Ref Tape::lstm_step(Ref x, Ref hc, Ref wx, Ref wh, Ref b) {
  int D = x->v->cols;
  require(x->v->rows == 1, "lstm: x must be a row");
  require(hc->v->rows == 1 && hc->v->cols % 2 == 0, "lstm: hc must be [1 x 2H]");
  int H = hc->v->cols / 2;
  require(wx->v->rows == D && wx->v->cols == 4 * H, "lstm: wx shape");
  require(wh->v->rows == H && wh->v->cols == 4 * H, "lstm: wh shape");
  require(b->v->rows == 1 && b->v->cols == 4 * H, "lstm: bias shape");

  std::vector<float> z(4 * H);
  for (int j = 0; j < 4 * H; ++j) {
    float acc = b->v->at(0, j);
    for (int kk = 0; kk < D; ++kk) acc += x->v->at(0, kk) * wx->v->at(kk, j);
    for (int kk = 0; kk < H; ++kk) acc += hc->v->at(0, kk) * wh->v->at(kk, j);
    z[j] = acc;
  }
  std::vector<float> gi(H), gf(H), gg(H), go(H), c_new(H), t_new(H);
  Ref out = alloc(1, 2 * H);
  for (int j = 0; j < H; ++j) {
    gi[j] = 1.0f / (1.0f + std::exp(-z[j]));
    gf[j] = 1.0f / (1.0f + std::exp(-z[H + j]));
    gg[j] = std::tanh(z[2 * H + j]);
    go[j] = 1.0f / (1.0f + std::exp(-z[3 * H + j]));
    float c_prev = hc->v->at(0, H + j);
    c_new[j] = gf[j] * c_prev + gi[j] * gg[j];
    t_new[j] = std::tanh(c_new[j]);
    out->owned_v.at(0, j) = go[j] * t_new[j];
    out->owned_v.at(0, H + j) = c_new[j];
  }
  out->back = [x, hc, wx, wh, b, out, D, H, gi = std::move(gi), gf = std::move(gf), gg = std::move(gg),
               go = std::move(go), t_new = std::move(t_new)]() {
    std::vector<float> dz(4 * H);
    for (int j = 0; j < H; ++j) {
      float dh = out->g.at(0, j);
      float dc = out->g.at(0, H + j) + dh * go[j] * (1.0f - t_new[j] * t_new[j]);
      float c_prev = hc->v->at(0, H + j);
      float d_o = dh * t_new[j];
      float d_f = dc * c_prev;
      float d_i = dc * gg[j];
      float d_g = dc * gi[j];
      dz[j] = d_i * gi[j] * (1.0f - gi[j]);
      dz[H + j] = d_f * gf[j] * (1.0f - gf[j]);
      dz[2 * H + j] = d_g * (1.0f - gg[j] * gg[j]);
      dz[3 * H + j] = d_o * go[j] * (1.0f - go[j]);
      hc->g.at(0, H + j) += dc * gf[j];
    }
    for (int j = 0; j < 4 * H; ++j) {
      float dzj = dz[j];
      if (dzj == 0.0f) continue;
      b->g.at(0, j) += dzj;
      for (int kk = 0; kk < D; ++kk) {
        x->g.at(0, kk) += dzj * wx->v->at(kk, j);
        wx->g.at(kk, j) += x->v->at(0, kk) * dzj;
      }
      for (int kk = 0; kk < H; ++kk) {
        hc->g.at(0, kk) += dzj * wh->v->at(kk, j);
        wh->g.at(kk, j) += hc->v->at(0, kk) * dzj;
      }
    }
  };
  finish(out, "lstm_step");
  return out;
}

Tape::Ref Tape::attention(Ref x, Ref wq, Ref wk, Ref wv, const std::vector<uint8_t>& mask, int n_heads) {
  int N = x->v->rows, D = x->v->cols;
  require(static_cast<int>(mask.size()) == N, "attention: mask size");
  require(D % n_heads == 0, "attention: heads must divide width");
  require(wq->v->rows == D && wq->v->cols == D, "attention: wq shape");
  require(wk->v->rows == D && wk->v->cols == D, "attention: wk shape");
  require(wv->v->rows == D && wv->v->cols == D, "attention: wv shape");
  int dh = D / n_heads;
  float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));

  auto project = [&](Ref w) {
    Tensor out(N, D);
    for (int i = 0; i < N; ++i)
      for (int kk = 0; kk < D; ++kk) {
        float xik = x->v->at(i, kk);
        if (xik == 0.0f) continue;
        for (int j = 0; j < D; ++j) out.at(i, j) += xik * w->v->at(kk, j);
      }
    return out;
  };
  Tensor Q = project(wq), K = project(wk), V = project(wv);

  std::vector<Tensor> A(n_heads, Tensor(N, N));
  Ref out = alloc(N, D);
  for (int h = 0; h < n_heads; ++h) {
    int c0 = h * dh;
    for (int i = 0; i < N; ++i) {
      float mx = -1e30f;
      for (int j = 0; j < N; ++j) {
        if (!mask[j]) continue;
        float s = 0.0f;
        for (int c = 0; c < dh; ++c) s += Q.at(i, c0 + c) * K.at(j, c0 + c);
        s *= inv_sqrt;
        A[h].at(i, j) = s;
        if (s > mx) mx = s;
      }
      float denom = 0.0f;
      for (int j = 0; j < N; ++j) {
        if (!mask[j]) {
          A[h].at(i, j) = 0.0f;
          continue;
        }
        float e = std::exp(A[h].at(i, j) - mx);
        A[h].at(i, j) = e;
        denom += e;
      }
      if (denom > 0.0f)
        for (int j = 0; j < N; ++j) A[h].at(i, j) /= denom;
      for (int c = 0; c < dh; ++c) {
        float acc = 0.0f;
        for (int j = 0; j < N; ++j) acc += A[h].at(i, j) * V.at(j, c0 + c);
        out->owned_v.at(i, c0 + c) = acc;
      }
    }
  }
  out->back = [x, wq, wk, wv, out, N, D, dh, n_heads, inv_sqrt, Q = std::move(Q), K = std::move(K),
               V = std::move(V), A = std::move(A)]() {
    Tensor dQ(N, D), dK(N, D), dV(N, D);
    for (int h = 0; h < n_heads; ++h) {
      int c0 = h * dh;
      for (int i = 0; i < N; ++i) {
        // dA row, then softmax backward to dS row.
        std::vector<float> dA(N, 0.0f);
        for (int j = 0; j < N; ++j) {
          float acc = 0.0f;
          for (int c = 0; c < dh; ++c) acc += out->g.at(i, c0 + c) * V.at(j, c0 + c);
          dA[j] = acc;
          for (int c = 0; c < dh; ++c) dV.at(j, c0 + c) += A[h].at(i, j) * out->g.at(i, c0 + c);
        }
        float dot = 0.0f;
        for (int j = 0; j < N; ++j) dot += dA[j] * A[h].at(i, j);
        for (int j = 0; j < N; ++j) {
          float dS = A[h].at(i, j) * (dA[j] - dot);
          if (dS == 0.0f) continue;
          for (int c = 0; c < dh; ++c) {
            dQ.at(i, c0 + c) += dS * K.at(j, c0 + c) * inv_sqrt;
            dK.at(j, c0 + c) += dS * Q.at(i, c0 + c) * inv_sqrt;
          }
        }
      }
    }
    // Route projection gradients: x.g += dP * W^T, W.g += x^T * dP.
    auto route = [&](const Tensor& dP, Ref w) {
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < D; ++j) {
          float dij = dP.at(i, j);
          if (dij == 0.0f) continue;
          for (int kk = 0; kk < D; ++kk) {
            x->g.at(i, kk) += dij * w->v->at(kk, j);
            w->g.at(kk, j) += x->v->at(i, kk) * dij;
          }
        }
    };
    route(dQ, wq);
    route(dK, wk);
    route(dV, wv);
  };
  finish(out, "attention");
  return out;
}

Tape::Ref Tape::masked_mean_rows(Ref x, const std::vector<uint8_t>& mask) {
  int N = x->v->rows, D = x->v->cols;
  require(static_cast<int>(mask.size()) == N, "masked_mean_rows: mask size");
  int count = 0;
  for (uint8_t m : mask)
    if (m) ++count;
  Ref out = alloc(1, D);
  if (count > 0) {
    float inv = 1.0f / static_cast<float>(count);
    for (int i = 0; i < N; ++i) {
      if (!mask[i]) continue;
      for (int j = 0; j < D; ++j) out->owned_v.at(0, j) += x->v->at(i, j) * inv;
    }
  }
  out->back = [x, out, mask, N, D, count]() {
    if (count == 0) return;
    float inv = 1.0f / static_cast<float>(count);
    for (int i = 0; i < N; ++i) {
      if (!mask[i]) continue;
      for (int j = 0; j < D; ++j) x->g.at(i, j) += out->g.at(0, j) * inv;
    }
  };
  finish(out, "masked_mean_rows");
  return out;
}

Tape::Ref Tape::concat_rows(const std::vector<Ref>& parts) {
  require(!parts.empty(), "concat_rows: empty");
  int D = parts[0]->v->cols;
  int N = 0;
  for (Ref p : parts) {
    require(p->v->cols == D, "concat_rows: column mismatch");
    N += p->v->rows;
  }
  Ref out = alloc(N, D);
  int r = 0;
  for (Ref p : parts) {
    for (int i = 0; i < p->v->rows; ++i)
      for (int j = 0; j < D; ++j) out->owned_v.at(r + i, j) = p->v->at(i, j);
    r += p->v->rows;
  }
  out->back = [parts, out, D]() {
    int r = 0;
    for (Ref p : parts) {
      for (int i = 0; i < p->v->rows; ++i)
        for (int j = 0; j < D; ++j) p->g.at(i, j) += out->g.at(r + i, j);
      r += p->v->rows;
    }
  };
  finish(out, "concat_rows");
  return out;
}

Tape::Ref Tape::concat_cols(Ref a, Ref b) {
  require(a->v->rows == b->v->rows, "concat_cols: row mismatch");
  int N = a->v->rows, A = a->v->cols, B = b->v->cols;
  Ref out = alloc(N, A + B);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < A; ++j) out->owned_v.at(i, j) = a->v->at(i, j);
    for (int j = 0; j < B; ++j) out->owned_v.at(i, A + j) = b->v->at(i, j);
  }
  out->back = [a, b, out, N, A, B]() {
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < A; ++j) a->g.at(i, j) += out->g.at(i, j);
      for (int j = 0; j < B; ++j) b->g.at(i, j) += out->g.at(i, A + j);
    }
  };
  finish(out, "concat_cols");
  return out;
}

Tape::Ref Tape::concat_broadcast_row(Ref a, Ref b) {
  require(a->v->rows == 1, "concat_broadcast_row: a must be a row");
  int N = b->v->rows, A = a->v->cols, B = b->v->cols;
  Ref out = alloc(N, A + B);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < A; ++j) out->owned_v.at(i, j) = a->v->at(0, j);
    for (int j = 0; j < B; ++j) out->owned_v.at(i, A + j) = b->v->at(i, j);
  }
  out->back = [a, b, out, N, A, B]() {
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < A; ++j) a->g.at(0, j) += out->g.at(i, j);
      for (int j = 0; j < B; ++j) b->g.at(i, j) += out->g.at(i, A + j);
    }
  };
  finish(out, "concat_broadcast_row");
  return out;
}

Tape::Ref Tape::slice_cols(Ref x, int c0, int c1) {
  require(0 <= c0 && c0 < c1 && c1 <= x->v->cols, "slice_cols: bad range");
  int N = x->v->rows, W = c1 - c0;
  Ref out = alloc(N, W);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < W; ++j) out->owned_v.at(i, j) = x->v->at(i, c0 + j);
  out->back = [x, out, N, W, c0]() {
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < W; ++j) x->g.at(i, c0 + j) += out->g.at(i, j);
  };
  finish(out, "slice_cols");
  return out;
}

Tape::Ref Tape::slice_rows(Ref x, int r0, int r1) {
  require(0 <= r0 && r0 < r1 && r1 <= x->v->rows, "slice_rows: bad range");
  int H = r1 - r0, D = x->v->cols;
  Ref out = alloc(H, D);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < D; ++j) out->owned_v.at(i, j) = x->v->at(r0 + i, j);
  out->back = [x, out, H, D, r0]() {
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < D; ++j) x->g.at(r0 + i, j) += out->g.at(i, j);
  };
  finish(out, "slice_rows");
  return out;
}

Tape::Ref Tape::reshape_row(Ref x) {
  Ref out = alloc(1, static_cast<int>(x->v->size()));
  out->owned_v.d = x->v->d;
  out->back = [x, out]() {
    for (size_t i = 0; i < out->g.d.size(); ++i) x->g.d[i] += out->g.d[i];
  };
  finish(out, "reshape_row");
  return out;
}

Tape::Ref Tape::sum_all(Ref x) {
  Ref out = alloc(1, 1);
  float acc = 0.0f;
  for (float v : x->v->d) acc += v;
  out->owned_v.d[0] = acc;
  out->back = [x, out]() {
    float g = out->g.d[0];
    for (size_t i = 0; i < x->g.d.size(); ++i) x->g.d[i] += g;
  };
  finish(out, "sum_all");
  return out;
}

Tape::Ref Tape::mean_all(Ref x) {
  require(x->v->size() > 0, "mean_all: empty tensor");
  Ref out = alloc(1, 1);
  float acc = 0.0f;
  for (float v : x->v->d) acc += v;
  float inv = 1.0f / static_cast<float>(x->v->size());
  out->owned_v.d[0] = acc * inv;
  out->back = [x, out, inv]() {
    float g = out->g.d[0] * inv;
    for (size_t i = 0; i < x->g.d.size(); ++i) x->g.d[i] += g;
  };
  finish(out, "mean_all");
  return out;
}

Tape::Ref Tape::add_n(const std::vector<Ref>& xs) {
  require(!xs.empty(), "add_n: empty");
  Ref out = alloc(xs[0]->v->rows, xs[0]->v->cols);
  for (Ref x : xs) {
    require(x->v->same_shape(*xs[0]->v), "add_n: shape mismatch");
    for (size_t i = 0; i < out->owned_v.d.size(); ++i) out->owned_v.d[i] += x->v->d[i];
  }
  out->back = [xs, out]() {
    for (Ref x : xs)
      for (size_t i = 0; i < out->g.d.size(); ++i) x->g.d[i] += out->g.d[i];
  };
  finish(out, "add_n");
  return out;
}

Tape::Ref Tape::logsoftmax_rows(Ref x) {
  int N = x->v->rows, K = x->v->cols;
  Ref out = alloc(N, K);
  for (int i = 0; i < N; ++i) {
    float mx = x->v->at(i, 0);
    for (int j = 1; j < K; ++j) mx = std::max(mx, x->v->at(i, j));
    float denom = 0.0f;
    for (int j = 0; j < K; ++j) denom += std::exp(x->v->at(i, j) - mx);
    float lse = mx + std::log(denom);
    for (int j = 0; j < K; ++j) out->owned_v.at(i, j) = x->v->at(i, j) - lse;
  }
  out->back = [x, out, N, K]() {
    for (int i = 0; i < N; ++i) {
      float gsum = 0.0f;
      for (int j = 0; j < K; ++j) gsum += out->g.at(i, j);
      for (int j = 0; j < K; ++j) x->g.at(i, j) += out->g.at(i, j) - std::exp(out->v->at(i, j)) * gsum;
    }
  };
  finish(out, "logsoftmax_rows");
  return out;
}

Tape::Ref Tape::pick(Ref x, int r, int c) {
  require(r >= 0 && r < x->v->rows && c >= 0 && c < x->v->cols, "pick: out of range");
  Ref out = alloc(1, 1);
  out->owned_v.d[0] = x->v->at(r, c);
  out->back = [x, out, r, c]() { x->g.at(r, c) += out->g.d[0]; };
  finish(out, "pick");
  return out;
}

Tape::Ref Tape::bernoulli_stats(Ref z, int bit) {
  require(z->v->rows == 1 && z->v->cols == 1, "bernoulli_stats: z must be 1x1");
  float zv = z->v->d[0];
  float p = 1.0f / (1.0f + std::exp(-zv));
  Ref out = alloc(1, 2);
  out->owned_v.d[0] = -softplus(bit ? -zv : zv);
  out->owned_v.d[1] = softplus(zv) - zv * p;
  out->back = [z, out, bit, zv, p]() {
    float dlogp = out->g.d[0];
    float dent = out->g.d[1];
    z->g.d[0] += dlogp * (bit ? (1.0f - p) : -p) + dent * (-zv * p * (1.0f - p));
  };
  finish(out, "bernoulli_stats");
  return out;
}

Tape::Ref Tape::detach(Ref x) {
  Ref out = alloc(x->v->rows, x->v->cols);
  out->owned_v.d = x->v->d;
  finish(out, "detach");
  return out;
}

void Tape::backward(Ref loss, float seed) {
  require(loss->v->rows == 1 && loss->v->cols == 1, "backward: loss must be 1x1");
  require(!backward_done_, "backward: tape already consumed");
  backward_done_ = true;
  loss->g.d[0] = seed;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->back) it->back();
}

}  // namespace hns
