#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

namespace hns {

// Dense row-major float32 matrix. Row vectors are 1xN by convention.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<float> d;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0f) {}

  float& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return d.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  void zero() { std::fill(d.begin(), d.end(), 0.0f); }
  void fill(float v) { std::fill(d.begin(), d.end(), v); }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, float v) {
    Tensor t(r, c);
    t.fill(v);
    return t;
  }
  static Tensor row(std::initializer_list<float> xs) {
    Tensor t(1, static_cast<int>(xs.size()));
    int i = 0;
    for (float x : xs) t.d[i++] = x;
    return t;
  }
};

inline bool all_finite(const Tensor& t) {
  for (float x : t.d)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace hns
