#pragma once

// Finite-difference oracle for tape gradients: perturb every parameter
// element, rebuild the forward pass, and compare the central difference
// against the analytic gradient from backward().

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <doctest.h>

#include "hns/nn/param_store.hpp"
#include "hns/nn/tape.hpp"

namespace hns_test {

using BuildFn = std::function<hns::Tape::Ref(hns::Tape&)>;

inline double eval_loss(const hns::ParamStore& ps, const BuildFn& build) {
  hns::Tape tape(&ps, nullptr, true);
  hns::Tape::Ref loss = build(tape);
  return static_cast<double>(loss->v->d[0]);
}

inline void check_grads_fd(hns::ParamStore& ps, const BuildFn& build, float h = 5e-3f, double tol = 2e-2) {
  hns::GradSink sink;
  {
    hns::Tape tape(&ps, &sink, true);
    hns::Tape::Ref loss = build(tape);
    REQUIRE(loss->v->rows == 1);
    REQUIRE(loss->v->cols == 1);
    tape.backward(loss);
  }
  double gmax = 0.0;
  for (const auto& [name, t] : sink.g)
    for (float v : t.d) gmax = std::max(gmax, static_cast<double>(std::fabs(v)));
  // Floor absorbs float32 forward-pass noise on near-zero gradients.
  double floor = std::max(2e-2 * gmax, 1e-4);

  for (const std::string& name : ps.names()) {
    hns::Tensor& val = ps.value(name);
    const hns::Tensor* analytic = sink.g.count(name) ? &sink.g.at(name) : nullptr;
    for (size_t i = 0; i < val.d.size(); ++i) {
      float orig = val.d[i];
      val.d[i] = orig + h;
      double fp = eval_loss(ps, build);
      val.d[i] = orig - h;
      double fm = eval_loss(ps, build);
      val.d[i] = orig;
      double fd = (fp - fm) / (2.0 * static_cast<double>(h));
      double an = analytic ? static_cast<double>(analytic->d[i]) : 0.0;
      double err = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), floor});
      INFO("param ", name, " elem ", i, " fd ", fd, " analytic ", an);
      CHECK(err < tol);
    }
  }
}

}  // namespace hns_test
