#pragma once

// Central finite-difference gradient oracle for tape-built losses.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "stacca/tensor.hpp"

namespace stacca::testing {

// loss_fn rebuilds the forward pass from current parameter values
using LossFn = std::function<double()>;

inline void check_gradient(stacca::ad::Parameter& p, const LossFn& loss_fn,
                           const std::vector<double>& analytic,
                           double eps = 1e-5, double rel_tol = 1e-5,
                           double abs_tol = 1e-8) {
  ASSERT_EQ(analytic.size(), p.value.size()) << p.name;
  for (size_t i = 0; i < p.value.size(); ++i) {
    const double saved = p.value[i];
    p.value[i] = saved + eps;
    const double up = loss_fn();
    p.value[i] = saved - eps;
    const double down = loss_fn();
    p.value[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double diff = std::abs(numeric - analytic[i]);
    const double scale = std::max(std::abs(numeric), std::abs(analytic[i]));
    EXPECT_TRUE(diff <= abs_tol || diff <= rel_tol * scale)
        << p.name << "[" << i << "]: analytic " << analytic[i] << " vs numeric "
        << numeric;
  }
}

// convenience: analytic gradients for every parameter via one backward pass
struct GradCheck {
  std::vector<stacca::ad::Parameter*> params;
  std::function<stacca::ad::Tensor(stacca::ad::Tape&)> build;

  void run(double eps = 1e-5, double rel_tol = 1e-5, double abs_tol = 1e-8) {
    for (auto* p : params) p->zero_grad();
    stacca::ad::Tape tape;
    const auto loss = build(tape);
    tape.backward(loss);
    auto loss_fn = [this] {
      stacca::ad::Tape fresh;
      return build(fresh).scalar();
    };
    for (auto* p : params) {
      check_gradient(*p, loss_fn, p->grad, eps, rel_tol, abs_tol);
      p->zero_grad();
    }
  }
};

inline std::vector<double> random_vec(stacca::RngStream& rng, int n, double lo = -1.0,
                                      double hi = 1.0) {
  std::vector<double> out(static_cast<size_t>(n));
  for (auto& x : out) x = rng.next_uniform(lo, hi);
  return out;
}

}  // namespace stacca::testing
