#include <doctest.h>

#include <cmath>

#include "xview/params.hpp"

using namespace xview;
using namespace xview::num;

TEST_CASE("cosine schedule endpoints") {
  OptimState opt;
  opt.base_lr = 1e-4;
  opt.total_steps = 100;
  CHECK(cosine_lr(opt, 0) == doctest::Approx(1e-4));
  CHECK(cosine_lr(opt, 50) == doctest::Approx(0.5e-4));
  CHECK(cosine_lr(opt, 100) == 0.0);
  CHECK(cosine_lr(opt, 250) == 0.0);
}

TEST_CASE("adamw leaves parameters unchanged for zero gradients and zero decay") {
  ParamSet ps;
  ps.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
  OptimState opt;
  opt.total_steps = 10;
  opt.weight_decay = 0.0;
  adamw_step(ps, opt);
  CHECK(ps.value("w").data == std::vector<double>{1, 2, 3, 4});
  CHECK(ps.step == 1);
}

TEST_CASE("adamw descends a quadratic") {
  ParamSet ps;
  ps.add("w", Tensor({1}, {0.0}));
  OptimState opt;
  opt.base_lr = 0.05;
  opt.total_steps = 2000;
  opt.weight_decay = 0.0;
  for (int i = 0; i < 1500; ++i) {
    ps.zero_grad();
    ps.grad("w").data[0] = 2.0 * (ps.value("w").data[0] - 3.0);
    adamw_step(ps, opt);
  }
  CHECK(ps.value("w").data[0] == doctest::Approx(3.0).epsilon(1e-2));
}

TEST_CASE("adamw applies decoupled weight decay") {
  ParamSet ps;
  ps.add("w", Tensor({1}, {10.0}));
  OptimState opt;
  opt.base_lr = 0.1;
  opt.total_steps = 100;
  opt.weight_decay = 0.5;
  adamw_step(ps, opt);
  // zero grad => update is only -lr * wd * w
  CHECK(ps.value("w").data[0] == doctest::Approx(10.0 - 0.1 * 0.5 * 10.0));
}
