#include <doctest.h>

#include <cmath>

#include "xview/blocks.hpp"
#include "xview/grad_check.hpp"

using namespace xview;
using namespace xview::num;

namespace {

Tensor identity(int n) {
  Tensor t({n, n});
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

TEST_CASE("mlp_forward zero-weight and identity fixtures") {
  ParamSet ps;
  ps.add("m.w1", Tensor::zeros({2, 3}));
  ps.add("m.b1", Tensor::zeros({3}));
  ps.add("m.w2", Tensor::zeros({3, 2}));
  ps.add("m.b2", Tensor({2}, {1, 2}));
  Graph g;
  Var x = g.leaf(Tensor({1, 2}, {0, 0}), false);
  Var y = mlp_forward(g, x, ps, "m", 3);
  CHECK(y->value.at(0, 0) == doctest::Approx(1));
  CHECK(y->value.at(0, 1) == doctest::Approx(2));

  ParamSet ps2;
  ps2.add("m.w1", identity(2));
  ps2.add("m.b1", Tensor::zeros({2}));
  ps2.add("m.w2", identity(2));
  ps2.add("m.b2", Tensor::zeros({2}));
  Graph g2;
  Var y2 = mlp_forward(g2, g2.leaf(Tensor({1, 2}, {0, 0}), false), ps2, "m", 2);
  CHECK(y2->value.at(0, 0) == doctest::Approx(0));  // gelu(0) = 0
  CHECK(y2->value.at(0, 1) == doctest::Approx(0));
}

TEST_CASE("mlp_forward names the offending tensor on shape mismatch") {
  ParamSet ps;
  ps.add("m.w1", Tensor::zeros({5, 3}));
  ps.add("m.b1", Tensor::zeros({3}));
  ps.add("m.w2", Tensor::zeros({3, 2}));
  ps.add("m.b2", Tensor::zeros({2}));
  Graph g;
  Var x = g.leaf(Tensor({1, 2}), false);
  try {
    mlp_forward(g, x, ps, "m", 3);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("m.w1") != std::string::npos);
  }
}

TEST_CASE("mlp_forward gradient vs central differences") {
  Rng rng(11);
  ParamSet ps;
  add_mlp_params(ps, "m", 4, 5, 3, rng);
  ps.add("x", random_tensor({3, 4}, rng));
  auto rep = grad_check(
      [](Graph& g, ParamSet& p) {
        Var y = mlp_forward(g, g.param(p, "x"), p, "m", 5);
        return sum_all(g, mul(g, y, y));
      },
      ps, 1e-5);
  CAPTURE(rep.worst_param);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("mha identity fixture: single valid key passes value through") {
  ParamSet ps;
  for (const char* nm : {"a.wq", "a.wk", "a.wv", "a.wo"}) ps.add(nm, identity(2));
  for (const char* nm : {"a.bq", "a.bk", "a.bv", "a.bo"}) ps.add(nm, Tensor::zeros({2}));
  Graph g;
  Var q = g.leaf(Tensor({1, 2}, {0.3, -0.7}), false);
  Var kv = g.leaf(Tensor({1, 2}, {2, -1}), false);
  Var y = mha_forward(g, q, kv, kv, ps, "a", 1, {1});
  CHECK(y->value.at(0, 0) == doctest::Approx(2));
  CHECK(y->value.at(0, 1) == doctest::Approx(-1));
}

TEST_CASE("mha all-invalid keys give exactly zero rows") {
  Rng rng(5);
  ParamSet ps;
  add_mha_params(ps, "a", 4, rng);
  Graph g;
  Var q = g.leaf(random_tensor({3, 4}, rng), false);
  Var kv = g.leaf(random_tensor({2, 4}, rng), false);
  Var y = mha_forward(g, q, kv, kv, ps, "a", 2, {0, 0});
  for (double v : y->value.data) CHECK(v == 0.0);
}

TEST_CASE("mha uniform scores return the mean of valid values (identity projections)") {
  ParamSet ps;
  for (const char* nm : {"a.wq", "a.wk", "a.wv", "a.wo"}) ps.add(nm, identity(2));
  for (const char* nm : {"a.bq", "a.bk", "a.bv", "a.bo"}) ps.add(nm, Tensor::zeros({2}));
  Graph g;
  // zero query -> all scores equal -> uniform attention over the valid keys
  Var q = g.leaf(Tensor({1, 2}, {0, 0}), false);
  Var kv = g.leaf(Tensor({3, 2}, {1, 2, 3, 4, 100, 100}), false);
  Var y = mha_forward(g, q, kv, kv, ps, "a", 1, {1, 1, 0});
  CHECK(y->value.at(0, 0) == doctest::Approx(2.0));
  CHECK(y->value.at(0, 1) == doctest::Approx(3.0));
}

TEST_CASE("mha rejects head counts that do not divide the model dim") {
  Rng rng(5);
  ParamSet ps;
  add_mha_params(ps, "a", 4, rng);
  Graph g;
  Var q = g.leaf(Tensor({1, 4}), false);
  CHECK_THROWS_AS(mha_forward(g, q, q, q, ps, "a", 3, {1}), ConfigError);
}

TEST_CASE("mha empty query gives empty output") {
  Rng rng(5);
  ParamSet ps;
  add_mha_params(ps, "a", 4, rng);
  Graph g;
  Var q = g.leaf(Tensor({0, 4}), false);
  Var kv = g.leaf(random_tensor({2, 4}, rng), false);
  Var y = mha_forward(g, q, kv, kv, ps, "a", 2, {1, 1});
  CHECK(y->value.rows() == 0);
}

TEST_CASE("mha gradient vs central differences (2 heads, masked)") {
  Rng rng(23);
  ParamSet ps;
  add_mha_params(ps, "a", 6, rng);
  ps.add("q", random_tensor({2, 6}, rng));
  ps.add("kv", random_tensor({4, 6}, rng));
  auto rep = grad_check(
      [](Graph& g, ParamSet& p) {
        Var y = mha_forward(g, g.param(p, "q"), g.param(p, "kv"), g.param(p, "kv"), p, "a", 2,
                            {1, 1, 0, 1});
        return sum_all(g, mul(g, y, y));
      },
      ps, 1e-5);
  CAPTURE(rep.worst_param);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("layer_norm fixtures") {
  Graph g;
  Var gain = g.leaf(Tensor::full({3}, 1.0), false);
  Var bias = g.leaf(Tensor::zeros({3}), false);
  Var x = g.leaf(Tensor({1, 3}, {5, 5, 5}), false);
  Var y = layer_norm(g, x, gain, bias, 1e-5);
  for (double v : y->value.data) CHECK(v == doctest::Approx(0.0));

  Graph g2;
  Var gain2 = g2.leaf(Tensor::full({2}, 1.0), false);
  Var bias2 = g2.leaf(Tensor::zeros({2}), false);
  Var x2 = g2.leaf(Tensor({1, 2}, {-1, 1}), false);
  Var y2 = layer_norm(g2, x2, gain2, bias2, 1e-14);
  CHECK(y2->value.at(0, 0) == doctest::Approx(-1).epsilon(1e-6));
  CHECK(y2->value.at(0, 1) == doctest::Approx(1).epsilon(1e-6));
}

TEST_CASE("layer_norm rows have zero mean and unit variance") {
  Rng rng(31);
  Graph g;
  Var gain = g.leaf(Tensor::full({8}, 1.0), false);
  Var bias = g.leaf(Tensor::zeros({8}), false);
  Var x = g.leaf(random_tensor({6, 8}, rng, 3.0), false);
  Var y = layer_norm(g, x, gain, bias, 1e-9);
  for (int i = 0; i < 6; ++i) {
    double mu = 0, var = 0;
    for (int j = 0; j < 8; ++j) mu += y->value.at(i, j);
    mu /= 8;
    for (int j = 0; j < 8; ++j) {
      double d = y->value.at(i, j) - mu;
      var += d * d;
    }
    var /= 8;
    CHECK(std::fabs(mu) <= 1e-9);
    CHECK(std::fabs(var - 1.0) <= 1e-6);
  }
}

TEST_CASE("layer_norm gradient vs central differences") {
  Rng rng(41);
  ParamSet ps;
  ps.add("x", random_tensor({4, 5}, rng));
  ps.add("gain", random_tensor({5}, rng));
  ps.add("bias", random_tensor({5}, rng));
  auto rep = grad_check(
      [](Graph& g, ParamSet& p) {
        Var y = layer_norm(g, g.param(p, "x"), g.param(p, "gain"), g.param(p, "bias"), 1e-5);
        return sum_all(g, mul(g, y, y));
      },
      ps, 1e-5);
  CHECK(rep.max_rel_err <= 1e-4);
}
