#include <doctest.h>

#include <cmath>

#include "xview/grad_check.hpp"
#include "xview/ocva.hpp"

using namespace xview;
using namespace xview::ocva;
using num::Graph;
using num::ParamSet;
using num::Tensor;
using num::Var;

namespace {

art::ObjectTokens tokens_from(Graph& g, const Tensor& t, std::vector<uint8_t> valid,
                              int64_t track = -1) {
  art::ObjectTokens o;
  o.tokens = g.leaf(t, false);
  o.validity = std::move(valid);
  o.track_id = track;
  return o;
}

OcvaConfig small_cfg() {
  OcvaConfig cfg;
  cfg.d_v = 8;
  cfg.heads = 2;
  cfg.depth = 2;
  cfg.ffn_mult = 2;
  return cfg;
}

}  // namespace

TEST_CASE("fuse with a placeholder target reduces to the LN/FFN residual path") {
  auto cfg = small_cfg();
  Rng rng(3);
  ParamSet ps;
  add_ocva_params(ps, cfg, rng);

  const int K = 4;
  Tensor src_vals = num::uniform_init({K, cfg.d_v}, 1.0, rng);
  for (int c = 0; c < cfg.d_v; ++c) src_vals.at(K - 1, c) = 0.0;  // invalid slot
  std::vector<uint8_t> valid{1, 1, 1, 0};

  Graph g;
  auto src = tokens_from(g, src_vals, valid, 7);
  art::ArtConfig acfg;
  acfg.K = K;
  acfg.d_v = cfg.d_v;
  auto placeholder = art::placeholder_tokens(g, acfg);
  auto fused = fuse(g, src, placeholder, cfg, ps);

  // direct recomputation with the attention term forced to zero
  Var t = g.leaf(src_vals, false);
  for (int b = 0; b < cfg.depth; ++b) {
    const std::string pre = "ocva.block" + std::to_string(b);
    t = layer_norm(g, t, g.param(ps, pre + ".ln1.gain"), g.param(ps, pre + ".ln1.bias"));
    Var ff = mlp_forward(g, t, ps, pre + ".ffn", cfg.ffn_mult * cfg.d_v);
    t = layer_norm(g, add(g, t, ff), g.param(ps, pre + ".ln2.gain"),
                   g.param(ps, pre + ".ln2.bias"));
  }
  Var expected = zero_rows(g, t, valid);
  REQUIRE(fused.tokens->value.shape == expected->value.shape);
  for (size_t i = 0; i < expected->value.data.size(); ++i)
    CHECK(fused.tokens->value.data[i] == doctest::Approx(expected->value.data[i]).epsilon(1e-12));

  CHECK(fused.validity == valid);
  CHECK(fused.tokens->value.rows() == K);
  CHECK(fused.tokens->value.cols() == cfg.d_v);
  for (int c = 0; c < cfg.d_v; ++c) CHECK(fused.tokens->value.at(K - 1, c) == 0.0);
}

TEST_CASE("fuse preserves shape and validity for a real target") {
  auto cfg = small_cfg();
  Rng rng(5);
  ParamSet ps;
  add_ocva_params(ps, cfg, rng);
  Graph g;
  auto src = tokens_from(g, num::uniform_init({4, cfg.d_v}, 1.0, rng), {1, 1, 0, 0}, 1);
  auto tgt = tokens_from(g, num::uniform_init({4, cfg.d_v}, 1.0, rng), {1, 1, 1, 0}, 2);
  auto fused = fuse(g, src, tgt, cfg, ps);
  CHECK(fused.validity == src.validity);
  CHECK(fused.matched_track == 2);
  CHECK(fused.tokens->value.rows() == 4);

  auto none = tokens_from(g, Tensor({4, cfg.d_v}), {0, 0, 0, 0});
  CHECK_THROWS_AS(fuse(g, none, tgt, cfg, ps), EmptyRegionError);
}

TEST_CASE("fuse gradients pass central differences through the 2-block stack") {
  auto cfg = small_cfg();
  Rng rng(7);
  ParamSet ps;
  add_ocva_params(ps, cfg, rng);
  ps.add("src", num::uniform_init({3, cfg.d_v}, 1.0, rng));
  ps.add("tgt", num::uniform_init({3, cfg.d_v}, 1.0, rng));
  auto rep = num::grad_check(
      [&](Graph& g, ParamSet& p) {
        art::ObjectTokens src;
        src.tokens = g.param(p, "src");
        src.validity = {1, 1, 1};
        art::ObjectTokens tgt;
        tgt.tokens = g.param(p, "tgt");
        tgt.validity = {1, 1, 0};
        auto fused = fuse(g, src, tgt, cfg, p);
        return sum_all(g, mul(g, fused.tokens, fused.tokens));
      },
      ps, 1e-5);
  CAPTURE(rep.worst_param);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("supcon closed-form fixtures") {
  Graph g;
  // one anchor with one identical positive and nothing else
  Var two = g.leaf(Tensor({2, 2}, {1, 0, 1, 0}), false);
  auto r0 = supcon_loss(g, two, {5, 5}, 0.07);
  CHECK(r0.loss->value.data[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(!r0.degenerate);

  // identical positive plus one orthogonal negative
  Var three = g.leaf(Tensor({3, 3}, {1, 0, 0, 1, 0, 0, 0, 1, 0}), false);
  auto r1 = supcon_loss(g, three, {5, 5, 9}, 0.07);
  const double expected = std::log(1.0 + std::exp(-1.0 / 0.07));
  CHECK(r1.loss->value.data[0] == doctest::Approx(expected).epsilon(1e-9));
  CHECK(r1.loss->value.data[0] < 1e-6);

  // no anchor has a positive
  auto r2 = supcon_loss(g, three, {1, 2, 3}, 0.07);
  CHECK(r2.degenerate);
  CHECK(r2.loss->value.data[0] == 0.0);
}

TEST_CASE("supcon is invariant under permutations of the batch") {
  Rng rng(11);
  const int n = 7, d = 5;
  Tensor z({n, d});
  for (auto& v : z.data) v = rng.uniform(-1, 1);
  // normalize rows
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int j = 0; j < d; ++j) s += z.at(i, j) * z.at(i, j);
    s = std::sqrt(s);
    for (int j = 0; j < d; ++j) z.at(i, j) /= s;
  }
  std::vector<int64_t> labels{1, 2, 1, 3, 2, 3, 1};

  Graph g;
  auto base = supcon_loss(g, g.leaf(z, false), labels, 0.07);

  std::vector<int> perm{3, 0, 6, 2, 5, 1, 4};
  Tensor zp({n, d});
  std::vector<int64_t> lp(n);
  for (int i = 0; i < n; ++i) {
    lp[i] = labels[perm[i]];
    for (int j = 0; j < d; ++j) zp.at(i, j) = z.at(perm[i], j);
  }
  auto permuted = supcon_loss(g, g.leaf(zp, false), lp, 0.07);
  CHECK(std::fabs(base.loss->value.data[0] - permuted.loss->value.data[0]) <= 1e-12);
}

TEST_CASE("supcon strictly decreases as a positive moves closer") {
  auto loss_at = [](double cos_pos) {
    Graph g;
    const double s = std::sin(std::acos(cos_pos));
    Var z = g.leaf(Tensor({3, 3}, {1, 0, 0, cos_pos, s, 0, 0, 0, 1}), false);
    auto r = supcon_loss(g, z, {1, 1, 2}, 0.07);
    return r.loss->value.data[0];
  };
  CHECK(loss_at(0.9) < loss_at(0.7));
  CHECK(loss_at(0.7) < loss_at(0.4));
}

TEST_CASE("supcon gradient vs central differences") {
  Rng rng(13);
  ParamSet ps;
  ps.add("z", num::uniform_init({5, 4}, 1.0, rng));
  std::vector<int64_t> labels{1, 2, 1, 2, 1};
  auto rep = num::grad_check(
      [&](Graph& g, ParamSet& p) {
        Var z = l2_normalize_rows(g, g.param(p, "z"));
        return supcon_loss(g, z, labels, 0.07).loss;
      },
      ps, 1e-5);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("triplet closed-form fixtures") {
  Graph g;
  // anchor equals positive, orthogonal negative: hinge stays closed
  Var za = g.leaf(Tensor({1, 3}, {1, 0, 0}), false);
  Var zb = g.leaf(Tensor({2, 3}, {1, 0, 0, 0, 1, 0}), false);
  auto r0 = triplet_loss(g, za, zb, {{0, 0}}, 0.5);
  CHECK(r0.loss->value.data[0] == doctest::Approx(0.0));

  // d(a,p) = 1.2 and d(a,n) = 1.0 -> 0.7
  const double sp = 0.28, sn = 0.5;
  Var zb2 = g.leaf(Tensor({2, 3}, {sp, std::sqrt(1 - sp * sp), 0, sn, 0, std::sqrt(1 - sn * sn)}),
                   false);
  auto r1 = triplet_loss(g, za, zb2, {{0, 0}}, 0.5);
  CHECK(r1.loss->value.data[0] == doctest::Approx(0.7).epsilon(1e-9));

  // a single target embedding leaves no eligible negative
  Var zb3 = g.leaf(Tensor({1, 3}, {0, 1, 0}), false);
  auto r2 = triplet_loss(g, za, zb3, {{0, 0}}, 0.5);
  CHECK(r2.loss->value.data[0] == 0.0);
}

TEST_CASE("triplet is zero when every anchor clears the margin") {
  Graph g;
  Var za = g.leaf(Tensor({2, 3}, {1, 0, 0, 0, 1, 0}), false);
  Var zb = g.leaf(Tensor({2, 3}, {1, 0, 0, 0, 1, 0}), false);
  auto r = triplet_loss(g, za, zb, {{0, 0}, {1, 1}}, 0.3);
  // d(a,p)=0, d(a,n)=sqrt(2): 0 - 1.414 + 0.3 < 0 for both anchors
  CHECK(r.loss->value.data[0] == 0.0);
}

TEST_CASE("triplet gradient vs central differences") {
  Rng rng(17);
  ParamSet ps;
  ps.add("za", num::uniform_init({3, 4}, 1.0, rng));
  ps.add("zb", num::uniform_init({4, 4}, 1.0, rng));
  std::vector<std::pair<int, int>> gold{{0, 1}, {1, 0}, {2, 3}};
  auto rep = num::grad_check(
      [&](Graph& g, ParamSet& p) {
        Var za = l2_normalize_rows(g, g.param(p, "za"));
        Var zb = l2_normalize_rows(g, g.param(p, "zb"));
        return triplet_loss(g, za, zb, gold, 0.5).loss;
      },
      ps, 1e-5);
  CHECK(rep.max_rel_err <= 1e-4);
}
