#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xview/grad_check.hpp"
#include "xview/retrieval.hpp"

using namespace xview;
using namespace xview::retr;
using num::Graph;
using num::ParamSet;
using num::Tensor;
using num::Var;

namespace {

art::ObjectTokens tokens_from(Graph& g, const Tensor& t, std::vector<uint8_t> valid) {
  art::ObjectTokens o;
  o.tokens = g.leaf(t, false);
  o.validity = std::move(valid);
  return o;
}

double brute_force_best(const Tensor& s) {
  const int n = s.rows();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1e300;
  do {
    double total = 0;
    for (int r = 0; r < n; ++r) total += s.at(r, perm[r]);
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("pool_object averages only the valid slots") {
  Graph g;
  auto t = tokens_from(g, Tensor({3, 2}, {1, 3, 3, 5, 100, 100}), {1, 1, 0});
  Var pooled = pool_object(g, t);
  CHECK(pooled->value.at(0, 0) == doctest::Approx(2));
  CHECK(pooled->value.at(0, 1) == doctest::Approx(4));

  auto one = tokens_from(g, Tensor({2, 2}, {7, 9, 0, 0}), {1, 0});
  Var p1 = pool_object(g, one);
  CHECK(p1->value.at(0, 0) == doctest::Approx(7));

  auto equal = tokens_from(g, Tensor({3, 2}, {4, 2, 4, 2, 4, 2}), {1, 1, 1});
  Var pe = pool_object(g, equal);
  CHECK(pe->value.at(0, 0) == doctest::Approx(4));

  auto none = tokens_from(g, Tensor({2, 2}), {0, 0});
  CHECK_THROWS_AS(pool_object(g, none), EmptyRegionError);
}

TEST_CASE("embed normalizes the head output") {
  ParamSet ps;
  const int d_c = 4;
  ps.add("g.w1", Tensor::zeros({3, d_c}));
  ps.add("g.b1", Tensor::zeros({d_c}));
  ps.add("g.w2", Tensor::zeros({d_c, d_c}));
  ps.add("g.b2", Tensor({d_c}, {3, 4, 0, 0}));
  Graph g;
  Var z = embed(g, g.leaf(Tensor({1, 3}, {1, 2, 3}), false), ps, d_c);
  CHECK(z->value.at(0, 0) == doctest::Approx(0.6));
  CHECK(z->value.at(0, 1) == doctest::Approx(0.8));

  // identical inputs give identical embeddings
  Graph g2;
  Var z2 = embed(g2, g2.leaf(Tensor({1, 3}, {1, 2, 3}), false), ps, d_c);
  CHECK(z->value.data == z2->value.data);

  double norm = 0;
  for (double v : z->value.data) norm += v * v;
  CHECK(std::fabs(std::sqrt(norm) - 1.0) <= 1e-9);
}

TEST_CASE("embed gradient flows through the normalization") {
  Rng rng(9);
  ParamSet ps;
  add_embed_params(ps, 5, 6, rng);
  ps.add("x", num::uniform_init({2, 5}, 1.0, rng));
  Tensor probe = num::uniform_init({2, 6}, 1.0, rng);
  auto rep = num::grad_check(
      [&](Graph& g, ParamSet& p) {
        Var z = embed(g, g.param(p, "x"), p, 6);
        return sum_all(g, mul_const(g, z, probe));
      },
      ps, 1e-5);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("similarity of unit vectors hits the closed-form corners") {
  Graph g;
  Var za = g.leaf(Tensor({3, 2}, {1, 0, 0, 1, -1, 0}), false);
  Var zb = g.leaf(Tensor({1, 2}, {1, 0}), false);
  Var s = similarity_matrix(g, za, zb);
  CHECK(s->value.at(0, 0) == doctest::Approx(1.0));   // self
  CHECK(s->value.at(1, 0) == doctest::Approx(0.0));   // orthogonal
  CHECK(s->value.at(2, 0) == doctest::Approx(-1.0));  // antipodal
}

TEST_CASE("match fixtures: aligned and adversarial 2x2 cases") {
  Tensor s1({2, 2}, {0.9, 0.1, 0.2, 0.8});
  auto g1 = match(s1, MatchMode::kGreedy);
  auto h1 = match(s1, MatchMode::kHungarian);
  CHECK(g1.target_for_row == std::vector<int>{0, 1});
  CHECK(h1.target_for_row == std::vector<int>{0, 1});
  CHECK(g1.total_score == doctest::Approx(1.7));
  CHECK(h1.total_score == doctest::Approx(1.7));

  Tensor s2({2, 2}, {0.9, 0.8, 0.85, 0.1});
  auto g2 = match(s2, MatchMode::kGreedy);
  auto h2 = match(s2, MatchMode::kHungarian);
  CHECK(g2.target_for_row == std::vector<int>{0, 1});
  CHECK(g2.total_score == doctest::Approx(1.0));
  CHECK(h2.target_for_row == std::vector<int>{1, 0});
  CHECK(h2.total_score == doctest::Approx(1.65));

  Tensor s3({1, 1}, {0.4});
  for (auto mode : {MatchMode::kGreedy, MatchMode::kHungarian})
    CHECK(match(s3, mode).target_for_row == std::vector<int>{0});
  std::vector<std::pair<int, int>> canon{{0, 0}};
  CHECK(match(s3, MatchMode::kGt, &canon).target_for_row == std::vector<int>{0});

  Tensor empty({0, 3});
  CHECK(match(empty, MatchMode::kGreedy).target_for_row.empty());
}

TEST_CASE("hungarian equals brute force and greedy never beats it") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(6));  // up to 7
    Tensor s({n, n});
    for (auto& v : s.data) v = rng.uniform(-1, 1);
    const auto hung = match(s, MatchMode::kHungarian);
    const auto greedy = match(s, MatchMode::kGreedy);
    const double best = brute_force_best(s);
    CHECK(hung.total_score == doctest::Approx(best).epsilon(1e-12));
    CHECK(greedy.total_score <= hung.total_score + 1e-12);
  }
}

TEST_CASE("match handles rectangular score matrices") {
  Rng rng(5);
  Tensor s({4, 2});
  for (auto& v : s.data) v = rng.uniform(-1, 1);
  auto h = match(s, MatchMode::kHungarian);
  CHECK(h.matched_count() == 2);
  auto gr = match(s, MatchMode::kGreedy);
  CHECK(gr.matched_count() == 2);
  // injectivity
  for (int c = 0; c < 2; ++c) {
    int uses = 0;
    for (int t : h.target_for_row) uses += t == c ? 1 : 0;
    CHECK(uses <= 1);
  }
}

TEST_CASE("match is deterministic") {
  Rng rng(8);
  Tensor s({5, 5});
  for (auto& v : s.data) v = rng.uniform(-1, 1);
  auto a = match(s, MatchMode::kGreedy);
  auto b = match(s, MatchMode::kGreedy);
  CHECK(a.target_for_row == b.target_for_row);
  auto c = match(s, MatchMode::kHungarian);
  auto d = match(s, MatchMode::kHungarian);
  CHECK(c.target_for_row == d.target_for_row);
}

TEST_CASE("reorder permutes token lists and pads unmatched slots") {
  art::ArtConfig cfg;
  cfg.K = 2;
  cfg.d_v = 3;
  Graph g;
  std::vector<art::ObjectTokens> toks;
  toks.push_back(tokens_from(g, Tensor({2, 3}, {1, 1, 1, 0, 0, 0}), {1, 0}));
  toks.push_back(tokens_from(g, Tensor({2, 3}, {2, 2, 2, 0, 0, 0}), {1, 0}));

  Assignment identity;
  identity.target_for_row = {0, 1};
  auto same = reorder(g, toks, identity, cfg);
  CHECK(same[0].tokens->value.at(0, 0) == 1);
  CHECK(same[1].tokens->value.at(0, 0) == 2);

  Assignment swap;
  swap.target_for_row = {1, 0};
  auto swapped = reorder(g, toks, swap, cfg);
  CHECK(swapped[0].tokens->value.at(0, 0) == 2);
  CHECK(swapped[1].tokens->value.at(0, 0) == 1);

  Assignment partial;
  partial.target_for_row = {1, -1};
  auto padded = reorder(g, toks, partial, cfg);
  CHECK(padded[1].valid_count() == 0);
  for (double v : padded[1].tokens->value.data) CHECK(v == 0.0);

  Assignment bad;
  bad.target_for_row = {5};
  CHECK_THROWS_AS(reorder(g, toks, bad, cfg), ShapeError);
}
