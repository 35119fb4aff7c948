#include <doctest.h>

#include <cmath>

#include "xview/art.hpp"

using namespace xview;
using namespace xview::art;
using num::Graph;
using num::ParamSet;
using num::Tensor;
using num::Var;

namespace {

// area-490 mask whose tight box is exactly (0,0,21,35)
scene::Mask worked_mask() {
  scene::Mask m(60, 60);
  for (int c = 0; c < 35; ++c) {
    m.set(0, c, 1);
    m.set(20, c, 1);
  }
  for (int r = 1; r < 20; ++r) {
    m.set(r, 0, 1);
    m.set(r, 34, 1);
  }
  int remaining = 490 - m.count();
  for (int r = 1; r <= 12 && remaining > 0; ++r)
    for (int c = 1; c <= 33 && remaining > 0; ++c) {
      m.set(r, c, 1);
      remaining--;
    }
  return m;
}

scene::Mask rect_mask(int h, int w, int top, int left, int height, int width) {
  scene::Mask m(h, w);
  for (int r = top; r < top + height; ++r)
    for (int c = left; c < left + width; ++c) m.set(r, c, 1);
  return m;
}

scene::FeatureMap constant_fmap(int cells, int d_v, double value) {
  scene::FeatureMap f;
  f.h_cells = f.w_cells = cells;
  f.d_v = d_v;
  f.patch = 14;
  f.grid.assign(static_cast<size_t>(cells) * cells * d_v, value);
  return f;
}

}  // namespace

TEST_CASE("crop geometry reproduces the worked fixtures") {
  ArtConfig cfg;
  cfg.pad = 0;

  auto m1 = worked_mask();
  REQUIRE(m1.count() == 490);
  REQUIRE(scene::tight_bbox(m1) == std::array<int, 4>{0, 0, 21, 35});
  auto g1 = compute_crop_geometry(m1, cfg);
  CHECK(g1.s == 2);
  CHECK(g1.h_r == 42);
  CHECK(g1.w_r == 70);

  auto m2 = rect_mask(60, 60, 0, 0, 40, 49);
  REQUIRE(m2.count() == 1960);  // K * P^2
  auto g2 = compute_crop_geometry(m2, cfg);
  CHECK(g2.s == 1);

  auto m3 = rect_mask(60, 60, 10, 10, 4, 5);
  REQUIRE(m3.count() == 20);
  auto g3 = compute_crop_geometry(m3, cfg);  // ceil(sqrt(98)) = 10, capped at 8
  CHECK(g3.s == 8);

  scene::Mask empty(10, 10);
  CHECK_THROWS_AS(compute_crop_geometry(empty, cfg), EmptyRegionError);
}

TEST_CASE("kmeans fixtures") {
  Tensor pts({4, 2}, {0, 0, 2, 0, 0, 2, 2, 2});
  auto r1 = kmeans(pts, 1, 10, 1);
  CHECK(r1.centroids.at(0, 0) == doctest::Approx(1.0));
  CHECK(r1.centroids.at(0, 1) == doctest::Approx(1.0));

  Tensor pts2({3, 2}, {0, 0, 5, 0, 0, 5});
  auto r2 = kmeans(pts2, 3, 10, 7);
  CHECK(r2.inertia.back() == doctest::Approx(0.0));
  std::vector<int> seen(3, 0);
  for (int a : r2.assignment) seen[a]++;
  CHECK(seen == std::vector<int>{1, 1, 1});

  // two well-separated blobs: centroids land on the blob means
  Rng rng(3);
  std::vector<double> data;
  for (int i = 0; i < 20; ++i) {
    data.push_back(rng.uniform(-0.05, 0.05));
    data.push_back(rng.uniform(-0.05, 0.05));
  }
  for (int i = 0; i < 20; ++i) {
    data.push_back(10 + rng.uniform(-0.05, 0.05));
    data.push_back(10 + rng.uniform(-0.05, 0.05));
  }
  Tensor blobs({40, 2}, data);
  auto r3 = kmeans(blobs, 2, 20, 11);
  // brute-force means per side
  double m0x = 0, m0y = 0, m1x = 0, m1y = 0;
  for (int i = 0; i < 20; ++i) {
    m0x += blobs.at(i, 0) / 20;
    m0y += blobs.at(i, 1) / 20;
    m1x += blobs.at(20 + i, 0) / 20;
    m1y += blobs.at(20 + i, 1) / 20;
  }
  const bool zero_first = r3.centroids.at(0, 0) < 5;
  const int lo = zero_first ? 0 : 1, hi = zero_first ? 1 : 0;
  CHECK(std::fabs(r3.centroids.at(lo, 0) - m0x) < 1e-6);
  CHECK(std::fabs(r3.centroids.at(lo, 1) - m0y) < 1e-6);
  CHECK(std::fabs(r3.centroids.at(hi, 0) - m1x) < 1e-6);
  CHECK(std::fabs(r3.centroids.at(hi, 1) - m1y) < 1e-6);

  CHECK_THROWS_AS(kmeans(Tensor({2, 2}), 3, 5, 1), ShapeError);
}

TEST_CASE("kmeans inertia is monotonically non-increasing") {
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 8 + static_cast<int>(rng.below(40));
    Tensor pts({n, 3});
    for (auto& v : pts.data) v = rng.uniform(-2, 2);
    auto res = kmeans(pts, 1 + static_cast<int>(rng.below(5)), 15, rng.next());
    for (size_t i = 1; i < res.inertia.size(); ++i)
      CHECK(res.inertia[i] <= res.inertia[i - 1] + 1e-12);
  }
}

TEST_CASE("tokenize: full-image mask keeps every cell and yields exactly K valid tokens") {
  ArtConfig cfg;
  Rng rng(5);
  ParamSet ps;
  add_art_params(ps, cfg, rng);
  auto fmap = constant_fmap(8, cfg.d_v, 0.5);
  scene::Mask mask = rect_mask(112, 112, 0, 0, 112, 112);
  Graph g;
  TokenizeDebug dbg;
  auto toks = tokenize_region(g, fmap, mask, cfg, ps, 42, &dbg);
  CHECK(dbg.geometry.s == 1);
  CHECK(dbg.kept_cells.size() == 64);  // all 8x8 cells
  CHECK(toks.valid_count() == cfg.K);
  CHECK(toks.tokens->value.rows() == cfg.K);
  CHECK(toks.tokens->value.cols() == cfg.d_v);
}

TEST_CASE("tokenize: constant features with a zeroed position table give K equal tokens") {
  ArtConfig cfg;
  Rng rng(5);
  ParamSet ps;
  add_art_params(ps, cfg, rng);
  for (auto& v : ps.value("art.pos").data) v = 0.0;
  auto fmap = constant_fmap(8, cfg.d_v, 0.25);
  scene::Mask mask = rect_mask(112, 112, 0, 0, 112, 112);
  Graph g;
  auto toks = tokenize_region(g, fmap, mask, cfg, ps, 9);
  REQUIRE(toks.valid_count() == cfg.K);
  for (int r = 1; r < cfg.K; ++r)
    for (int c = 0; c < cfg.d_v; ++c)
      CHECK(toks.tokens->value.at(r, c) == doctest::Approx(toks.tokens->value.at(0, c)));
}

TEST_CASE("tokenize: invalid slots are exactly zero and output is deterministic") {
  ArtConfig cfg;
  Rng rng(6);
  ParamSet ps;
  add_art_params(ps, cfg, rng);
  auto fmap = constant_fmap(8, cfg.d_v, 0.0);
  Rng frng(8);
  for (auto& v : fmap.grid) v = frng.uniform(-1, 1);
  scene::Mask mask = rect_mask(112, 112, 40, 30, 18, 22);  // small region -> few kept cells

  Graph g1;
  auto t1 = tokenize_region(g1, fmap, mask, cfg, ps, 77);
  Graph g2;
  auto t2 = tokenize_region(g2, fmap, mask, cfg, ps, 77);
  CHECK(t1.tokens->value.data == t2.tokens->value.data);
  CHECK(t1.validity == t2.validity);
  for (int r = 0; r < cfg.K; ++r)
    if (!t1.validity[r])
      for (int c = 0; c < cfg.d_v; ++c) CHECK(t1.tokens->value.at(r, c) == 0.0);
}

TEST_CASE("kept-cell count stays within [K/2, 8K] for uncapped scales") {
  ArtConfig cfg;
  cfg.s_max = 1000;  // uncapped
  Rng prng(2);
  ParamSet ps;
  add_art_params(ps, cfg, prng);
  auto fmap = constant_fmap(8, cfg.d_v, 0.1);

  Rng rng(123);
  for (int trial = 0; trial < 60; ++trial) {
    scene::Mask mask(112, 112);
    const bool ellipse = rng.below(2) == 0;
    const int h = 14 + static_cast<int>(rng.below(70));
    const int w = std::max<int>(14, static_cast<int>((196 + rng.below(4000)) / h));
    const int top = static_cast<int>(rng.below(112 - h));
    const int left = static_cast<int>(rng.below(112 - std::min(w, 111)));
    if (ellipse) {
      const double cy = top + h / 2.0, cx = left + w / 2.0;
      for (int r = 0; r < 112; ++r)
        for (int c = 0; c < 112; ++c) {
          const double dy = (r + 0.5 - cy) / (h / 2.0);
          const double dx = (c + 0.5 - cx) / (w / 2.0);
          if (dy * dy + dx * dx <= 1.0) mask.set(r, c, 1);
        }
    } else {
      for (int r = top; r < std::min(112, top + h); ++r)
        for (int c = left; c < std::min(112, left + w); ++c) mask.set(r, c, 1);
    }
    if (mask.count() < cfg.P * cfg.P) continue;
    Graph g;
    TokenizeDebug dbg;
    tokenize_region(g, fmap, mask, cfg, ps, rng.next(), &dbg);
    CAPTURE(trial);
    CHECK(dbg.kept_cells.size() >= static_cast<size_t>(cfg.K / 2));
    CHECK(dbg.kept_cells.size() <= static_cast<size_t>(8 * cfg.K));
  }
}
