#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "xview/relations.hpp"
#include "xview/scene.hpp"
#include "xview/scene_io.hpp"

using namespace xview;
using namespace xview::scene;

namespace {

ObjectInstance make_object(int64_t track, Vec3 center, Vec3 half, int d_app = 16) {
  ObjectInstance o;
  o.track_id = track;
  o.center = center;
  o.half_extents = half;
  o.appearance.assign(d_app, 0.0);
  o.appearance[track % d_app] = 1.0;
  o.category = "box";
  return o;
}

CameraView front_camera(int view_id, double dist = 8.0, double focal = 200.0) {
  return look_at_camera(view_id, {0, -dist, 0}, {0, 0, 0}, focal, 112, 112);
}

}  // namespace

TEST_CASE("on-axis object projects to a mask centered at the principal point") {
  CameraView cam = front_camera(0);
  auto p = project_object(cam, make_object(1, {0, 0, 0}, {0.5, 0.5, 0.5}));
  CHECK(p.mask.count() > 0);
  CHECK(std::fabs(p.center_row - 56.0) < 1.0);
  CHECK(std::fabs(p.center_col - 56.0) < 1.0);
  CHECK(p.visible_fraction == 1.0);
  CHECK(p.mean_depth == doctest::Approx(8.0));
}

TEST_CASE("doubling depth halves projected extent within a pixel") {
  CameraView near_cam = front_camera(0, 6.0);
  CameraView far_cam = front_camera(0, 12.0);
  auto obj = make_object(1, {0, 0, 0}, {0.5, 0.5, 0.5});
  auto pn = project_object(near_cam, obj);
  auto pf = project_object(far_cam, obj);
  const double wn = pn.bbox[3] - pn.bbox[1], wf = pf.bbox[3] - pf.bbox[1];
  const double hn = pn.bbox[2] - pn.bbox[0], hf = pf.bbox[2] - pf.bbox[0];
  CHECK(std::fabs(wn / 2.0 - wf) <= 1.0);
  CHECK(std::fabs(hn / 2.0 - hf) <= 1.0);
}

TEST_CASE("objects behind the camera give an empty mask") {
  CameraView cam = front_camera(0);
  auto p = project_object(cam, make_object(1, {0, -20, 0}, {0.5, 0.5, 0.5}));
  CHECK(p.mask.count() == 0);
  CHECK(p.visible_fraction == 0.0);
}

TEST_CASE("occlusion: disjoint masks stay fully visible") {
  ProjectedInstance a, b;
  a.track_id = 1;
  a.mask = Mask(10, 10);
  a.mask.set(1, 1, 1);
  a.unoccluded_pixels = 1;
  a.mean_depth = 1.0;
  b.track_id = 2;
  b.mask = Mask(10, 10);
  b.mask.set(5, 5, 1);
  b.unoccluded_pixels = 1;
  b.mean_depth = 2.0;
  auto out = resolve_occlusion({a, b});
  CHECK(out[0].visible_fraction == 1.0);
  CHECK(out[1].visible_fraction == 1.0);
  CHECK(out[0].occluders.empty());
  CHECK(out[1].occluders.empty());
}

TEST_CASE("occlusion: full overlap hides the farther instance") {
  ProjectedInstance a, b;
  a.track_id = 1;
  b.track_id = 2;
  a.mask = Mask(8, 8);
  b.mask = Mask(8, 8);
  for (int r = 2; r < 6; ++r)
    for (int c = 2; c < 6; ++c) {
      a.mask.set(r, c, 1);
      b.mask.set(r, c, 1);
    }
  a.unoccluded_pixels = b.unoccluded_pixels = 16;
  a.mean_depth = 1.0;
  b.mean_depth = 3.0;
  auto out = resolve_occlusion({a, b});
  CHECK(out[1].visible_fraction == 0.0);
  CHECK(out[1].mask.count() == 0);
  REQUIRE(out[1].occluders.size() == 1);
  CHECK(out[1].occluders[0].track_id == 1);
  CHECK(out[1].occluders[0].stolen_pixels == 16);
  CHECK(out[0].visible_fraction == 1.0);
}

TEST_CASE("occlusion: 30% partial overlap leaves 0.7 visible") {
  ProjectedInstance a, b;
  a.track_id = 1;
  b.track_id = 2;
  a.mask = Mask(20, 20);
  b.mask = Mask(20, 20);
  // b is a 10x10 block; a covers exactly 30 of its pixels and sits nearer
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) b.mask.set(r + 5, c + 5, 1);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 10; ++c) a.mask.set(r + 5, c + 5, 1);
  a.unoccluded_pixels = 30;
  b.unoccluded_pixels = 100;
  a.mean_depth = 1.0;
  b.mean_depth = 2.0;
  auto out = resolve_occlusion({a, b});
  CHECK(out[1].visible_fraction == doctest::Approx(0.7));
}

TEST_CASE("occlusion: exact depth tie goes to the lower track id") {
  ProjectedInstance a, b;
  a.track_id = 5;
  b.track_id = 2;
  a.mask = Mask(4, 4);
  b.mask = Mask(4, 4);
  a.mask.set(0, 0, 1);
  b.mask.set(0, 0, 1);
  a.unoccluded_pixels = b.unoccluded_pixels = 1;
  a.mean_depth = b.mean_depth = 1.0;
  auto out = resolve_occlusion({a, b});
  CHECK(out[1].mask.count() == 1);  // track 2 wins
  CHECK(out[0].mask.count() == 0);
}

TEST_CASE("one object seen by two identical cameras yields |C| = 2") {
  auto cam0 = front_camera(0);
  auto cam1 = front_camera(1);
  Scene s = compose_scene(7, 7, {make_object(1, {0, 0, 0}, {0.5, 0.5, 0.5})}, {cam0, cam1});
  REQUIRE(s.projections[0].size() == 1);
  REQUIRE(s.projections[1].size() == 1);
  CHECK(s.projections[0][0].visible_fraction == 1.0);
  CHECK(s.correspondences.size() == 2);
}

TEST_CASE("zero objects produce empty projections and empty C") {
  Scene s = compose_scene(1, 1, {}, {front_camera(0), front_camera(1)});
  CHECK(s.projections[0].empty());
  CHECK(s.projections[1].empty());
  CHECK(s.correspondences.empty());
}

TEST_CASE("infeasible placement raises a generation error") {
  SceneConfig cfg;
  cfg.min_objects = 12;
  cfg.max_objects = 12;
  cfg.world_xy = 0.4;
  cfg.world_z = 0.2;
  cfg.min_half = 0.5;
  cfg.max_half = 0.6;
  cfg.overlap_budget = 0.0;
  cfg.max_place_retries = 25;
  CHECK_THROWS_AS(generate_scene(cfg, 3, 0), GenerationError);
}

TEST_CASE("generate_scene is byte-deterministic for a fixed seed") {
  SceneConfig cfg;
  cfg.min_objects = 5;
  cfg.max_objects = 5;
  cfg.views = 3;
  Scene a = generate_scene(cfg, 7, 0);
  Scene b = generate_scene(cfg, 7, 0);
  CHECK(scene_to_bytes(a) == scene_to_bytes(b));
  Scene c = generate_scene(cfg, 8, 0);
  CHECK(scene_to_bytes(a) != scene_to_bytes(c));
}

TEST_CASE("post-occlusion masks are pairwise disjoint and C matches track equality") {
  SceneConfig cfg;
  Scene s = generate_scene(cfg, 42, 0);
  for (size_t v = 0; v < s.views.size(); ++v) {
    const auto& list = s.projections[v];
    int total = 0;
    for (const auto& p : list) total += p.mask.count();
    CHECK(total <= cfg.image_h * cfg.image_w);
    for (size_t i = 0; i < list.size(); ++i)
      for (size_t j = i + 1; j < list.size(); ++j) CHECK(!list[i].mask.intersects(list[j].mask));
  }
  // C is exactly track equality over kept projections across distinct views
  size_t expected = 0;
  for (size_t a = 0; a < s.views.size(); ++a)
    for (size_t b = 0; b < s.views.size(); ++b) {
      if (a == b) continue;
      for (const auto& p : s.projections[a])
        if (s.find_projection(static_cast<int>(b), p.track_id) >= 0) expected++;
    }
  CHECK(s.correspondences.size() == expected);
  for (const auto& c : s.correspondences) {
    CHECK(s.projections[c[1]][c[0]].track_id == s.projections[c[3]][c[2]].track_id);
    CHECK(c[1] != c[3]);
  }
}

TEST_CASE("depth ordering agrees with occlusion winners") {
  SceneConfig cfg;
  Scene s = generate_scene(cfg, 99, 0);
  auto rel = geometric_relations(s);
  for (size_t v = 0; v < s.views.size(); ++v)
    for (const auto& p : s.projections[v])
      for (const auto& oc : p.occluders) {
        auto nearer = rel.nearer_than(static_cast<int>(v), oc.track_id, p.track_id);
        if (nearer) CHECK(*nearer);
      }
}

TEST_CASE("relations: equal depth, A left of B in both views, no flip") {
  auto cam0 = front_camera(0);
  auto cam1 = front_camera(1, 9.0);
  Scene s = compose_scene(1, 1,
                          {make_object(1, {-1.2, 0, 0}, {0.4, 0.4, 0.4}),
                           make_object(2, {1.2, 0, 0}, {0.4, 0.4, 0.4})},
                          {cam0, cam1});
  auto rel = geometric_relations(s);
  auto flip = rel.lr_flipped(0, 1, 1, 2);
  REQUIRE(flip.has_value());
  CHECK(*flip == false);
}

TEST_CASE("relations: mirrored second camera flips every left-right pair") {
  auto cam0 = front_camera(0);
  CameraView mirrored = cam0;
  mirrored.view_id = 1;
  for (int j = 0; j < 3; ++j) mirrored.rotation.m[j] = -mirrored.rotation.m[j];
  mirrored.translation.x = -mirrored.translation.x;
  Scene s = compose_scene(2, 2,
                          {make_object(1, {-1.2, 0, 0}, {0.4, 0.4, 0.4}),
                           make_object(2, {1.2, 0, 0}, {0.4, 0.4, 0.4}),
                           make_object(3, {0, 0.4, 1.0}, {0.3, 0.3, 0.3})},
                          {cam0, mirrored});
  CHECK(mirrored.rotation.orthonormality_defect() < 1e-9);
  auto rel = geometric_relations(s);
  int flips = 0, pairs = 0;
  for (int64_t a = 1; a <= 3; ++a)
    for (int64_t b = a + 1; b <= 3; ++b) {
      auto flip = rel.lr_flipped(0, 1, a, b);
      if (flip.has_value()) {
        pairs++;
        flips += *flip ? 1 : 0;
      }
    }
  CHECK(pairs > 0);
  CHECK(flips == pairs);
}

TEST_CASE("relations: single object emits no nearest-neighbour record") {
  Scene s = compose_scene(3, 3, {make_object(1, {0, 0, 0}, {0.5, 0.5, 0.5})},
                          {front_camera(0), front_camera(1)});
  auto rel = geometric_relations(s);
  CHECK(rel.nearest.empty());
}

TEST_CASE("feature render: zero noise makes object cells equal the lifted appearance") {
  auto cam0 = front_camera(0);
  auto cam1 = look_at_camera(1, {6, -6, 0.5}, {0, 0, 0}, 210, 112, 112);
  Scene s = compose_scene(4, 4, {make_object(1, {0, 0, 0}, {0.6, 0.6, 0.6})}, {cam0, cam1});
  EncoderConfig ecfg;
  ecfg.noise = 0.0;
  auto basis = make_encoder_basis(ecfg, 16);
  std::vector<double> lifted(ecfg.d_v, 0.0);
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < ecfg.d_v; ++i)
      lifted[i] += s.objects[0].appearance[j] * basis.appearance_column(j)[i];

  auto f0 = render_feature_map(cam0, s, ecfg);
  auto f1 = render_feature_map(cam1, s, ecfg);
  int object_cells = 0;
  for (int r = 0; r < f0.h_cells; ++r)
    for (int c = 0; c < f0.w_cells; ++c) {
      const int pr = r * f0.patch + f0.patch / 2;
      const int pc = c * f0.patch + f0.patch / 2;
      if (!s.projections[0][0].mask.at(pr, pc)) continue;
      object_cells++;
      for (int i = 0; i < ecfg.d_v; ++i) CHECK(f0.cell(r, c)[i] == doctest::Approx(lifted[i]));
    }
  CHECK(object_cells > 0);

  // the same object's cells are identical across views at zero noise
  bool found1 = false;
  for (int r = 0; r < f1.h_cells && !found1; ++r)
    for (int c = 0; c < f1.w_cells && !found1; ++c) {
      const int pr = r * f1.patch + f1.patch / 2;
      const int pc = c * f1.patch + f1.patch / 2;
      if (s.projections[1][0].mask.at(pr, pc)) {
        found1 = true;
        for (int i = 0; i < ecfg.d_v; ++i) CHECK(f1.cell(r, c)[i] == doctest::Approx(lifted[i]));
      }
    }
  CHECK(found1);

  // renders are deterministic (background texture included)
  auto f0b = render_feature_map(cam0, s, ecfg);
  CHECK(f0.grid == f0b.grid);
}

TEST_CASE("encoder basis columns are orthonormal") {
  EncoderConfig ecfg;
  auto basis = make_encoder_basis(ecfg, 16);
  const int total = basis.d_app + basis.d_nuisance;
  for (int a = 0; a < total; ++a)
    for (int b = a; b < total; ++b) {
      double dot = 0;
      for (int i = 0; i < basis.d_v; ++i)
        dot += basis.columns[a * basis.d_v + i] * basis.columns[b * basis.d_v + i];
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
    }
}

TEST_CASE("scene bundle round-trips through disk") {
  SceneConfig cfg;
  cfg.min_objects = 4;
  cfg.max_objects = 4;
  Scene s = generate_scene(cfg, 55, 3);
  EncoderConfig ecfg;
  ecfg.noise = 0.1;
  std::vector<FeatureMap> feats;
  for (const auto& v : s.views) feats.push_back(render_feature_map(v, s, ecfg));

  const std::string dir = "test_bundle_tmp/scene_0003";
  save_scene_bundle(dir, s, feats);
  auto loaded = load_scene_bundle(dir);
  CHECK(scene_to_bytes(loaded.scene) == scene_to_bytes(s));
  REQUIRE(loaded.features.size() == feats.size());
  for (size_t i = 0; i < feats.size(); ++i) CHECK(loaded.features[i].grid == feats[i].grid);

  // saving the loaded bundle reproduces identical bytes
  const std::string dir2 = "test_bundle_tmp/scene_copy";
  save_scene_bundle(dir2, loaded.scene, loaded.features);
  auto read_file = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  CHECK(read_file(dir + "/manifest.txt") == read_file(dir2 + "/manifest.txt"));
  CHECK(read_file(dir + "/view0.feat") == read_file(dir2 + "/view0.feat"));
  CHECK(read_file(dir + "/view0.labels") == read_file(dir2 + "/view0.labels"));
  std::filesystem::remove_all("test_bundle_tmp");
}
