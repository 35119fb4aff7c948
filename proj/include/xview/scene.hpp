#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xview/geometry.hpp"
#include "xview/rng.hpp"

namespace xview::scene {

struct Mask {
  int h = 0, w = 0;
  std::vector<uint8_t> px;

  Mask() = default;
  Mask(int h_, int w_) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_, 0) {}
  uint8_t at(int r, int c) const { return px[static_cast<size_t>(r) * w + c]; }
  void set(int r, int c, uint8_t v) { px[static_cast<size_t>(r) * w + c] = v; }
  int count() const {
    int n = 0;
    for (uint8_t v : px) n += v ? 1 : 0;
    return n;
  }
  bool empty() const { return count() == 0; }
  bool intersects(const Mask& o) const {
    for (size_t i = 0; i < px.size(); ++i)
      if (px[i] && o.px[i]) return true;
    return false;
  }
};

// (t, l, b, r): t/l inclusive, b/r exclusive
std::array<int, 4> tight_bbox(const Mask& m);

struct ObjectInstance {
  int64_t track_id = 0;
  Vec3 center;
  Vec3 half_extents;
  std::vector<double> appearance;  // unit norm
  std::string category;
};

struct OccluderStat {
  int64_t track_id;
  int stolen_pixels;
};

struct ProjectedInstance {
  int64_t track_id = 0;
  Mask mask;  // visible pixels after occlusion resolution
  std::array<int, 4> bbox{0, 0, 0, 0};
  double mean_depth = 0.0;
  double visible_fraction = 0.0;
  int unoccluded_pixels = 0;  // pre-occlusion footprint
  std::vector<OccluderStat> occluders;
  double center_row = 0.0, center_col = 0.0;  // visible-mask centroid

  std::vector<int64_t> occluder_ids() const {
    std::vector<int64_t> ids;
    for (const auto& o : occluders) ids.push_back(o.track_id);
    return ids;
  }
};

struct Scene {
  int64_t scene_id = 0;
  uint64_t seed = 0;
  std::vector<ObjectInstance> objects;                     // sorted by track_id
  std::vector<CameraView> views;
  std::vector<std::vector<ProjectedInstance>> projections;  // kept instances, sorted by track_id
  // (i, n, j, n') with i/j indices into the kept per-view lists
  std::vector<std::array<int, 4>> correspondences;
  std::vector<std::pair<int64_t, int64_t>> contact_pairs;           // 3D cuboids touch/intersect
  std::vector<std::tuple<int, int64_t, int64_t>> overlap_pairs;     // pre-occlusion mask overlap

  int find_projection(int view, int64_t track) const;
  const ObjectInstance* find_object(int64_t track) const;
  bool in_contact(int64_t a, int64_t b) const;
  bool visually_overlapping(int view, int64_t a, int64_t b) const;
};

struct SceneConfig {
  int min_objects = 5;
  int max_objects = 8;
  int views = 3;
  int image_h = 224;
  int image_w = 224;
  int patch = 14;
  double world_xy = 2.2;
  double world_z = 0.9;
  double min_half = 0.25;
  double max_half = 0.7;
  double overlap_budget = 0.35;  // allowed penetration depth along the least axis
  int d_app = 16;
  enum class Appearance { kRandomUnit, kOrthonormal };
  Appearance appearance = Appearance::kRandomUnit;
  // same-category objects share a base appearance plus this much individual
  // variation, which is what makes them hard negatives
  double category_spread = 0.35;
  int max_place_retries = 200;
  double cam_dist_min = 7.0;
  double cam_dist_max = 10.0;
  double focal_min = 360.0;
  double focal_max = 480.0;
  double look_jitter = 0.8;
  double cam_z_max = 0.45;  // cap on |direction.z| for camera placement
  int min_visible_pixels = 8;
};

// Pinhole projection of the cuboid footprint, rasterized as a filled convex
// mask. Objects with any corner at/behind the camera yield an empty mask.
ProjectedInstance project_object(const CameraView& view, const ObjectInstance& obj);

// Pixel-wise nearest-depth wins; exact ties go to the lower track id.
std::vector<ProjectedInstance> resolve_occlusion(std::vector<ProjectedInstance> pre);

// Projection + occlusion + visibility filtering + correspondence set over
// explicit objects and cameras. generate_scene samples and delegates here.
Scene compose_scene(int64_t scene_id, uint64_t seed, std::vector<ObjectInstance> objects,
                    std::vector<CameraView> views, int min_visible_pixels = 8);

Scene generate_scene(const SceneConfig& cfg, uint64_t seed, int64_t scene_id = 0);

struct EncoderConfig {
  int d_v = 64;
  int patch = 14;
  double noise = 0.0;            // norm cap for the per-(view,object) perturbation
  double background_scale = 0.1;
  uint64_t lift_seed = 1234;     // frozen lifting map / nuisance subspace
};

struct FeatureMap {
  int view_id = 0;
  int h_cells = 0, w_cells = 0, d_v = 0;
  int patch = 14;
  std::vector<double> grid;  // h*w*d, row-major

  const double* cell(int r, int c) const {
    return grid.data() + (static_cast<size_t>(r) * w_cells + c) * d_v;
  }
  double* cell(int r, int c) {
    return grid.data() + (static_cast<size_t>(r) * w_cells + c) * d_v;
  }
};

// Orthonormal columns lifting appearance vectors into feature space; the
// first d_app columns carry appearance, the following block spans the
// view-nuisance subspace. Frozen, derived from cfg.lift_seed.
struct EncoderBasis {
  int d_v = 0, d_app = 0, d_nuisance = 0;
  std::vector<double> columns;  // (d_app + d_nuisance) stacked d_v-vectors

  const double* appearance_column(int j) const { return columns.data() + static_cast<size_t>(j) * d_v; }
  const double* nuisance_column(int j) const {
    return columns.data() + static_cast<size_t>(d_app + j) * d_v;
  }
};

EncoderBasis make_encoder_basis(const EncoderConfig& cfg, int d_app);

FeatureMap render_feature_map(const CameraView& view, const Scene& scene,
                              const EncoderConfig& cfg);

}  // namespace xview::scene
