#pragma once

#include <cstdint>
#include <vector>

#include "xview/blocks.hpp"
#include "xview/graph.hpp"
#include "xview/scene.hpp"

namespace xview::art {

struct ArtConfig {
  int K = 10;          // target token count
  int P = 14;          // patch size
  int pad = 14;        // pixels padded on every side of the tight box
  int s_max = 8;       // scale cap
  int kmeans_iters = 10;
  int pos_grid = 16;   // G
  int d_v = 64;
  int mlp_hidden = 64;
};

struct CropGeometry {
  std::array<int, 4> bbox_padded;  // (t, l, b, r), clamped to the image
  int s = 1;
  int h_r = 0;
  int w_r = 0;
};

// Eq-style crop geometry: s = min(s_max, ceil(sqrt(K P^2 / |m|))), resized
// dims rounded up to multiples of P over the padded box.
CropGeometry compute_crop_geometry(const scene::Mask& mask, const ArtConfig& cfg);

struct KMeansResult {
  num::Tensor centroids;
  std::vector<int> assignment;
  std::vector<double> inertia;  // recorded at each assignment pass
};

// k-means++ seeding, Lloyd iterations, farthest-point reseeding for empty
// clusters. Requires N >= k >= 1.
KMeansResult kmeans(const num::Tensor& points, int k, int iters, uint64_t seed);

struct ObjectTokens {
  num::Var tokens = nullptr;       // K x d_v; invalid slots exactly zero
  std::vector<uint8_t> validity;   // K flags
  int view_id = -1;
  int object_index = -1;
  int64_t track_id = -1;

  int valid_count() const {
    int n = 0;
    for (auto v : validity) n += v ? 1 : 0;
    return n;
  }
};

void add_art_params(num::ParamSet& ps, const ArtConfig& cfg, Rng& rng);

struct TokenizeDebug {
  CropGeometry geometry;
  std::vector<std::pair<int, int>> kept_cells;  // (row, col) in the resized grid
};

// Crop + bilinear resize + learned position embeddings + masked retention +
// k-means + shared MLP projection, padded to K slots.
ObjectTokens tokenize_region(num::Graph& g, const scene::FeatureMap& fmap, const scene::Mask& mask,
                             const ArtConfig& cfg, num::ParamSet& ps, uint64_t seed,
                             TokenizeDebug* debug = nullptr);

ObjectTokens placeholder_tokens(num::Graph& g, const ArtConfig& cfg);

}  // namespace xview::art
