#include "xview/art.hpp"

#include <algorithm>
#include <cmath>

#include "xview/errors.hpp"

namespace xview::art {

using num::Graph;
using num::ParamSet;
using num::Tensor;
using num::Var;

CropGeometry compute_crop_geometry(const scene::Mask& mask, const ArtConfig& cfg) {
  const int area = mask.count();
  if (area == 0) throw EmptyRegionError("compute_crop_geometry on an empty mask");
  auto box = scene::tight_bbox(mask);
  CropGeometry geo;
  geo.bbox_padded = {std::max(0, box[0] - cfg.pad), std::max(0, box[1] - cfg.pad),
                     std::min(mask.h, box[2] + cfg.pad), std::min(mask.w, box[3] + cfg.pad)};
  const double target = static_cast<double>(cfg.K) * cfg.P * cfg.P / area;
  geo.s = std::min(cfg.s_max, static_cast<int>(std::ceil(std::sqrt(target))));
  geo.s = std::max(1, geo.s);
  const int bh = geo.bbox_padded[2] - geo.bbox_padded[0];
  const int bw = geo.bbox_padded[3] - geo.bbox_padded[1];
  geo.h_r = ((bh * geo.s + cfg.P - 1) / cfg.P) * cfg.P;
  geo.w_r = ((bw * geo.s + cfg.P - 1) / cfg.P) * cfg.P;
  return geo;
}

KMeansResult kmeans(const Tensor& points, int k, int iters, uint64_t seed) {
  const int n = points.rows();
  const int d = points.cols();
  if (k < 1 || n < k) throw ShapeError("kmeans: need N >= k >= 1");

  Rng rng(mix_seed(seed, 0x6b6dull));
  KMeansResult res;
  res.centroids = Tensor({k, d});
  res.assignment.assign(n, 0);

  auto dist2 = [&](const double* a, const double* b) {
    double s = 0;
    for (int i = 0; i < d; ++i) {
      const double t = a[i] - b[i];
      s += t * t;
    }
    return s;
  };
  auto point = [&](int i) { return points.data.data() + static_cast<size_t>(i) * d; };
  auto centroid = [&](int c) { return res.centroids.data.data() + static_cast<size_t>(c) * d; };

  // k-means++ seeding
  std::vector<int> chosen;
  chosen.push_back(static_cast<int>(rng.below(n)));
  std::vector<double> best(n, 0.0);
  for (int i = 0; i < n; ++i) best[i] = dist2(point(i), point(chosen[0]));
  while (static_cast<int>(chosen.size()) < k) {
    double total = 0;
    for (double v : best) total += v;
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.below(n));
    } else {
      double u = rng.uniform() * total;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        u -= best[i];
        if (u <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
    for (int i = 0; i < n; ++i) best[i] = std::min(best[i], dist2(point(i), point(pick)));
  }
  for (int c = 0; c < k; ++c) std::copy(point(chosen[c]), point(chosen[c]) + d, centroid(c));

  // re-seed empty clusters to the farthest points
  auto repair_empty = [&](std::vector<int>& counts) {
    std::vector<uint8_t> taken(n, 0);
    for (int c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      double far_d = -1;
      int far_i = -1;
      for (int i = 0; i < n; ++i) {
        if (taken[i] || counts[res.assignment[i]] <= 1) continue;
        const double dd = dist2(point(i), centroid(res.assignment[i]));
        if (dd > far_d) {
          far_d = dd;
          far_i = i;
        }
      }
      if (far_i < 0) continue;
      taken[far_i] = 1;
      counts[res.assignment[far_i]]--;
      counts[c] = 1;
      res.assignment[far_i] = c;
      std::copy(point(far_i), point(far_i) + d, centroid(c));
    }
  };

  std::vector<int> prev_assignment;
  for (int iter = 0; iter < iters; ++iter) {
    double inertia = 0;
    for (int i = 0; i < n; ++i) {
      double bd = dist2(point(i), centroid(0));
      int bc = 0;
      for (int c = 1; c < k; ++c) {
        const double dd = dist2(point(i), centroid(c));
        if (dd < bd) {
          bd = dd;
          bc = c;
        }
      }
      res.assignment[i] = bc;
      inertia += bd;
    }
    res.inertia.push_back(inertia);
    if (res.assignment == prev_assignment) break;
    prev_assignment = res.assignment;

    std::vector<int> counts(k, 0);
    Tensor sums({k, d});
    for (int i = 0; i < n; ++i) {
      counts[res.assignment[i]]++;
      for (int j = 0; j < d; ++j) sums.at(res.assignment[i], j) += point(i)[j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (int j = 0; j < d; ++j) res.centroids.at(c, j) = sums.at(c, j) / counts[c];
    }
    repair_empty(counts);
  }

  // the last assignment pass may have re-emptied reseeded clusters; repair so
  // every centroid keeps at least one member
  std::vector<int> final_counts(k, 0);
  for (int a : res.assignment) final_counts[a]++;
  repair_empty(final_counts);
  return res;
}

void add_art_params(ParamSet& ps, const ArtConfig& cfg, Rng& rng) {
  if (!ps.has("art.pos")) {
    // small-scale init keeps the appearance signal dominant at start
    ps.add("art.pos", num::uniform_init({cfg.pos_grid * cfg.pos_grid, cfg.d_v}, 0.02, rng));
  }
  num::add_mlp_params(ps, "art.proj", cfg.d_v, cfg.mlp_hidden, cfg.d_v, rng);
}

namespace {

struct Sample2D {
  int i0, i1, j0, j1;
  double w00, w01, w10, w11;
};

Sample2D bilinear_taps(double y, double x, int h, int w) {
  y = std::min(std::max(y, 0.0), static_cast<double>(h - 1));
  x = std::min(std::max(x, 0.0), static_cast<double>(w - 1));
  Sample2D s;
  s.i0 = static_cast<int>(std::floor(y));
  s.j0 = static_cast<int>(std::floor(x));
  s.i1 = std::min(s.i0 + 1, h - 1);
  s.j1 = std::min(s.j0 + 1, w - 1);
  const double fy = y - s.i0;
  const double fx = x - s.j0;
  s.w00 = (1 - fy) * (1 - fx);
  s.w01 = (1 - fy) * fx;
  s.w10 = fy * (1 - fx);
  s.w11 = fy * fx;
  return s;
}

}  // namespace

ObjectTokens tokenize_region(Graph& g, const scene::FeatureMap& fmap, const scene::Mask& mask,
                             const ArtConfig& cfg, ParamSet& ps, uint64_t seed,
                             TokenizeDebug* debug) {
  const CropGeometry geo = compute_crop_geometry(mask, cfg);
  const int nh = geo.h_r / cfg.P;
  const int nw = geo.w_r / cfg.P;
  const auto [bt, bl, bb, br] = geo.bbox_padded;
  const double box_h = bb - bt;
  const double box_w = br - bl;

  std::vector<double> cell_feats;
  std::vector<std::vector<num::BilinearTap>> pos_taps;
  std::vector<std::pair<int, int>> kept;
  const int G = cfg.pos_grid;

  for (int i = 0; i < nh; ++i)
    for (int j = 0; j < nw; ++j) {
      const double y_pix = bt + (i + 0.5) * box_h / nh;
      const double x_pix = bl + (j + 0.5) * box_w / nw;

      // identically resized mask; >= 0.5 keeps the cell
      const Sample2D ms = bilinear_taps(y_pix - 0.5, x_pix - 0.5, mask.h, mask.w);
      const double mval = ms.w00 * mask.at(ms.i0, ms.j0) + ms.w01 * mask.at(ms.i0, ms.j1) +
                          ms.w10 * mask.at(ms.i1, ms.j0) + ms.w11 * mask.at(ms.i1, ms.j1);
      if (mval < 0.5) continue;
      kept.emplace_back(i, j);

      const Sample2D fsmp =
          bilinear_taps(y_pix / cfg.P - 0.5, x_pix / cfg.P - 0.5, fmap.h_cells, fmap.w_cells);
      const double* c00 = fmap.cell(fsmp.i0, fsmp.j0);
      const double* c01 = fmap.cell(fsmp.i0, fsmp.j1);
      const double* c10 = fmap.cell(fsmp.i1, fsmp.j0);
      const double* c11 = fmap.cell(fsmp.i1, fsmp.j1);
      for (int dch = 0; dch < fmap.d_v; ++dch)
        cell_feats.push_back(fsmp.w00 * c00[dch] + fsmp.w01 * c01[dch] + fsmp.w10 * c10[dch] +
                             fsmp.w11 * c11[dch]);

      // normalized within-crop coordinates into the G x G learnable table
      const double gy = (i + 0.5) / nh * G - 0.5;
      const double gx = (j + 0.5) / nw * G - 0.5;
      const Sample2D gsmp = bilinear_taps(gy, gx, G, G);
      pos_taps.push_back({{gsmp.i0 * G + gsmp.j0, gsmp.w00},
                          {gsmp.i0 * G + gsmp.j1, gsmp.w01},
                          {gsmp.i1 * G + gsmp.j0, gsmp.w10},
                          {gsmp.i1 * G + gsmp.j1, gsmp.w11}});
    }

  if (debug) {
    debug->geometry = geo;
    debug->kept_cells = kept;
  }
  const int n_kept = static_cast<int>(kept.size());
  if (n_kept == 0) throw EmptyRegionError("tokenize_region: no cells survive the resized mask");

  Var cells = g.constant(Tensor({n_kept, fmap.d_v}, std::move(cell_feats)));
  Var pos = weighted_gather(g, g.param(ps, "art.pos"), std::move(pos_taps));
  Var enriched = add(g, cells, pos);

  const int k = std::min(cfg.K, n_kept);
  auto km = kmeans(enriched->value, k, cfg.kmeans_iters, seed);
  // hard-assignment backward: each centroid spreads its gradient evenly
  // over the cells assigned to it
  Var cent = segment_mean(g, enriched, km.assignment, k);
  Var tok = mlp_forward(g, cent, ps, "art.proj", cfg.mlp_hidden);

  ObjectTokens out;
  if (k < cfg.K) {
    Var zeros = g.constant(Tensor({cfg.K - k, cfg.d_v}));
    out.tokens = concat_rows(g, {tok, zeros});
  } else {
    out.tokens = tok;
  }
  out.validity.assign(cfg.K, 0);
  for (int i = 0; i < k; ++i) out.validity[i] = 1;
  return out;
}

ObjectTokens placeholder_tokens(Graph& g, const ArtConfig& cfg) {
  ObjectTokens out;
  out.tokens = g.constant(Tensor({cfg.K, cfg.d_v}));
  out.validity.assign(cfg.K, 0);
  return out;
}

}  // namespace xview::art
