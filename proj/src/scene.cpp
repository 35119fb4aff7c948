#include "xview/scene.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "xview/errors.hpp"

namespace xview::scene {

std::array<int, 4> tight_bbox(const Mask& m) {
  int t = m.h, l = m.w, b = 0, r = 0;
  for (int i = 0; i < m.h; ++i)
    for (int j = 0; j < m.w; ++j)
      if (m.at(i, j)) {
        t = std::min(t, i);
        l = std::min(l, j);
        b = std::max(b, i + 1);
        r = std::max(r, j + 1);
      }
  if (b <= t) return {0, 0, 0, 0};
  return {t, l, b, r};
}

int Scene::find_projection(int view, int64_t track) const {
  const auto& list = projections[view];
  for (size_t i = 0; i < list.size(); ++i)
    if (list[i].track_id == track) return static_cast<int>(i);
  return -1;
}

const ObjectInstance* Scene::find_object(int64_t track) const {
  for (const auto& o : objects)
    if (o.track_id == track) return &o;
  return nullptr;
}

bool Scene::in_contact(int64_t a, int64_t b) const {
  for (const auto& [x, y] : contact_pairs)
    if ((x == a && y == b) || (x == b && y == a)) return true;
  return false;
}

bool Scene::visually_overlapping(int view, int64_t a, int64_t b) const {
  for (const auto& [v, x, y] : overlap_pairs)
    if (v == view && ((x == a && y == b) || (x == b && y == a))) return true;
  return false;
}

namespace {

struct P2 {
  double x, y;  // x = col, y = row
};

// Andrew monotone chain; returns CCW hull.
std::vector<P2> convex_hull(std::vector<P2> pts) {
  std::sort(pts.begin(), pts.end(), [](const P2& a, const P2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const P2& a, const P2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  const int n = static_cast<int>(pts.size());
  if (n <= 2) return pts;
  auto cross = [](const P2& o, const P2& a, const P2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<P2> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) k--;
    hull[k++] = pts[i];
  }
  for (int i = n - 2, t = k + 1; i >= 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) k--;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

Mask rasterize_convex(const std::vector<P2>& hull, int h, int w) {
  Mask m(h, w);
  if (hull.size() < 3) {
    // degenerate footprint: mark covered pixel centers along the segment/point
    for (const auto& p : hull) {
      const int r = static_cast<int>(std::floor(p.y));
      const int c = static_cast<int>(std::floor(p.x));
      if (r >= 0 && r < h && c >= 0 && c < w) m.set(r, c, 1);
    }
    return m;
  }
  double ymin = 1e300, ymax = -1e300;
  for (const auto& p : hull) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int r0 = std::max(0, static_cast<int>(std::ceil(ymin - 0.5)));
  const int r1 = std::min(h - 1, static_cast<int>(std::floor(ymax - 0.5)));
  const int n = static_cast<int>(hull.size());
  for (int r = r0; r <= r1; ++r) {
    const double y = r + 0.5;
    double xlo = 1e300, xhi = -1e300;
    for (int i = 0; i < n; ++i) {
      const P2& a = hull[i];
      const P2& b = hull[(i + 1) % n];
      if (a.y == b.y) continue;
      const double tmin = std::min(a.y, b.y), tmax = std::max(a.y, b.y);
      if (y < tmin || y > tmax) continue;
      const double x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
    }
    if (xlo > xhi) continue;
    const int c0 = std::max(0, static_cast<int>(std::ceil(xlo - 0.5)));
    const int c1 = std::min(w - 1, static_cast<int>(std::floor(xhi - 0.5)));
    for (int c = c0; c <= c1; ++c) m.set(r, c, 1);
  }
  return m;
}

void fill_centroid(ProjectedInstance& p) {
  double sr = 0, sc = 0;
  int n = 0;
  for (int i = 0; i < p.mask.h; ++i)
    for (int j = 0; j < p.mask.w; ++j)
      if (p.mask.at(i, j)) {
        sr += i + 0.5;
        sc += j + 0.5;
        n++;
      }
  p.center_row = n ? sr / n : 0.0;
  p.center_col = n ? sc / n : 0.0;
}

}  // namespace

ProjectedInstance project_object(const CameraView& view, const ObjectInstance& obj) {
  ProjectedInstance p;
  p.track_id = obj.track_id;
  p.mask = Mask(view.image_h, view.image_w);

  std::vector<P2> pts;
  pts.reserve(8);
  bool in_front = true;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 offset{(corner & 1) ? obj.half_extents.x : -obj.half_extents.x,
                      (corner & 2) ? obj.half_extents.y : -obj.half_extents.y,
                      (corner & 4) ? obj.half_extents.z : -obj.half_extents.z};
    const Vec3 cam = view.to_camera(obj.center + offset);
    if (cam.z <= 1e-9) {
      in_front = false;
      break;
    }
    const auto rc = view.project(cam);
    pts.push_back({rc[1], rc[0]});
  }
  p.mean_depth = view.to_camera(obj.center).z;
  if (!in_front || p.mean_depth <= 0.0) {
    p.visible_fraction = 0.0;
    return p;
  }
  p.mask = rasterize_convex(convex_hull(std::move(pts)), view.image_h, view.image_w);
  p.unoccluded_pixels = p.mask.count();
  p.visible_fraction = p.unoccluded_pixels > 0 ? 1.0 : 0.0;
  p.bbox = tight_bbox(p.mask);
  fill_centroid(p);
  return p;
}

std::vector<ProjectedInstance> resolve_occlusion(std::vector<ProjectedInstance> pre) {
  if (pre.empty()) return pre;
  const int h = pre[0].mask.h, w = pre[0].mask.w;
  const int n = static_cast<int>(pre.size());
  std::vector<std::vector<int>> stolen(n, std::vector<int>(n, 0));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      int winner = -1;
      for (int i = 0; i < n; ++i) {
        if (!pre[i].mask.at(r, c)) continue;
        if (winner < 0 || pre[i].mean_depth < pre[winner].mean_depth ||
            (pre[i].mean_depth == pre[winner].mean_depth &&
             pre[i].track_id < pre[winner].track_id))
          winner = i;
      }
      if (winner < 0) continue;
      for (int i = 0; i < n; ++i) {
        if (i == winner || !pre[i].mask.at(r, c)) continue;
        pre[i].mask.set(r, c, 0);
        stolen[i][winner]++;
      }
    }
  for (int i = 0; i < n; ++i) {
    auto& p = pre[i];
    const int visible = p.mask.count();
    p.visible_fraction = p.unoccluded_pixels > 0
                             ? static_cast<double>(visible) / p.unoccluded_pixels
                             : 0.0;
    p.occluders.clear();
    for (int j = 0; j < n; ++j)
      if (stolen[i][j] > 0) p.occluders.push_back({pre[j].track_id, stolen[i][j]});
    std::sort(p.occluders.begin(), p.occluders.end(),
              [](const OccluderStat& a, const OccluderStat& b) { return a.track_id < b.track_id; });
    p.bbox = tight_bbox(p.mask);
    fill_centroid(p);
  }
  return pre;
}

Scene compose_scene(int64_t scene_id, uint64_t seed, std::vector<ObjectInstance> objects,
                    std::vector<CameraView> views, int min_visible_pixels) {
  Scene s;
  s.scene_id = scene_id;
  s.seed = seed;
  std::sort(objects.begin(), objects.end(),
            [](const ObjectInstance& a, const ObjectInstance& b) { return a.track_id < b.track_id; });
  s.objects = std::move(objects);
  s.views = std::move(views);
  s.projections.resize(s.views.size());

  for (size_t v = 0; v < s.views.size(); ++v) {
    std::vector<ProjectedInstance> pre;
    pre.reserve(s.objects.size());
    for (const auto& obj : s.objects) pre.push_back(project_object(s.views[v], obj));
    for (size_t i = 0; i < pre.size(); ++i)
      for (size_t j = i + 1; j < pre.size(); ++j)
        if (pre[i].unoccluded_pixels > 0 && pre[j].unoccluded_pixels > 0 &&
            pre[i].mask.intersects(pre[j].mask))
          s.overlap_pairs.emplace_back(static_cast<int>(v), pre[i].track_id, pre[j].track_id);
    auto resolved = resolve_occlusion(std::move(pre));
    for (auto& p : resolved)
      if (p.mask.count() >= min_visible_pixels) s.projections[v].push_back(std::move(p));
  }

  const int nviews = static_cast<int>(s.views.size());
  for (int a = 0; a < nviews; ++a)
    for (int b = 0; b < nviews; ++b) {
      if (a == b) continue;
      for (size_t i = 0; i < s.projections[a].size(); ++i) {
        const int j = s.find_projection(b, s.projections[a][i].track_id);
        if (j >= 0)
          s.correspondences.push_back({static_cast<int>(i), a, j, b});
      }
    }

  for (size_t i = 0; i < s.objects.size(); ++i)
    for (size_t j = i + 1; j < s.objects.size(); ++j) {
      const auto& A = s.objects[i];
      const auto& B = s.objects[j];
      const double ox = std::min(A.center.x + A.half_extents.x, B.center.x + B.half_extents.x) -
                        std::max(A.center.x - A.half_extents.x, B.center.x - B.half_extents.x);
      const double oy = std::min(A.center.y + A.half_extents.y, B.center.y + B.half_extents.y) -
                        std::max(A.center.y - A.half_extents.y, B.center.y - B.half_extents.y);
      const double oz = std::min(A.center.z + A.half_extents.z, B.center.z + B.half_extents.z) -
                        std::max(A.center.z - A.half_extents.z, B.center.z - B.half_extents.z);
      if (ox >= -1e-6 && oy >= -1e-6 && oz >= -1e-6)
        s.contact_pairs.emplace_back(A.track_id, B.track_id);
    }
  return s;
}

namespace {

std::vector<double> sample_unit_vector(int d, Rng& rng) {
  std::vector<double> v(d);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& x : v) {
      x = rng.gaussian();
      n2 += x * x;
    }
  } while (n2 < 1e-12);
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

const char* kCategories[] = {"box", "crate", "bin", "block", "case", "brick"};

}  // namespace

Scene generate_scene(const SceneConfig& cfg, uint64_t seed, int64_t scene_id) {
  if (cfg.views < 2) throw ConfigError("scene needs at least 2 views");
  if (cfg.image_h % cfg.patch != 0 || cfg.image_w % cfg.patch != 0)
    throw ConfigError("image size must be a multiple of the patch size");
  if (cfg.min_objects < 0 || cfg.max_objects < cfg.min_objects)
    throw ConfigError("bad object count range");

  Rng rng(mix_seed(seed, 0x5eede5c3u));
  const int count =
      cfg.min_objects + static_cast<int>(rng.below(cfg.max_objects - cfg.min_objects + 1));

  std::vector<int> perm(cfg.d_app);
  for (int i = 0; i < cfg.d_app; ++i) perm[i] = i;
  if (cfg.appearance == SceneConfig::Appearance::kOrthonormal) {
    if (count > cfg.d_app)
      throw GenerationError("orthonormal appearance needs object count <= d_app");
    for (int i = 0; i < cfg.d_app; ++i) {
      const int j = i + static_cast<int>(rng.below(cfg.d_app - i));
      std::swap(perm[i], perm[j]);
    }
  }

  std::vector<ObjectInstance> objects;
  std::vector<std::vector<double>> category_base(std::size(kCategories));
  for (int i = 0; i < count; ++i) {
    ObjectInstance obj;
    obj.track_id = i + 1;
    const size_t cat = rng.below(std::size(kCategories));
    obj.category = kCategories[cat];
    if (cfg.appearance == SceneConfig::Appearance::kOrthonormal) {
      obj.appearance.assign(cfg.d_app, 0.0);
      obj.appearance[perm[i]] = rng.below(2) ? 1.0 : -1.0;
    } else {
      if (category_base[cat].empty()) category_base[cat] = sample_unit_vector(cfg.d_app, rng);
      obj.appearance = sample_unit_vector(cfg.d_app, rng);
      double n2 = 0.0;
      for (int k = 0; k < cfg.d_app; ++k) {
        obj.appearance[k] = category_base[cat][k] + cfg.category_spread * obj.appearance[k];
        n2 += obj.appearance[k] * obj.appearance[k];
      }
      const double inv = 1.0 / std::sqrt(n2);
      for (auto& v : obj.appearance) v *= inv;
    }
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_place_retries && !placed; ++attempt) {
      obj.half_extents = {rng.uniform(cfg.min_half, cfg.max_half),
                          rng.uniform(cfg.min_half, cfg.max_half),
                          rng.uniform(cfg.min_half, cfg.max_half)};
      obj.center = {rng.uniform(-cfg.world_xy, cfg.world_xy),
                    rng.uniform(-cfg.world_xy, cfg.world_xy),
                    rng.uniform(-cfg.world_z, cfg.world_z)};
      placed = true;
      for (const auto& other : objects) {
        const double ox =
            std::min(obj.center.x + obj.half_extents.x, other.center.x + other.half_extents.x) -
            std::max(obj.center.x - obj.half_extents.x, other.center.x - other.half_extents.x);
        const double oy =
            std::min(obj.center.y + obj.half_extents.y, other.center.y + other.half_extents.y) -
            std::max(obj.center.y - obj.half_extents.y, other.center.y - other.half_extents.y);
        const double oz =
            std::min(obj.center.z + obj.half_extents.z, other.center.z + other.half_extents.z) -
            std::max(obj.center.z - obj.half_extents.z, other.center.z - other.half_extents.z);
        if (ox > 0 && oy > 0 && oz > 0 && std::min({ox, oy, oz}) > cfg.overlap_budget) {
          placed = false;
          break;
        }
      }
    }
    if (!placed)
      throw GenerationError("object placement failed after " +
                            std::to_string(cfg.max_place_retries) + " retries");
    objects.push_back(std::move(obj));
  }

  std::vector<CameraView> views;
  for (int v = 0; v < cfg.views; ++v) {
    Vec3 dir;
    do {
      do {
        dir = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      } while (dir.norm() < 0.2 || dir.norm() > 1.0);
      dir = dir.normalized();
    } while (std::fabs(dir.z) > cfg.cam_z_max);
    const Vec3 pos = dir * rng.uniform(cfg.cam_dist_min, cfg.cam_dist_max);
    const Vec3 target{rng.uniform(-cfg.look_jitter, cfg.look_jitter),
                      rng.uniform(-cfg.look_jitter, cfg.look_jitter),
                      rng.uniform(-cfg.look_jitter, cfg.look_jitter) * 0.5};
    views.push_back(look_at_camera(v, pos, target, rng.uniform(cfg.focal_min, cfg.focal_max),
                                   cfg.image_h, cfg.image_w));
  }

  return compose_scene(scene_id, seed, std::move(objects), std::move(views),
                       cfg.min_visible_pixels);
}

EncoderBasis make_encoder_basis(const EncoderConfig& cfg, int d_app) {
  EncoderBasis basis;
  basis.d_v = cfg.d_v;
  basis.d_app = d_app;
  basis.d_nuisance = std::min(cfg.d_v - d_app, cfg.d_v / 2);
  if (basis.d_nuisance < 0) throw ConfigError("encoder width smaller than appearance width");
  const int total = d_app + basis.d_nuisance;
  if (total > cfg.d_v) throw ConfigError("encoder basis exceeds feature width");

  // Gram-Schmidt over seeded raw vectors: exactly orthonormal columns,
  // no transcendentals involved.
  Rng rng(mix_seed(cfg.lift_seed, 0x11f7u));
  basis.columns.assign(static_cast<size_t>(total) * cfg.d_v, 0.0);
  for (int k = 0; k < total; ++k) {
    double* col = basis.columns.data() + static_cast<size_t>(k) * cfg.d_v;
    while (true) {
      for (int i = 0; i < cfg.d_v; ++i) col[i] = rng.uniform(-1, 1);
      for (int p = 0; p < k; ++p) {
        const double* prev = basis.columns.data() + static_cast<size_t>(p) * cfg.d_v;
        double dot = 0;
        for (int i = 0; i < cfg.d_v; ++i) dot += col[i] * prev[i];
        for (int i = 0; i < cfg.d_v; ++i) col[i] -= dot * prev[i];
      }
      double n2 = 0;
      for (int i = 0; i < cfg.d_v; ++i) n2 += col[i] * col[i];
      if (n2 > 1e-8) {
        const double inv = 1.0 / std::sqrt(n2);
        for (int i = 0; i < cfg.d_v; ++i) col[i] *= inv;
        break;
      }
    }
  }
  return basis;
}

FeatureMap render_feature_map(const CameraView& view, const Scene& scene,
                              const EncoderConfig& cfg) {
  const int patch = cfg.patch;
  FeatureMap fm;
  fm.view_id = view.view_id;
  fm.patch = patch;
  fm.h_cells = view.image_h / patch;
  fm.w_cells = view.image_w / patch;
  fm.d_v = cfg.d_v;
  fm.grid.assign(static_cast<size_t>(fm.h_cells) * fm.w_cells * cfg.d_v, 0.0);

  const int d_app = scene.objects.empty() ? 16 : static_cast<int>(scene.objects[0].appearance.size());
  const EncoderBasis basis = make_encoder_basis(cfg, d_app);

  Rng rng(mix_seed(scene.seed, static_cast<uint64_t>(view.view_id), 0xFEA7u));

  // per-object lifted appearance + view nuisance, drawn in track order
  std::vector<std::vector<double>> object_feature(scene.objects.size());
  for (size_t oi = 0; oi < scene.objects.size(); ++oi) {
    const auto& obj = scene.objects[oi];
    std::vector<double> f(cfg.d_v, 0.0);
    for (int j = 0; j < basis.d_app; ++j) {
      const double* col = basis.appearance_column(j);
      const double a = obj.appearance[j];
      for (int i = 0; i < cfg.d_v; ++i) f[i] += a * col[i];
    }
    if (cfg.noise > 0.0 && basis.d_nuisance > 0) {
      std::vector<double> c(basis.d_nuisance);
      double n2 = 0;
      do {
        n2 = 0;
        for (auto& x : c) {
          x = rng.uniform(-1, 1);
          n2 += x * x;
        }
      } while (n2 < 1e-12);
      const double mag = cfg.noise * (0.5 + 0.5 * rng.uniform());
      const double s = mag / std::sqrt(n2);
      for (int j = 0; j < basis.d_nuisance; ++j) {
        const double* col = basis.nuisance_column(j);
        for (int i = 0; i < cfg.d_v; ++i) f[i] += s * c[j] * col[i];
      }
    }
    object_feature[oi] = std::move(f);
  }

  // visible-owner label per cell center pixel
  const auto& projs = scene.projections[view.view_id];
  for (int r = 0; r < fm.h_cells; ++r)
    for (int c = 0; c < fm.w_cells; ++c) {
      const int pr = r * patch + patch / 2;
      const int pc = c * patch + patch / 2;
      int owner = -1;
      for (const auto& p : projs)
        if (p.mask.at(pr, pc)) {
          for (size_t oi = 0; oi < scene.objects.size(); ++oi)
            if (scene.objects[oi].track_id == p.track_id) owner = static_cast<int>(oi);
          break;
        }
      double* cell = fm.cell(r, c);
      if (owner >= 0) {
        for (int i = 0; i < cfg.d_v; ++i) cell[i] = object_feature[owner][i];
      } else {
        for (int i = 0; i < cfg.d_v; ++i)
          cell[i] = rng.uniform(-cfg.background_scale, cfg.background_scale);
      }
    }
  return fm;
}

}  // namespace xview::scene
