#include "xview/scene_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xview/errors.hpp"

namespace fs = std::filesystem;

namespace xview::scene {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_le64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b, 8);
}

double read_le64(std::istream& is) {
  char b[8];
  is.read(b, 8);
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void write_manifest(std::ostream& os, const Scene& s, const std::vector<FeatureMap>* feats) {
  os << "scene " << s.scene_id << " " << s.seed << "\n";
  for (const auto& o : s.objects) {
    os << "object " << o.track_id << " " << format_double(o.center.x) << " "
       << format_double(o.center.y) << " " << format_double(o.center.z) << " "
       << format_double(o.half_extents.x) << " " << format_double(o.half_extents.y) << " "
       << format_double(o.half_extents.z) << " " << o.category << " " << o.appearance.size();
    for (double a : o.appearance) os << " " << format_double(a);
    os << "\n";
  }
  for (const auto& v : s.views) {
    os << "view " << v.view_id << " " << format_double(v.focal) << " " << v.image_h << " "
       << v.image_w;
    for (double m : v.rotation.m) os << " " << format_double(m);
    os << " " << format_double(v.translation.x) << " " << format_double(v.translation.y) << " "
       << format_double(v.translation.z) << "\n";
  }
  for (size_t vi = 0; vi < s.projections.size(); ++vi)
    for (const auto& p : s.projections[vi]) {
      os << "proj " << vi << " " << p.track_id << " " << p.bbox[0] << " " << p.bbox[1] << " "
         << p.bbox[2] << " " << p.bbox[3] << " " << format_double(p.mean_depth) << " "
         << format_double(p.visible_fraction) << " " << p.unoccluded_pixels << " "
         << format_double(p.center_row) << " " << format_double(p.center_col) << " "
         << p.occluders.size();
      for (const auto& oc : p.occluders) os << " " << oc.track_id << " " << oc.stolen_pixels;
      os << "\n";
    }
  for (const auto& c : s.correspondences)
    os << "corr " << c[0] << " " << c[1] << " " << c[2] << " " << c[3] << "\n";
  for (const auto& [a, b] : s.contact_pairs) os << "contact " << a << " " << b << "\n";
  for (const auto& [v, a, b] : s.overlap_pairs) os << "overlap " << v << " " << a << " " << b << "\n";
  if (feats)
    for (const auto& f : *feats)
      os << "feat " << f.view_id << " " << f.h_cells << " " << f.w_cells << " " << f.d_v << " "
         << f.patch << "\n";
}

std::vector<uint8_t> label_raster(const Scene& s, int view) {
  const auto& cam = s.views[view];
  std::vector<uint8_t> labels(static_cast<size_t>(cam.image_h) * cam.image_w, 0);
  const auto& list = s.projections[view];
  if (list.size() > 254) throw IoError("too many instances for a byte label raster");
  for (size_t i = 0; i < list.size(); ++i)
    for (size_t px = 0; px < list[i].mask.px.size(); ++px)
      if (list[i].mask.px[px]) labels[px] = static_cast<uint8_t>(i + 1);
  return labels;
}

}  // namespace

void save_scene_bundle(const std::string& dir, const Scene& scene,
                       const std::vector<FeatureMap>& features) {
  fs::create_directories(dir);
  {
    std::ofstream mf(fs::path(dir) / "manifest.txt", std::ios::binary);
    if (!mf) throw IoError("cannot write manifest in " + dir);
    write_manifest(mf, scene, &features);
  }
  for (size_t v = 0; v < scene.views.size(); ++v) {
    auto labels = label_raster(scene, static_cast<int>(v));
    std::ofstream lf(fs::path(dir) / ("view" + std::to_string(v) + ".labels"), std::ios::binary);
    lf.write(reinterpret_cast<const char*>(labels.data()), labels.size());
  }
  for (const auto& f : features) {
    std::ofstream ff(fs::path(dir) / ("view" + std::to_string(f.view_id) + ".feat"),
                     std::ios::binary);
    for (double x : f.grid) write_le64(ff, x);
  }
}

SceneBundle load_scene_bundle(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.txt", std::ios::binary);
  if (!mf) throw IoError("cannot read manifest in " + dir);
  SceneBundle bundle;
  Scene& s = bundle.scene;
  struct FeatShape {
    int view, h, w, d, patch;
  };
  std::vector<FeatShape> feat_shapes;

  std::string line;
  while (std::getline(mf, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "scene") {
      ls >> s.scene_id >> s.seed;
    } else if (kind == "object") {
      ObjectInstance o;
      size_t d_app;
      ls >> o.track_id >> o.center.x >> o.center.y >> o.center.z >> o.half_extents.x >>
          o.half_extents.y >> o.half_extents.z >> o.category >> d_app;
      o.appearance.resize(d_app);
      for (auto& a : o.appearance) ls >> a;
      s.objects.push_back(std::move(o));
    } else if (kind == "view") {
      CameraView v;
      ls >> v.view_id >> v.focal >> v.image_h >> v.image_w;
      for (auto& m : v.rotation.m) ls >> m;
      ls >> v.translation.x >> v.translation.y >> v.translation.z;
      s.views.push_back(v);
      s.projections.resize(s.views.size());
    } else if (kind == "proj") {
      int view;
      ProjectedInstance p;
      size_t nocc;
      ls >> view >> p.track_id >> p.bbox[0] >> p.bbox[1] >> p.bbox[2] >> p.bbox[3] >>
          p.mean_depth >> p.visible_fraction >> p.unoccluded_pixels >> p.center_row >>
          p.center_col >> nocc;
      p.occluders.resize(nocc);
      for (auto& oc : p.occluders) ls >> oc.track_id >> oc.stolen_pixels;
      s.projections[view].push_back(std::move(p));
    } else if (kind == "corr") {
      std::array<int, 4> c;
      ls >> c[0] >> c[1] >> c[2] >> c[3];
      s.correspondences.push_back(c);
    } else if (kind == "contact") {
      int64_t a, b;
      ls >> a >> b;
      s.contact_pairs.emplace_back(a, b);
    } else if (kind == "overlap") {
      int v;
      int64_t a, b;
      ls >> v >> a >> b;
      s.overlap_pairs.emplace_back(v, a, b);
    } else if (kind == "feat") {
      FeatShape fsh;
      ls >> fsh.view >> fsh.h >> fsh.w >> fsh.d >> fsh.patch;
      feat_shapes.push_back(fsh);
    } else if (!kind.empty()) {
      throw IoError("unknown manifest record '" + kind + "' in " + dir);
    }
  }

  for (size_t v = 0; v < s.views.size(); ++v) {
    const auto& cam = s.views[v];
    std::ifstream lf(fs::path(dir) / ("view" + std::to_string(v) + ".labels"), std::ios::binary);
    if (!lf) throw IoError("missing label raster for view " + std::to_string(v));
    std::vector<uint8_t> labels(static_cast<size_t>(cam.image_h) * cam.image_w);
    lf.read(reinterpret_cast<char*>(labels.data()), labels.size());
    if (lf.gcount() != static_cast<std::streamsize>(labels.size()))
      throw IoError("truncated label raster for view " + std::to_string(v));
    for (auto& p : s.projections[v]) p.mask = Mask(cam.image_h, cam.image_w);
    for (size_t px = 0; px < labels.size(); ++px) {
      const uint8_t lab = labels[px];
      if (lab == 0) continue;
      if (lab > s.projections[v].size()) throw IoError("label raster references unknown instance");
      s.projections[v][lab - 1].mask.px[px] = 1;
    }
  }

  for (const auto& fsh : feat_shapes) {
    FeatureMap f;
    f.view_id = fsh.view;
    f.h_cells = fsh.h;
    f.w_cells = fsh.w;
    f.d_v = fsh.d;
    f.patch = fsh.patch;
    f.grid.resize(static_cast<size_t>(fsh.h) * fsh.w * fsh.d);
    std::ifstream ff(fs::path(dir) / ("view" + std::to_string(fsh.view) + ".feat"),
                     std::ios::binary);
    if (!ff) throw IoError("missing feature blob for view " + std::to_string(fsh.view));
    for (auto& x : f.grid) x = read_le64(ff);
    if (!ff) throw IoError("truncated feature blob for view " + std::to_string(fsh.view));
    bundle.features.push_back(std::move(f));
  }
  return bundle;
}

std::vector<uint8_t> scene_to_bytes(const Scene& scene) {
  std::ostringstream os(std::ios::binary);
  write_manifest(os, scene, nullptr);
  for (size_t v = 0; v < scene.views.size(); ++v) {
    auto labels = label_raster(scene, static_cast<int>(v));
    os.write(reinterpret_cast<const char*>(labels.data()), labels.size());
  }
  const std::string str = os.str();
  return std::vector<uint8_t>(str.begin(), str.end());
}

}  // namespace xview::scene
