#include "xview/relations.hpp"

#include <cmath>

namespace xview::scene {

namespace {
constexpr double kMinColumnSeparation = 1.0;  // px; closer pairs have no left/right order
}

RelationRecords geometric_relations(const Scene& scene) {
  RelationRecords rec;
  const int nviews = static_cast<int>(scene.views.size());

  for (int v = 0; v < nviews; ++v) {
    const auto& list = scene.projections[v];
    for (const auto& p : list) rec.completeness.push_back({v, p.track_id, p.visible_fraction});

    if (list.size() >= 2) {
      for (size_t i = 0; i < list.size(); ++i) {
        double best = 1e300;
        int64_t best_track = -1;
        for (size_t j = 0; j < list.size(); ++j) {
          if (i == j) continue;
          const double dr = list[i].center_row - list[j].center_row;
          const double dc = list[i].center_col - list[j].center_col;
          const double d = std::sqrt(dr * dr + dc * dc);
          if (d < best || (d == best && list[j].track_id < best_track)) {
            best = d;
            best_track = list[j].track_id;
          }
        }
        rec.nearest.push_back({v, list[i].track_id, best_track});
      }
    }

    for (size_t i = 0; i < list.size(); ++i)
      for (size_t j = i + 1; j < list.size(); ++j) {
        const double dc = list[i].center_col - list[j].center_col;
        if (std::fabs(dc) >= kMinColumnSeparation) {
          if (dc < 0)
            rec.left_right.push_back({v, list[i].track_id, list[j].track_id});
          else
            rec.left_right.push_back({v, list[j].track_id, list[i].track_id});
        }
        if (list[i].mean_depth != list[j].mean_depth) {
          if (list[i].mean_depth < list[j].mean_depth)
            rec.depth.push_back({v, list[i].track_id, list[j].track_id});
          else
            rec.depth.push_back({v, list[j].track_id, list[i].track_id});
        }
      }
  }

  for (int a = 0; a < nviews; ++a)
    for (int b = 0; b < nviews; ++b) {
      if (a == b) continue;
      for (const auto& pa : scene.projections[a]) {
        const int jb = scene.find_projection(b, pa.track_id);
        if (jb < 0) continue;
        const auto& pb = scene.projections[b][jb];
        if (pa.unoccluded_pixels > 0)
          rec.scale.push_back({a, b, pa.track_id,
                               static_cast<double>(pb.unoccluded_pixels) / pa.unoccluded_pixels});
        const double dr = pb.center_row - pa.center_row;
        const double dc = pb.center_col - pa.center_col;
        rec.displacement.push_back({a, b, pa.track_id, std::sqrt(dr * dr + dc * dc)});
      }
    }
  return rec;
}

std::optional<int64_t> RelationRecords::nearest_of(int view, int64_t track) const {
  for (const auto& n : nearest)
    if (n.view == view && n.track == track) return n.neighbour;
  return std::nullopt;
}

std::optional<double> RelationRecords::scale_ratio(int view_a, int view_b, int64_t track) const {
  for (const auto& s : scale)
    if (s.view_a == view_a && s.view_b == view_b && s.track == track) return s.ratio;
  return std::nullopt;
}

std::optional<bool> RelationRecords::left_of(int view, int64_t a, int64_t b) const {
  for (const auto& lr : left_right) {
    if (lr.view != view) continue;
    if (lr.left == a && lr.right == b) return true;
    if (lr.left == b && lr.right == a) return false;
  }
  return std::nullopt;
}

std::optional<bool> RelationRecords::lr_flipped(int view_a, int view_b, int64_t a,
                                                int64_t b) const {
  const auto in_a = left_of(view_a, a, b);
  const auto in_b = left_of(view_b, a, b);
  if (!in_a || !in_b) return std::nullopt;
  return *in_a != *in_b;
}

std::optional<double> RelationRecords::displacement_px(int view_a, int view_b,
                                                       int64_t track) const {
  for (const auto& d : displacement)
    if (d.view_a == view_a && d.view_b == view_b && d.track == track) return d.pixels;
  return std::nullopt;
}

std::optional<bool> RelationRecords::nearer_than(int view, int64_t a, int64_t b) const {
  for (const auto& d : depth) {
    if (d.view != view) continue;
    if (d.nearer == a && d.farther == b) return true;
    if (d.nearer == b && d.farther == a) return false;
  }
  return std::nullopt;
}

}  // namespace xview::scene
