#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "xview/scene.hpp"

namespace xview::scene {

// Relation records derived from a fully rendered scene; undefined relations
// are omitted rather than fabricated.
struct RelationRecords {
  struct Nearest {
    int view;
    int64_t track;
    int64_t neighbour;  // by 2D centroid distance, ties to lower track id
  };
  struct ScaleRatio {
    int view_a, view_b;
    int64_t track;
    double ratio;  // footprint_b / footprint_a (pre-occlusion pixels)
  };
  struct Completeness {
    int view;
    int64_t track;
    double visible_fraction;
  };
  struct LeftRight {
    int view;
    int64_t left, right;  // centroid columns separated by >= 1 px
  };
  struct Displacement {
    int view_a, view_b;
    int64_t track;
    double pixels;  // centroid movement between the two views
  };
  struct DepthOrder {
    int view;
    int64_t nearer, farther;
  };

  std::vector<Nearest> nearest;
  std::vector<ScaleRatio> scale;
  std::vector<Completeness> completeness;
  std::vector<LeftRight> left_right;
  std::vector<Displacement> displacement;
  std::vector<DepthOrder> depth;

  std::optional<int64_t> nearest_of(int view, int64_t track) const;
  std::optional<double> scale_ratio(int view_a, int view_b, int64_t track) const;
  std::optional<bool> left_of(int view, int64_t a, int64_t b) const;
  std::optional<bool> lr_flipped(int view_a, int view_b, int64_t a, int64_t b) const;
  std::optional<double> displacement_px(int view_a, int view_b, int64_t track) const;
  std::optional<bool> nearer_than(int view, int64_t a, int64_t b) const;
};

RelationRecords geometric_relations(const Scene& scene);

}  // namespace xview::scene
