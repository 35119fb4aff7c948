#pragma once

#include <string>
#include <vector>

#include "xview/scene.hpp"

namespace xview::scene {

struct SceneBundle {
  Scene scene;
  std::vector<FeatureMap> features;
};

// On-disk layout per scene directory:
//   manifest.txt   - objects, cameras, kept projections, C, contacts, overlaps
//   view<k>.labels - 1 byte/pixel row-major raster, kept-projection index + 1
//   view<k>.feat   - little-endian 64-bit float grid, shape in the manifest
void save_scene_bundle(const std::string& dir, const Scene& scene,
                       const std::vector<FeatureMap>& features);

SceneBundle load_scene_bundle(const std::string& dir);

// Canonical byte serialization of the full scene state (manifest text plus
// label rasters); used by determinism checks.
std::vector<uint8_t> scene_to_bytes(const Scene& scene);

std::string format_double(double v);  // shortest round-trip text

}  // namespace xview::scene
