#include "xview/geometry.hpp"

#include "xview/errors.hpp"

namespace xview::scene {

CameraView look_at_camera(int view_id, const Vec3& position, const Vec3& target, double focal,
                          int image_h, int image_w) {
  if (focal <= 0) throw ConfigError("camera focal must be > 0");
  const Vec3 fwd = (target - position).normalized();
  const Vec3 up{0, 0, 1};
  Vec3 right = fwd.cross(up);
  if (right.norm() < 1e-9) throw GenerationError("camera axis parallel to up vector");
  right = right.normalized();
  const Vec3 down = fwd.cross(right);  // right-handed; rows increase downward
  CameraView cam;
  cam.view_id = view_id;
  cam.rotation = Mat3::from_rows(right, down, fwd);
  cam.translation = cam.rotation.apply(position) * -1.0;
  cam.focal = focal;
  cam.image_h = image_h;
  cam.image_w = image_w;
  return cam;
}

}  // namespace xview::scene
