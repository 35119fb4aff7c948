#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace xview::scene {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
};

struct Mat3 {
  // row-major
  std::array<double, 9> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return r;
  }
  static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
    Mat3 r;
    r.m = {r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z};
    return r;
  }
  Vec3 row(int i) const { return {m[3 * i], m[3 * i + 1], m[3 * i + 2]}; }
  Vec3 apply(const Vec3& v) const {
    return {row(0).dot(v), row(1).dot(v), row(2).dot(v)};
  }
  double orthonormality_defect() const {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double d = row(i).dot(row(j)) - (i == j ? 1.0 : 0.0);
        worst = std::max(worst, std::fabs(d));
      }
    return worst;
  }
};

struct CameraView {
  int view_id = 0;
  Mat3 rotation = Mat3::identity();  // x_cam = R * x_world + t
  Vec3 translation;
  double focal = 100.0;
  int image_h = 112;
  int image_w = 112;

  Vec3 to_camera(const Vec3& world) const { return rotation.apply(world) + translation; }

  // (row, col) image coordinates; caller checks depth > 0
  std::array<double, 2> project(const Vec3& cam) const {
    return {image_h / 2.0 + focal * cam.y / cam.z, image_w / 2.0 + focal * cam.x / cam.z};
  }
};

// Camera at `position` looking toward `target`, world +z as up hint.
CameraView look_at_camera(int view_id, const Vec3& position, const Vec3& target, double focal,
                          int image_h, int image_w);

}  // namespace xview::scene
