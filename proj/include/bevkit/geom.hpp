// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Camera model, rigid transforms, oriented boxes and the dense feature
// tensor shared by the rest of the library.
//
// Frame convention: camera frame is x-right, y-down, z-forward. Pixel (0,0)
// is the center of the top-left pixel, so pixel (c, r) covers
// [c-0.5, c+0.5) x [r-0.5, r+0.5).

#ifndef BEVKIT_GEOM_HPP
#define BEVKIT_GEOM_HPP

#include <Eigen/Core>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace bevkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kBehindCameraEps = 1e-9;
inline constexpr double kOrthonormalTol = 1e-9;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("CameraIntrinsics: image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw std::invalid_argument("CameraIntrinsics: principal point outside image");
  }

  /// Intrinsics for an image resampled by `factor` (e.g. 1/16 for a stride-16
  /// feature map). Pixel centers stay on integer coordinates.
  CameraIntrinsics scaled(double factor, int new_width, int new_height) const {
    CameraIntrinsics k;
    k.fx = fx * factor;
    k.fy = fy * factor;
    k.cx = (cx + 0.5) * factor - 0.5;
    k.cy = (cy + 0.5) * factor - 0.5;
    k.width = new_width;
    k.height = new_height;
    return k;
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

inline bool is_rotation(const Mat3& r, double tol = kOrthonormalTol) {
  if (!r.allFinite()) return false;
  return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

/// Rotation about the camera's vertical (y) axis. Positive yaw turns +z
/// toward +x.
inline Mat3 yaw_rotation(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Mat3 r;
  r << c, 0.0, s,  //
      0.0, 1.0, 0.0,  //
      -s, 0.0, c;
  return r;
}

struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  void validate() const {
    if (!is_rotation(rotation))
      throw std::invalid_argument("Pose: rotation is not a proper orthonormal matrix");
    if (!translation.allFinite()) throw std::invalid_argument("Pose: non-finite translation");
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Pose inverse() const {
    Pose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  /// this ∘ other: applies `other` first.
  Pose compose(const Pose& other) const {
    Pose out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
  }
};

struct Box3D {
  Vec3 center = Vec3::Zero();
  Vec3 dims = Vec3::Ones();  // (w, h, l) along the box's local x, y, z
  Mat3 rotation = Mat3::Identity();
  int category = 0;
  double score = 1.0;
  bool has_score = false;
  std::int64_t image_id = 0;

  void validate() const {
    if (!center.allFinite()) throw std::invalid_argument("Box3D: non-finite center");
    if (!dims.allFinite() || (dims.array() <= 0.0).any())
      throw std::invalid_argument("Box3D: dims must be positive");
    if (!is_rotation(rotation)) throw std::invalid_argument("Box3D: rotation is not orthonormal");
    if (has_score && !(score >= 0.0 && score <= 1.0))
      throw std::invalid_argument("Box3D: score outside [0,1]");
  }

  double volume() const { return dims.prod(); }
};

inline Box3D make_box(const Vec3& center, const Vec3& dims, double yaw = 0.0, int category = 0) {
  Box3D b;
  b.center = center;
  b.dims = dims;
  b.rotation = yaw_rotation(yaw);
  b.category = category;
  return b;
}

/// Dense rank-4 tensor with axes (channel, depth-bin, row, col), row-major.
class FeatureMap {
 public:
  using Shape = std::array<std::size_t, 4>;

  FeatureMap() = default;
  explicit FeatureMap(Shape shape, double fill = 0.0)
      : shape_(shape), data_(element_count(shape), fill) {}
  FeatureMap(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != element_count(shape_))
      throw std::invalid_argument("FeatureMap: data length does not match shape");
  }

  static std::size_t element_count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_[0]; }
  std::size_t depth() const { return shape_[1]; }
  std::size_t rows() const { return shape_[2]; }
  std::size_t cols() const { return shape_[3]; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t c, std::size_t d, std::size_t h, std::size_t w) const {
    return ((c * shape_[1] + d) * shape_[2] + h) * shape_[3] + w;
  }
  double& operator()(std::size_t c, std::size_t d, std::size_t h, std::size_t w) {
    return data_[index(c, d, h, w)];
  }
  double operator()(std::size_t c, std::size_t d, std::size_t h, std::size_t w) const {
    return data_[index(c, d, h, w)];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const FeatureMap&) const = default;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

struct CloudPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  Vec3 xyz() const { return {x, y, z}; }
  bool operator==(const CloudPoint&) const = default;
};

using PointCloud = std::vector<CloudPoint>;

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
  bool in_view = false;
};

/// Pinhole projection. Points with z <= 1e-9 or outside the image come back
/// with in_view = false; u and v are NaN behind the camera.
inline Projection project_point(const Vec3& p, const CameraIntrinsics& k) {
  Projection out;
  out.z = p.z();
  if (!(p.z() > kBehindCameraEps)) {
    out.u = out.v = std::nan("");
    return out;
  }
  out.u = k.fx * p.x() / p.z() + k.cx;
  out.v = k.fy * p.y() / p.z() + k.cy;
  out.in_view = out.u >= -0.5 && out.u < k.width - 0.5 && out.v >= -0.5 && out.v < k.height - 0.5;
  return out;
}

inline Vec3 unproject_pixel(double u, double v, double z, const CameraIntrinsics& k) {
  if (!(z > 0.0)) throw std::invalid_argument("unproject_pixel: depth must be positive");
  return {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
}

/// Integer pixel containing (u, v), or -1 when outside the image.
inline std::ptrdiff_t pixel_index(const Projection& p, const CameraIntrinsics& k) {
  if (!p.in_view) return -1;
  const auto col = static_cast<std::ptrdiff_t>(std::floor(p.u + 0.5));
  const auto row = static_cast<std::ptrdiff_t>(std::floor(p.v + 0.5));
  if (col < 0 || row < 0 || col >= k.width || row >= k.height) return -1;
  return row * k.width + col;
}

/// Corner i has local offset (sx*w/2, sy*h/2, sz*l/2) with
/// sx = bit 2 of i, sy = bit 1, sz = bit 0 (set bit means +).
inline std::array<Vec3, 8> box_corners(const Box3D& b) {
  std::array<Vec3, 8> corners;
  const Vec3 half = 0.5 * b.dims;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 4) ? half.x() : -half.x(), (i & 2) ? half.y() : -half.y(),
                     (i & 1) ? half.z() : -half.z());
    corners[i] = b.center + b.rotation * local;
  }
  return corners;
}

inline Box3D transform_box(const Box3D& b, const Pose& pose) {
  Box3D out = b;
  out.center = pose.apply(b.center);
  out.rotation = pose.rotation * b.rotation;
  return out;
}

inline PointCloud transform_cloud(const PointCloud& pc, const Pose& pose) {
  PointCloud out;
  out.reserve(pc.size());
  for (const auto& p : pc) {
    const Vec3 q = pose.apply(p.xyz());
    out.push_back({q.x(), q.y(), q.z(), p.intensity});
  }
  return out;
}

}  // namespace bevkit

#endif  // BEVKIT_GEOM_HPP
