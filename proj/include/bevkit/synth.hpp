// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic scenes: ground-truth boxes, the visible point
// cloud sampled from box surfaces and the ground plane, and matching
// image-plane features and depth distributions on a stride-16 feature map.
// Indoor scenes keep object centers within 0.5-8 m; outdoor within 5-80 m.

#ifndef BEVKIT_SYNTH_HPP
#define BEVKIT_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bevkit/bev_grid.hpp"
#include "bevkit/geom.hpp"
#include "bevkit/lift_splat.hpp"
#include "bevkit/pointpipe.hpp"
#include "bevkit/random.hpp"

namespace bevkit {

enum class Regime { kIndoor, kOutdoor };

inline std::string to_string(Regime r) { return r == Regime::kIndoor ? "indoor" : "outdoor"; }

inline Regime regime_from_string(const std::string& s) {
  if (s == "indoor") return Regime::kIndoor;
  if (s == "outdoor") return Regime::kOutdoor;
  throw std::invalid_argument("unknown regime '" + s + "' (expected indoor or outdoor)");
}

struct SceneSpec {
  std::uint64_t seed = 0;
  Regime regime = Regime::kIndoor;
  std::size_t n_objects = 4;
  double z_lo = 0.5;
  double z_hi = 8.0;
  double min_extent = 0.3;
  double max_extent = 2.0;
  double camera_height = 1.2;  // ground plane at y = camera_height
  CameraIntrinsics camera;
  std::size_t feature_stride = 16;
  std::size_t depth_bins = 80;
  std::size_t feature_channels = 8;
  bool uneven_depth_bins = false;
  std::size_t points_per_box = 400;
  std::size_t ground_points = 2000;
  double point_noise = 0.0;   // meters, Gaussian on each coordinate
  double depth_sigma = 0.5;   // meters, spread of the depth distribution
  double visibility_tol = kDefaultVisibilityTol;
  UnevenGridSpec grid = build_grid({-30.0, 30.0}, {0.0, 80.0}, 60, 80);

  /// Regime defaults: depth range, object size, camera.
  static SceneSpec for_regime(Regime r, std::uint64_t seed, std::size_t n_objects) {
    SceneSpec s;
    s.seed = seed;
    s.regime = r;
    s.n_objects = n_objects;
    if (r == Regime::kIndoor) {
      s.z_lo = 0.5;
      s.z_hi = 8.0;
      s.min_extent = 0.3;
      s.max_extent = 2.0;
      s.camera_height = 1.2;
      s.camera = {500.0, 500.0, 320.0, 240.0, 640, 480};
      s.depth_sigma = 0.3;
    } else {
      s.z_lo = 5.0;
      s.z_hi = 80.0;
      s.min_extent = 1.0;
      s.max_extent = 4.5;
      s.camera_height = 1.6;
      s.camera = {720.0, 720.0, 640.0, 192.0, 1280, 384};
      s.depth_sigma = 1.5;
    }
    return s;
  }

  void validate() const {
    camera.validate();
    if (!(z_hi > z_lo) || !(z_lo > 0.0)) throw std::invalid_argument("SceneSpec: bad depth range");
    if (regime == Regime::kIndoor && (z_lo < 0.5 || z_hi > 8.0))
      throw std::invalid_argument("SceneSpec: indoor depths must lie in [0.5, 8]");
    if (regime == Regime::kOutdoor && (z_lo < 5.0 || z_hi > 80.0))
      throw std::invalid_argument("SceneSpec: outdoor depths must lie in [5, 80]");
    if (!(max_extent >= min_extent) || !(min_extent > 0.0)) throw std::invalid_argument("SceneSpec: bad extents");
    if (feature_stride == 0 || depth_bins == 0 || feature_channels == 0)
      throw std::invalid_argument("SceneSpec: feature sizes must be positive");
    if (!(depth_sigma > 0.0) || !(point_noise >= 0.0)) throw std::invalid_argument("SceneSpec: bad noise levels");
  }
};

struct SceneBundle {
  std::vector<Box3D> boxes;
  PointCloud cloud;  // visible points only
  VisibilityStats visibility;
  CameraIntrinsics camera;
  CameraIntrinsics feature_camera;
  FeatureMap features;      // (C_i, 1, H_f, W_f)
  DepthDistribution depth;  // (C_d, H_f, W_f)
  std::vector<double> depth_bin_edges;
};

namespace detail {

/// Uniform sample on the surface of a box, faces weighted by area.
inline Vec3 sample_box_surface(const Box3D& b, Rng& rng) {
  const double w = b.dims.x(), h = b.dims.y(), l = b.dims.z();
  const std::array<double, 3> face_area{h * l, w * l, w * h};  // normal along x, y, z
  const double total = 2.0 * (face_area[0] + face_area[1] + face_area[2]);
  double pick = rng.uniform() * total;
  int axis = 0;
  for (; axis < 2; ++axis) {
    if (pick < 2.0 * face_area[axis]) break;
    pick -= 2.0 * face_area[axis];
  }
  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  Vec3 local;
  for (int a = 0; a < 3; ++a) local[a] = rng.uniform(-0.5, 0.5) * b.dims[a];
  local[axis] = sign * 0.5 * b.dims[axis];
  return b.center + b.rotation * local;
}

}  // namespace detail

inline SceneBundle generate(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Rng box_rng = rng.derive(1);
  Rng cloud_rng = rng.derive(2);
  Rng feat_rng = rng.derive(3);
  const auto& k = spec.camera;

  SceneBundle s;
  s.camera = k;
  const int category_base = spec.regime == Regime::kIndoor ? 0 : 5;
  const int category_count = spec.regime == Regime::kIndoor ? 5 : 3;
  for (std::size_t i = 0; i < spec.n_objects; ++i) {
    Box3D b;
    for (int a = 0; a < 3; ++a) b.dims[a] = box_rng.uniform(spec.min_extent, spec.max_extent);
    const double z = box_rng.uniform(spec.z_lo, spec.z_hi);
    const double u = box_rng.uniform(0.15, 0.85) * k.width;
    b.center = Vec3((u - k.cx) * z / k.fx, spec.camera_height - 0.5 * b.dims.y(), z);
    b.rotation = yaw_rotation(box_rng.uniform(-std::numbers::pi, std::numbers::pi));
    b.category = category_base + static_cast<int>(box_rng.below(category_count));
    b.image_id = static_cast<std::int64_t>(spec.seed);
    s.boxes.push_back(b);
  }

  PointCloud raw;
  auto jitter = [&](Vec3 p) {
    if (spec.point_noise > 0.0)
      for (int a = 0; a < 3; ++a) p[a] += cloud_rng.normal(0.0, spec.point_noise);
    return p;
  };
  for (const auto& b : s.boxes)
    for (std::size_t n = 0; n < spec.points_per_box; ++n) {
      const Vec3 p = jitter(detail::sample_box_surface(b, cloud_rng));
      const double intensity = cloud_rng.uniform();
      raw.push_back({p.x(), p.y(), p.z(), intensity});
    }
  const double ground_far = std::min(spec.z_hi * 1.2, spec.grid.z_max);
  for (std::size_t n = 0; n < spec.ground_points; ++n) {
    const double z = cloud_rng.uniform(0.3, ground_far);
    const double half_width = z * (0.5 * k.width) / k.fx;
    const double x = cloud_rng.uniform(-half_width, half_width);
    const Vec3 p = jitter(Vec3(x, spec.camera_height, z));
    const double intensity = cloud_rng.uniform();
    raw.push_back({p.x(), p.y(), p.z(), intensity});
  }
  auto vis = visibility_filter_with_stats(raw, k, spec.visibility_tol);
  s.cloud = std::move(vis.cloud);
  s.visibility = vis.stats;

  // Feature-plane tensors.
  const std::size_t wf = std::max<std::size_t>(1, static_cast<std::size_t>(k.width) / spec.feature_stride);
  const std::size_t hf = std::max<std::size_t>(1, static_cast<std::size_t>(k.height) / spec.feature_stride);
  s.feature_camera = k.scaled(1.0 / static_cast<double>(spec.feature_stride), static_cast<int>(wf), static_cast<int>(hf));
  const auto& kf = s.feature_camera;

  std::vector<double> nearest(hf * wf, std::numeric_limits<double>::infinity());
  for (const auto& p : s.cloud) {
    const auto idx = pixel_index(project_point(p.xyz(), kf), kf);
    if (idx >= 0) nearest[idx] = std::min(nearest[idx], p.z);
  }
  s.depth_bin_edges = projection_bin_edges(spec.grid, spec.depth_bins, spec.uneven_depth_bins);
  const auto& edges = s.depth_bin_edges;
  s.depth = DepthDistribution(spec.depth_bins, hf, wf);
  std::vector<double> logits(spec.depth_bins);
  for (std::size_t h = 0; h < hf; ++h)
    for (std::size_t w = 0; w < wf; ++w) {
      double z = nearest[h * wf + w];
      if (!std::isfinite(z)) {
        const double dv = static_cast<double>(h) - kf.cy;
        z = dv > 0.0 ? spec.camera_height * kf.fy / dv : spec.grid.z_max;
      }
      z = std::clamp(z, spec.grid.z_min, spec.grid.z_max);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t d = 0; d < spec.depth_bins; ++d) {
        const double c = 0.5 * (edges[d] + edges[d + 1]);
        const double t = (c - z) / spec.depth_sigma;
        logits[d] = -0.5 * t * t;
        mx = std::max(mx, logits[d]);
      }
      double sum = 0.0;
      for (auto& v : logits) {
        v = std::exp(v - mx);
        sum += v;
      }
      for (std::size_t d = 0; d < spec.depth_bins; ++d) s.depth(d, h, w) = logits[d] / sum;
    }
  s.features = synthetic_features(spec.feature_channels, hf, wf, feat_rng);
  return s;
}

/// Adds seeded Gaussian noise to centers, dimensions and yaw. Zero sigmas
/// leave the corresponding fields untouched. Results carry scores.
inline std::vector<Box3D> perturb(const std::vector<Box3D>& boxes, double sigma_center, double sigma_dims,
                                  double sigma_yaw, std::uint64_t seed) {
  if (!(sigma_center >= 0.0) || !(sigma_dims >= 0.0) || !(sigma_yaw >= 0.0))
    throw std::invalid_argument("perturb: sigmas must be non-negative");
  Rng rng(seed);
  std::vector<Box3D> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    Box3D p = b;
    if (sigma_center > 0.0)
      for (int i = 0; i < 3; ++i) p.center[i] += rng.normal(0.0, sigma_center);
    if (sigma_dims > 0.0)
      for (int i = 0; i < 3; ++i) p.dims[i] = std::max(0.05, p.dims[i] + rng.normal(0.0, sigma_dims));
    if (sigma_yaw > 0.0) p.rotation = yaw_rotation(rng.normal(0.0, sigma_yaw)) * p.rotation;
    if (!p.has_score) {
      p.score = 1.0;
      p.has_score = true;
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace bevkit

#endif  // BEVKIT_SYNTH_HPP
