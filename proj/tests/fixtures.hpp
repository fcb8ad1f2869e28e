// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared randomized inputs and scenes for unit and acceptance tests.

#ifndef BEVKIT_TESTS_FIXTURES_HPP
#define BEVKIT_TESTS_FIXTURES_HPP

#include <cmath>
#include <vector>

#include "bevkit/lift_splat.hpp"
#include "bevkit/pointpipe.hpp"
#include "oracles.hpp"

namespace fixture {

using bevkit::CameraIntrinsics;
using bevkit::DepthDistribution;
using bevkit::FeatureMap;
using bevkit::PointCloud;

struct Instance {
  FeatureMap features;
  DepthDistribution depth;
  CameraIntrinsics k;
  bevkit::UnevenGridSpec grid;
  std::vector<double> edges;
};

inline Instance random_instance(bevkit::Rng& rng, bool wide_grid) {
  Instance in;
  const std::size_t h = 1 + rng.below(16);
  const std::size_t w = 1 + rng.below(16);
  const std::size_t cd = 1 + rng.below(32);
  const std::size_t ci = 1 + rng.below(4);
  in.depth = bevkit::synthetic_depth_distribution(cd, h, w, rng);
  in.features = bevkit::synthetic_features(ci, h, w, rng);
  in.k = bevkit::bench_camera(h, w);
  const double half = wide_grid ? 200.0 : 20.0;
  in.grid = bevkit::build_grid({-half, half}, {0.0, 40.0}, 1 + rng.below(12), 1 + rng.below(12), rng.uniform() < 0.5);
  in.edges = bevkit::projection_bin_edges(in.grid, cd, rng.uniform() < 0.5);
  return in;
}

// Independent dense splat: visits pixels and bins in plain loops and looks
// cells up by linear scan.
inline FeatureMap oracle_dense_splat(const Instance& in, std::vector<std::size_t>* counts = nullptr) {
  const auto& g = in.grid;
  FeatureMap out({in.features.channels(), 1, g.n_z, g.n_x});
  if (counts) counts->assign(g.n_z * g.n_x, 0);
  for (std::size_t h = 0; h < in.depth.rows(); ++h)
    for (std::size_t w = 0; w < in.depth.cols(); ++w)
      for (std::size_t d = 0; d < in.depth.bins(); ++d) {
        const double z = 0.5 * (in.edges[d] + in.edges[d + 1]);
        const double x = (static_cast<double>(w) - in.k.cx) * z / in.k.fx;
        const auto iz = oracle::linear_scan_bin(z, g.depth_edges);
        const auto ix = oracle::linear_scan_bin(x, g.lateral_edges);
        if (!iz || !ix) continue;
        if (counts) ++(*counts)[*iz * g.n_x + *ix];
        for (std::size_t c = 0; c < in.features.channels(); ++c)
          out(c, 0, *iz, *ix) += in.features(c, 0, h, w) * in.depth(d, h, w);
      }
  return out;
}

// Wall at z=4 covering the middle of the image and a cube behind it at
// z in [6, 7], plus a cube corner peeking out beside the wall. Seen through
// kWallCamera the wall points sit half a pixel apart, so the wall is opaque
// to the z-buffer.
inline const CameraIntrinsics kWallCamera{100.0, 100.0, 64.0, 48.0, 128, 96};

inline PointCloud wall_and_cube() {
  PointCloud pc;
  for (double y = -1.0; y <= 1.0; y += 0.02)
    for (double x = -1.0; x <= 1.0; x += 0.02) pc.push_back({x, y, 4.0, 0.5});
  for (double a = -1.5; a <= 1.5; a += 0.05)
    for (double b = -0.5; b <= 0.5; b += 0.05) {
      pc.push_back({a, b, 6.0, 1.0});   // front face
      pc.push_back({a, b, 7.0, 1.0});   // back face
      pc.push_back({-1.5, b, 6.0 + (a + 1.5) / 3.0, 1.0});  // left side
      pc.push_back({1.5, b, 6.0 + (a + 1.5) / 3.0, 1.0});   // right side
    }
  return pc;
}

inline PointCloud random_cloud(bevkit::Rng& rng, std::size_t n, const CameraIntrinsics& k) {
  PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    // Coarse pixel quantization makes shared pixels common.
    const double u = std::floor(rng.uniform(-20.0, k.width + 20.0));
    const double v = std::floor(rng.uniform(-20.0, k.height + 20.0));
    const double z = rng.uniform(-1.0, 12.0);
    if (z > 0.0) {
      const auto p = bevkit::unproject_pixel(u, v, z, k);
      pc.push_back({p.x(), p.y(), p.z(), rng.uniform()});
    } else {
      pc.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), z, rng.uniform()});
    }
  }
  return pc;
}

}  // namespace fixture

#endif  // BEVKIT_TESTS_FIXTURES_HPP
