// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Depth unification and pillarization: depth maps and point clouds are
// brought into one camera-frame cloud, points the camera cannot see are
// culled with a per-pixel z-buffer, and the result is binned into BEV
// pillars whose occupancy forms the point mask.

#ifndef BEVKIT_POINTPIPE_HPP
#define BEVKIT_POINTPIPE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bevkit/bev_grid.hpp"
#include "bevkit/geom.hpp"

namespace bevkit {

inline constexpr double kDefaultVisibilityTol = 0.1;
inline constexpr double kDefaultConfidenceEps = 5e-4;

struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depths;  // row-major, <= 0 (or non-finite) means invalid

  DepthMap() = default;
  DepthMap(int w, int h, double fill = 0.0)
      : width(w), height(h), depths(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& at(int row, int col) { return depths[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return depths[static_cast<std::size_t>(row) * width + col]; }
};

class BevMask {
 public:
  BevMask() = default;
  BevMask(std::size_t n_z, std::size_t n_x, bool fill = false)
      : n_z_(n_z), n_x_(n_x), cells_(n_z * n_x, fill ? 1 : 0) {}

  std::size_t rows() const { return n_z_; }
  std::size_t cols() const { return n_x_; }
  std::size_t size() const { return cells_.size(); }

  bool operator[](std::size_t cell) const { return cells_[cell] != 0; }
  void set(std::size_t cell, bool v = true) { cells_[cell] = v ? 1 : 0; }
  bool at(std::size_t i_z, std::size_t i_x) const { return cells_[i_z * n_x_ + i_x] != 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto c : cells_) n += c;
    return n;
  }

  BevMask operator|(const BevMask& o) const { return combine(o, [](bool a, bool b) { return a || b; }); }
  BevMask operator&(const BevMask& o) const { return combine(o, [](bool a, bool b) { return a && b; }); }
  BevMask operator~() const {
    BevMask m = *this;
    for (auto& c : m.cells_) c = c ? 0 : 1;
    return m;
  }

  /// Shape (1, 1, n_z, n_x) tensor of 0/1.
  FeatureMap to_feature_map() const {
    FeatureMap fm({1, 1, n_z_, n_x_});
    for (std::size_t i = 0; i < cells_.size(); ++i) fm.data()[i] = cells_[i];
    return fm;
  }
  /// Nonzero elements of a (1, 1, H, W) tensor become true.
  static BevMask from_feature_map(const FeatureMap& fm) {
    if (fm.channels() != 1 || fm.depth() != 1)
      throw std::invalid_argument("BevMask: expected a (1, 1, H, W) tensor");
    BevMask m(fm.rows(), fm.cols());
    for (std::size_t i = 0; i < m.cells_.size(); ++i) m.cells_[i] = fm.data()[i] != 0.0 ? 1 : 0;
    return m;
  }

  bool operator==(const BevMask&) const = default;

 private:
  template <typename Op>
  BevMask combine(const BevMask& o, Op op) const {
    if (o.n_z_ != n_z_ || o.n_x_ != n_x_) throw std::invalid_argument("BevMask: shape mismatch");
    BevMask m(n_z_, n_x_);
    for (std::size_t i = 0; i < cells_.size(); ++i) m.cells_[i] = op(cells_[i] != 0, o.cells_[i] != 0) ? 1 : 0;
    return m;
  }

  std::size_t n_z_ = 0;
  std::size_t n_x_ = 0;
  std::vector<std::uint8_t> cells_;
};

inline PointCloud depthmap_to_cloud(const DepthMap& dm, const CameraIntrinsics& k) {
  if (dm.width != k.width || dm.height != k.height)
    throw std::invalid_argument("depthmap_to_cloud: depth map size does not match intrinsics");
  if (dm.depths.size() != static_cast<std::size_t>(dm.width) * static_cast<std::size_t>(dm.height))
    throw std::invalid_argument("depthmap_to_cloud: depth buffer size does not match dimensions");
  PointCloud pc;
  for (int r = 0; r < dm.height; ++r)
    for (int c = 0; c < dm.width; ++c) {
      const double z = dm.at(r, c);
      if (!(z > 0.0) || !std::isfinite(z)) continue;
      const Vec3 p = unproject_pixel(c, r, z, k);
      pc.push_back({p.x(), p.y(), p.z(), 1.0});
    }
  return pc;
}

struct VisibilityStats {
  std::size_t input = 0;
  std::size_t out_of_view = 0;
  std::size_t occluded = 0;
  std::size_t retained = 0;
};

struct VisibilityResult {
  PointCloud cloud;
  VisibilityStats stats;
};

/// Z-buffer culling at the camera's native resolution: a point survives when
/// it projects into the image and its depth is within `tol` of the nearest
/// point in the same pixel. Survivors keep their input order.
inline VisibilityResult visibility_filter_with_stats(const PointCloud& pc, const CameraIntrinsics& k,
                                                     double tol = kDefaultVisibilityTol) {
  if (!(tol > 0.0)) throw std::invalid_argument("visibility_filter: tol must be positive");
  const std::size_t n_pix = static_cast<std::size_t>(k.width) * static_cast<std::size_t>(k.height);
  std::vector<double> zbuf(n_pix, std::numeric_limits<double>::infinity());
  std::vector<std::ptrdiff_t> pix(pc.size(), -1);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto proj = project_point(pc[i].xyz(), k);
    pix[i] = pixel_index(proj, k);
    if (pix[i] >= 0) zbuf[pix[i]] = std::min(zbuf[pix[i]], pc[i].z);
  }
  VisibilityResult r;
  r.stats.input = pc.size();
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (pix[i] < 0) {
      ++r.stats.out_of_view;
    } else if (pc[i].z <= zbuf[pix[i]] + tol) {
      r.cloud.push_back(pc[i]);
    } else {
      ++r.stats.occluded;
    }
  }
  r.stats.retained = r.cloud.size();
  return r;
}

inline PointCloud visibility_filter(const PointCloud& pc, const CameraIntrinsics& k,
                                    double tol = kDefaultVisibilityTol) {
  return visibility_filter_with_stats(pc, k, tol).cloud;
}

/// Feature layout of one pillar.
enum PillarFeature : std::size_t {
  kMeanX = 0,
  kMeanY,
  kMeanZ,
  kMeanIntensity,
  kOffsetX,  // mean x minus cell center x
  kOffsetZ,  // mean z minus cell center z
  kPillarFeatureDim
};

struct Pillar {
  std::size_t cell = 0;  // i_z * n_x + i_x
  std::size_t count = 0;
  std::array<double, kPillarFeatureDim> features{};
};

struct PillarTensor {
  std::size_t n_z = 0;
  std::size_t n_x = 0;
  std::vector<Pillar> pillars;  // ascending cell index
  std::size_t assigned = 0;
  std::size_t dropped = 0;
};

inline PillarTensor pillarize(const PointCloud& pc, const UnevenGridSpec& g) {
  struct Acc {
    std::size_t count = 0;
    double x = 0.0, y = 0.0, z = 0.0, intensity = 0.0;
  };
  std::vector<Acc> acc(g.cell_count());
  PillarTensor out;
  out.n_z = g.n_z;
  out.n_x = g.n_x;
  for (const auto& p : pc) {
    const auto cell = cell_of(p.x, p.z, g);
    if (!cell) {
      ++out.dropped;
      continue;
    }
    auto& a = acc[*cell];
    ++a.count;
    a.x += p.x;
    a.y += p.y;
    a.z += p.z;
    a.intensity += p.intensity;
    ++out.assigned;
  }
  for (std::size_t cell = 0; cell < acc.size(); ++cell) {
    const auto& a = acc[cell];
    if (a.count == 0) continue;
    const double n = static_cast<double>(a.count);
    Pillar pl;
    pl.cell = cell;
    pl.count = a.count;
    pl.features[kMeanX] = a.x / n;
    pl.features[kMeanY] = a.y / n;
    pl.features[kMeanZ] = a.z / n;
    pl.features[kMeanIntensity] = a.intensity / n;
    const auto [cx, cz] = cell_center(cell % g.n_x, cell / g.n_x, g);
    pl.features[kOffsetX] = pl.features[kMeanX] - cx;
    pl.features[kOffsetZ] = pl.features[kMeanZ] - cz;
    out.pillars.push_back(pl);
  }
  return out;
}

/// Scatters pillar features to a dense (6, 1, n_z, n_x) BEV tensor.
inline FeatureMap scatter_pillars(const PillarTensor& pt) {
  FeatureMap bev({kPillarFeatureDim, 1, pt.n_z, pt.n_x});
  const std::size_t plane = pt.n_z * pt.n_x;
  for (const auto& p : pt.pillars)
    for (std::size_t f = 0; f < kPillarFeatureDim; ++f) bev.data()[f * plane + p.cell] = p.features[f];
  return bev;
}

/// Point mask: true exactly on cells holding at least one point.
inline BevMask occupancy_mask(const PillarTensor& pt, const UnevenGridSpec& g) {
  if (pt.n_z != g.n_z || pt.n_x != g.n_x)
    throw std::invalid_argument("occupancy_mask: pillar tensor does not match grid");
  BevMask m(g.n_z, g.n_x);
  for (const auto& p : pt.pillars)
    if (p.count >= 1) m.set(p.cell);
  return m;
}

/// Image mask: true where the per-cell depth confidence is strictly greater
/// than eps. `confidence` has shape (1, 1, n_z, n_x).
inline BevMask image_confidence_mask(const FeatureMap& confidence, double eps = kDefaultConfidenceEps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("image_confidence_mask: eps must be non-negative");
  if (confidence.channels() != 1 || confidence.depth() != 1)
    throw std::invalid_argument("image_confidence_mask: expected a (1, 1, n_z, n_x) tensor");
  BevMask m(confidence.rows(), confidence.cols());
  for (std::size_t i = 0; i < confidence.size(); ++i)
    if (confidence.data()[i] > eps) m.set(i);
  return m;
}

}  // namespace bevkit

#endif  // BEVKIT_POINTPIPE_HPP
