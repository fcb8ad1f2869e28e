// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Camera-to-BEV feature projection. Each image-feature pixel is lifted along
// its ray as the outer product with its categorical depth distribution and
// splatted into the BEV grid. Sparse pruning drops (pixel, depth-bin) pairs
// whose probability is below a threshold before the splat.

#ifndef BEVKIT_LIFT_SPLAT_HPP
#define BEVKIT_LIFT_SPLAT_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bevkit/bev_grid.hpp"
#include "bevkit/common.hpp"
#include "bevkit/geom.hpp"
#include "bevkit/random.hpp"

namespace bevkit {

inline constexpr double kDistributionSumTol = 1e-9;

/// Per-pixel categorical depth distribution, stored (bin, row, col).
class DepthDistribution {
 public:
  DepthDistribution() = default;
  DepthDistribution(std::size_t bins, std::size_t rows, std::size_t cols)
      : bins_(bins), rows_(rows), cols_(cols), probs_(bins * rows * cols, 0.0) {}

  /// Takes a (1, C_d, H, W) tensor and validates it.
  static DepthDistribution from_feature_map(const FeatureMap& fm) {
    if (fm.channels() != 1) throw std::invalid_argument("DepthDistribution: expected 1 channel");
    DepthDistribution dd(fm.depth(), fm.rows(), fm.cols());
    dd.probs_ = fm.data();
    dd.validate();
    return dd;
  }

  FeatureMap to_feature_map() const { return FeatureMap({1, bins_, rows_, cols_}, probs_); }

  void validate() const {
    if (bins_ == 0) throw std::invalid_argument("DepthDistribution: no depth bins");
    for (std::size_t h = 0; h < rows_; ++h) {
      for (std::size_t w = 0; w < cols_; ++w) {
        double sum = 0.0;
        for (std::size_t d = 0; d < bins_; ++d) {
          const double p = (*this)(d, h, w);
          if (!(p >= 0.0) || !std::isfinite(p))
            throw std::invalid_argument("DepthDistribution: negative or non-finite probability");
          sum += p;
        }
        if (std::abs(sum - 1.0) > kDistributionSumTol)
          throw std::invalid_argument("DepthDistribution: pixel distribution does not sum to 1");
      }
    }
  }

  std::size_t bins() const { return bins_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t pixels() const { return rows_ * cols_; }

  double& operator()(std::size_t d, std::size_t h, std::size_t w) {
    return probs_[(d * rows_ + h) * cols_ + w];
  }
  double operator()(std::size_t d, std::size_t h, std::size_t w) const {
    return probs_[(d * rows_ + h) * cols_ + w];
  }
  const std::vector<double>& data() const { return probs_; }

 private:
  std::size_t bins_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> probs_;
};

/// F_p[c, d, h, w] = F_i[c, 0, h, w] * F_d[d, h, w].
inline FeatureMap outer_project(const FeatureMap& image_features, const DepthDistribution& depth) {
  if (image_features.depth() != 1 || image_features.rows() != depth.rows() ||
      image_features.cols() != depth.cols())
    throw std::invalid_argument("outer_project: feature and depth shapes do not match");
  const std::size_t C = image_features.channels();
  const std::size_t D = depth.bins();
  const std::size_t H = depth.rows();
  const std::size_t W = depth.cols();
  FeatureMap out({C, D, H, W});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) out(c, d, h, w) = image_features(c, 0, h, w) * depth(d, h, w);
  return out;
}

struct ProjectionEntry {
  std::size_t pixel = 0;  // h * W + w
  std::size_t bin = 0;
  double weight = 0.0;
};

struct SparseProjection {
  std::size_t bins = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  double tau = 0.0;
  /// Ascending (pixel, bin).
  std::vector<ProjectionEntry> entries;

  std::size_t total() const { return bins * rows * cols; }
  std::size_t kept() const { return entries.size(); }
  double removal_ratio() const {
    return total() == 0 ? 0.0 : 1.0 - static_cast<double>(kept()) / static_cast<double>(total());
  }
  double kept_ratio() const {
    return total() == 0 ? 1.0 : static_cast<double>(kept()) / static_cast<double>(total());
  }
};

/// Keeps exactly the (pixel, bin) pairs with probability >= tau.
inline SparseProjection sparse_prune(const DepthDistribution& depth, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("sparse_prune: tau must be non-negative");
  SparseProjection sp;
  sp.bins = depth.bins();
  sp.rows = depth.rows();
  sp.cols = depth.cols();
  sp.tau = tau;
  for (std::size_t h = 0; h < sp.rows; ++h)
    for (std::size_t w = 0; w < sp.cols; ++w)
      for (std::size_t d = 0; d < sp.bins; ++d) {
        const double p = depth(d, h, w);
        if (p >= tau) sp.entries.push_back({h * sp.cols + w, d, p});
      }
  return sp;
}

enum class Reduce { kSum, kMean };

/// Depth bins of the projection (one per depth-distribution channel) over the
/// grid's depth range.
inline std::vector<double> projection_bin_edges(const UnevenGridSpec& g, std::size_t bins,
                                                bool uneven) {
  return make_bin_edges(g.z_min, g.z_max, bins, uneven);
}

struct SplatResult {
  FeatureMap bev;  // (C, 1, n_z, n_x)
  std::vector<std::size_t> cell_counts;  // contributions per cell
  std::size_t out_of_grid = 0;
};

namespace detail {

/// Target BEV cell for ray (pixel center, bin-center depth), if inside the grid.
inline std::optional<std::size_t> ray_cell(std::size_t h, std::size_t w, std::size_t bin,
                                           const std::vector<double>& bin_edges,
                                           const CameraIntrinsics& k, const UnevenGridSpec& g) {
  const double z = 0.5 * (bin_edges[bin] + bin_edges[bin + 1]);
  if (!(z > 0.0)) return std::nullopt;
  const Vec3 p = unproject_pixel(static_cast<double>(w), static_cast<double>(h), z, k);
  return cell_of(p.x(), p.z(), g);
}

struct Contribution {
  std::size_t pixel;
  std::size_t bin;
  double weight;  // unused by the dense route
};

/// Groups contributions by cell (stable, so ascending source index within a
/// cell) and accumulates them. `value(c, contribution)` yields the per-channel
/// term.
template <typename Value>
SplatResult accumulate(std::size_t channels, const std::vector<Contribution>& contribs,
                       const std::vector<std::optional<std::size_t>>& cells,
                       const UnevenGridSpec& g, Reduce reduce, Value&& value) {
  const std::size_t n_cells = g.cell_count();
  SplatResult r;
  r.bev = FeatureMap({channels, 1, g.n_z, g.n_x});
  r.cell_counts.assign(n_cells, 0);
  for (const auto& c : cells) {
    if (c) ++r.cell_counts[*c];
    else ++r.out_of_grid;
  }
  std::vector<std::size_t> start(n_cells + 1, 0);
  for (std::size_t i = 0; i < n_cells; ++i) start[i + 1] = start[i] + r.cell_counts[i];
  std::vector<std::size_t> order(start.back());
  {
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i]) order[fill[*cells[i]]++] = i;
  }
  const std::size_t plane = n_cells;
  auto& out = r.bev.data();
  parallel_for(n_cells, [&](std::size_t cell) {
    const std::size_t b = start[cell];
    const std::size_t e = start[cell + 1];
    if (b == e) return;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      double acc = 0.0;
      for (std::size_t k = b; k < e; ++k) acc += value(ch, contribs[order[k]]);
      if (reduce == Reduce::kMean) acc /= static_cast<double>(e - b);
      out[ch * plane + cell] = acc;
    }
  });
  return r;
}

}  // namespace detail

/// Splats the kept entries of `sp` into the BEV grid. Each entry contributes
/// weight * F_i[:, h, w] to the cell containing the ray point at its bin's
/// center depth. Contributions are summed in ascending (cell, entry) order,
/// so results are bit-identical for any thread count.
inline SplatResult splat_to_bev(const FeatureMap& image_features, const SparseProjection& sp,
                                const CameraIntrinsics& k, const UnevenGridSpec& g,
                                const std::vector<double>& bin_edges, Reduce reduce = Reduce::kSum) {
  if (image_features.depth() != 1 || image_features.rows() != sp.rows ||
      image_features.cols() != sp.cols)
    throw std::invalid_argument("splat_to_bev: feature shape does not match projection");
  if (bin_edges.size() != sp.bins + 1)
    throw std::invalid_argument("splat_to_bev: bin edges do not match depth bins");
  std::vector<detail::Contribution> contribs;
  std::vector<std::optional<std::size_t>> cells;
  contribs.reserve(sp.entries.size());
  cells.reserve(sp.entries.size());
  for (const auto& e : sp.entries) {
    const std::size_t h = e.pixel / sp.cols;
    const std::size_t w = e.pixel % sp.cols;
    contribs.push_back({e.pixel, e.bin, e.weight});
    cells.push_back(detail::ray_cell(h, w, e.bin, bin_edges, k, g));
  }
  const std::size_t W = sp.cols;
  return detail::accumulate(image_features.channels(), contribs, cells, g, reduce,
                            [&](std::size_t ch, const detail::Contribution& c) {
                              return c.weight * image_features(ch, 0, c.pixel / W, c.pixel % W);
                            });
}

/// Dense route: splats every element of a precomputed outer product F_p
/// (C, C_d, H, W) in the same (cell, pixel, bin) order as splat_to_bev.
inline SplatResult splat_dense(const FeatureMap& projected, const CameraIntrinsics& k,
                               const UnevenGridSpec& g, const std::vector<double>& bin_edges,
                               Reduce reduce = Reduce::kSum) {
  const std::size_t D = projected.depth();
  const std::size_t H = projected.rows();
  const std::size_t W = projected.cols();
  if (bin_edges.size() != D + 1)
    throw std::invalid_argument("splat_dense: bin edges do not match depth bins");
  std::vector<detail::Contribution> contribs;
  std::vector<std::optional<std::size_t>> cells;
  contribs.reserve(D * H * W);
  cells.reserve(D * H * W);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w)
      for (std::size_t d = 0; d < D; ++d) {
        contribs.push_back({h * W + w, d, 0.0});
        cells.push_back(detail::ray_cell(h, w, d, bin_edges, k, g));
      }
  return detail::accumulate(projected.channels(), contribs, cells, g, reduce,
                            [&](std::size_t ch, const detail::Contribution& c) {
                              return projected(ch, c.bin, c.pixel / W, c.pixel % W);
                            });
}

/// Per-cell maximum depth probability over all rays landing in the cell,
/// shape (1, 1, n_z, n_x). Cells hit by no ray are 0.
inline FeatureMap splat_max_confidence(const DepthDistribution& depth, const CameraIntrinsics& k,
                                       const UnevenGridSpec& g, const std::vector<double>& bin_edges) {
  if (bin_edges.size() != depth.bins() + 1)
    throw std::invalid_argument("splat_max_confidence: bin edges do not match depth bins");
  FeatureMap conf({1, 1, g.n_z, g.n_x});
  auto& out = conf.data();
  for (std::size_t h = 0; h < depth.rows(); ++h)
    for (std::size_t w = 0; w < depth.cols(); ++w)
      for (std::size_t d = 0; d < depth.bins(); ++d)
        if (const auto cell = detail::ray_cell(h, w, d, bin_edges, k, g))
          out[*cell] = std::max(out[*cell], depth(d, h, w));
  return conf;
}

// ---------------------------------------------------------------------------
// Benchmark

/// FNV-1a over the raw bytes of a double array.
inline std::uint64_t fnv1a(const std::vector<double>& values, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

struct BenchSpec {
  std::size_t feature_rows = 16;   // H_f
  std::size_t feature_cols = 44;   // W_f
  std::size_t depth_bins = 80;     // C_d
  std::size_t channels = 16;       // C_i
  UnevenGridSpec grid = build_grid({-30.0, 30.0}, {0.0, 80.0}, 60, 80);
  bool uneven_depth_bins = false;
  std::uint64_t seed = 0;
  int repeats = 1;
};

struct BenchRow {
  double tau = 0.0;
  double kept_ratio = 0.0;
  double wall_ms = 0.0;
  std::uint64_t checksum = 0;  // hash of the benchmark inputs, same for every tau
  std::uint64_t bev_checksum = 0;
  std::size_t kept = 0;
  std::size_t total = 0;
};

/// Camera for a feature map with a ~90 degree horizontal field of view.
inline CameraIntrinsics bench_camera(std::size_t rows, std::size_t cols) {
  CameraIntrinsics k;
  k.width = static_cast<int>(cols);
  k.height = static_cast<int>(rows);
  k.fx = k.fy = 0.5 * static_cast<double>(cols);
  k.cx = 0.5 * (static_cast<double>(cols) - 1.0);
  k.cy = 0.5 * (static_cast<double>(rows) - 1.0);
  return k;
}

/// Softmax over bins of a Gaussian log-profile centered on a random bin per
/// pixel, with random sharpness. Stand-in for a trained depth head.
inline DepthDistribution synthetic_depth_distribution(std::size_t bins, std::size_t rows,
                                                      std::size_t cols, Rng& rng) {
  DepthDistribution dd(bins, rows, cols);
  std::vector<double> logits(bins);
  for (std::size_t h = 0; h < rows; ++h)
    for (std::size_t w = 0; w < cols; ++w) {
      const double mu = rng.uniform(0.0, static_cast<double>(bins));
      const double s = rng.uniform(0.5, 4.0);
      double mx = -1e300;
      for (std::size_t d = 0; d < bins; ++d) {
        const double t = (static_cast<double>(d) + 0.5 - mu) / s;
        logits[d] = -0.5 * t * t;
        mx = std::max(mx, logits[d]);
      }
      double sum = 0.0;
      for (std::size_t d = 0; d < bins; ++d) {
        logits[d] = std::exp(logits[d] - mx);
        sum += logits[d];
      }
      for (std::size_t d = 0; d < bins; ++d) dd(d, h, w) = logits[d] / sum;
    }
  return dd;
}

inline FeatureMap synthetic_features(std::size_t channels, std::size_t rows, std::size_t cols, Rng& rng) {
  FeatureMap f({channels, 1, rows, cols});
  for (auto& v : f.data()) v = rng.uniform(-1.0, 1.0);
  return f;
}

inline std::vector<BenchRow> bench_projection(const BenchSpec& spec, const std::vector<double>& taus) {
  Rng rng(spec.seed);
  const auto depth = synthetic_depth_distribution(spec.depth_bins, spec.feature_rows, spec.feature_cols, rng);
  const auto features = synthetic_features(spec.channels, spec.feature_rows, spec.feature_cols, rng);
  const auto k = bench_camera(spec.feature_rows, spec.feature_cols);
  const auto edges = projection_bin_edges(spec.grid, spec.depth_bins, spec.uneven_depth_bins);
  const std::uint64_t input_hash = fnv1a(depth.data(), fnv1a(features.data()));

  std::vector<BenchRow> rows;
  for (double tau : taus) {
    BenchRow row;
    row.tau = tau;
    row.checksum = input_hash;
    double best_ms = 0.0;
    for (int rep = 0; rep < std::max(1, spec.repeats); ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto sp = sparse_prune(depth, tau);
      const auto out = splat_to_bev(features, sp, k, spec.grid, edges, Reduce::kSum);
      const auto t1 = std::chrono::steady_clock::now();
      const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      best_ms = rep == 0 ? ms : std::min(best_ms, ms);
      row.kept = sp.kept();
      row.total = sp.total();
      row.kept_ratio = sp.kept_ratio();
      row.bev_checksum = fnv1a(out.bev.data());
    }
    row.wall_ms = best_ms;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace bevkit

#endif  // BEVKIT_LIFT_SPLAT_HPP
