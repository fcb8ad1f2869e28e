// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// BEV grid over the lateral (x) and depth (z) axes. Lateral cells are
// uniform. Depth edges grow quadratically so that bin widths increase
// linearly with distance:
//
//   e(i) = z_min + (z_max - z_min) * i (i + 1) / (n_z (n_z + 1)),  i = 0..n_z
//
// giving width(i) = 2 (i + 1) (z_max - z_min) / (n_z (n_z + 1)) for bin i.

#ifndef BEVKIT_BEV_GRID_HPP
#define BEVKIT_BEV_GRID_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

namespace bevkit {

/// Bin edges over [lo, hi]. Quadratic (linear-increasing widths) when
/// `uneven`, uniform otherwise. Endpoints are exact.
inline std::vector<double> make_bin_edges(double lo, double hi, std::size_t n, bool uneven) {
  if (n == 0) throw std::invalid_argument("make_bin_edges: bin count must be positive");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("make_bin_edges: range must be finite and increasing");
  std::vector<double> edges(n + 1);
  const double span = hi - lo;
  const double denom = uneven ? static_cast<double>(n) * static_cast<double>(n + 1)
                              : static_cast<double>(n);
  for (std::size_t i = 0; i <= n; ++i) {
    const double num = uneven ? static_cast<double>(i) * static_cast<double>(i + 1)
                              : static_cast<double>(i);
    edges[i] = lo + span * (num / denom);
  }
  edges.front() = lo;
  edges.back() = hi;
  return edges;
}

/// Index i with edges[i] <= v < edges[i+1]; the upper endpoint maps to the
/// last bin. nullopt outside [edges.front(), edges.back()].
inline std::optional<std::size_t> bin_of(double v, const std::vector<double>& edges) {
  if (edges.size() < 2 || !(v >= edges.front() && v <= edges.back())) return std::nullopt;
  const std::size_t n = edges.size() - 1;
  if (v == edges.back()) return n - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  return static_cast<std::size_t>(it - edges.begin()) - 1;
}

struct UnevenGridSpec {
  double x_min = -30.0;
  double x_max = 30.0;
  double z_min = 0.0;
  double z_max = 80.0;
  std::size_t n_x = 60;
  std::size_t n_z = 80;
  bool uneven = true;
  std::vector<double> depth_edges;
  std::vector<double> lateral_edges;

  std::size_t cell_count() const { return n_x * n_z; }
  /// Row-major over (depth row, lateral column).
  std::size_t cell_index(std::size_t i_x, std::size_t i_z) const { return i_z * n_x + i_x; }

  double depth_width(std::size_t i) const { return depth_edges.at(i + 1) - depth_edges.at(i); }

  bool operator==(const UnevenGridSpec&) const = default;
};

inline UnevenGridSpec build_grid(std::pair<double, double> x_range,
                                 std::pair<double, double> z_range, std::size_t n_x,
                                 std::size_t n_z, bool uneven = true) {
  if (n_x < 1 || n_z < 1) throw std::invalid_argument("build_grid: cell counts must be >= 1");
  if (!(x_range.second > x_range.first) || !(z_range.second > z_range.first))
    throw std::invalid_argument("build_grid: ranges must be increasing");
  UnevenGridSpec g;
  g.x_min = x_range.first;
  g.x_max = x_range.second;
  g.z_min = z_range.first;
  g.z_max = z_range.second;
  g.n_x = n_x;
  g.n_z = n_z;
  g.uneven = uneven;
  g.depth_edges = make_bin_edges(g.z_min, g.z_max, n_z, uneven);
  g.lateral_edges = make_bin_edges(g.x_min, g.x_max, n_x, false);
  return g;
}

inline std::optional<std::size_t> depth_bin_of(double z, const UnevenGridSpec& g) {
  return bin_of(z, g.depth_edges);
}

inline std::optional<std::size_t> lateral_bin_of(double x, const UnevenGridSpec& g) {
  return bin_of(x, g.lateral_edges);
}

/// Linear cell index (i_z * n_x + i_x) of a camera-frame point's (x, z), or
/// nullopt when outside the grid.
inline std::optional<std::size_t> cell_of(double x, double z, const UnevenGridSpec& g) {
  const auto iz = depth_bin_of(z, g);
  if (!iz) return std::nullopt;
  const auto ix = lateral_bin_of(x, g);
  if (!ix) return std::nullopt;
  return g.cell_index(*ix, *iz);
}

inline std::pair<double, double> cell_center(std::size_t i_x, std::size_t i_z,
                                             const UnevenGridSpec& g) {
  if (i_x >= g.n_x || i_z >= g.n_z) throw std::invalid_argument("cell_center: index out of range");
  return {0.5 * (g.lateral_edges[i_x] + g.lateral_edges[i_x + 1]),
          0.5 * (g.depth_edges[i_z] + g.depth_edges[i_z + 1])};
}

inline nlohmann::json grid_to_json(const UnevenGridSpec& g) {
  return {{"x_range", {g.x_min, g.x_max}},
          {"z_range", {g.z_min, g.z_max}},
          {"n_x", g.n_x},
          {"n_z", g.n_z},
          {"uneven", g.uneven},
          {"depth_edges", g.depth_edges}};
}

/// Rebuilds the grid from its parameters and checks any explicit
/// `depth_edges` against the rebuilt ones.
inline UnevenGridSpec grid_from_json(const nlohmann::json& j) {
  const auto xr = j.value("x_range", std::vector<double>{-30.0, 30.0});
  const auto zr = j.value("z_range", std::vector<double>{0.0, 80.0});
  if (xr.size() != 2 || zr.size() != 2)
    throw std::invalid_argument("grid json: ranges must have two entries");
  const auto n_x = j.value("n_x", std::size_t{60});
  const auto n_z = j.value("n_z", std::size_t{80});
  const bool uneven = j.value("uneven", true);
  auto g = build_grid({xr[0], xr[1]}, {zr[0], zr[1]}, n_x, n_z, uneven);
  if (j.contains("depth_edges")) {
    const auto edges = j.at("depth_edges").get<std::vector<double>>();
    if (edges.size() != g.depth_edges.size())
      throw std::invalid_argument("grid json: depth_edges length does not match n_z");
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (std::abs(edges[i] - g.depth_edges[i]) > 1e-9 * std::max(1.0, std::abs(g.z_max)))
        throw std::invalid_argument("grid json: depth_edges inconsistent with range and n_z");
  }
  return g;
}

}  // namespace bevkit

#endif  // BEVKIT_BEV_GRID_HPP
