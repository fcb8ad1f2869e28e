// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef BEVKIT_CONFIG_HPP
#define BEVKIT_CONFIG_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bevkit/bev_grid.hpp"
#include "bevkit/eval3d.hpp"
#include "bevkit/headmath.hpp"
#include "bevkit/pointpipe.hpp"

namespace bevkit {

/// Library-wide defaults. Perception ranges are camera-frame meters.
struct Config {
  std::pair<double, double> x_range{-30.0, 30.0};
  std::pair<double, double> y_range{-40.0, 40.0};
  std::pair<double, double> z_range{0.0, 80.0};
  std::size_t grid_x = 60;  // lateral cells
  std::size_t grid_z = 80;  // depth cells
  double tau = 1e-3;
  double gamma = kDefaultGamma;
  double epsilon = kDefaultConfidenceEps;
  std::size_t top_m = 100;    // proposals kept from the first stage
  std::size_t queries_n = 100;  // learned queries of the second stage
  bool uneven_grid = true;
  bool uneven_depth_bins = false;
  double visibility_tol = kDefaultVisibilityTol;
  std::vector<double> iou_thresholds = default_iou_thresholds();
  std::vector<DepthBand> depth_bands = default_depth_bands();

  UnevenGridSpec grid() const { return build_grid(x_range, z_range, grid_x, grid_z, uneven_grid); }

  MatchConfig match_config() const {
    MatchConfig m;
    m.iou_thresholds = iou_thresholds;
    m.depth_bands = depth_bands;
    return m;
  }

  void validate() const {
    grid();
    match_config().validate();
    if (!(y_range.second > y_range.first)) throw std::invalid_argument("Config: y_range must be increasing");
    if (!(tau >= 0.0)) throw std::invalid_argument("Config: tau must be non-negative");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("Config: gamma must be in (0, 1]");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("Config: epsilon must be non-negative");
    if (top_m < 1 || queries_n < 1) throw std::invalid_argument("Config: M and N must be >= 1");
    if (!(visibility_tol > 0.0)) throw std::invalid_argument("Config: visibility_tol must be positive");
  }

  bool operator==(const Config& o) const {
    auto band_eq = [](const DepthBand& a, const DepthBand& b) { return a.name == b.name && a.lo == b.lo && a.hi == b.hi; };
    return x_range == o.x_range && y_range == o.y_range && z_range == o.z_range && grid_x == o.grid_x &&
           grid_z == o.grid_z && tau == o.tau && gamma == o.gamma && epsilon == o.epsilon && top_m == o.top_m &&
           queries_n == o.queries_n && uneven_grid == o.uneven_grid && uneven_depth_bins == o.uneven_depth_bins &&
           visibility_tol == o.visibility_tol && iou_thresholds == o.iou_thresholds &&
           std::equal(depth_bands.begin(), depth_bands.end(), o.depth_bands.begin(), o.depth_bands.end(), band_eq);
  }
};

inline nlohmann::json config_to_json(const Config& c) {
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : c.depth_bands) bands.push_back({{"name", b.name}, {"lo", b.lo}, {"hi", b.hi}});
  return {{"x_range", {c.x_range.first, c.x_range.second}},
          {"y_range", {c.y_range.first, c.y_range.second}},
          {"z_range", {c.z_range.first, c.z_range.second}},
          {"grid", {c.grid_x, c.grid_z}},
          {"tau", c.tau},
          {"gamma", c.gamma},
          {"epsilon", c.epsilon},
          {"M", c.top_m},
          {"N", c.queries_n},
          {"uneven_grid", c.uneven_grid},
          {"uneven_depth_bins", c.uneven_depth_bins},
          {"visibility_tol", c.visibility_tol},
          {"iou_thresholds", c.iou_thresholds},
          {"depth_bands", bands}};
}

/// Missing keys keep their defaults.
inline Config config_from_json(const nlohmann::json& j) {
  Config c;
  auto range = [&](const char* key, std::pair<double, double>& out) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw std::invalid_argument(std::string("Config: ") + key + " needs two values");
    out = {v[0], v[1]};
  };
  range("x_range", c.x_range);
  range("y_range", c.y_range);
  range("z_range", c.z_range);
  if (j.contains("grid")) {
    const auto g = j.at("grid").get<std::vector<std::size_t>>();
    if (g.size() != 2) throw std::invalid_argument("Config: grid needs (lateral, depth)");
    c.grid_x = g[0];
    c.grid_z = g[1];
  }
  c.tau = j.value("tau", c.tau);
  c.gamma = j.value("gamma", c.gamma);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.top_m = j.value("M", c.top_m);
  c.queries_n = j.value("N", c.queries_n);
  c.uneven_grid = j.value("uneven_grid", c.uneven_grid);
  c.uneven_depth_bins = j.value("uneven_depth_bins", c.uneven_depth_bins);
  c.visibility_tol = j.value("visibility_tol", c.visibility_tol);
  if (j.contains("iou_thresholds")) c.iou_thresholds = j.at("iou_thresholds").get<std::vector<double>>();
  if (j.contains("depth_bands")) {
    c.depth_bands.clear();
    for (const auto& b : j.at("depth_bands"))
      c.depth_bands.push_back({b.value("name", std::string{}), b.at("lo").get<double>(), b.at("hi").get<double>()});
  }
  c.validate();
  return c;
}

}  // namespace bevkit

#endif  // BEVKIT_CONFIG_HPP
