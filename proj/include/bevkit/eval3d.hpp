// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Oriented 3D IoU and average-precision evaluation.
//
// iou3d clips box A's polytope successively by the six face half-spaces of
// box B and integrates the remaining volume with the divergence theorem.
// Matching is greedy in descending score per (image, category); AP uses the
// all-point interpolated precision envelope.

#ifndef BEVKIT_EVAL3D_HPP
#define BEVKIT_EVAL3D_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "bevkit/common.hpp"
#include "bevkit/geom.hpp"

namespace bevkit {

inline constexpr double kMinBoxDim = 1e-9;

namespace detail {

using Polygon3 = std::vector<Vec3>;

// Faces of box_corners() ordered counter-clockwise seen from outside.
inline constexpr std::array<std::array<int, 4>, 6> kBoxFaces{{
    {4, 6, 7, 5},  // +x
    {0, 1, 3, 2},  // -x
    {2, 3, 7, 6},  // +y
    {0, 4, 5, 1},  // -y
    {1, 5, 7, 3},  // +z
    {0, 2, 6, 4},  // -z
}};

inline std::vector<Polygon3> box_polytope(const Box3D& b) {
  const auto c = box_corners(b);
  std::vector<Polygon3> faces;
  faces.reserve(6);
  for (const auto& f : kBoxFaces) faces.push_back({c[f[0]], c[f[1]], c[f[2]], c[f[3]]});
  return faces;
}

struct HalfSpace {
  Vec3 normal;    // outward, unit length
  double offset;  // inside: normal . p <= offset
};

inline std::array<HalfSpace, 6> box_halfspaces(const Box3D& b) {
  std::array<HalfSpace, 6> hs;
  for (int axis = 0; axis < 3; ++axis) {
    const Vec3 n = b.rotation.col(axis);
    const double half = 0.5 * b.dims[axis];
    const double c = n.dot(b.center);
    hs[2 * axis] = {n, c + half};
    hs[2 * axis + 1] = {-n, -c + half};
  }
  return hs;
}

/// Edge/plane intersection computed from a canonical endpoint order so both
/// faces sharing an edge produce the same point.
inline Vec3 edge_plane_point(const Vec3& p, double dp, const Vec3& q, double dq) {
  const bool swap = std::lexicographical_compare(q.data(), q.data() + 3, p.data(), p.data() + 3);
  const Vec3& a = swap ? q : p;
  const Vec3& b = swap ? p : q;
  const double da = swap ? dq : dp;
  const double db = swap ? dp : dq;
  const double t = da / (da - db);
  return a + t * (b - a);
}

/// Clips a closed convex polytope to {p : n.p <= d}. Returns false when
/// nothing of positive volume remains.
inline bool clip_polytope(std::vector<Polygon3>& faces, const HalfSpace& h, double scale) {
  const double eps = 1e-12 * scale;
  double dmin = 1e300;
  double dmax = -1e300;
  for (const auto& f : faces)
    for (const auto& p : f) {
      const double d = h.normal.dot(p) - h.offset;
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
  if (dmax <= eps) return true;  // entirely inside
  if (dmin >= -eps) {            // entirely outside or flat against the plane
    faces.clear();
    return false;
  }

  std::vector<Polygon3> out;
  out.reserve(faces.size() + 1);
  std::vector<Vec3> cap_points;
  for (const auto& f : faces) {
    Polygon3 clipped;
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& cur = f[i];
      const Vec3& nxt = f[(i + 1) % n];
      const double dc = h.normal.dot(cur) - h.offset;
      const double dn = h.normal.dot(nxt) - h.offset;
      if (dc <= eps) {
        clipped.push_back(cur);
        if (dc >= -eps) cap_points.push_back(cur);
      }
      if ((dc < -eps && dn > eps) || (dc > eps && dn < -eps)) {
        const Vec3 x = edge_plane_point(cur, dc, nxt, dn);
        clipped.push_back(x);
        cap_points.push_back(x);
      }
    }
    if (clipped.size() >= 3) out.push_back(std::move(clipped));
  }

  // Cap polygon on the cutting plane, counter-clockwise about the normal.
  std::vector<Vec3> uniq;
  for (const auto& p : cap_points) {
    bool dup = false;
    for (const auto& q : uniq)
      if ((p - q).squaredNorm() <= (1e-12 * scale) * (1e-12 * scale)) {
        dup = true;
        break;
      }
    if (!dup) uniq.push_back(p);
  }
  if (uniq.size() >= 3) {
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : uniq) centroid += p;
    centroid /= static_cast<double>(uniq.size());
    const Vec3& nrm = h.normal;
    const Vec3 helper = std::abs(nrm.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 e1 = nrm.cross(helper).normalized();
    const Vec3 e2 = nrm.cross(e1);
    std::vector<std::pair<double, Vec3>> ang;
    ang.reserve(uniq.size());
    for (const auto& p : uniq) {
      const Vec3 r = p - centroid;
      ang.emplace_back(std::atan2(r.dot(e2), r.dot(e1)), p);
    }
    std::sort(ang.begin(), ang.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Polygon3 cap;
    cap.reserve(ang.size());
    for (auto& [a, p] : ang) cap.push_back(p);
    out.push_back(std::move(cap));
  }
  faces = std::move(out);
  return !faces.empty();
}

inline double polytope_volume(const std::vector<Polygon3>& faces, const Vec3& ref) {
  double v = 0.0;
  for (const auto& f : faces) {
    const Vec3 a = f[0] - ref;
    for (std::size_t i = 1; i + 1 < f.size(); ++i) v += a.dot((f[i] - ref).cross(f[i + 1] - ref));
  }
  return v / 6.0;
}

inline void check_box(const Box3D& b) {
  b.validate();
  if ((b.dims.array() < kMinBoxDim).any() || !(b.volume() > 1e-18))
    throw std::invalid_argument("iou3d: degenerate box");
}

}  // namespace detail

/// Exact intersection volume of two oriented boxes.
inline double intersection_volume(const Box3D& a, const Box3D& b) {
  detail::check_box(a);
  detail::check_box(b);
  const double reach = 0.5 * (a.dims.norm() + b.dims.norm());
  if ((a.center - b.center).norm() > reach) return 0.0;
  const double scale = 1.0 + a.center.cwiseAbs().maxCoeff() + a.dims.maxCoeff() + b.dims.maxCoeff();
  auto faces = detail::box_polytope(a);
  for (const auto& h : detail::box_halfspaces(b))
    if (!detail::clip_polytope(faces, h, scale)) return 0.0;
  return std::max(0.0, detail::polytope_volume(faces, a.center));
}

/// Oriented 3D IoU in [0, 1].
inline double iou3d(const Box3D& a, const Box3D& b) {
  const double inter = intersection_volume(a, b);
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace detail {

using Point2 = Eigen::Vector2d;

inline double cross2(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Convex polygon clipping (both counter-clockwise).
inline std::vector<Point2> clip_convex(std::vector<Point2> subject, const std::vector<Point2>& clip) {
  for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    const Point2 a = clip[i];
    const Point2 b = clip[(i + 1) % clip.size()];
    const Point2 e = b - a;
    std::vector<Point2> out;
    for (std::size_t j = 0; j < subject.size(); ++j) {
      const Point2 p = subject[j];
      const Point2 q = subject[(j + 1) % subject.size()];
      const double sp = cross2(e, p - a);
      const double sq = cross2(e, q - a);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) out.push_back(p + (sp / (sp - sq)) * (q - p));
    }
    subject = std::move(out);
  }
  return subject;
}

inline double polygon_area(const std::vector<Point2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) a += cross2(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * a;
}

/// Ground-plane footprint (x, z) of a yaw-only box, counter-clockwise.
inline std::vector<Point2> footprint(const Box3D& b) {
  const double hw = 0.5 * b.dims.x();
  const double hl = 0.5 * b.dims.z();
  const std::array<Point2, 4> local{Point2(-hw, -hl), Point2(hw, -hl), Point2(hw, hl), Point2(-hw, hl)};
  std::vector<Point2> out;
  for (const auto& p : local) {
    const Vec3 w = b.center + b.rotation * Vec3(p.x(), 0.0, p.y());
    out.emplace_back(w.x(), w.z());
  }
  if (polygon_area(out) < 0.0) std::reverse(out.begin(), out.end());
  return out;
}

inline bool is_yaw_only(const Mat3& r, double tol = 1e-9) {
  return std::abs(r(1, 1) - 1.0) <= tol && std::abs(r(0, 1)) <= tol && std::abs(r(2, 1)) <= tol;
}

}  // namespace detail

/// Fast path for boxes rotated only about the vertical axis: footprint
/// polygon overlap times height overlap.
inline double iou3d_yaw(const Box3D& a, const Box3D& b) {
  detail::check_box(a);
  detail::check_box(b);
  if (!detail::is_yaw_only(a.rotation) || !detail::is_yaw_only(b.rotation))
    throw std::invalid_argument("iou3d_yaw: boxes must be rotated about the vertical axis only");
  const double y_lo = std::max(a.center.y() - 0.5 * a.dims.y(), b.center.y() - 0.5 * b.dims.y());
  const double y_hi = std::min(a.center.y() + 0.5 * a.dims.y(), b.center.y() + 0.5 * b.dims.y());
  if (y_hi <= y_lo) return 0.0;
  const auto poly = detail::clip_convex(detail::footprint(a), detail::footprint(b));
  const double inter = poly.size() < 3 ? 0.0 : std::abs(detail::polygon_area(poly)) * (y_hi - y_lo);
  return std::clamp(inter / (a.volume() + b.volume() - inter), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Matching and AP

struct DepthBand {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

/// Omni3D-style thresholds 0.05, 0.10, ..., 0.50.
inline std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int k = 1; k <= 10; ++k) t.push_back(k / 20.0);
  return t;
}

inline std::vector<DepthBand> default_depth_bands() {
  return {{"near", 0.0, 10.0}, {"med", 10.0, 35.0}, {"far", 35.0, 80.0}};
}

struct MatchConfig {
  std::vector<double> iou_thresholds = default_iou_thresholds();
  std::vector<DepthBand> depth_bands = default_depth_bands();
  bool yaw_only_iou = false;

  void validate() const {
    if (iou_thresholds.empty()) throw std::invalid_argument("MatchConfig: no IoU thresholds");
    for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
      if (!(iou_thresholds[i] > 0.0 && iou_thresholds[i] < 1.0))
        throw std::invalid_argument("MatchConfig: thresholds must lie in (0, 1)");
      if (i > 0 && !(iou_thresholds[i] > iou_thresholds[i - 1]))
        throw std::invalid_argument("MatchConfig: thresholds must be strictly increasing");
    }
    for (std::size_t i = 0; i < depth_bands.size(); ++i) {
      if (!(depth_bands[i].hi > depth_bands[i].lo))
        throw std::invalid_argument("MatchConfig: empty depth band");
      for (std::size_t j = 0; j < i; ++j)
        if (depth_bands[i].lo < depth_bands[j].hi && depth_bands[j].lo < depth_bands[i].hi)
          throw std::invalid_argument("MatchConfig: depth bands overlap");
    }
  }
};

/// Band containing z. Bands are half-open [lo, hi), so a shared edge belongs
/// to the band that starts there; the highest band also includes its hi.
inline std::optional<std::size_t> band_of(double z, const std::vector<DepthBand>& bands) {
  std::optional<std::size_t> top;
  for (std::size_t i = 0; i < bands.size(); ++i)
    if (!top || bands[i].hi > bands[*top].hi) top = i;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (z >= bands[i].lo && z < bands[i].hi) return i;
    if (i == top && z == bands[i].hi) return i;
  }
  return std::nullopt;
}

/// Scores in ranked order with TP flags; npos ground truths.
/// AP = (1/npos) * sum over true positives of the interpolated precision at
/// that rank, which equals all-point interpolation. nullopt when npos == 0.
inline std::optional<double> average_precision(const std::vector<bool>& ranked_tp, std::size_t npos) {
  if (npos == 0) return std::nullopt;
  const std::size_t n = ranked_tp.size();
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += ranked_tp[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (ranked_tp[i]) sum += precision[i];
  return sum / static_cast<double>(npos);
}

/// Greedy matching within one group: predictions in descending score (stable
/// on input order) take the unmatched ground truth of highest IoU >= thr
/// (lowest index on ties). `iou[p][g]`. Returns gt index per prediction, or -1.
inline std::vector<std::ptrdiff_t> greedy_match(const std::vector<double>& scores,
                                                const std::vector<std::vector<double>>& iou, double thr) {
  const std::size_t np = scores.size();
  const std::size_t ng = iou.empty() ? 0 : iou[0].size();
  std::vector<std::size_t> order(np);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<bool> taken(ng, false);
  std::vector<std::ptrdiff_t> match(np, -1);
  for (std::size_t p : order) {
    std::ptrdiff_t best = -1;
    double best_iou = thr;
    for (std::size_t g = 0; g < ng; ++g) {
      if (taken[g] || iou[p][g] < thr) continue;
      if (best < 0 || iou[p][g] > best_iou) {
        best = static_cast<std::ptrdiff_t>(g);
        best_iou = iou[p][g];
      }
    }
    if (best >= 0) {
      taken[best] = true;
      match[p] = best;
    }
  }
  return match;
}

struct BandSplit {
  std::vector<std::vector<std::size_t>> gts;    // per band, gt indices
  std::vector<std::vector<std::size_t>> preds;  // per band, prediction indices
};

/// Ground truths go to the band of their center depth; matched predictions
/// follow their ground truth, unmatched ones use their own center depth.
inline BandSplit depth_band_split(const std::vector<Box3D>& gts, const std::vector<Box3D>& preds,
                                  const std::vector<std::ptrdiff_t>& pred_match,
                                  const std::vector<DepthBand>& bands) {
  if (pred_match.size() != preds.size()) throw std::invalid_argument("depth_band_split: match size mismatch");
  BandSplit s;
  s.gts.resize(bands.size());
  s.preds.resize(bands.size());
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (const auto b = band_of(gts[g].center.z(), bands)) s.gts[*b].push_back(g);
  for (std::size_t p = 0; p < preds.size(); ++p) {
    const double z = pred_match[p] >= 0 ? gts[pred_match[p]].center.z() : preds[p].center.z();
    if (const auto b = band_of(z, bands)) s.preds[*b].push_back(p);
  }
  return s;
}

struct EvalResult {
  std::vector<double> thresholds;  // evaluated thresholds (config set plus 0.25 and 0.5)
  std::vector<int> categories;
  /// ap[category][threshold index]; nullopt when the category has no ground truth.
  std::map<int, std::vector<std::optional<double>>> ap;
  /// band_ap[band][category][threshold index]
  std::vector<std::map<int, std::vector<std::optional<double>>>> band_ap;
  std::optional<double> headline;  // mean over config thresholds of the category mean
  std::optional<double> ap25;
  std::optional<double> ap50;
  std::vector<std::optional<double>> band_headline;
  /// Match per prediction for each evaluated threshold (global gt index or -1).
  std::vector<std::vector<std::ptrdiff_t>> matches;
};

namespace detail {

inline std::optional<double> mean_defined(const std::vector<std::optional<double>>& v) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& x : v)
    if (x) {
      s += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

}  // namespace detail

/// Matches predictions to ground truths per (image, category) at every
/// threshold and computes AP per category, threshold and depth band.
inline EvalResult match_and_ap(const std::vector<Box3D>& preds, const std::vector<Box3D>& gts,
                               const MatchConfig& cfg) {
  cfg.validate();
  for (const auto& p : preds)
    if (!p.has_score) throw std::invalid_argument("match_and_ap: prediction without score");

  EvalResult res;
  res.thresholds = cfg.iou_thresholds;
  for (double extra : {0.25, 0.5})
    if (std::find(res.thresholds.begin(), res.thresholds.end(), extra) == res.thresholds.end())
      res.thresholds.push_back(extra);
  std::sort(res.thresholds.begin(), res.thresholds.end());
  const std::size_t nt = res.thresholds.size();
  auto tindex = [&](double t) {
    return static_cast<std::size_t>(std::find(res.thresholds.begin(), res.thresholds.end(), t) - res.thresholds.begin());
  };

  // Groups keyed by (image, category).
  struct Group {
    std::vector<std::size_t> preds;
    std::vector<std::size_t> gts;
    std::vector<std::vector<double>> iou;
  };
  std::map<std::pair<std::int64_t, int>, Group> groups;
  for (std::size_t i = 0; i < preds.size(); ++i) groups[{preds[i].image_id, preds[i].category}].preds.push_back(i);
  for (std::size_t i = 0; i < gts.size(); ++i) groups[{gts[i].image_id, gts[i].category}].gts.push_back(i);
  std::vector<Group*> glist;
  for (auto& [k, g] : groups) glist.push_back(&g);

  parallel_for(glist.size(), [&](std::size_t gi) {
    Group& g = *glist[gi];
    g.iou.assign(g.preds.size(), std::vector<double>(g.gts.size(), 0.0));
    for (std::size_t p = 0; p < g.preds.size(); ++p)
      for (std::size_t q = 0; q < g.gts.size(); ++q)
        g.iou[p][q] = cfg.yaw_only_iou ? iou3d_yaw(preds[g.preds[p]], gts[g.gts[q]])
                                       : iou3d(preds[g.preds[p]], gts[g.gts[q]]);
  });

  res.matches.assign(nt, std::vector<std::ptrdiff_t>(preds.size(), -1));
  for (std::size_t t = 0; t < nt; ++t)
    for (Group* g : glist) {
      std::vector<double> scores;
      for (std::size_t p : g->preds) scores.push_back(preds[p].score);
      const auto m = greedy_match(scores, g->iou, res.thresholds[t]);
      for (std::size_t p = 0; p < g->preds.size(); ++p)
        if (m[p] >= 0) res.matches[t][g->preds[p]] = static_cast<std::ptrdiff_t>(g->gts[m[p]]);
    }

  std::map<int, bool> cat_set;
  for (const auto& b : gts) cat_set[b.category] = true;
  for (const auto& b : preds) cat_set[b.category] = true;
  for (const auto& [c, _] : cat_set) res.categories.push_back(c);

  // Global ranking: descending score, stable on input order.
  std::vector<std::size_t> ranked(preds.size());
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });

  auto ap_for = [&](int cat, std::size_t t, const std::vector<bool>* gt_in, const std::vector<bool>* pred_in) {
    std::size_t npos = 0;
    for (std::size_t g = 0; g < gts.size(); ++g)
      if (gts[g].category == cat && (!gt_in || (*gt_in)[g])) ++npos;
    std::vector<bool> flags;
    for (std::size_t p : ranked)
      if (preds[p].category == cat && (!pred_in || (*pred_in)[p])) flags.push_back(res.matches[t][p] >= 0);
    return average_precision(flags, npos);
  };

  for (int cat : res.categories) {
    auto& row = res.ap[cat];
    row.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) row[t] = ap_for(cat, t, nullptr, nullptr);
  }

  res.band_ap.resize(cfg.depth_bands.size());
  for (std::size_t t = 0; t < nt; ++t) {
    const auto split = depth_band_split(gts, preds, res.matches[t], cfg.depth_bands);
    for (std::size_t b = 0; b < cfg.depth_bands.size(); ++b) {
      std::vector<bool> gt_in(gts.size(), false);
      std::vector<bool> pred_in(preds.size(), false);
      for (std::size_t g : split.gts[b]) gt_in[g] = true;
      for (std::size_t p : split.preds[b]) pred_in[p] = true;
      for (int cat : res.categories) {
        auto& row = res.band_ap[b][cat];
        row.resize(nt);
        row[t] = ap_for(cat, t, &gt_in, &pred_in);
      }
    }
  }

  auto category_mean = [&](const std::map<int, std::vector<std::optional<double>>>& table, std::size_t t) {
    std::vector<std::optional<double>> v;
    for (int cat : res.categories) v.push_back(table.at(cat)[t]);
    return detail::mean_defined(v);
  };
  auto headline_of = [&](const std::map<int, std::vector<std::optional<double>>>& table) {
    std::vector<std::optional<double>> per_t;
    for (double thr : cfg.iou_thresholds) per_t.push_back(category_mean(table, tindex(thr)));
    return detail::mean_defined(per_t);
  };
  res.headline = headline_of(res.ap);
  res.ap25 = category_mean(res.ap, tindex(0.25));
  res.ap50 = category_mean(res.ap, tindex(0.5));
  for (const auto& table : res.band_ap) res.band_headline.push_back(headline_of(table));
  return res;
}

}  // namespace bevkit

#endif  // BEVKIT_EVAL3D_HPP
