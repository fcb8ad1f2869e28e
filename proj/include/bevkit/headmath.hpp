// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form head and loss math: domain-adaptive layer normalization,
// label-space aware classification loss scaling, the masked L1 guidance
// losses between image and point BEV features, and proposal decoding from
// a center heatmap.

#ifndef BEVKIT_HEADMATH_HPP
#define BEVKIT_HEADMATH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "bevkit/geom.hpp"
#include "bevkit/pointpipe.hpp"

namespace bevkit {

inline constexpr double kLayerNormEps = 1e-12;
inline constexpr double kDefaultGamma = 0.2;
inline constexpr std::size_t kDefaultTopM = 100;

// ---------------------------------------------------------------------------
// Layer normalization

struct LayerNormResult {
  std::vector<double> normalized;
  double mean = 0.0;
  double sigma = 0.0;  // sqrt(biased variance + eps)
};

/// Normalizes over the channel axis with the biased (1/C) variance. A 1e-12
/// stabilizer sits inside the square root, so constant inputs map to zeros.
inline LayerNormResult layer_norm(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("layer_norm: need at least 2 channels");
  const double n = static_cast<double>(x.size());
  LayerNormResult r;
  r.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - r.mean) * (v - r.mean);
  var /= n;
  r.sigma = std::sqrt(var + kLayerNormEps);
  r.normalized.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r.normalized[i] = (x[i] - r.mean) / r.sigma;
  return r;
}

// ---------------------------------------------------------------------------
// Domain adaptive layer normalization

struct DalnParams {
  std::vector<double> alphas;
  std::vector<double> betas;

  /// alpha_i = 1, beta_i = 0.
  static DalnParams initial(std::size_t domains) {
    if (domains < 1) throw std::invalid_argument("DalnParams: need at least one domain");
    return {std::vector<double>(domains, 1.0), std::vector<double>(domains, 0.0)};
  }
  std::size_t domains() const { return alphas.size(); }

  void validate() const {
    if (alphas.empty() || alphas.size() != betas.size())
      throw std::invalid_argument("DalnParams: alphas and betas must be non-empty and equal length");
    for (std::size_t i = 0; i < alphas.size(); ++i)
      if (!std::isfinite(alphas[i]) || !std::isfinite(betas[i]))
        throw std::invalid_argument("DalnParams: non-finite parameter");
  }
};

inline void validate_confidence(std::span<const double> c, double tol = 1e-9) {
  double sum = 0.0;
  for (double v : c) {
    if (!(v >= 0.0)) throw std::invalid_argument("domain confidence: negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol) throw std::invalid_argument("domain confidence: does not sum to 1");
}

/// Confidence-weighted affine parameters (alpha, beta) = sum_i c_i (alpha_i, beta_i).
inline std::pair<double, double> daln_affine(const DalnParams& p, std::span<const double> confidence) {
  if (confidence.size() != p.domains())
    throw std::invalid_argument("daln: confidence size does not match domain count");
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    a += confidence[i] * p.alphas[i];
    b += confidence[i] * p.betas[i];
  }
  return {a, b};
}

inline std::vector<double> daln(std::span<const double> x, const DalnParams& p,
                                std::span<const double> confidence) {
  p.validate();
  const auto [alpha, beta] = daln_affine(p, confidence);
  auto out = layer_norm(x).normalized;
  for (auto& v : out) v = alpha * v + beta;
  return out;
}

struct DalnGradients {
  std::vector<double> x;
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<double> confidence;
};

/// Backward pass of daln for an upstream gradient `upstream` = dL/d(output).
inline DalnGradients daln_backward(std::span<const double> x, const DalnParams& p,
                                   std::span<const double> confidence, std::span<const double> upstream) {
  if (upstream.size() != x.size()) throw std::invalid_argument("daln_backward: upstream size mismatch");
  const double alpha = daln_affine(p, confidence).first;
  const auto ln = layer_norm(x);
  const double n = static_cast<double>(x.size());
  double sum_g = 0.0;
  double sum_gx = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    sum_g += upstream[j];
    sum_gx += upstream[j] * ln.normalized[j];
  }
  DalnGradients g;
  g.x.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    g.x[k] = alpha / ln.sigma * (upstream[k] - sum_g / n - ln.normalized[k] * sum_gx / n);
  g.alphas.resize(p.domains());
  g.betas.resize(p.domains());
  g.confidence.resize(p.domains());
  for (std::size_t i = 0; i < p.domains(); ++i) {
    g.alphas[i] = confidence[i] * sum_gx;
    g.betas[i] = confidence[i] * sum_g;
    g.confidence[i] = p.alphas[i] * sum_gx + p.betas[i] * sum_g;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Class alignment loss

struct LabelSpace {
  std::map<int, std::set<int>> spaces;  // dataset id -> category ids
  int background = -1;
  double gamma = kDefaultGamma;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("LabelSpace: gamma must be in (0, 1]");
    for (const auto& [id, cats] : spaces)
      if (cats.contains(background))
        throw std::invalid_argument("LabelSpace: background id inside a dataset label space");
  }

  const std::set<int>& space(int dataset) const {
    const auto it = spaces.find(dataset);
    if (it == spaces.end()) throw std::invalid_argument("LabelSpace: unknown dataset id");
    return it->second;
  }
};

/// Loss multiplier: gamma when the target was matched to background and the
/// predicted class lies outside the dataset's label space, 1 otherwise.
inline double class_alignment_scale(int predicted, int label, const LabelSpace& ls, int dataset) {
  const auto& omega = ls.space(dataset);
  return (label == ls.background && !omega.contains(predicted)) ? ls.gamma : 1.0;
}

inline double class_alignment_loss(double base_loss, int predicted, int label, const LabelSpace& ls,
                                   int dataset) {
  return class_alignment_scale(predicted, label, ls, dataset) * base_loss;
}

inline std::vector<double> class_alignment_loss(std::span<const double> base_losses,
                                                std::span<const int> predicted, std::span<const int> labels,
                                                const LabelSpace& ls, int dataset) {
  if (predicted.size() != base_losses.size() || labels.size() != base_losses.size())
    throw std::invalid_argument("class_alignment_loss: batch sizes differ");
  ls.validate();
  std::vector<double> out(base_losses.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = class_alignment_loss(base_losses[i], predicted[i], labels[i], ls, dataset);
  return out;
}

// ---------------------------------------------------------------------------
// Masked L1 guidance losses

struct MaskedL1Result {
  double loss = 0.0;
  FeatureMap grad_pred;    // d loss / d prediction
  FeatureMap grad_target;  // stop-gradient side, identically zero
  std::size_t elements = 0;  // masked elements the mean runs over
};

namespace detail {

inline double l1_subgradient(double diff) { return diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0); }

/// Mean |pred - target| over elements whose (row, col) cell is set in
/// `mask`; the mask broadcasts over channel and depth axes.
inline MaskedL1Result masked_l1(const FeatureMap& target, const FeatureMap& pred, const BevMask& mask) {
  if (target.shape() != pred.shape()) throw std::invalid_argument("masked L1: tensor shapes differ");
  if (mask.rows() != pred.rows() || mask.cols() != pred.cols())
    throw std::invalid_argument("masked L1: mask shape does not match tensors");
  MaskedL1Result r;
  r.grad_pred = FeatureMap(pred.shape());
  r.grad_target = FeatureMap(pred.shape());
  const std::size_t plane = pred.rows() * pred.cols();
  const std::size_t stacks = pred.channels() * pred.depth();
  r.elements = mask.count() * stacks;
  if (r.elements == 0) return r;
  const double inv_n = 1.0 / static_cast<double>(r.elements);
  double sum = 0.0;
  for (std::size_t s = 0; s < stacks; ++s)
    for (std::size_t cell = 0; cell < plane; ++cell) {
      if (!mask[cell]) continue;
      const std::size_t i = s * plane + cell;
      const double diff = pred.data()[i] - target.data()[i];
      sum += std::abs(diff);
      r.grad_pred.data()[i] = l1_subgradient(diff) * inv_n;
    }
  r.loss = sum * inv_n;
  return r;
}

}  // namespace detail

/// Point-to-image guidance: L1 between stop-grad(B_P) and the interacted
/// image feature on cells that contain points.
inline MaskedL1Result mic_p2i_loss(const FeatureMap& point_bev, const FeatureMap& image_bev_hat,
                                   const BevMask& point_mask) {
  return detail::masked_l1(point_bev, image_bev_hat, point_mask);
}

/// Image-to-point guidance on cells the image branch is confident about
/// (M_I) and that hold no points (not M_P).
inline MaskedL1Result mic_i2p_loss(const FeatureMap& image_bev, const FeatureMap& point_bev_hat,
                                   const BevMask& image_mask, const BevMask& point_mask) {
  return detail::masked_l1(image_bev, point_bev_hat, image_mask & ~point_mask);
}

/// Central finite differences of a scalar function.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double step = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f(x);
    x[i] = orig - step;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Proposal decoding

struct ProposalAttributes {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> heatmap;   // rows*cols, values in [0, 1]
  std::vector<double> offset_u;  // pixel offset from 2D center to projected 3D center
  std::vector<double> offset_v;
  std::vector<double> depth;     // meters

  ProposalAttributes() = default;
  ProposalAttributes(std::size_t h, std::size_t w)
      : rows(h), cols(w), heatmap(h * w, 0.0), offset_u(h * w, 0.0), offset_v(h * w, 0.0), depth(h * w, 0.0) {}

  void validate() const {
    const std::size_t n = rows * cols;
    if (heatmap.size() != n || offset_u.size() != n || offset_v.size() != n || depth.size() != n)
      throw std::invalid_argument("ProposalAttributes: buffer sizes do not match rows*cols");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(heatmap[i] >= 0.0 && heatmap[i] <= 1.0))
        throw std::invalid_argument("ProposalAttributes: heatmap outside [0, 1]");
      if (!std::isfinite(offset_u[i]) || !std::isfinite(offset_v[i]) || !std::isfinite(depth[i]))
        throw std::invalid_argument("ProposalAttributes: non-finite attribute");
    }
  }
};

struct Proposal {
  Vec3 center;
  double confidence = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
};

/// Heatmap peaks under 3x3 non-maximum suppression. Among equal values the
/// lowest linear index wins. Zero-valued cells are never peaks.
inline std::vector<std::size_t> heatmap_peaks(const ProposalAttributes& a) {
  std::vector<std::size_t> peaks;
  const auto H = static_cast<std::ptrdiff_t>(a.rows);
  const auto W = static_cast<std::ptrdiff_t>(a.cols);
  for (std::ptrdiff_t r = 0; r < H; ++r)
    for (std::ptrdiff_t c = 0; c < W; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r * W + c);
      const double v = a.heatmap[idx];
      if (!(v > 0.0)) continue;
      bool peak = true;
      for (std::ptrdiff_t dr = -1; dr <= 1 && peak; ++dr)
        for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const std::ptrdiff_t rr = r + dr;
          const std::ptrdiff_t cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= H || cc >= W) continue;
          const std::size_t j = static_cast<std::size_t>(rr * W + cc);
          const double u = a.heatmap[j];
          if (u > v || (u == v && j < idx)) {
            peak = false;
            break;
          }
        }
      if (peak) peaks.push_back(idx);
    }
  return peaks;
}

/// Top-M heatmap peaks lifted to 3D centers, sorted by confidence
/// (descending) then linear index. Peaks with non-positive depth are skipped.
inline std::vector<Proposal> decode_proposals(const ProposalAttributes& a, const CameraIntrinsics& k,
                                              std::size_t top_m = kDefaultTopM) {
  if (top_m < 1) throw std::invalid_argument("decode_proposals: M must be >= 1");
  a.validate();
  auto peaks = heatmap_peaks(a);
  std::sort(peaks.begin(), peaks.end(), [&](std::size_t i, std::size_t j) {
    if (a.heatmap[i] != a.heatmap[j]) return a.heatmap[i] > a.heatmap[j];
    return i < j;
  });
  std::vector<Proposal> out;
  for (std::size_t idx : peaks) {
    if (out.size() >= top_m) break;
    if (!(a.depth[idx] > 0.0)) continue;
    Proposal p;
    p.row = idx / a.cols;
    p.col = idx % a.cols;
    p.confidence = a.heatmap[idx];
    p.center = unproject_pixel(static_cast<double>(p.col) + a.offset_u[idx],
                               static_cast<double>(p.row) + a.offset_v[idx], a.depth[idx], k);
    out.push_back(p);
  }
  return out;
}

struct HeatmapCenter {
  double u = 0.0;  // column
  double v = 0.0;  // row
  double sigma = 1.0;
};

/// Per-pixel max over exp(-d^2 / (2 sigma^2)) across centers.
inline std::vector<double> gaussian_heatmap_target(std::span<const HeatmapCenter> centers, std::size_t rows,
                                                   std::size_t cols) {
  std::vector<double> hm(rows * cols, 0.0);
  for (const auto& c : centers) {
    if (!(c.sigma > 0.0)) throw std::invalid_argument("gaussian_heatmap_target: sigma must be positive");
    const double inv = 1.0 / (2.0 * c.sigma * c.sigma);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t col = 0; col < cols; ++col) {
        const double du = static_cast<double>(col) - c.u;
        const double dv = static_cast<double>(r) - c.v;
        auto& cell = hm[r * cols + col];
        cell = std::max(cell, std::exp(-(du * du + dv * dv) * inv));
      }
  }
  return hm;
}

}  // namespace bevkit

#endif  // BEVKIT_HEADMATH_HPP
