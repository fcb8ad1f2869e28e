// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Machine-readable results go to --out files (or
// stdout when no file is given), human summaries to stdout, diagnostics to
// stderr. Exit codes: 0 success, 1 usage error, 2 data or validation error.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bevkit/bevkit.hpp"

namespace {

using bevkit::FeatureMap;
using nlohmann::json;
namespace io = bevkit::io;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that round-trips.
std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// |a - b| / max(|a|, |b|, floor); identical values give 0.
double rel_err(double a, double b, double floor = 0.0) {
  const double d = std::abs(a - b);
  if (d == 0.0) return 0.0;
  return d / std::max({std::abs(a), std::abs(b), floor});
}

void emit_json(const std::string& path, const json& j) {
  if (path.empty())
    std::cout << j.dump(2) << "\n";
  else
    io::save_json(path, j);
}

// --- grid ------------------------------------------------------------------

struct GridArgs {
  bool print_edges = false;
  std::string out;
  std::optional<std::size_t> n_x, n_z;
  bool uniform = false;
};

int run_grid(const GridArgs& a, const bevkit::Config& cfg) {
  auto c = cfg;
  if (a.n_x) c.grid_x = *a.n_x;
  if (a.n_z) c.grid_z = *a.n_z;
  if (a.uniform) c.uneven_grid = false;
  const auto g = c.grid();
  if (a.print_edges) {
    for (double e : g.depth_edges) std::cout << num(e) << "\n";
  } else {
    std::cout << "grid " << g.n_x << "x" << g.n_z << (g.uneven ? " uneven" : " uniform") << ", "
              << g.depth_edges.size() << " depth edges from " << num(g.depth_edges.front()) << " to "
              << num(g.depth_edges.back()) << "\n";
  }
  if (!a.out.empty()) io::save_json(a.out, bevkit::grid_to_json(g));
  return 0;
}

// --- project ---------------------------------------------------------------

struct ProjectArgs {
  std::string depth, features, intrinsics, out, stats, confidence_out;
  std::optional<double> tau;
  std::string reduce = "sum";
};

int run_project(const ProjectArgs& a, const bevkit::Config& cfg) {
  const auto depth = bevkit::DepthDistribution::from_feature_map(io::read_tensor(a.depth));
  const auto features = io::read_tensor(a.features);
  const auto k = io::intrinsics_from_json(io::load_json(a.intrinsics));
  const double tau = a.tau.value_or(cfg.tau);
  const auto g = cfg.grid();
  const auto edges = bevkit::projection_bin_edges(g, depth.bins(), cfg.uneven_depth_bins);
  const auto reduce = a.reduce == "mean" ? bevkit::Reduce::kMean : bevkit::Reduce::kSum;

  const auto sp = bevkit::sparse_prune(depth, tau);
  const auto res = bevkit::splat_to_bev(features, sp, k, g, edges, reduce);
  io::write_tensor(a.out, res.bev);
  if (!a.confidence_out.empty())
    io::write_tensor(a.confidence_out, bevkit::splat_max_confidence(depth, k, g, edges));

  const json stats = {{"tau", tau},
                      {"total", sp.total()},
                      {"kept", sp.kept()},
                      {"removal_ratio", sp.removal_ratio()},
                      {"out_of_grid", res.out_of_grid},
                      {"bev_checksum", hex64(bevkit::fnv1a(res.bev.data()))}};
  if (!a.stats.empty()) io::save_json(a.stats, stats);
  std::cout << "kept " << sp.kept() << " of " << sp.total() << " depth-pixel pairs (removal "
            << num(100.0 * sp.removal_ratio()) << "%), " << res.out_of_grid << " outside the grid\n";
  return 0;
}

// --- bench -----------------------------------------------------------------

struct BenchArgs {
  std::vector<double> taus;
  std::size_t hf = 16, wf = 44, cd = 80, ci = 16;
  std::string grid, out;
  std::uint64_t seed = 0;
  int repeats = 1;
  bool timing = false;
};

int run_bench(const BenchArgs& a, const bevkit::Config& cfg) {
  bevkit::BenchSpec spec;
  spec.feature_rows = a.hf;
  spec.feature_cols = a.wf;
  spec.depth_bins = a.cd;
  spec.channels = a.ci;
  spec.grid = a.grid.empty() ? cfg.grid() : bevkit::grid_from_json(io::load_json(a.grid));
  spec.uneven_depth_bins = cfg.uneven_depth_bins;
  spec.seed = a.seed;
  spec.repeats = a.timing ? a.repeats : 1;
  if (a.hf == 0 || a.wf == 0 || a.cd == 0 || a.ci == 0) throw UsageError("bench: sizes must be positive");
  const auto taus = a.taus.empty() ? std::vector<double>{0.0, 1e-3, 1e-2, 1e-1} : a.taus;
  const auto rows = bevkit::bench_projection(spec, taus);

  std::ostringstream csv;
  csv << "tau,kept_ratio,wall_ms,checksum\n";
  for (const auto& r : rows) {
    char ms[32];
    std::snprintf(ms, sizeof ms, "%.3f", a.timing ? r.wall_ms : 0.0);
    csv << num(r.tau) << "," << num(r.kept_ratio) << "," << ms << "," << hex64(r.bev_checksum) << "\n";
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    io::write_file(a.out, csv.str());
    for (const auto& r : rows)
      std::cout << "tau " << num(r.tau) << ": kept " << r.kept << " of " << r.total << " (removal "
                << num(100.0 * (1.0 - r.kept_ratio)) << "%)\n";
  }
  return 0;
}

// --- unify -----------------------------------------------------------------

struct UnifyArgs {
  std::string in = "mmpc";
  std::string input, intrinsics, pose, out, stats;
  std::optional<double> tol;
};

int run_unify(const UnifyArgs& a, const bevkit::Config& cfg) {
  const auto k = io::intrinsics_from_json(io::load_json(a.intrinsics));
  bevkit::PointCloud pc;
  if (a.in == "mmpc") {
    pc = io::read_mmpc(a.input);
  } else {
    // Depth maps travel as (1, 1, H, W) tensors in the camera frame.
    const auto t = io::read_tensor(a.input);
    if (t.channels() != 1 || t.depth() != 1) throw bevkit::DataError("depth map tensor must have shape (1,1,H,W)");
    bevkit::DepthMap dm(static_cast<int>(t.cols()), static_cast<int>(t.rows()));
    dm.depths = t.data();
    pc = bevkit::depthmap_to_cloud(dm, k);
  }
  if (!a.pose.empty()) pc = bevkit::transform_cloud(pc, io::pose_from_json(io::load_json(a.pose)));
  const auto r = bevkit::visibility_filter_with_stats(pc, k, a.tol.value_or(cfg.visibility_tol));
  io::write_mmpc(a.out, r.cloud);
  const json stats = {{"input", r.stats.input},
                      {"out_of_view", r.stats.out_of_view},
                      {"occluded", r.stats.occluded},
                      {"retained", r.stats.retained}};
  if (!a.stats.empty()) io::save_json(a.stats, stats);
  std::cout << "retained " << r.stats.retained << " of " << r.stats.input << " points (" << r.stats.occluded
            << " occluded, " << r.stats.out_of_view << " out of view)\n";
  return 0;
}

// --- losses ----------------------------------------------------------------

struct LossArgs {
  std::string kind;
  std::string input, target, pred, mask, image_mask, point_mask, confidence;
  std::string out, grad_out;
  bool check_init = false;
  bool grad_check = false;
  std::size_t cases = 100;
  std::uint64_t seed = 0;
};

std::vector<double> simplex_point(std::size_t n, bevkit::Rng& rng) {
  std::vector<double> c(n);
  double sum = 0.0;
  for (auto& v : c) {
    v = rng.uniform() + 1e-3;
    sum += v;
  }
  for (auto& v : c) v /= sum;
  return c;
}

struct DalnInput {
  std::vector<double> x, confidence, upstream;
  bevkit::DalnParams params;
};

DalnInput daln_from_json(const json& j) {
  DalnInput in;
  try {
    in.x = j.at("x").get<std::vector<double>>();
    in.confidence = j.at("confidence").get<std::vector<double>>();
    const std::size_t d = in.confidence.size();
    in.params.alphas = j.contains("alphas") ? j.at("alphas").get<std::vector<double>>() : std::vector<double>(d, 1.0);
    in.params.betas = j.contains("betas") ? j.at("betas").get<std::vector<double>>() : std::vector<double>(d, 0.0);
    in.upstream = j.contains("upstream") ? j.at("upstream").get<std::vector<double>>()
                                         : std::vector<double>(in.x.size(), 1.0);
  } catch (const json::exception& e) {
    throw bevkit::DataError(std::string("daln input: ") + e.what());
  }
  in.params.validate();
  bevkit::validate_confidence(in.confidence);
  return in;
}

DalnInput random_daln(bevkit::Rng& rng) {
  DalnInput in;
  const std::size_t c = 2 + rng.below(31);
  const std::size_t d = 1 + rng.below(4);
  for (std::size_t i = 0; i < c; ++i) in.x.push_back(rng.normal(0.0, 2.0));
  for (std::size_t i = 0; i < c; ++i) in.upstream.push_back(rng.normal());
  in.confidence = simplex_point(d, rng);
  for (std::size_t i = 0; i < d; ++i) in.params.alphas.push_back(rng.uniform(0.5, 1.5));
  for (std::size_t i = 0; i < d; ++i) in.params.betas.push_back(rng.uniform(-0.5, 0.5));
  return in;
}

/// Max relative error between the analytic daln backward pass and central
/// differences of L = <upstream, daln(x)>. Denominators are floored at 1:
/// input gradients of a normalization are often analytically zero, where a
/// pure ratio would only measure finite-difference noise.
double daln_grad_error(const DalnInput& in) {
  const auto g = bevkit::daln_backward(in.x, in.params, in.confidence, in.upstream);
  const std::size_t c = in.x.size();
  const std::size_t d = in.confidence.size();
  // Flattened variables: x, alphas, betas, confidence.
  std::vector<double> v = in.x;
  v.insert(v.end(), in.params.alphas.begin(), in.params.alphas.end());
  v.insert(v.end(), in.params.betas.begin(), in.params.betas.end());
  v.insert(v.end(), in.confidence.begin(), in.confidence.end());
  auto loss = [&](const std::vector<double>& w) {
    const std::vector<double> x(w.begin(), w.begin() + c);
    bevkit::DalnParams p{{w.begin() + c, w.begin() + c + d}, {w.begin() + c + d, w.begin() + c + 2 * d}};
    const std::vector<double> conf(w.begin() + c + 2 * d, w.end());
    const auto [alpha, beta] = bevkit::daln_affine(p, conf);
    const auto ln = bevkit::layer_norm(x).normalized;
    double s = 0.0;
    for (std::size_t i = 0; i < c; ++i) s += in.upstream[i] * (alpha * ln[i] + beta);
    return s;
  };
  const auto fd = bevkit::central_difference(loss, v);
  std::vector<double> an = g.x;
  an.insert(an.end(), g.alphas.begin(), g.alphas.end());
  an.insert(an.end(), g.betas.begin(), g.betas.end());
  an.insert(an.end(), g.confidence.begin(), g.confidence.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < an.size(); ++i) worst = std::max(worst, rel_err(an[i], fd[i], 1.0));
  return worst;
}

int run_daln(const LossArgs& a) {
  json result;
  if (a.check_init) {
    bevkit::Rng rng(a.seed);
    double worst = 0.0;
    for (std::size_t t = 0; t < a.cases; ++t) {
      const std::size_t c = 2 + rng.below(63);
      const std::size_t d = 1 + rng.below(5);
      std::vector<double> x(c);
      for (auto& v : x) v = rng.normal(0.0, 3.0);
      const auto conf = simplex_point(d, rng);
      const auto y = bevkit::daln(x, bevkit::DalnParams::initial(d), conf);
      const auto ln = bevkit::layer_norm(x).normalized;
      for (std::size_t i = 0; i < c; ++i) worst = std::max(worst, std::abs(y[i] - ln[i]));
    }
    result["check_init"] = {{"cases", a.cases}, {"max_abs_diff", worst}, {"pass", worst < 1e-12}};
    std::cout << "max |daln - layer_norm| at init over " << a.cases << " cases: " << num(worst)
              << (worst < 1e-12 ? " (< 1e-12)" : " (exceeds 1e-12)") << "\n";
  }
  if (!a.input.empty()) {
    const auto in = daln_from_json(io::load_json(a.input));
    const auto y = bevkit::daln(in.x, in.params, in.confidence);
    result["output"] = y;
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) loss += in.upstream[i] * y[i];
    result["loss"] = loss;
    std::cout << "loss " << num(loss) << "\n";
    if (!a.grad_out.empty()) {
      const auto g = bevkit::daln_backward(in.x, in.params, in.confidence, in.upstream);
      io::save_json(a.grad_out, {{"x", g.x}, {"alphas", g.alphas}, {"betas", g.betas}, {"confidence", g.confidence}});
    }
    if (a.grad_check) {
      const double err = daln_grad_error(in);
      result["grad_check"] = {{"cases", 1}, {"max_rel_error", err}};
      std::cout << "max relative gradient error " << num(err) << "\n";
    }
  } else if (a.grad_check) {
    bevkit::Rng rng(a.seed);
    double worst = 0.0;
    for (std::size_t t = 0; t < a.cases; ++t) worst = std::max(worst, daln_grad_error(random_daln(rng)));
    result["grad_check"] = {{"cases", a.cases}, {"max_rel_error", worst}};
    std::cout << "max relative gradient error over " << a.cases << " cases: " << num(worst) << "\n";
  }
  if (result.is_null()) throw UsageError("losses daln: give --input, --check-init or --grad-check");
  if (!a.out.empty()) io::save_json(a.out, result);
  return 0;
}

int run_calign(const LossArgs& a, const bevkit::Config& cfg) {
  if (a.input.empty()) throw UsageError("losses calign: --input is required");
  const auto j = io::load_json(a.input);
  bevkit::LabelSpace ls;
  std::vector<double> base;
  std::vector<int> predicted, labels;
  int dataset = 0;
  try {
    for (const auto& [key, cats] : j.at("label_spaces").items())
      ls.spaces[std::stoi(key)] = cats.get<std::set<int>>();
    ls.background = j.value("background", -1);
    ls.gamma = j.value("gamma", cfg.gamma);
    base = j.at("losses").get<std::vector<double>>();
    predicted = j.at("predicted").get<std::vector<int>>();
    labels = j.at("labels").get<std::vector<int>>();
    dataset = j.at("dataset").get<int>();
  } catch (const json::exception& e) {
    throw bevkit::DataError(std::string("calign input: ") + e.what());
  } catch (const std::logic_error& e) {
    throw bevkit::DataError(std::string("calign input: bad dataset key: ") + e.what());
  }
  const auto out = bevkit::class_alignment_loss(base, predicted, labels, ls, dataset);
  double total = 0.0;
  for (double v : out) total += v;
  const double mean = out.empty() ? 0.0 : total / static_cast<double>(out.size());
  std::cout << "loss " << num(mean) << " (mean over " << out.size() << " samples)\n";
  if (!a.out.empty()) io::save_json(a.out, {{"losses", out}, {"loss", mean}});
  if (!a.grad_out.empty()) {
    // d loss_i / d base_i is the per-sample scale.
    std::vector<double> scale(out.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      scale[i] = bevkit::class_alignment_scale(predicted[i], labels[i], ls, dataset);
    io::save_json(a.grad_out, {{"scale", scale}});
  }
  return 0;
}

struct MicInstance {
  FeatureMap target, pred;
  bevkit::BevMask mask;  // effective mask the loss runs over
};

/// Random instance whose masked differences all stay clear of the L1 kink.
MicInstance random_mic(bevkit::Rng& rng, bool i2p) {
  const std::size_t c = 1 + rng.below(3), d = 1 + rng.below(2), h = 2 + rng.below(6), w = 2 + rng.below(6);
  MicInstance m{FeatureMap({c, d, h, w}), FeatureMap({c, d, h, w}), bevkit::BevMask(h, w)};
  bevkit::BevMask mp(h, w), mi(h, w);
  for (std::size_t i = 0; i < mp.size(); ++i) mp.set(i, rng.uniform() < 0.4);
  for (std::size_t i = 0; i < mi.size(); ++i) mi.set(i, rng.uniform() < 0.6);
  m.mask = i2p ? (mi & ~mp) : mp;
  for (std::size_t i = 0; i < m.target.size(); ++i) {
    m.target.data()[i] = rng.normal();
    const double gap = rng.uniform(0.01, 1.0);
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    m.pred.data()[i] = m.target.data()[i] + sign * gap;
  }
  return m;
}

struct MicCheck {
  double max_rel_error = 0.0;
  bool support_ok = true;
  bool stop_gradient_ok = true;
  std::size_t excluded = 0;
};

MicCheck mic_grad_check(const MicInstance& m) {
  const auto r = bevkit::detail::masked_l1(m.target, m.pred, m.mask);
  MicCheck out;
  const std::size_t plane = m.pred.rows() * m.pred.cols();
  auto loss_at = [&](const std::vector<double>& p) {
    return bevkit::detail::masked_l1(m.target, FeatureMap(m.pred.shape(), p), m.mask).loss;
  };
  std::vector<double> p = m.pred.data();
  const double step = 1e-5;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!m.mask[i % plane] && r.grad_pred.data()[i] != 0.0) out.support_ok = false;
    if (r.grad_target.data()[i] != 0.0) out.stop_gradient_ok = false;
    if (std::abs(p[i] - m.target.data()[i]) < 1e-4) {
      ++out.excluded;
      continue;
    }
    const double orig = p[i];
    p[i] = orig + step;
    const double fp = loss_at(p);
    p[i] = orig - step;
    const double fm = loss_at(p);
    p[i] = orig;
    out.max_rel_error = std::max(out.max_rel_error, rel_err(r.grad_pred.data()[i], (fp - fm) / (2.0 * step)));
  }
  return out;
}

bevkit::BevMask load_mask(const std::string& path) { return bevkit::BevMask::from_feature_map(io::read_tensor(path)); }

int run_mic(const LossArgs& a, const bevkit::Config& cfg, bool i2p) {
  json result;
  if (!a.target.empty() || !a.pred.empty()) {
    if (a.target.empty() || a.pred.empty()) throw UsageError("losses mic: --target and --pred go together");
    MicInstance m{io::read_tensor(a.target), io::read_tensor(a.pred), {}};
    bevkit::MaskedL1Result r;
    if (i2p) {
      if (a.point_mask.empty()) throw UsageError("losses mic-i2p: --point-mask is required");
      bevkit::BevMask mi;
      if (!a.image_mask.empty())
        mi = load_mask(a.image_mask);
      else if (!a.confidence.empty())
        mi = bevkit::image_confidence_mask(io::read_tensor(a.confidence), cfg.epsilon);
      else
        throw UsageError("losses mic-i2p: give --image-mask or --confidence");
      const auto mp = load_mask(a.point_mask);
      r = bevkit::mic_i2p_loss(m.target, m.pred, mi, mp);
      m.mask = mi & ~mp;
    } else {
      if (a.mask.empty()) throw UsageError("losses mic-p2i: --mask is required");
      m.mask = load_mask(a.mask);
      r = bevkit::mic_p2i_loss(m.target, m.pred, m.mask);
    }
    result["loss"] = r.loss;
    result["elements"] = r.elements;
    std::cout << "loss " << num(r.loss) << " over " << r.elements << " masked elements\n";
    if (!a.grad_out.empty()) io::write_tensor(a.grad_out, r.grad_pred);
    if (a.grad_check) {
      const auto c = mic_grad_check(m);
      result["grad_check"] = {{"cases", 1},
                              {"max_rel_error", c.max_rel_error},
                              {"support_ok", c.support_ok},
                              {"stop_gradient_ok", c.stop_gradient_ok},
                              {"excluded_near_kink", c.excluded}};
      std::cout << "max relative gradient error " << num(c.max_rel_error) << "\n";
    }
  } else if (a.grad_check) {
    bevkit::Rng rng(a.seed);
    MicCheck all;
    for (std::size_t t = 0; t < a.cases; ++t) {
      const auto c = mic_grad_check(random_mic(rng, i2p));
      all.max_rel_error = std::max(all.max_rel_error, c.max_rel_error);
      all.support_ok = all.support_ok && c.support_ok;
      all.stop_gradient_ok = all.stop_gradient_ok && c.stop_gradient_ok;
      all.excluded += c.excluded;
    }
    result["grad_check"] = {{"cases", a.cases},
                            {"max_rel_error", all.max_rel_error},
                            {"support_ok", all.support_ok},
                            {"stop_gradient_ok", all.stop_gradient_ok}};
    std::cout << "max relative gradient error over " << a.cases << " cases: " << num(all.max_rel_error)
              << (all.support_ok ? ", support ok" : ", SUPPORT VIOLATED")
              << (all.stop_gradient_ok ? ", stop-gradient ok" : ", STOP-GRADIENT VIOLATED") << "\n";
  } else {
    throw UsageError("losses mic: give --target/--pred or --grad-check");
  }
  if (!a.out.empty()) io::save_json(a.out, result);
  return 0;
}

int run_losses(const LossArgs& a, const bevkit::Config& cfg) {
  if (a.kind == "daln") return run_daln(a);
  if (a.kind == "calign") return run_calign(a, cfg);
  return run_mic(a, cfg, a.kind == "mic-i2p");
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string gt, pred, cfg, out;
  bool yaw_only = false;
};

int run_eval(const EvalArgs& a, const bevkit::Config& cfg) {
  auto mc = cfg.match_config();
  if (!a.cfg.empty()) {
    const auto j = io::load_json(a.cfg);
    mc = bevkit::config_from_json(j).match_config();
    mc.yaw_only_iou = j.value("yaw_only_iou", false);
  }
  if (a.yaw_only) mc.yaw_only_iou = true;
  const auto gts = io::read_boxes(a.gt);
  const auto preds = io::read_boxes(a.pred);
  const auto r = bevkit::match_and_ap(preds, gts, mc);

  json per_category = json::object();
  for (const auto& [cat, aps] : r.ap) {
    json row = json::object();
    for (std::size_t t = 0; t < r.thresholds.size(); ++t) row[num(r.thresholds[t])] = optional_json(aps[t]);
    per_category[std::to_string(cat)] = row;
  }
  json metrics = {{"thresholds", r.thresholds},
                  {"per_category", per_category},
                  {"AP", optional_json(r.headline)},
                  {"AP25", optional_json(r.ap25)},
                  {"AP50", optional_json(r.ap50)}};
  for (std::size_t b = 0; b < mc.depth_bands.size(); ++b)
    metrics["AP_" + mc.depth_bands[b].name] = optional_json(r.band_headline[b]);
  emit_json(a.out, metrics);
  if (!a.out.empty()) {
    auto show = [](const std::optional<double>& v) { return v ? num(*v) : std::string("undefined"); };
    std::cout << "AP " << show(r.headline) << "  AP25 " << show(r.ap25) << "  AP50 " << show(r.ap50);
    for (std::size_t b = 0; b < mc.depth_bands.size(); ++b)
      std::cout << "  AP_" << mc.depth_bands[b].name << " " << show(r.band_headline[b]);
    std::cout << "\n";
  }
  return 0;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 0;
  std::string regime = "indoor";
  std::size_t n_objects = 4;
  std::string out_dir;
  std::optional<double> pred_noise;
};

int run_synth(const SynthArgs& a, const bevkit::Config& cfg) {
  auto spec = bevkit::SceneSpec::for_regime(bevkit::regime_from_string(a.regime), a.seed, a.n_objects);
  spec.grid = cfg.grid();
  spec.uneven_depth_bins = cfg.uneven_depth_bins;
  spec.visibility_tol = cfg.visibility_tol;
  const auto s = bevkit::generate(spec);
  const std::filesystem::path dir(a.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw bevkit::DataError("cannot create " + a.out_dir + ": " + ec.message());
  io::write_mmpc((dir / "cloud.mmpc").string(), s.cloud);
  io::write_tensor((dir / "depth.tnsr").string(), s.depth.to_feature_map());
  io::write_tensor((dir / "features.tnsr").string(), s.features);
  io::write_boxes((dir / "boxes.jsonl").string(), s.boxes);
  io::save_json((dir / "intrinsics.json").string(), io::intrinsics_to_json(s.camera));
  io::save_json((dir / "feature_intrinsics.json").string(), io::intrinsics_to_json(s.feature_camera));
  if (a.pred_noise) {
    const double sd = *a.pred_noise;
    io::write_boxes((dir / "preds.jsonl").string(), bevkit::perturb(s.boxes, sd, 0.5 * sd, 0.5 * sd, a.seed + 1));
  }
  std::cout << bevkit::to_string(spec.regime) << " scene, seed " << a.seed << ": " << s.boxes.size() << " boxes, "
            << s.cloud.size() << " visible points, depth " << s.depth.bins() << "x" << s.depth.rows() << "x"
            << s.depth.cols() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bevkit: bird's-eye-view detection geometry and evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  unsigned threads = 0;
  app.add_option("--config", config_path, "JSON config file (defaults apply to missing keys)");
  app.add_option("--threads", threads, "Worker threads (falls back to BEVKIT_THREADS, then 1)")
      ->check(CLI::Range(1u, 1024u));

  GridArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "Build the BEV grid and show or save its edges");
  grid_cmd->add_flag("--print-edges", grid.print_edges, "Print depth edges, one per line");
  grid_cmd->add_option("--out", grid.out, "Write the grid as JSON");
  grid_cmd->add_option("--n-x", grid.n_x, "Lateral cells")->check(CLI::PositiveNumber);
  grid_cmd->add_option("--n-z", grid.n_z, "Depth cells")->check(CLI::PositiveNumber);
  grid_cmd->add_flag("--uniform", grid.uniform, "Use uniform depth edges");

  ProjectArgs proj;
  auto* proj_cmd = app.add_subcommand("project", "Splat image features into the BEV grid");
  proj_cmd->add_option("--depth", proj.depth, "Depth distribution tensor (1,C_d,H,W)")->required();
  proj_cmd->add_option("--features", proj.features, "Image feature tensor (C,1,H,W)")->required();
  proj_cmd->add_option("--intrinsics", proj.intrinsics, "Feature-map intrinsics JSON")->required();
  proj_cmd->add_option("--out", proj.out, "BEV feature tensor")->required();
  proj_cmd->add_option("--stats", proj.stats, "Projection statistics JSON");
  proj_cmd->add_option("--confidence-out", proj.confidence_out, "Per-cell max depth confidence tensor");
  proj_cmd->add_option("--tau", proj.tau, "Pruning threshold (default from config)")->check(CLI::NonNegativeNumber);
  proj_cmd->add_option("--reduce", proj.reduce, "sum or mean")->check(CLI::IsMember({"sum", "mean"}));

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Sparse projection benchmark over thresholds");
  bench_cmd->add_option("--tau", bench.taus, "Threshold (repeatable)")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--hf", bench.hf, "Feature rows");
  bench_cmd->add_option("--wf", bench.wf, "Feature columns");
  bench_cmd->add_option("--cd", bench.cd, "Depth bins");
  bench_cmd->add_option("--ci", bench.ci, "Feature channels");
  bench_cmd->add_option("--grid", bench.grid, "Grid JSON (default from config)");
  bench_cmd->add_option("--seed", bench.seed, "RNG seed");
  bench_cmd->add_option("--out", bench.out, "CSV report");
  bench_cmd->add_option("--repeats", bench.repeats, "Timing repeats, best is reported")->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--timing", bench.timing, "Record wall time (otherwise 0, keeping output reproducible)");

  UnifyArgs unify;
  auto* unify_cmd = app.add_subcommand("unify", "Convert input to a camera-visible point cloud");
  unify_cmd->add_option("--in", unify.in, "Input kind")->check(CLI::IsMember({"mmpc", "depthmap"}));
  unify_cmd->add_option("--input", unify.input, "MMPC cloud or (1,1,H,W) depth tensor")->required();
  unify_cmd->add_option("--intrinsics", unify.intrinsics, "Camera intrinsics JSON")->required();
  unify_cmd->add_option("--pose", unify.pose, "Pose JSON mapping input frame to camera frame");
  unify_cmd->add_option("--tol", unify.tol, "Z-buffer tolerance in meters")->check(CLI::PositiveNumber);
  unify_cmd->add_option("--out", unify.out, "Output MMPC cloud")->required();
  unify_cmd->add_option("--stats", unify.stats, "Counts JSON");

  LossArgs loss;
  auto* loss_cmd = app.add_subcommand("losses", "Evaluate head losses and check their gradients");
  loss_cmd->add_option("kind", loss.kind, "daln | calign | mic-p2i | mic-i2p")
      ->required()
      ->check(CLI::IsMember({"daln", "calign", "mic-p2i", "mic-i2p"}));
  loss_cmd->add_option("--input", loss.input, "JSON input (daln, calign)");
  loss_cmd->add_option("--target", loss.target, "Stop-gradient tensor (mic)");
  loss_cmd->add_option("--pred", loss.pred, "Prediction tensor (mic)");
  loss_cmd->add_option("--mask", loss.mask, "Point occupancy mask tensor (mic-p2i)");
  loss_cmd->add_option("--image-mask", loss.image_mask, "Image confidence mask tensor (mic-i2p)");
  loss_cmd->add_option("--confidence", loss.confidence, "BEV depth confidence tensor, thresholded by epsilon");
  loss_cmd->add_option("--point-mask", loss.point_mask, "Point occupancy mask tensor (mic-i2p)");
  loss_cmd->add_option("--out", loss.out, "Result JSON");
  loss_cmd->add_option("--grad-out", loss.grad_out, "Gradient output file");
  loss_cmd->add_flag("--check-init", loss.check_init, "daln: compare with layer norm at initialization");
  loss_cmd->add_flag("--grad-check", loss.grad_check, "Compare gradients with finite differences");
  loss_cmd->add_option("--cases", loss.cases, "Random cases for checks")->check(CLI::PositiveNumber);
  loss_cmd->add_option("--seed", loss.seed, "RNG seed for random cases");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "3D AP of predictions against ground truth");
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth boxes JSONL")->required();
  eval_cmd->add_option("--pred", eval.pred, "Predicted boxes JSONL")->required();
  eval_cmd->add_option("--cfg", eval.cfg, "Evaluation JSON (iou_thresholds, depth_bands, yaw_only_iou)");
  eval_cmd->add_option("--out", eval.out, "Metrics JSON");
  eval_cmd->add_flag("--yaw-only", eval.yaw_only, "Use the yaw-only IoU path");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene");
  synth_cmd->add_option("--seed", synth.seed, "RNG seed");
  synth_cmd->add_option("--regime", synth.regime, "indoor or outdoor")->check(CLI::IsMember({"indoor", "outdoor"}));
  synth_cmd->add_option("--n-objects", synth.n_objects, "Number of boxes");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--pred-noise", synth.pred_noise, "Also write preds.jsonl with this noise level")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (threads > 0) bevkit::set_thread_count(threads);
    const bevkit::Config cfg =
        config_path.empty() ? bevkit::Config{} : bevkit::config_from_json(io::load_json(config_path));
    if (*grid_cmd) return run_grid(grid, cfg);
    if (*proj_cmd) return run_project(proj, cfg);
    if (*bench_cmd) return run_bench(bench, cfg);
    if (*unify_cmd) return run_unify(unify, cfg);
    if (*loss_cmd) return run_losses(loss, cfg);
    if (*eval_cmd) return run_eval(eval, cfg);
    if (*synth_cmd) return run_synth(synth, cfg);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const bevkit::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
