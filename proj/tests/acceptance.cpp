// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks, one PASS/FAIL line per criterion. The first argument is
// the path of the bevkit CLI binary; the process exits non-zero if any check
// fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bevkit/bevkit.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using bevkit::Box3D;
using bevkit::FeatureMap;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// 1. Grid edges and width increments.
void grid_edges(Outcome& o) {
  const auto t0 = Clock::now();
  const auto g = bevkit::build_grid({-30.0, 30.0}, {0.0, 80.0}, 60, 80, true);
  const auto& e = g.depth_edges;
  o.require(e.size() == 81, "81 edges");
  o.require(e.front() == 0.0 && e.back() == 80.0, "exact endpoints");
  const double step = 2.0 * 80.0 / (80.0 * 81.0);
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < e.size(); ++i) {
    const double dw = (e[i + 1] - e[i]) - (e[i] - e[i - 1]);
    worst = std::max(worst, std::abs(dw - step));
  }
  const double secs = seconds_since(t0);
  o.require(worst <= 1e-12, "width differences constant");
  o.require(secs < 1.0, "runtime under 1 s");
  o.detail << "max width-difference error " << worst << ", " << secs << " s";
}

// 2. Pruning bound, exactness at tau=0, monotone removal.
void sparse_projection(Outcome& o) {
  const auto t0 = Clock::now();
  bevkit::Rng rng(2002);
  const std::vector<double> taus{0.0, 1e-3, 1e-2, 1e-1};
  double slack = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto in = fixture::random_instance(rng, false);
    const auto dense = bevkit::splat_dense(bevkit::outer_project(in.features, in.depth), in.k, in.grid, in.edges);
    double fmax = 0.0;
    for (double v : in.features.data()) fmax = std::max(fmax, std::abs(v));
    const std::size_t plane = in.grid.cell_count();
    double prev_removal = -1.0;
    for (double tau : taus) {
      const auto sp = bevkit::sparse_prune(in.depth, tau);
      const auto pruned = bevkit::splat_to_bev(in.features, sp, in.k, in.grid, in.edges);
      if (tau == 0.0) o.require(pruned.bev == dense.bev, "tau=0 bit-identical to dense");
      for (std::size_t c = 0; c < in.features.channels(); ++c)
        for (std::size_t cell = 0; cell < plane; ++cell) {
          const double dropped = static_cast<double>(dense.cell_counts[cell] - pruned.cell_counts[cell]);
          const double diff = std::abs(dense.bev.data()[c * plane + cell] - pruned.bev.data()[c * plane + cell]);
          const double bound = tau * dropped * fmax;
          // Rounding of two differently ordered sums sits on top of the bound.
          o.require(diff <= bound + 1e-12, "per-cell pruning bound");
          slack = std::max(slack, diff - bound);
        }
      o.require(sp.removal_ratio() >= prev_removal, "removal non-decreasing in tau");
      prev_removal = sp.removal_ratio();
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, "runtime under 10 s");

  // Reference point for the trained-distribution ablation: synthetic
  // distributions are reported, not held to the published ratios.
  const auto rows = bevkit::bench_projection({}, taus);
  o.detail << "removal at tau {0,1e-3,1e-2,1e-1} on synthetic bench:";
  for (const auto& r : rows) o.detail << " " << 100.0 * (1.0 - r.kept_ratio) << "%";
  o.detail << "; max excess over bound " << slack << ", " << secs << " s";
}

// 3. Mass conservation.
void mass_conservation(Outcome& o) {
  bevkit::Rng rng(3003);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto in = fixture::random_instance(rng, true);
    const auto r = bevkit::splat_to_bev(in.features, bevkit::sparse_prune(in.depth, 0.0), in.k, in.grid, in.edges);
    o.require(r.out_of_grid == 0, "all rays in grid");
    const std::size_t plane = in.grid.cell_count();
    for (std::size_t c = 0; c < in.features.channels(); ++c) {
      double bev_total = 0.0;
      double pix_total = 0.0;
      for (std::size_t cell = 0; cell < plane; ++cell) bev_total += r.bev.data()[c * plane + cell];
      for (std::size_t h = 0; h < in.depth.rows(); ++h)
        for (std::size_t w = 0; w < in.depth.cols(); ++w) pix_total += in.features(c, 0, h, w);
      worst = std::max(worst, std::abs(bev_total - pix_total));
    }
  }
  o.require(worst <= 1e-9, "per-channel totals within 1e-9");
  o.detail << "max per-channel error " << worst << " over 50 instances";
}

// 4. DALN at initialization and the hand case.
void daln_init(Outcome& o) {
  bevkit::Rng rng(4004);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t c = 2 + rng.below(63);
    const std::size_t d = 1 + rng.below(5);
    std::vector<double> x(c);
    for (auto& v : x) v = rng.normal(0.0, 5.0);
    std::vector<double> conf(d);
    double sum = 0.0;
    for (auto& v : conf) {
      v = rng.uniform();
      sum += v;
    }
    if (sum == 0.0) conf[0] = sum = 1.0;
    for (auto& v : conf) v /= sum;
    // Independent layer norm: two-pass mean and biased variance.
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(c);
    const double sigma = std::sqrt(var + 1e-12);
    const auto y = bevkit::daln(x, bevkit::DalnParams::initial(d), conf);
    for (std::size_t i = 0; i < c; ++i) worst = std::max(worst, std::abs(y[i] - (x[i] - mean) / sigma));
  }
  o.require(worst <= 1e-12, "daln at init equals layer norm");
  const std::vector<double> hand{1.0, 2.0, 3.0};
  const auto y = bevkit::daln(hand, bevkit::DalnParams::initial(2), std::vector<double>{0.3, 0.7});
  const double expect[3] = {-1.224745, 0.0, 1.224745};
  double hand_err = 0.0;
  for (int i = 0; i < 3; ++i) hand_err = std::max(hand_err, std::abs(y[i] - expect[i]));
  o.require(hand_err <= 1e-6, "hand case [1,2,3]");
  o.detail << "max |daln - layer_norm| " << worst << " over 1000 cases; hand case error " << hand_err;
}

// 5. MIC gradients.
void mic_gradients(Outcome& o) {
  bevkit::Rng rng(5005);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t c = 1 + rng.below(3);
    const std::size_t d = 1 + rng.below(3);
    const std::size_t h = 2 + rng.below(6);
    const std::size_t w = 2 + rng.below(6);
    FeatureMap target({c, d, h, w});
    FeatureMap pred({c, d, h, w});
    for (std::size_t i = 0; i < target.size(); ++i) {
      target.data()[i] = rng.normal();
      // Keep every difference at least 1e-2 away from the L1 kink.
      const double gap = rng.uniform(0.01, 1.0);
      pred.data()[i] = target.data()[i] + (rng.uniform() < 0.5 ? -gap : gap);
    }
    bevkit::BevMask mp(h, w);
    bevkit::BevMask mi(h, w);
    for (std::size_t i = 0; i < mp.size(); ++i) mp.set(i, rng.uniform() < 0.4);
    for (std::size_t i = 0; i < mi.size(); ++i) mi.set(i, rng.uniform() < 0.6);
    const std::size_t plane = h * w;

    for (int kind = 0; kind < 2; ++kind) {
      const bool i2p = kind == 1;
      auto loss = [&](const std::vector<double>& p) {
        const FeatureMap fp(pred.shape(), p);
        return i2p ? bevkit::mic_i2p_loss(target, fp, mi, mp).loss : bevkit::mic_p2i_loss(target, fp, mp).loss;
      };
      const auto r = i2p ? bevkit::mic_i2p_loss(target, pred, mi, mp) : bevkit::mic_p2i_loss(target, pred, mp);
      const auto fd = oracle::finite_difference(loss, pred.data(), 1e-5);
      for (std::size_t i = 0; i < fd.size(); ++i) {
        const double a = r.grad_pred.data()[i];
        const double scale = std::max(std::abs(a), std::abs(fd[i]));
        const double rel = scale == 0.0 ? 0.0 : std::abs(a - fd[i]) / scale;
        worst = std::max(worst, rel);
        const std::size_t cell = i % plane;
        const bool support = i2p ? (mi[cell] && !mp[cell]) : mp[cell] != 0;
        if (!support) o.require(a == 0.0, "gradient outside mask support");
        o.require(r.grad_target.data()[i] == 0.0, "zero gradient into stop-gradient operand");
      }
    }
  }
  o.require(worst <= 1e-6, "relative gradient error within 1e-6");
  o.detail << "max relative error " << worst << " over 100 instances x 2 losses";
}

// 6. Class alignment.
void class_alignment(Outcome& o) {
  bevkit::Rng rng(6006);
  std::size_t scaled = 0;
  for (double gamma : {1.0, 0.2}) {
    for (int t = 0; t < 1000; ++t) {
      bevkit::LabelSpace ls;
      ls.gamma = gamma;
      const int n_classes = 2 + static_cast<int>(rng.below(8));
      const int dataset = static_cast<int>(rng.below(3));
      for (int ds = 0; ds < 3; ++ds)
        for (int k = 0; k < n_classes; ++k)
          if (rng.uniform() < 0.5) ls.spaces[ds].insert(k);
      ls.spaces[dataset];
      const std::size_t n = 1 + rng.below(16);
      std::vector<double> base(n);
      std::vector<int> pred(n), label(n);
      for (std::size_t i = 0; i < n; ++i) {
        base[i] = rng.uniform(0.0, 5.0);
        pred[i] = static_cast<int>(rng.below(n_classes));
        label[i] = rng.uniform() < 0.5 ? -1 : static_cast<int>(rng.below(n_classes));
      }
      const auto out = bevkit::class_alignment_loss(base, pred, label, ls, dataset);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& omega = ls.spaces[dataset];
        bool in_space = false;
        for (int k : omega) in_space = in_space || k == pred[i];
        const bool hit = label[i] == -1 && !in_space;
        const double expect = hit ? gamma * base[i] : base[i];
        if (gamma == 1.0) o.require(out[i] == base[i], "gamma=1 is identity");
        o.require(out[i] == expect, "matches brute-force loop");
        if (hit && gamma != 1.0) ++scaled;
      }
    }
  }
  o.require(scaled > 0, "scaled cases exercised");
  o.detail << "1000 assignments per gamma; " << scaled << " samples scaled at gamma=0.2";
}

// 7. iou3d.
void iou(Outcome& o) {
  const auto a = bevkit::make_box({0, 0, 5}, {1, 1, 1});
  o.require(bevkit::iou3d(a, a) == 1.0, "identical boxes give 1");
  const auto b = bevkit::make_box({0.5, 0, 5}, {1, 1, 1});
  const double third = bevkit::iou3d(a, b);
  o.require(std::abs(third - 1.0 / 3.0) <= 1e-9, "offset cube 1/3");
  const auto r45 = bevkit::make_box({0, 0, 5}, {1, 1, 1}, M_PI / 4.0);
  const double exact45 = bevkit::iou3d(a, r45);
  const double mc45 = oracle::monte_carlo_iou(a, r45, 1000000, 77);
  o.require(std::abs(exact45 - mc45) <= 0.01, "45 degree case vs Monte-Carlo");

  bevkit::Rng rng(7007);
  double worst_mc = 0.0;
  double worst_sym = 0.0;
  double worst_rigid = 0.0;
  std::size_t overlapping = 0;
  for (int t = 0; t < 100; ++t) {
    const auto p = oracle::random_box(rng, 0.6);
    const auto q = oracle::random_box(rng, 0.6);
    const double v = bevkit::iou3d(p, q);
    if (v > 0.0) ++overlapping;
    const std::uint64_t mc_seed = rng.next_u64();
    worst_mc = std::max(worst_mc, std::abs(v - oracle::monte_carlo_iou(p, q, 1000000, mc_seed)));
    worst_sym = std::max(worst_sym, std::abs(v - bevkit::iou3d(q, p)));
    const auto pose = oracle::random_pose(rng);
    worst_rigid = std::max(worst_rigid, std::abs(v - bevkit::iou3d(bevkit::transform_box(p, pose),
                                                                    bevkit::transform_box(q, pose))));
  }
  o.require(worst_mc <= 0.01, "random pairs vs Monte-Carlo");
  o.require(worst_sym <= 1e-9, "symmetric");
  o.require(worst_rigid <= 1e-9, "rigid-motion invariant");
  o.detail << "1/3 case " << third << ", 45deg " << exact45 << " vs MC " << mc45 << "; 100 pairs (" << overlapping
           << " overlapping): max MC gap " << worst_mc << ", asymmetry " << worst_sym << ", rigid drift "
           << worst_rigid;
}

// 8. AP harness.
void ap_harness(Outcome& o) {
  // Perfect predictions on synthetic scenes.
  bool perfect = true;
  for (auto regime : {bevkit::Regime::kIndoor, bevkit::Regime::kOutdoor})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto s = bevkit::generate(bevkit::SceneSpec::for_regime(regime, seed, 6));
      auto preds = s.boxes;
      for (auto& p : preds) {
        p.score = 1.0;
        p.has_score = true;
      }
      const auto r = bevkit::match_and_ap(preds, s.boxes, {});
      perfect = perfect && r.headline && *r.headline == 1.0;
    }
  o.require(perfect, "perfect predictions give headline AP 1.0");

  // One gt, ranked [FP, TP].
  const auto gt = bevkit::make_box({0, 0, 5}, {1, 1, 1});
  auto tp = gt;
  tp.score = 0.5;
  tp.has_score = true;
  auto fp = bevkit::make_box({10, 0, 5}, {1, 1, 1});
  fp.score = 0.9;
  fp.has_score = true;
  const auto r = bevkit::match_and_ap({fp, tp}, {gt}, {});
  o.require(r.headline && *r.headline == 0.5, "[FP, TP] gives 0.5");

  // Greedy matching against exhaustive search on small instances.
  bevkit::Rng rng(8008);
  std::size_t agree = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t np = rng.below(5);
    const std::size_t ng = rng.below(5);
    std::vector<Box3D> ps, gs;
    for (std::size_t i = 0; i < np; ++i) ps.push_back(oracle::random_box(rng, 0.7));
    for (std::size_t i = 0; i < ng; ++i) gs.push_back(oracle::random_box(rng, 0.7));
    std::vector<double> scores(np);
    for (auto& s : scores) s = std::round(rng.uniform() * 4.0) / 4.0;  // ties on purpose
    std::vector<std::vector<double>> m(np, std::vector<double>(ng));
    for (std::size_t i = 0; i < np; ++i)
      for (std::size_t j = 0; j < ng; ++j) m[i][j] = bevkit::iou3d(ps[i], gs[j]);
    const double thr = 0.05 * static_cast<double>(1 + rng.below(10));
    const auto g = bevkit::greedy_match(scores, m, thr);
    const auto ex = oracle::exhaustive_priority_assignment(scores, m, thr);
    bool same = g.size() == ex.size();
    for (std::size_t i = 0; same && i < np; ++i) same = g[i] == ex[i];
    if (same) ++agree;
  }
  o.require(agree == 1000, "greedy equals exhaustive assignment");
  o.detail << "[FP,TP] AP " << (r.headline ? *r.headline : -1.0) << "; greedy agrees on " << agree << "/1000";
}

// 9. Visibility filter.
void visibility(Outcome& o) {
  const auto& cam = fixture::kWallCamera;
  const auto scene = fixture::wall_and_cube();
  const auto out = bevkit::visibility_filter(scene, cam, 0.1);
  bevkit::PointCloud expect;
  for (auto i : oracle::brute_force_visible(scene, cam, 0.1)) expect.push_back(scene[i]);
  o.require(out == expect, "wall-before-cube equals oracle");

  const bevkit::CameraIntrinsics small{40.0, 40.0, 16.0, 12.0, 32, 24};
  bevkit::Rng rng(9009);
  std::size_t idempotent = 0;
  for (int t = 0; t < 100; ++t) {
    const auto pc = fixture::random_cloud(rng, 300, small);
    const auto once = bevkit::visibility_filter(pc, small, 0.1);
    if (bevkit::visibility_filter(once, small, 0.1) == once) ++idempotent;
  }
  o.require(idempotent == 100, "idempotent on random clouds");
  o.detail << "wall scene kept " << out.size() << " of " << scene.size() << "; idempotent on " << idempotent
           << "/100";
}

// 10. CLI determinism.
int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string snapshot(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string s;
  for (const auto& f : files) {
    s += fs::relative(f, dir).string() + "\n";
    s += bevkit::io::read_file(f.string());
  }
  return s;
}

void cli_determinism(Outcome& o, const std::string& cli) {
  if (cli.empty()) {
    o.require(false, "CLI path argument missing");
    return;
  }
  const fs::path root = fs::temp_directory_path() / "bevkit_acceptance";
  fs::remove_all(root);
  fs::create_directories(root / "inputs");
  const std::string in = (root / "inputs").string();

  // Shared inputs generated once.
  {
    namespace io = bevkit::io;
    bevkit::Rng rng(1010);
    FeatureMap target({2, 1, 6, 5});
    FeatureMap pred({2, 1, 6, 5});
    FeatureMap mp({1, 1, 6, 5});
    FeatureMap mi({1, 1, 6, 5});
    for (auto& v : target.data()) v = rng.normal();
    for (auto& v : pred.data()) v = rng.normal();
    for (auto& v : mp.data()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    for (auto& v : mi.data()) v = rng.uniform() < 0.6 ? 1.0 : 0.0;
    io::write_tensor(in + "/target.tnsr", target);
    io::write_tensor(in + "/pred.tnsr", pred);
    io::write_tensor(in + "/mp.tnsr", mp);
    io::write_tensor(in + "/mi.tnsr", mi);
    io::save_json(in + "/daln.json", {{"x", {0.5, -1.0, 2.0, 3.5}}, {"confidence", {0.25, 0.75}},
                                      {"alphas", {1.2, 0.8}}, {"betas", {0.1, -0.3}}});
    io::save_json(in + "/calign.json", {{"losses", {1.0, 2.0, 0.5, 4.0}},
                                        {"predicted", {0, 5, 2, 7}},
                                        {"labels", {-1, -1, 2, -1}},
                                        {"label_spaces", {{"0", {0, 1, 2}}, {"1", {5, 7}}}},
                                        {"dataset", 0}});
    if (run_cli(cli, "synth --seed 11 --regime outdoor --n-objects 5 --pred-noise 0.3 --out-dir " + in + "/scene") !=
        0)
      o.require(false, "input scene generation");
  }
  const std::string sc = in + "/scene";

  struct Case {
    std::string name;
    std::string args;  // "@" is replaced by the per-run output directory
  };
  const std::vector<Case> cases{
      {"grid", "grid --print-edges --out @/grid.json"},
      {"project", "project --depth " + sc + "/depth.tnsr --features " + sc + "/features.tnsr --intrinsics " + sc +
                      "/feature_intrinsics.json --out @/bev.tnsr --stats @/stats.json --confidence-out @/conf.tnsr"},
      {"bench", "bench --tau 0 --tau 1e-3 --tau 1e-2 --tau 1e-1 --seed 7 --out @/report.csv"},
      {"unify", "unify --in mmpc --input " + sc + "/cloud.mmpc --intrinsics " + sc +
                    "/intrinsics.json --out @/cloud.mmpc --stats @/stats.json"},
      {"losses-daln", "losses daln --input " + in + "/daln.json --check-init --grad-check --out @/r.json --grad-out @/g.json"},
      {"losses-calign", "losses calign --input " + in + "/calign.json --out @/r.json --grad-out @/g.json"},
      {"losses-mic-p2i", "losses mic-p2i --target " + in + "/target.tnsr --pred " + in + "/pred.tnsr --mask " + in +
                             "/mp.tnsr --grad-check --out @/r.json --grad-out @/g.tnsr"},
      {"losses-mic-i2p", "losses mic-i2p --target " + in + "/target.tnsr --pred " + in + "/pred.tnsr --image-mask " +
                             in + "/mi.tnsr --point-mask " + in + "/mp.tnsr --out @/r.json --grad-out @/g.tnsr"},
      {"eval", "eval --gt " + sc + "/boxes.jsonl --pred " + sc + "/preds.jsonl --out @/metrics.json"},
      {"synth", "synth --seed 5 --regime indoor --n-objects 3 --pred-noise 0.1 --out-dir @/scene"},
  };

  std::size_t identical = 0;
  for (const auto& c : cases) {
    std::vector<std::string> snaps;
    bool ok = true;
    int run = 0;
    for (int threads : {1, 4})
      for (int rep = 0; rep < 2; ++rep) {
        const fs::path out = root / (c.name + "_" + std::to_string(run++));
        fs::create_directories(out);
        std::string args = c.args;
        for (std::size_t pos; (pos = args.find('@')) != std::string::npos;) args.replace(pos, 1, out.string());
        ok = ok && run_cli(cli, "--threads " + std::to_string(threads) + " " + args) == 0;
        snaps.push_back(snapshot(out));
      }
    for (const auto& s : snaps) ok = ok && !s.empty() && s == snaps.front();
    o.require(ok, c.name + " byte-identical");
    if (ok) ++identical;
  }
  fs::remove_all(root);
  o.detail << identical << "/" << cases.size() << " subcommand runs byte-identical across threads {1,4} x 2";
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"uneven grid edges", grid_edges},
      {"sparse projection bound", sparse_projection},
      {"mass conservation", mass_conservation},
      {"daln initialization", daln_init},
      {"guidance loss gradients", mic_gradients},
      {"class alignment", class_alignment},
      {"oriented 3d iou", iou},
      {"ap harness", ap_harness},
      {"visibility filter", visibility},
      {"cli determinism", [&](Outcome& o) { cli_determinism(o, cli); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail.str()
              << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
