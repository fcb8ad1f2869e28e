// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "bevkit/eval3d.hpp"
#include "bevkit/io.hpp"
#include "bevkit/synth.hpp"
#include "oracles.hpp"

namespace {

using bevkit::Regime;
using bevkit::SceneSpec;

std::vector<bevkit::Box3D> with_scores(std::vector<bevkit::Box3D> boxes) {
  for (auto& b : boxes) {
    b.score = 1.0;
    b.has_score = true;
  }
  return boxes;
}

TEST(Synth, ByteIdenticalForSameSeed) {
  for (Regime r : {Regime::kIndoor, Regime::kOutdoor}) {
    const auto spec = SceneSpec::for_regime(r, 1234, 5);
    const auto a = bevkit::generate(spec);
    const auto b = bevkit::generate(spec);
    EXPECT_EQ(bevkit::io::encode_mmpc(a.cloud), bevkit::io::encode_mmpc(b.cloud));
    EXPECT_EQ(bevkit::io::encode_boxes(a.boxes), bevkit::io::encode_boxes(b.boxes));
    EXPECT_EQ(bevkit::io::encode_tensor(a.depth.to_feature_map()), bevkit::io::encode_tensor(b.depth.to_feature_map()));
    EXPECT_EQ(a.features, b.features);
    const auto c = bevkit::generate(SceneSpec::for_regime(r, 1235, 5));
    EXPECT_NE(bevkit::io::encode_mmpc(a.cloud), bevkit::io::encode_mmpc(c.cloud));
  }
}

TEST(Synth, RegimeDepthRanges) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = bevkit::generate(SceneSpec::for_regime(Regime::kIndoor, seed, 6));
    for (const auto& b : in.boxes) {
      EXPECT_GE(b.center.z(), 0.5);
      EXPECT_LE(b.center.z(), 8.0);
      EXPECT_LE(b.dims.maxCoeff(), 2.0);
    }
    const auto out = bevkit::generate(SceneSpec::for_regime(Regime::kOutdoor, seed, 6));
    for (const auto& b : out.boxes) {
      EXPECT_GE(b.center.z(), 5.0);
      EXPECT_LE(b.center.z(), 80.0);
    }
  }
}

TEST(Synth, SpecValidation) {
  auto s = SceneSpec::for_regime(Regime::kIndoor, 0, 3);
  s.z_hi = 9.0;
  EXPECT_THROW(bevkit::generate(s), std::invalid_argument);
  s = SceneSpec::for_regime(Regime::kOutdoor, 0, 3);
  s.z_lo = 2.0;
  EXPECT_THROW(bevkit::generate(s), std::invalid_argument);
  EXPECT_THROW(bevkit::regime_from_string("underwater"), std::invalid_argument);
  EXPECT_EQ(bevkit::regime_from_string("outdoor"), Regime::kOutdoor);
}

TEST(Synth, CloudIsVisibleAndDepthIsDistribution) {
  const auto s = bevkit::generate(SceneSpec::for_regime(Regime::kIndoor, 3, 4));
  EXPECT_FALSE(s.cloud.empty());
  EXPECT_EQ(bevkit::visibility_filter(s.cloud, s.camera), s.cloud);
  EXPECT_EQ(s.visibility.retained, s.cloud.size());
  EXPECT_EQ(s.visibility.input, s.visibility.retained + s.visibility.occluded + s.visibility.out_of_view);
  EXPECT_NO_THROW(s.depth.validate());
  EXPECT_EQ(s.depth.rows(), 30u);
  EXPECT_EQ(s.depth.cols(), 40u);
  EXPECT_EQ(s.features.shape(), (bevkit::FeatureMap::Shape{8, 1, 30, 40}));
  EXPECT_EQ(s.depth_bin_edges.size(), s.depth.bins() + 1);
}

TEST(Synth, PerfectPredictionsScoreOne) {
  for (Regime r : {Regime::kIndoor, Regime::kOutdoor})
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto s = bevkit::generate(SceneSpec::for_regime(r, seed, 5));
      const auto res = bevkit::match_and_ap(with_scores(s.boxes), s.boxes, {});
      EXPECT_EQ(*res.headline, 1.0);
    }
}

TEST(Perturb, ZeroSigmaIsIdentity) {
  const auto s = bevkit::generate(SceneSpec::for_regime(Regime::kOutdoor, 5, 6));
  const auto p = bevkit::perturb(s.boxes, 0.0, 0.0, 0.0, 99);
  ASSERT_EQ(p.size(), s.boxes.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(p[i].center, s.boxes[i].center);
    EXPECT_EQ(p[i].dims, s.boxes[i].dims);
    EXPECT_EQ(p[i].rotation, s.boxes[i].rotation);
    EXPECT_TRUE(p[i].has_score);
  }
  EXPECT_EQ(*bevkit::match_and_ap(p, s.boxes, {}).headline, 1.0);
  EXPECT_THROW(bevkit::perturb(s.boxes, -1.0, 0, 0, 1), std::invalid_argument);
}

double mean_ap(double sigma_center, bool ap25) {
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = bevkit::generate(SceneSpec::for_regime(Regime::kIndoor, seed, 5));
    const auto preds = bevkit::perturb(s.boxes, sigma_center, 0.0, 0.0, seed + 100);
    const auto r = bevkit::match_and_ap(preds, s.boxes, {});
    sum += ap25 ? *r.ap25 : *r.headline;
  }
  return sum / 20.0;
}

TEST(Perturb, MonotoneDegradation) {
  const double small = mean_ap(0.1, false);
  const double large = mean_ap(0.5, false);
  EXPECT_LE(large, small);
  EXPECT_LT(small, 1.0);
}

TEST(Perturb, HugeNoiseKillsAp25) {
  // With extents <= 2 m, any overlap needs center offsets below 2 m on every axis;
  // at 10 m sigma that is rare, and a stray overlap must also reach IoU 0.25.
  EXPECT_EQ(mean_ap(10.0, true), 0.0);
}

}  // namespace
