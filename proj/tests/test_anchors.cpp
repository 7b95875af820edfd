// Copyright 2026 The psdet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>

#include "psdet/anchors.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace psdet;
using testing_support::random_box;
using testing_support::random_grid_box;

namespace {

std::vector<oracle::Label> labels(const std::vector<Assignment>& as) {
  std::vector<oracle::Label> out;
  for (const auto& a : as) out.push_back(oracle::from(a));
  return out;
}

}  // namespace

TEST(GenerateAnchors, SingleCell) {
  const auto a = generate_anchors(AnchorConfig{16, {1}, {1}}, 1, 1);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0], Box(0, 0, 16, 16));
}

TEST(GenerateAnchors, CountsAndShapes) {
  AnchorConfig cfg;
  const auto a = generate_anchors(cfg, 2, 2);
  EXPECT_EQ(a.size(), 28u);
  for (const auto& b : a) EXPECT_DOUBLE_EQ(b.width(), b.height());
  // cell (1, 0), scale index 2
  EXPECT_DOUBLE_EQ(a[(2 + 0) * 7 + 2].cx(), 4.0);
  EXPECT_DOUBLE_EQ(a[(2 + 0) * 7 + 2].cy(), 12.0);
  EXPECT_DOUBLE_EQ(a[(2 + 0) * 7 + 2].width(), 32.0);
}

TEST(GenerateAnchors, AspectRatio) {
  const auto a = generate_anchors(AnchorConfig{8, {2}, {4}}, 1, 1);
  EXPECT_DOUBLE_EQ(a[0].width(), 8.0);
  EXPECT_DOUBLE_EQ(a[0].height(), 32.0);
  EXPECT_DOUBLE_EQ(a[0].area(), 256.0);
}

TEST(AnchorConfig, Validation) {
  EXPECT_THROW((AnchorConfig{8, {}, {1}}).validate(), std::invalid_argument);
  EXPECT_THROW((AnchorConfig{8, {2, 1}, {1}}).validate(), std::invalid_argument);
  EXPECT_THROW((AnchorConfig{8, {1}, {0}}).validate(), std::invalid_argument);
  EXPECT_THROW((AnchorConfig{0, {1}, {1}}).validate(), std::invalid_argument);
  EXPECT_NO_THROW(AnchorConfig{}.validate());
}

TEST(AssignAnchors, IdenticalAndFar) {
  const auto r = assign_anchors({Box(0, 0, 10, 10), Box(50, 50, 60, 60)}, {Box(0, 0, 10, 10)});
  EXPECT_EQ(r[0].label, Label::kPositive);
  EXPECT_EQ(r[0].matched_gt, 0u);
  EXPECT_EQ(r[1].label, Label::kNegative);
  EXPECT_FALSE(r[1].matched_gt);
}

TEST(AssignAnchors, BestAnchorKeptBelowThreshold) {
  // IoU 0.4 with the only overlapping anchor
  const Box gt(0, 0, 10, 10);
  const Box anchor(0, 0, 10, 4);
  ASSERT_NEAR(iou(gt, anchor), 0.4, 1e-12);
  const auto r = assign_anchors({anchor, Box(40, 40, 50, 50)}, {gt});
  EXPECT_EQ(r[0].label, Label::kPositive);
  EXPECT_EQ(r[0].matched_gt, 0u);
}

TEST(AssignAnchors, ZeroGtsAllNegative) {
  const auto r = assign_anchors({Box(0, 0, 1, 1), Box(0, 0, 5, 5)}, {});
  for (const auto& a : r) EXPECT_EQ(a.label, Label::kNegative);
}

TEST(AssignAnchors, NoOverlapNoRuleOne) {
  const auto r = assign_anchors({Box(0, 0, 1, 1)}, {Box(10, 10, 11, 11)});
  EXPECT_EQ(r[0].label, Label::kNegative);
}

TEST(AssignAnchors, MatchesOracle) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    std::vector<Box> anchors, gts;
    for (int i = 0; i < 50; ++i) anchors.push_back(random_grid_box(rng, 40, 20));
    for (int i = 0; i < 5; ++i) gts.push_back(random_grid_box(rng, 40, 20));
    EXPECT_EQ(labels(assign_anchors(anchors, gts)), oracle::assign_anchors(anchors, gts, 0.7, 0.3));
    EXPECT_EQ(labels(assign_anchors(anchors, gts, 0.5, 0.2)),
              oracle::assign_anchors(anchors, gts, 0.5, 0.2));
  }
}

TEST(AssignAnchors, PermutationEquivariant) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    std::vector<Box> anchors, gts;
    for (int i = 0; i < 40; ++i) anchors.push_back(random_box(rng, 60, 2, 30));
    for (int i = 0; i < 4; ++i) gts.push_back(random_box(rng, 60, 2, 30));
    std::vector<std::size_t> perm(anchors.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Box> permuted;
    for (auto p : perm) permuted.push_back(anchors[p]);
    const auto a = labels(assign_anchors(anchors, gts));
    const auto b = labels(assign_anchors(permuted, gts));
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(b[i], a[perm[i]]);
  }
}

TEST(AssignAnchors, RaisingPositiveThresholdIsMonotone) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 50; ++t) {
    std::vector<Box> anchors, gts;
    for (int i = 0; i < 60; ++i) anchors.push_back(random_box(rng, 50, 2, 30));
    for (int i = 0; i < 3; ++i) gts.push_back(random_box(rng, 50, 2, 30));
    std::size_t prev = anchors.size() + 1;
    for (double pos : {0.3, 0.5, 0.7, 0.9}) {
      std::size_t n = 0;
      for (const auto& a : assign_anchors(anchors, gts, pos, 0.3)) {
        n += a.label == Label::kPositive && a.max_iou >= pos;
      }
      EXPECT_LE(n, prev);
      prev = n;
    }
  }
}

TEST(AssignRois, Bands) {
  const Box gt(0, 0, 10, 10);
  const auto r = assign_rois({gt, Box(0, 0, 10, 3), Box(0, 0, 10, 0.5), Box(0, 0, 10, 5)}, {gt});
  EXPECT_EQ(r[0].label, Label::kPositive);
  EXPECT_EQ(r[1].label, Label::kNegative);  // 0.3
  EXPECT_EQ(r[2].label, Label::kIgnore);    // 0.05
  EXPECT_EQ(r[3].label, Label::kNegative);  // exactly 0.5
}

TEST(AssignRois, ZeroGtsIgnored) {
  for (const auto& a : assign_rois({Box(0, 0, 4, 4)}, {})) EXPECT_EQ(a.label, Label::kIgnore);
}

TEST(AssignRois, MatchesOracle) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 200; ++t) {
    std::vector<Box> rois, gts;
    for (int i = 0; i < 100; ++i) rois.push_back(random_grid_box(rng, 40, 20));
    for (int i = 0; i < 4; ++i) gts.push_back(random_grid_box(rng, 40, 20));
    EXPECT_EQ(labels(assign_rois(rois, gts)), oracle::assign_rois(rois, gts));
  }
}
