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
#include <string>

#include "psdet/conv.hpp"
#include "psdet/data.hpp"
#include "psdet/error.hpp"
#include "psdet/image.hpp"
#include "psdet/net.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace psdet;
using testing_support::central_diff;
using testing_support::random_tensor;
using testing_support::rel_err;

namespace {

ConvLayer random_layer(std::mt19937_64& rng, std::size_t o, std::size_t i, int stride, int dil, int pad) {
  ConvLayer l(o, i, 3, 3, stride, dil, pad);
  l.kernel = random_tensor(l.kernel.shape(), rng);
  for (auto& b : l.bias) b = std::uniform_real_distribution<double>(-1, 1)(rng);
  return l;
}

NetConfig small_net() {
  NetConfig c;
  c.widths = {4, 4, 6, 6, 8, 8};
  c.rpn_width = 6;
  c.anchors.scales = {1, 2, 4};
  return c;
}

Sample small_sample(std::uint64_t seed) {
  DatasetSpec spec;
  spec.seed = seed;
  spec.count = 1;
  spec.image_size = 64;
  spec.min_target_size = 8;
  spec.max_target_size = 24;
  spec.max_targets = 3;
  return generate_one(spec, 0);
}

// Zero-initialized biases put units with all-zero inputs exactly on the ReLU
// corner, so probes start from small random biases instead.
void jitter_biases(NetworkState& st, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : parameters(st)) {
    if (p.name.find("bias") == std::string::npos) continue;
    for (auto& v : p.values) v = std::uniform_real_distribution<double>(-0.05, 0.05)(rng);
  }
}

}  // namespace

TEST(Conv, ForwardMatchesReference) {
  std::mt19937_64 rng(1);
  for (auto [stride, dil, pad] : {std::tuple{1, 1, 1}, {2, 1, 1}, {1, 2, 2}, {2, 2, 0}}) {
    const auto layer = random_layer(rng, 5, 3, stride, dil, pad);
    const Tensor x = random_tensor({3, 11, 9}, rng);
    const auto a = conv2d_forward(x, layer), b = reference::conv2d_forward(x, layer);
    ASSERT_EQ(a.shape(), b.shape());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Conv, BackwardMatchesReferenceAndFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (auto [stride, dil, pad] : {std::tuple{1, 1, 1}, {2, 1, 1}, {1, 2, 2}}) {
    auto layer = random_layer(rng, 4, 3, stride, dil, pad);
    Tensor x = random_tensor({3, 7, 8}, rng);
    const Tensor gout = random_tensor(conv2d_forward(x, layer).shape(), rng);
    auto g1 = zero_grad_like(layer), g2 = zero_grad_like(layer);
    const auto dx1 = conv2d_backward(x, layer, gout, g1);
    const auto dx2 = reference::conv2d_backward(x, layer, gout, g2);
    for (std::size_t i = 0; i < dx1.size(); ++i) EXPECT_NEAR(dx1[i], dx2[i], 1e-12);
    for (std::size_t i = 0; i < g1.grad_kernel.size(); ++i) EXPECT_NEAR(g1.grad_kernel[i], g2.grad_kernel[i], 1e-12);
    for (std::size_t i = 0; i < g1.grad_bias.size(); ++i) EXPECT_NEAR(g1.grad_bias[i], g2.grad_bias[i], 1e-12);
    const auto f = [&] {
      const auto y = conv2d_forward(x, layer);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * gout[i];
      return s;
    };
    for (std::size_t i = 0; i < x.size(); i += 5) EXPECT_LT(rel_err(dx1[i], central_diff(f, x[i], 1e-4)), 1e-6);
    for (std::size_t i = 0; i < layer.kernel.size(); i += 3) {
      EXPECT_LT(rel_err(g1.grad_kernel[i], central_diff(f, layer.kernel[i], 1e-4)), 1e-6);
    }
    EXPECT_TRUE(conv2d_backward(x, layer, gout, g1, false).empty());
  }
}

TEST(Net, OutputShapes) {
  const auto cfg = small_net();
  const auto st = init_network(cfg, 1);
  const auto out = forward(make_image(64, 48), st);
  const std::size_t A = cfg.anchors.per_cell();
  EXPECT_EQ(out.rpn_logits.shape(), (std::vector<std::size_t>{2 * A, 8, 6}));
  EXPECT_EQ(out.rpn_deltas.shape(), (std::vector<std::size_t>{4 * A, 8, 6}));
  EXPECT_EQ(out.cls_maps.shape(), (std::vector<std::size_t>{18, 8, 6}));
  EXPECT_EQ(out.box_maps.shape(), (std::vector<std::size_t>{36, 8, 6}));
  EXPECT_THROW(forward(make_image(60, 48), st), ShapeError);
}

TEST(Net, AtrousDoublesResolutionWithSameParameters) {
  auto cfg = small_net();
  const auto a = init_network(cfg, 1);
  cfg.atrous = false;
  cfg.anchors.base_stride = 16;
  const auto b = init_network(cfg, 1);
  EXPECT_EQ(parameter_count(a), parameter_count(b));
  const auto oa = forward(make_image(64, 64), a), ob = forward(make_image(64, 64), b);
  EXPECT_EQ(oa.cls_maps.dim(1), 2 * ob.cls_maps.dim(1));
  EXPECT_EQ(oa.cls_maps.dim(2), 2 * ob.cls_maps.dim(2));
  EXPECT_EQ(a.backbone.back().dilation, 2);
  EXPECT_EQ(a.backbone.back().stride, 1);
}

TEST(Net, StrideMustMatchAnchors) {
  auto cfg = small_net();
  cfg.atrous = false;
  EXPECT_THROW(init_network(cfg, 1), std::invalid_argument);
}

TEST(Net, ZeroHeadsGiveZeroOutputs) {
  auto st = init_network(small_net(), 3);
  for (ConvLayer* l : {&st.rpn_cls, &st.rpn_bbox, &st.rfcn_cls, &st.rfcn_bbox}) {
    l->kernel.fill(0.0);
    std::fill(l->bias.begin(), l->bias.end(), 0.0);
  }
  const auto out = forward(make_image(32, 32), st);
  for (const Tensor* t : {&out.rpn_logits, &out.rpn_deltas, &out.cls_maps, &out.box_maps}) {
    for (double v : t->values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Net, ParameterGradientProbes) {
  auto st = init_network(small_net(), 5);
  jitter_biases(st, 77);
  TrainConfig tc;
  tc.rpn_batch = 64;
  tc.rfcn_batch = 32;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto s = small_sample(seed);
    std::mt19937_64 rng(seed);
    const auto plan = build_plan(s.image, s.gts, st, tc, rng);
    ASSERT_FALSE(plan.rfcn.empty());
    auto grads = Gradients::zeros_like(st);
    plan_loss(st, s.image, plan, 1.0, &grads);
    auto params = parameters(st);
    const auto f = [&] { return plan_loss(st, s.image, plan, 1.0, nullptr).total; };
    for (int probe = 0; probe < 10; ++probe) {
      const auto p = std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng);
      const auto i = std::uniform_int_distribution<std::size_t>(0, params[p].values.size() - 1)(rng);
      const double n = central_diff(f, params[p].values[i], 1e-7);
      EXPECT_LT(rel_err(grads.g[p][i], n), 1e-3) << params[p].name << "[" << i << "]";
    }
    // every pool weight
    for (std::size_t p : {params.size() - 2, params.size() - 1}) {
      for (std::size_t i = 0; i < params[p].values.size(); ++i) {
        EXPECT_LT(rel_err(grads.g[p][i], central_diff(f, params[p].values[i], 1e-7)), 1e-3);
      }
    }
  }
}

TEST(Net, ZeroLearningRateLeavesStateUnchanged) {
  auto st = init_network(small_net(), 7);
  const auto before = st;
  TrainConfig tc;
  tc.learning_rate = 0.0;
  const auto s = small_sample(1);
  std::mt19937_64 rng(1);
  train_step(s.image, s.gts, st, tc, rng);
  auto a = st, b = before;
  auto pa = parameters(a), pb = parameters(b);
  for (std::size_t p = 0; p < pa.size(); ++p) {
    ASSERT_TRUE(std::equal(pa[p].values.begin(), pa[p].values.end(), pb[p].values.begin()));
  }
}

TEST(Net, FrozenLayersDoNotMove) {
  auto st = init_network(small_net(), 8);
  const auto before = st;
  TrainConfig tc;
  tc.frozen_stem_layers = 2;
  tc.freeze_cls_pool = true;
  const auto s = small_sample(2);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 3; ++i) train_step(s.image, s.gts, st, tc, rng);
  EXPECT_EQ(st.backbone[0].kernel, before.backbone[0].kernel);
  EXPECT_EQ(st.backbone[1].bias, before.backbone[1].bias);
  EXPECT_NE(st.backbone[2].kernel, before.backbone[2].kernel);
  EXPECT_EQ(st.cls_pool.w, before.cls_pool.w);
  EXPECT_NE(st.box_pool.w, before.box_pool.w);
}

TEST(Net, TrainingIsDeterministic) {
  const auto s = small_sample(3);
  TrainConfig tc;
  NetworkState runs[2];
  for (auto& st : runs) {
    st = init_network(small_net(), 9);
    std::mt19937_64 rng(42);
    for (int i = 0; i < 5; ++i) train_step(s.image, s.gts, st, tc, rng);
  }
  EXPECT_TRUE(runs[0] == runs[1]);
  EXPECT_EQ(runs[0].iteration, 5u);
}

TEST(Net, LossDecreasesOnFixedImage) {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = small_sample(100 + seed);
    auto st = init_network(small_net(), seed);
    TrainConfig tc;
    std::mt19937_64 rng(seed);
    std::vector<double> losses;
    for (int i = 0; i < 50; ++i) losses.push_back(train_step(s.image, s.gts, st, tc, rng).total);
    const double head = (losses[0] + losses[1] + losses[2] + losses[3] + losses[4]) / 5;
    const double tail = (losses[45] + losses[46] + losses[47] + losses[48] + losses[49]) / 5;
    ok += tail <= head;
  }
  EXPECT_GE(ok, 9);
}

TEST(Net, LearningRateSchedule) {
  TrainConfig tc;
  tc.learning_rate = 0.1;
  tc.lr_steps = {10, 20};
  EXPECT_DOUBLE_EQ(learning_rate_at(tc, 0), 0.1);
  EXPECT_NEAR(learning_rate_at(tc, 10), 0.01, 1e-15);
  EXPECT_NEAR(learning_rate_at(tc, 25), 0.001, 1e-15);
}

TEST(Propose, MatchesOracle) {
  std::mt19937_64 rng(10);
  const std::size_t A = 3, h = 6, w = 5;
  AnchorConfig ac{8, {1, 2, 4}, {1}};
  const auto anchors = generate_anchors(ac, h, w);
  for (int t = 0; t < 100; ++t) {
    Tensor logits = random_tensor({2 * A, h, w}, rng, -2, 2);
    if (t % 4 == 0) {  // ties
      for (auto& v : logits.values()) v = std::round(v);
    }
    const Tensor deltas = random_tensor({4 * A, h, w}, rng, -0.5, 0.5);
    ProposalConfig pc{std::uniform_int_distribution<int>(5, 90)(rng), std::uniform_int_distribution<int>(1, 40)(rng),
                      std::uniform_real_distribution<double>(0.3, 0.8)(rng), 2.0};
    const auto got = propose(logits, deltas, anchors, 48, 40, pc);
    const auto want = oracle::propose(logits, deltas, anchors, 48, 40, pc);
    ASSERT_EQ(got.boxes.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(got.boxes[i], want[i].box);
      EXPECT_EQ(got.scores[i], want[i].score);
      EXPECT_EQ(got.anchor_index[i], want[i].anchor);
    }
  }
}

TEST(Propose, DominantAnchorFirst) {
  const auto anchors = generate_anchors(AnchorConfig{8, {1, 2}, {1}}, 4, 4);
  Tensor logits({4, 4, 4}), deltas({8, 4, 4});
  logits.at(3, 2, 1) = 9.0;  // anchor a=1 at cell (2,1)
  const auto p = propose(logits, deltas, anchors, 32, 32, ProposalConfig{});
  ASSERT_FALSE(p.anchor_index.empty());
  EXPECT_EQ(p.anchor_index[0], (2u * 4 + 1) * 2 + 1);
}

TEST(Detect, Contract) {
  const auto st = init_network(small_net(), 11);
  const auto s = small_sample(4);
  DetectConfig dc;
  dc.score_thresh = 0.0;
  const auto d = detect(s.image, st, dc);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_GE(d[i].box.x1, 0.0);
    EXPECT_GE(d[i].box.y1, 0.0);
    EXPECT_LE(d[i].box.x2, 64.0);
    EXPECT_LE(d[i].box.y2, 64.0);
    EXPECT_GE(d[i].score, 0.0);
    EXPECT_LE(d[i].score, 1.0);
    if (i) EXPECT_GE(d[i - 1].score, d[i].score);
  }
  dc.score_thresh = 1.1;
  EXPECT_TRUE(detect(s.image, st, dc).empty());
}
