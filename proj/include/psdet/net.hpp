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

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "psdet/anchors.hpp"
#include "psdet/conv.hpp"
#include "psdet/geometry.hpp"
#include "psdet/losses.hpp"
#include "psdet/pooling.hpp"
#include "psdet/tensor.hpp"

namespace psdet {

/// Network topology. The backbone has six 3x3 conv + ReLU layers; layers 0,
/// 2 and 4 downsample by 2. The last layer either keeps resolution with
/// dilation 2 (atrous, total stride 8) or downsamples again (stride 16).
struct NetConfig {
  int num_classes = 1;  // foreground classes; heads predict num_classes + 1
  int k = 3;            // position-sensitive grid size
  bool atrous = true;
  std::array<int, 6> widths{16, 16, 32, 32, 64, 64};
  int rpn_width = 32;
  AnchorConfig anchors{8, {0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0}, {1.0}};
  /// Scaling of the detection-head regression targets.
  std::array<double, 4> bbox_std{0.1, 0.1, 0.2, 0.2};

  int stride() const noexcept { return atrous ? 8 : 16; }
  void validate() const;
};

struct ProposalConfig {
  int pre_nms_top = 1000;
  int post_nms_top = 300;
  double nms_thresh = 0.7;
  double min_size = 1.0;  // pixels; narrower boxes are dropped
};

struct TrainConfig {
  std::uint64_t seed = 1;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int iterations = 3000;
  std::vector<int> lr_steps;  // iterations at which the rate drops by 10x
  int rpn_batch = 256;
  int rfcn_batch = 128;
  int ohem_ratio = 3;
  bool ohem_rpn = true;
  bool ohem_rfcn = true;
  std::vector<int> multiscale_train_sizes{96, 128};
  int frozen_stem_layers = 0;
  bool freeze_cls_pool = false;
  bool freeze_box_pool = false;
  double reg_weight = 1.0;
  double rpn_pos_iou = 0.7;
  double rpn_neg_iou = 0.3;
  double roi_pos_iou = 0.5;
  double roi_neg_lo = 0.1;
  bool rois_include_gt = true;
  ProposalConfig proposals{1000, 300, 0.7, 1.0};

  void validate() const;
};

struct DetectConfig {
  ProposalConfig proposals{1000, 300, 0.7, 1.0};
  double score_thresh = 0.05;
  double nms_thresh = 0.3;
  int max_detections = 100;
};

/// All learnable parameters plus optimizer state.
struct NetworkState {
  NetConfig cfg;
  std::vector<ConvLayer> backbone;
  ConvLayer rpn_conv, rpn_cls, rpn_bbox;
  ConvLayer rfcn_cls, rfcn_bbox;
  PoolWeights cls_pool, box_pool;
  std::vector<std::vector<double>> velocity;  // one buffer per parameter tensor
  std::uint64_t iteration = 0;

  friend bool operator==(const NetworkState& a, const NetworkState& b);
};

struct ParamView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> values;
};

/// Parameters in a fixed order: backbone.i.{weight,bias}, rpn_conv, rpn_cls,
/// rpn_bbox, rfcn_cls, rfcn_bbox, then cls_pool.w and box_pool.w.
std::vector<ParamView> parameters(NetworkState& state);
std::size_t parameter_count(const NetworkState& state);

/// He-style initialization for hidden layers, small fan-in scaled weights
/// for the output layers, zero biases, unit pool weights, zero velocity.
NetworkState init_network(const NetConfig& cfg, std::uint64_t seed);

/// Gradient buffers, one per entry of parameters(), same order.
struct Gradients {
  std::vector<std::vector<double>> g;
  static Gradients zeros_like(NetworkState& state);
};

struct NetOutputs {
  Tensor rpn_logits;  // (2A, h, w), channel 2a + c
  Tensor rpn_deltas;  // (4A, h, w), channel 4a + d
  Tensor cls_maps;    // (k*k*(C+1), h, w)
  Tensor box_maps;    // (k*k*4, h, w)
};

/// Throws ShapeError unless H and W are divisible by the stride.
NetOutputs forward(const Tensor& image, const NetworkState& state);

/// Objectness probability of every anchor, anchor order of generate_anchors().
std::vector<double> objectness(const Tensor& rpn_logits);
BoxDelta rpn_delta(const Tensor& rpn_deltas, std::size_t anchor_index, std::size_t anchors_per_cell);

struct Proposals {
  std::vector<Box> boxes;
  std::vector<double> scores;
  std::vector<std::size_t> anchor_index;
};

/// Decodes every anchor, clips to the image, drops boxes narrower than
/// min_size, keeps the pre_nms_top best by objectness (ties by anchor index),
/// runs NMS and keeps post_nms_top.
Proposals propose(const Tensor& rpn_logits, const Tensor& rpn_deltas,
                  const std::vector<Box>& anchors, std::size_t image_h, std::size_t image_w,
                  const ProposalConfig& cfg);

/// Sampled training targets for one image.
struct TrainPlan {
  struct AnchorSample {
    std::size_t anchor;
    int label;  // 0 background, 1.. class
    std::optional<BoxDelta> target;
  };
  struct RoiSample {
    Box roi;
    int label;
    std::optional<BoxDelta> target;  // already divided by bbox_std
  };
  std::vector<Box> anchors;
  std::vector<AnchorSample> rpn;
  std::vector<RoiSample> rfcn;
};

/// Loss for a fixed plan. When `grads` is given, gradients of the total are
/// added to it.
LossReport plan_loss(const NetworkState& state, const Tensor& image, const TrainPlan& plan,
                     double reg_weight, Gradients* grads);

/// Forward, target assignment with hard example mining, backward and one
/// SGD-with-momentum step. Throws DivergenceError on a non-finite loss.
LossReport train_step(const Tensor& image, const std::vector<Box>& gts, NetworkState& state,
                      const TrainConfig& cfg, std::mt19937_64& rng);

/// Builds the plan train_step would use for this image and state.
TrainPlan build_plan(const Tensor& image, const std::vector<Box>& gts, const NetworkState& state,
                     const TrainConfig& cfg, std::mt19937_64& rng);

/// Momentum SGD on the given gradients, honoring frozen layers.
void sgd_update(NetworkState& state, const Gradients& grads, const TrainConfig& cfg);

double learning_rate_at(const TrainConfig& cfg, std::uint64_t iteration);

/// Proposals -> PS-RoI pooling -> PS average pooling -> softmax scores and
/// decoded boxes -> score threshold -> per-class NMS. Sorted by score.
std::vector<Detection> detect(const Tensor& image, const NetworkState& state,
                              const DetectConfig& cfg);

}  // namespace psdet
