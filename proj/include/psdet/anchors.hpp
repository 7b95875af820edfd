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

#include <optional>
#include <vector>

#include "psdet/geometry.hpp"

namespace psdet {

struct AnchorConfig {
  int base_stride = 8;
  std::vector<double> scales{1, 2, 4, 8, 16, 32, 64};
  std::vector<double> aspect_ratios{1.0};  // h / w

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
  std::size_t per_cell() const noexcept { return scales.size() * aspect_ratios.size(); }
};

enum class Label { kPositive, kNegative, kIgnore };

struct Assignment {
  Label label = Label::kIgnore;
  std::optional<std::size_t> matched_gt;
  double max_iou = 0;
};

/// Anchors in (row, col, scale, ratio) order. The anchor for cell (i, j) is
/// centered at ((j + 0.5) * stride, (i + 0.5) * stride) with area (s * stride)^2.
std::vector<Box> generate_anchors(const AnchorConfig& cfg, int feature_h, int feature_w);

/// Labels anchors for the proposal stage:
///   1. for every ground truth, each anchor reaching its maximum IoU is positive;
///   2. an anchor whose best IoU is >= pos_iou is positive;
///   3. an anchor whose best IoU is < neg_iou and not claimed by 1 is negative.
/// Everything else is ignored. Positives from rule 1 match the ground truth
/// that claimed them (lowest index wins between several); rule-2 positives
/// match their argmax ground truth.
std::vector<Assignment> assign_anchors(const std::vector<Box>& anchors,
                                       const std::vector<Box>& gts, double pos_iou = 0.7,
                                       double neg_iou = 0.3);

/// Labels RoIs for the detection head: positive when the best IoU is > pos_iou,
/// negative when it lies in [neg_lo, pos_iou], ignored below neg_lo.
std::vector<Assignment> assign_rois(const std::vector<Box>& rois, const std::vector<Box>& gts,
                                    double pos_iou = 0.5, double neg_lo = 0.1);

}  // namespace psdet
