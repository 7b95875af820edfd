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

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace psdet {

/// Axis-aligned box in pixel coordinates, corner convention. Area carries no
/// "+1" pixel correction.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  Box() = default;
  /// Throws std::invalid_argument on negative extents or non-finite corners.
  Box(double x1_, double y1_, double x2_, double y2_);

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  double cx() const noexcept { return 0.5 * (x1 + x2); }
  double cy() const noexcept { return 0.5 * (y1 + y2); }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Regression target relative to a reference box: center offsets normalized
/// by the reference size and log size ratios.
struct BoxDelta {
  double dx = 0, dy = 0, dw = 0, dh = 0;
  friend bool operator==(const BoxDelta&, const BoxDelta&) = default;
};

struct Detection {
  Box box;
  double score = 0;
  std::string scale_tag;
};

/// Default clamp applied to dw/dh before exponentiation in decode().
inline const double kDefaultDeltaClamp = std::log(1000.0 / 16.0);

double iou(const Box& a, const Box& b) noexcept;

/// Throws std::invalid_argument when either box has zero width or height.
BoxDelta encode(const Box& gt, const Box& anchor);

/// Inverse of encode(). When `clip` is given the result is clipped to it.
Box decode(const BoxDelta& delta, const Box& anchor,
           const std::optional<Box>& clip = std::nullopt,
           double clamp = kDefaultDeltaClamp);

Box clip_box(const Box& b, const Box& window) noexcept;

/// Greedy NMS. Candidates are visited by descending score, equal scores by
/// ascending input index; a candidate is dropped when its IoU with any kept
/// box exceeds `iou_threshold`. Returns indices into `boxes` in visit order.
std::vector<std::size_t> nms_indices(std::span<const Box> boxes,
                                     std::span<const double> scores,
                                     double iou_threshold);

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold);

/// Visit order used by nms(): descending score, ties by ascending index.
std::vector<std::size_t> score_order(std::span<const double> scores);

}  // namespace psdet
