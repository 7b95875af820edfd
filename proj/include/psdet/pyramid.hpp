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

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "psdet/geometry.hpp"
#include "psdet/tensor.hpp"

namespace psdet {

struct PyramidConfig {
  std::vector<int> train_short_sides{96, 128};
  std::vector<double> test_scales{1.0};
  double merge_nms_thresh = 0.3;
  int size_multiple = 8;  // resized extents are rounded to this

  void validate() const;
};

struct Resized {
  Tensor image;
  std::vector<Box> gts;
  double scale_factor = 1;  // short-side factor
  double sx = 1, sy = 1;    // actual per-axis factors after rounding
};

Box scale_box(const Box& b, double sx, double sy) noexcept;

/// Extent `n * factor` rounded to a positive multiple of `multiple`.
std::size_t scaled_extent(std::size_t n, double factor, int multiple);

/// Picks one short side uniformly, resizes bilinearly so the shorter side
/// matches it (both extents rounded to size_multiple), and scales the boxes
/// by the per-axis factors actually applied.
Resized resize_for_training(const Tensor& image, const std::vector<Box>& gts,
                            std::span<const int> short_sides, std::mt19937_64& rng,
                            int size_multiple = 1);

using Detector = std::function<std::vector<Detection>(const Tensor&)>;

/// Runs `detector` on every pyramid level, maps boxes back to the original
/// frame, tags them with the level, concatenates in scale order and merges
/// with NMS at merge_nms_thresh. Sorted by descending score.
std::vector<Detection> detect_pyramid(const Tensor& image, const PyramidConfig& cfg,
                                      const Detector& detector);

}  // namespace psdet
