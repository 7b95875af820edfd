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

#include "psdet/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "psdet/image.hpp"

namespace psdet {

void PyramidConfig::validate() const {
  if (train_short_sides.empty()) throw std::invalid_argument("pyramid: no training sizes");
  for (int s : train_short_sides) {
    if (s < 1) throw std::invalid_argument("pyramid: training sizes must be >= 1");
  }
  if (test_scales.empty()) throw std::invalid_argument("pyramid: no test scales");
  for (double s : test_scales) {
    if (!(s > 0)) throw std::invalid_argument("pyramid: test scales must be > 0");
  }
  if (!(merge_nms_thresh >= 0 && merge_nms_thresh <= 1)) {
    throw std::invalid_argument("pyramid: merge_nms_thresh must be in [0, 1]");
  }
  if (size_multiple < 1) throw std::invalid_argument("pyramid: size_multiple must be >= 1");
}

Box scale_box(const Box& b, double sx, double sy) noexcept {
  Box out;
  out.x1 = b.x1 * sx;
  out.y1 = b.y1 * sy;
  out.x2 = b.x2 * sx;
  out.y2 = b.y2 * sy;
  return out;
}

std::size_t scaled_extent(std::size_t n, double factor, int multiple) {
  const double m = multiple;
  const double units = std::round(static_cast<double>(n) * factor / m);
  return static_cast<std::size_t>(std::max(1.0, units) * m);
}

Resized resize_for_training(const Tensor& image, const std::vector<Box>& gts,
                            std::span<const int> short_sides, std::mt19937_64& rng,
                            int size_multiple) {
  if (short_sides.empty()) throw std::invalid_argument("resize_for_training: no sizes");
  std::uniform_int_distribution<std::size_t> pick(0, short_sides.size() - 1);
  const int target = short_sides[pick(rng)];
  const std::size_t H = image.dim(1), W = image.dim(2);
  const double factor = static_cast<double>(target) / static_cast<double>(std::min(H, W));
  const std::size_t oh = scaled_extent(H, factor, size_multiple);
  const std::size_t ow = scaled_extent(W, factor, size_multiple);
  Resized r;
  r.scale_factor = factor;
  r.sx = static_cast<double>(ow) / static_cast<double>(W);
  r.sy = static_cast<double>(oh) / static_cast<double>(H);
  r.image = resize_bilinear(image, oh, ow);
  r.gts.reserve(gts.size());
  for (const auto& b : gts) r.gts.push_back(scale_box(b, r.sx, r.sy));
  return r;
}

std::vector<Detection> detect_pyramid(const Tensor& image, const PyramidConfig& cfg,
                                      const Detector& detector) {
  cfg.validate();
  const std::size_t H = image.dim(1), W = image.dim(2);
  const auto levels = static_cast<std::ptrdiff_t>(cfg.test_scales.size());
  std::vector<std::vector<Detection>> per_level(cfg.test_scales.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t l = 0; l < levels; ++l) {
    const double s = cfg.test_scales[l];
    const std::size_t oh = scaled_extent(H, s, cfg.size_multiple);
    const std::size_t ow = scaled_extent(W, s, cfg.size_multiple);
    const double sx = static_cast<double>(ow) / static_cast<double>(W);
    const double sy = static_cast<double>(oh) / static_cast<double>(H);
    char tag[32];
    std::snprintf(tag, sizeof tag, "s%g", s);
    auto dets = detector(resize_bilinear(image, oh, ow));
    for (auto& d : dets) {
      d.box = scale_box(d.box, 1.0 / sx, 1.0 / sy);
      d.scale_tag = tag;
    }
    per_level[l] = std::move(dets);
  }
  std::vector<Detection> all;
  for (auto& level : per_level) {
    for (auto& d : level) all.push_back(std::move(d));
  }
  return nms(all, cfg.merge_nms_thresh);
}

}  // namespace psdet
