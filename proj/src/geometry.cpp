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

#include "psdet/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace psdet {

Box::Box(double x1_, double y1_, double x2_, double y2_) : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
    throw std::invalid_argument("Box: non-finite coordinate");
  }
  if (x2 < x1 || y2 < y1) {
    throw std::invalid_argument("Box: negative extent");
  }
}

double iou(const Box& a, const Box& b) noexcept {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::min(1.0, inter / uni);
}

BoxDelta encode(const Box& gt, const Box& anchor) {
  const double aw = anchor.width(), ah = anchor.height();
  const double gw = gt.width(), gh = gt.height();
  if (aw <= 0 || ah <= 0) throw std::invalid_argument("encode: degenerate anchor");
  if (gw <= 0 || gh <= 0) throw std::invalid_argument("encode: degenerate ground truth");
  return {(gt.cx() - anchor.cx()) / aw, (gt.cy() - anchor.cy()) / ah, std::log(gw / aw),
          std::log(gh / ah)};
}

Box clip_box(const Box& b, const Box& window) noexcept {
  Box out;
  out.x1 = std::clamp(b.x1, window.x1, window.x2);
  out.y1 = std::clamp(b.y1, window.y1, window.y2);
  out.x2 = std::clamp(b.x2, window.x1, window.x2);
  out.y2 = std::clamp(b.y2, window.y1, window.y2);
  return out;
}

Box decode(const BoxDelta& delta, const Box& anchor, const std::optional<Box>& clip,
           double clamp) {
  const double aw = anchor.width(), ah = anchor.height();
  if (aw <= 0 || ah <= 0) throw std::invalid_argument("decode: degenerate anchor");
  const double dw = std::min(delta.dw, clamp);
  const double dh = std::min(delta.dh, clamp);
  const double cx = anchor.cx() + delta.dx * aw;
  const double cy = anchor.cy() + delta.dy * ah;
  const double w = aw * std::exp(dw);
  const double h = ah * std::exp(dh);
  Box out;
  out.x1 = cx - 0.5 * w;
  out.y1 = cy - 0.5 * h;
  out.x2 = cx + 0.5 * w;
  out.y2 = cy + 0.5 * h;
  if (clip) out = clip_box(out, *clip);
  return out;
}

std::vector<std::size_t> score_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<std::size_t> nms_indices(std::span<const Box> boxes, std::span<const double> scores,
                                     double iou_threshold) {
  if (boxes.size() != scores.size()) throw std::invalid_argument("nms: size mismatch");
  const auto order = score_order(scores);
  std::vector<char> suppressed(boxes.size(), 0);
  std::vector<std::size_t> keep;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && iou(boxes[i], boxes[j]) > iou_threshold) suppressed[j] = 1;
    }
  }
  return keep;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<Box> boxes;
  std::vector<double> scores;
  boxes.reserve(dets.size());
  scores.reserve(dets.size());
  for (const auto& d : dets) {
    boxes.push_back(d.box);
    scores.push_back(d.score);
  }
  std::vector<Detection> out;
  for (std::size_t i : nms_indices(boxes, scores, iou_threshold)) out.push_back(dets[i]);
  return out;
}

}  // namespace psdet
