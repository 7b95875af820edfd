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

#include "psdet/anchors.hpp"

#include <cmath>
#include <stdexcept>

namespace psdet {

void AnchorConfig::validate() const {
  if (base_stride < 1) throw std::invalid_argument("anchors: base_stride must be >= 1");
  if (scales.empty()) throw std::invalid_argument("anchors: empty scale list");
  if (aspect_ratios.empty()) throw std::invalid_argument("anchors: empty aspect ratio list");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0)) throw std::invalid_argument("anchors: scales must be > 0");
    if (i > 0 && !(scales[i] > scales[i - 1])) {
      throw std::invalid_argument("anchors: scales must be strictly increasing");
    }
  }
  for (double r : aspect_ratios) {
    if (!(r > 0)) throw std::invalid_argument("anchors: aspect ratios must be > 0");
  }
}

std::vector<Box> generate_anchors(const AnchorConfig& cfg, int feature_h, int feature_w) {
  cfg.validate();
  if (feature_h < 1 || feature_w < 1) throw std::invalid_argument("anchors: empty feature grid");
  const double stride = cfg.base_stride;
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(feature_h) * feature_w * cfg.per_cell());
  for (int i = 0; i < feature_h; ++i) {
    for (int j = 0; j < feature_w; ++j) {
      const double cx = (j + 0.5) * stride;
      const double cy = (i + 0.5) * stride;
      for (double s : cfg.scales) {
        for (double r : cfg.aspect_ratios) {
          const double w = s * stride / std::sqrt(r);
          const double h = s * stride * std::sqrt(r);
          Box b;
          b.x1 = cx - 0.5 * w;
          b.y1 = cy - 0.5 * h;
          b.x2 = cx + 0.5 * w;
          b.y2 = cy + 0.5 * h;
          out.push_back(b);
        }
      }
    }
  }
  return out;
}

namespace {

// overlaps[a * n_gt + g]
std::vector<double> overlap_matrix(const std::vector<Box>& boxes, const std::vector<Box>& gts) {
  std::vector<double> m(boxes.size() * gts.size());
  const auto n = static_cast<std::ptrdiff_t>(boxes.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t a = 0; a < n; ++a) {
    for (std::size_t g = 0; g < gts.size(); ++g) m[a * gts.size() + g] = iou(boxes[a], gts[g]);
  }
  return m;
}

}  // namespace

std::vector<Assignment> assign_anchors(const std::vector<Box>& anchors,
                                       const std::vector<Box>& gts, double pos_iou,
                                       double neg_iou) {
  if (!(0 <= neg_iou && neg_iou <= pos_iou && pos_iou <= 1)) {
    throw std::invalid_argument("assign_anchors: need 0 <= neg_iou <= pos_iou <= 1");
  }
  std::vector<Assignment> out(anchors.size());
  if (gts.empty()) {
    for (auto& a : out) a.label = Label::kNegative;
    return out;
  }
  const std::size_t ng = gts.size();
  const auto m = overlap_matrix(anchors, gts);

  std::vector<double> gt_best(ng, 0.0);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    for (std::size_t g = 0; g < ng; ++g) gt_best[g] = std::max(gt_best[g], m[a * ng + g]);
  }

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    auto& as = out[a];
    std::size_t arg = 0;
    for (std::size_t g = 0; g < ng; ++g) {
      if (m[a * ng + g] > m[a * ng + arg]) arg = g;
    }
    as.max_iou = m[a * ng + arg];

    std::optional<std::size_t> claimed;
    for (std::size_t g = 0; g < ng && !claimed; ++g) {
      if (gt_best[g] > 0 && m[a * ng + g] == gt_best[g]) claimed = g;
    }

    if (as.max_iou >= pos_iou) {
      as.label = Label::kPositive;
      as.matched_gt = arg;
    } else if (claimed) {
      as.label = Label::kPositive;
      as.matched_gt = claimed;
    } else if (as.max_iou < neg_iou) {
      as.label = Label::kNegative;
    } else {
      as.label = Label::kIgnore;
    }
  }
  return out;
}

std::vector<Assignment> assign_rois(const std::vector<Box>& rois, const std::vector<Box>& gts,
                                    double pos_iou, double neg_lo) {
  std::vector<Assignment> out(rois.size());
  if (gts.empty()) {
    // Best IoU is 0 everywhere, which sits below the negative band.
    return out;
  }
  const std::size_t ng = gts.size();
  const auto m = overlap_matrix(rois, gts);
  for (std::size_t r = 0; r < rois.size(); ++r) {
    std::size_t arg = 0;
    for (std::size_t g = 0; g < ng; ++g) {
      if (m[r * ng + g] > m[r * ng + arg]) arg = g;
    }
    auto& as = out[r];
    as.max_iou = m[r * ng + arg];
    if (as.max_iou > pos_iou) {
      as.label = Label::kPositive;
      as.matched_gt = arg;
    } else if (as.max_iou >= neg_lo) {
      as.label = Label::kNegative;
    } else {
      as.label = Label::kIgnore;
    }
  }
  return out;
}

}  // namespace psdet
