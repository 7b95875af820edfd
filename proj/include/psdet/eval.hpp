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

#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "psdet/geometry.hpp"

namespace psdet {

struct MatchResult {
  std::vector<bool> det_tp;         // per detection, input order
  std::vector<int> det_gt;          // matched gt index or -1
  std::vector<bool> gt_matched;     // per ground truth

  std::size_t tp_count() const;
};

/// Greedy matching: detections in descending score order (ties by index)
/// take the highest-IoU unmatched ground truth with IoU >= iou_thresh.
MatchResult match(const std::vector<Detection>& dets, const std::vector<Box>& gts,
                  double iou_thresh = 0.5);

/// One scored detection entering a dataset-level sweep.
struct ScoredMatch {
  double score;
  bool tp;
};

struct Curve {
  std::vector<std::pair<double, double>> points;
  std::vector<std::pair<std::string, double>> summary;
};

/// Precision/recall sweep over distinct score thresholds, descending. Points
/// are (recall, precision); summary "AP" is the area under the precision
/// envelope (all-points interpolation). Throws std::invalid_argument when
/// total_gts is 0.
Curve pr_curve(const std::vector<ScoredMatch>& matches, std::size_t total_gts);

/// Discrete ROC: points are (cumulative false positives, true positive rate)
/// starting at (0, 0); summary "TPR@K" for each checkpoint, linearly
/// interpolated between sweep points and flat past the last one.
Curve discrete_roc(const std::vector<ScoredMatch>& matches, std::size_t total_gts,
                   const std::vector<int>& fp_checkpoints);

double curve_summary(const Curve& c, const std::string& key);

/// Size bucket on the shorter box side: min_side < side <= max_side.
struct SizeBucket {
  std::string name;
  double min_side = 0;
  double max_side = std::numeric_limits<double>::infinity();
  bool contains(const Box& b) const noexcept;
};

/// easy (> 16 px), medium (8, 16] px, hard (<= 8 px).
std::vector<SizeBucket> default_buckets();

/// Per-image contribution to one bucket's sweep. Ground truths outside the
/// bucket are ignored; a detection is a true positive if it takes an in-bucket
/// ground truth, is dropped if it overlaps an ignored ground truth or is
/// itself outside the bucket, and is a false positive otherwise.
struct BucketMatches {
  std::vector<ScoredMatch> matches;
  std::size_t gts = 0;
};
BucketMatches match_bucket(const std::vector<Detection>& dets, const std::vector<Box>& gts,
                           const SizeBucket& bucket, double iou_thresh = 0.5);

/// "x_name,y_name" header, "x,y" lines, trailing "# key=value ..." comment.
void write_curve_csv(const std::filesystem::path& path, const Curve& curve,
                     const std::string& x_name, const std::string& y_name);

}  // namespace psdet
