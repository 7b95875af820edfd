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
#include <map>
#include <string>
#include <vector>

#include "psdet/data.hpp"
#include "psdet/eval.hpp"
#include "psdet/net.hpp"
#include "psdet/pyramid.hpp"

namespace psdet {

using StepCallback = std::function<void(std::uint64_t iteration, const LossReport&)>;

/// Runs cfg.iterations training steps over `samples`, visiting them in
/// seeded epoch permutations and resizing each to a random training short
/// side. Every random draw comes from one generator seeded with cfg.seed.
void train(NetworkState& state, const std::vector<Sample>& samples, const TrainConfig& cfg,
           const StepCallback& on_step = {});

struct BucketScore {
  double ap = 0;
  double recall = 0;  // matched / bucket ground truths, over all detections
  std::size_t gts = 0;
};

struct DatasetScore {
  BucketScore all;
  std::map<std::string, BucketScore> buckets;
  Curve pr;
  Curve roc;
};

/// Scores per-image detections against per-image ground truths. Buckets
/// without ground truths are left out of `buckets`.
DatasetScore score_dataset(const std::vector<std::vector<Detection>>& dets,
                           const std::vector<std::vector<Box>>& gts, double iou_thresh,
                           const std::vector<int>& fp_checkpoints,
                           const std::vector<SizeBucket>& buckets = default_buckets());

}  // namespace psdet
