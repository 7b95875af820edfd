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

#include "psdet/train.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace psdet {

void train(NetworkState& state, const std::vector<Sample>& samples, const TrainConfig& cfg,
           const StepCallback& on_step) {
  cfg.validate();
  if (cfg.iterations > 0 && samples.empty()) throw std::invalid_argument("train: empty dataset");
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  std::size_t cursor = order.size();
  for (int it = 0; it < cfg.iterations; ++it) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const auto& s = samples[order[cursor++]];
    const auto r = resize_for_training(s.image, s.gts, cfg.multiscale_train_sizes, rng,
                                       state.cfg.stride());
    std::vector<Box> gts;
    for (const auto& b : r.gts) {
      if (b.width() > 0 && b.height() > 0) gts.push_back(b);
    }
    const auto rep = train_step(r.image, gts, state, cfg, rng);
    if (on_step) on_step(state.iteration, rep);
  }
}

DatasetScore score_dataset(const std::vector<std::vector<Detection>>& dets,
                           const std::vector<std::vector<Box>>& gts, double iou_thresh,
                           const std::vector<int>& fp_checkpoints,
                           const std::vector<SizeBucket>& buckets) {
  if (dets.size() != gts.size()) throw std::invalid_argument("score_dataset: image count mismatch");
  DatasetScore out;
  std::vector<ScoredMatch> all;
  std::size_t total = 0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto m = match(dets[i], gts[i], iou_thresh);
    for (std::size_t d = 0; d < dets[i].size(); ++d) all.push_back({dets[i][d].score, m.det_tp[d]});
    total += gts[i].size();
  }
  if (total == 0) throw std::invalid_argument("score_dataset: no ground truths");
  out.pr = pr_curve(all, total);
  out.roc = discrete_roc(all, total, fp_checkpoints);
  out.all.gts = total;
  out.all.ap = curve_summary(out.pr, "AP");
  out.all.recall = out.pr.points.empty() ? 0.0 : out.pr.points.back().first;

  for (const auto& b : buckets) {
    std::vector<ScoredMatch> ms;
    std::size_t n = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      auto bm = match_bucket(dets[i], gts[i], b, iou_thresh);
      n += bm.gts;
      ms.insert(ms.end(), bm.matches.begin(), bm.matches.end());
    }
    if (n == 0) continue;
    const auto c = pr_curve(ms, n);
    BucketScore s;
    s.gts = n;
    s.ap = curve_summary(c, "AP");
    s.recall = c.points.empty() ? 0.0 : c.points.back().first;
    out.buckets[b.name] = s;
  }
  return out;
}

}  // namespace psdet
