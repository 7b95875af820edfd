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

#include "psdet/eval.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace psdet {

std::size_t MatchResult::tp_count() const {
  return static_cast<std::size_t>(std::count(det_tp.begin(), det_tp.end(), true));
}

namespace {

std::vector<std::size_t> det_order(const std::vector<Detection>& dets) {
  std::vector<double> scores;
  scores.reserve(dets.size());
  for (const auto& d : dets) scores.push_back(d.score);
  return score_order(scores);
}

}  // namespace

MatchResult match(const std::vector<Detection>& dets, const std::vector<Box>& gts,
                  double iou_thresh) {
  MatchResult r;
  r.det_tp.assign(dets.size(), false);
  r.det_gt.assign(dets.size(), -1);
  r.gt_matched.assign(gts.size(), false);
  for (auto d : det_order(dets)) {
    int best = -1;
    double best_iou = iou_thresh;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (r.gt_matched[g]) continue;
      const double o = iou(dets[d].box, gts[g]);
      if (o >= best_iou && (best < 0 || o > best_iou)) {
        best = static_cast<int>(g);
        best_iou = o;
      }
    }
    if (best >= 0) {
      r.det_tp[d] = true;
      r.det_gt[d] = best;
      r.gt_matched[best] = true;
    }
  }
  return r;
}

namespace {

struct SweepPoint {
  std::size_t tp, fp;
};

// Cumulative counts after each distinct score threshold, descending.
std::vector<SweepPoint> sweep(const std::vector<ScoredMatch>& matches) {
  std::vector<ScoredMatch> sorted = matches;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredMatch& a, const ScoredMatch& b) { return a.score > b.score; });
  std::vector<SweepPoint> pts;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    (sorted[i].tp ? tp : fp)++;
    if (i + 1 == sorted.size() || sorted[i + 1].score != sorted[i].score) pts.push_back({tp, fp});
  }
  return pts;
}

}  // namespace

Curve pr_curve(const std::vector<ScoredMatch>& matches, std::size_t total_gts) {
  if (total_gts == 0) throw std::invalid_argument("pr_curve: no ground truths");
  const auto pts = sweep(matches);
  Curve c;
  const double G = static_cast<double>(total_gts);
  for (const auto& p : pts) {
    c.points.emplace_back(p.tp / G, static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp));
  }
  // Precision envelope from the right, then sum over recall increments.
  std::vector<double> env(c.points.size());
  double running = 0;
  for (std::size_t i = c.points.size(); i-- > 0;) {
    running = std::max(running, c.points[i].second);
    env[i] = running;
  }
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    ap += (c.points[i].first - prev_recall) * env[i];
    prev_recall = c.points[i].first;
  }
  c.summary.emplace_back("AP", ap);
  return c;
}

Curve discrete_roc(const std::vector<ScoredMatch>& matches, std::size_t total_gts,
                   const std::vector<int>& fp_checkpoints) {
  if (total_gts == 0) throw std::invalid_argument("discrete_roc: no ground truths");
  const double G = static_cast<double>(total_gts);
  Curve c;
  c.points.emplace_back(0.0, 0.0);
  for (const auto& p : sweep(matches)) c.points.emplace_back(static_cast<double>(p.fp), p.tp / G);
  for (int k : fp_checkpoints) {
    const double K = k;
    double tpr = 0;
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      const auto [x, y] = c.points[i];
      if (x <= K) {
        tpr = std::max(tpr, y);
      } else {
        const auto [x0, y0] = c.points[i - 1];
        if (x0 < K) tpr = std::max(tpr, y0 + (y - y0) * (K - x0) / (x - x0));
        break;
      }
    }
    c.summary.emplace_back("TPR@" + std::to_string(k), tpr);
  }
  return c;
}

double curve_summary(const Curve& c, const std::string& key) {
  for (const auto& [k, v] : c.summary) {
    if (k == key) return v;
  }
  throw std::out_of_range("curve summary has no key " + key);
}

bool SizeBucket::contains(const Box& b) const noexcept {
  const double side = std::min(b.width(), b.height());
  return side > min_side && side <= max_side;
}

std::vector<SizeBucket> default_buckets() {
  return {{"easy", 16.0, std::numeric_limits<double>::infinity()},
          {"medium", 8.0, 16.0},
          {"hard", 0.0, 8.0}};
}

BucketMatches match_bucket(const std::vector<Detection>& dets, const std::vector<Box>& gts,
                           const SizeBucket& bucket, double iou_thresh) {
  BucketMatches out;
  std::vector<bool> ignored(gts.size()), taken(gts.size(), false);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    ignored[g] = !bucket.contains(gts[g]);
    if (!ignored[g]) ++out.gts;
  }
  for (auto d : det_order(dets)) {
    const auto& box = dets[d].box;
    int best = -1;
    double best_iou = iou_thresh;
    bool hits_ignored = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = iou(box, gts[g]);
      if (ignored[g]) {
        hits_ignored = hits_ignored || o >= iou_thresh;
        continue;
      }
      if (taken[g]) continue;
      if (o >= best_iou && (best < 0 || o > best_iou)) {
        best = static_cast<int>(g);
        best_iou = o;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      out.matches.push_back({dets[d].score, true});
    } else if (!hits_ignored && bucket.contains(box)) {
      out.matches.push_back({dets[d].score, false});
    }
  }
  return out;
}

void write_curve_csv(const std::filesystem::path& path, const Curve& curve,
                     const std::string& x_name, const std::string& y_name) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  const auto num = [](double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  };
  f << x_name << "," << y_name << "\n";
  for (const auto& [x, y] : curve.points) f << num(x) << "," << num(y) << "\n";
  f << "#";
  for (const auto& [k, v] : curve.summary) f << " " << k << "=" << num(v);
  f << "\n";
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace psdet
