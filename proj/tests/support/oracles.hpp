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

// Slow, literal reimplementations used to cross-check the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "psdet/anchors.hpp"
#include "psdet/eval.hpp"
#include "psdet/geometry.hpp"
#include "psdet/net.hpp"
#include "psdet/ohem.hpp"
#include "psdet/tensor.hpp"

namespace oracle {

using psdet::Box;

inline double iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// Repeatedly take the best live box, kill everything overlapping it.
inline std::vector<std::size_t> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                                    double thr) {
  std::vector<bool> alive(boxes.size(), true);
  std::vector<std::size_t> keep;
  for (;;) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (alive[i] && (!best || scores[i] > scores[*best])) best = i;
    }
    if (!best) return keep;
    keep.push_back(*best);
    alive[*best] = false;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (alive[i] && oracle::iou(boxes[*best], boxes[i]) > thr) alive[i] = false;
    }
  }
}

struct Label {
  int label;  // 1 positive, 0 negative, -1 ignore
  int gt;     // -1 when unmatched
  bool operator==(const Label&) const = default;
};

inline Label from(const psdet::Assignment& a) {
  const int l = a.label == psdet::Label::kPositive ? 1 : a.label == psdet::Label::kNegative ? 0 : -1;
  return {l, a.matched_gt ? static_cast<int>(*a.matched_gt) : -1};
}

inline std::vector<Label> assign_anchors(const std::vector<Box>& anchors, const std::vector<Box>& gts,
                                         double pos, double neg) {
  std::vector<Label> out(anchors.size(), {-1, -1});
  if (gts.empty()) {
    for (auto& l : out) l = {0, -1};
    return out;
  }
  auto overlap = [&](std::size_t a, std::size_t g) { return oracle::iou(anchors[a], gts[g]); };
  auto best_over_gts = [&](std::size_t a) {
    double m = -1;
    int arg = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (overlap(a, g) > m) {
        m = overlap(a, g);
        arg = static_cast<int>(g);
      }
    }
    return std::pair{m, arg};
  };
  // rule 3
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (best_over_gts(a).first < neg) out[a] = {0, -1};
  }
  // rule 1, earlier gts win ties
  std::vector<bool> by_rule1(anchors.size(), false);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    double m = 0;
    for (std::size_t a = 0; a < anchors.size(); ++a) m = std::max(m, overlap(a, g));
    if (m <= 0) continue;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      if (overlap(a, g) == m && !by_rule1[a]) {
        out[a] = {1, static_cast<int>(g)};
        by_rule1[a] = true;
      }
    }
  }
  // rule 2
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const auto [m, arg] = best_over_gts(a);
    if (m >= pos) out[a] = {1, arg};
  }
  return out;
}

inline std::vector<Label> assign_rois(const std::vector<Box>& rois, const std::vector<Box>& gts) {
  std::vector<Label> out;
  for (const auto& r : rois) {
    double m = 0;
    for (const auto& g : gts) m = std::max(m, oracle::iou(r, g));
    int arg = -1;
    for (std::size_t g = 0; g < gts.size() && arg < 0; ++g) {
      if (oracle::iou(r, gts[g]) == m) arg = static_cast<int>(g);
    }
    if (m > 0.5) {
      out.push_back({1, arg});
    } else if (m >= 0.1) {
      out.push_back({0, -1});
    } else {
      out.push_back({-1, -1});
    }
  }
  return out;
}

// Negatives chosen by a full sort; positives assumed under the cap.
inline std::vector<std::size_t> ohem_negatives(const std::vector<psdet::ScoredSample>& s,
                                               std::size_t n_pos_selected, int ratio, int cap) {
  std::vector<psdet::ScoredSample> neg;
  for (const auto& x : s) {
    if (!x.positive) neg.push_back(x);
  }
  std::sort(neg.begin(), neg.end(), [](const auto& a, const auto& b) {
    return a.loss > b.loss || (a.loss == b.loss && a.index < b.index);
  });
  std::size_t want = n_pos_selected == 0
                         ? std::min<std::size_t>(cap, neg.size())
                         : std::min<std::size_t>({ratio * n_pos_selected, neg.size(), cap - n_pos_selected});
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < want; ++i) out.push_back(neg[i].index);
  return out;
}

struct Proposal {
  Box box;
  double score;
  std::size_t anchor;
};

inline Box decode_clip(const psdet::BoxDelta& d, const Box& a, double W, double H) {
  const double clampv = std::log(1000.0 / 16.0);
  const double aw = a.x2 - a.x1, ah = a.y2 - a.y1;
  const double cx = 0.5 * (a.x1 + a.x2) + d.dx * aw, cy = 0.5 * (a.y1 + a.y2) + d.dy * ah;
  const double w = aw * std::exp(std::min(d.dw, clampv)), h = ah * std::exp(std::min(d.dh, clampv));
  auto cl = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
  Box b;
  b.x1 = cl(cx - 0.5 * w, W);
  b.y1 = cl(cy - 0.5 * h, H);
  b.x2 = cl(cx + 0.5 * w, W);
  b.y2 = cl(cy + 0.5 * h, H);
  return b;
}

inline std::vector<Proposal> propose(const psdet::Tensor& logits, const psdet::Tensor& deltas,
                                     const std::vector<Box>& anchors, double H, double W,
                                     const psdet::ProposalConfig& cfg) {
  const std::size_t A = logits.dim(0) / 2, h = logits.dim(1), w = logits.dim(2);
  std::vector<Proposal> cand;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t n = (y * w + x) * A + a;
        const double p = 1.0 / (1.0 + std::exp(logits.at(2 * a, y, x) - logits.at(2 * a + 1, y, x)));
        const psdet::BoxDelta d{deltas.at(4 * a, y, x), deltas.at(4 * a + 1, y, x),
                                deltas.at(4 * a + 2, y, x), deltas.at(4 * a + 3, y, x)};
        const Box b = decode_clip(d, anchors[n], W, H);
        if (b.x2 - b.x1 < cfg.min_size || b.y2 - b.y1 < cfg.min_size) continue;
        cand.push_back({b, p, n});
      }
    }
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
  if (cand.size() > static_cast<std::size_t>(cfg.pre_nms_top)) cand.resize(cfg.pre_nms_top);
  std::vector<Box> bx;
  std::vector<double> sc;
  for (const auto& c : cand) {
    bx.push_back(c.box);
    sc.push_back(c.score);
  }
  std::vector<Proposal> out;
  for (auto i : nms(bx, sc, cfg.nms_thresh)) {
    if (out.size() == static_cast<std::size_t>(cfg.post_nms_top)) break;
    out.push_back(cand[i]);
  }
  return out;
}

// Greedy matching, written as an explicit scan over the score ranking.
inline std::vector<int> match(const std::vector<psdet::Detection>& dets, const std::vector<Box>& gts,
                              double thr) {
  std::vector<std::size_t> rank(dets.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score || (dets[a].score == dets[b].score && a < b);
  });
  std::vector<int> det_gt(dets.size(), -1);
  std::vector<bool> used(gts.size(), false);
  for (auto d : rank) {
    std::vector<std::pair<double, std::size_t>> opts;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!used[g] && oracle::iou(dets[d].box, gts[g]) >= thr) opts.push_back({oracle::iou(dets[d].box, gts[g]), g});
    }
    if (opts.empty()) continue;
    std::sort(opts.begin(), opts.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    det_gt[d] = static_cast<int>(opts[0].second);
    used[opts[0].second] = true;
  }
  return det_gt;
}

// Per-bin loop over the whole map.
inline psdet::Tensor psroi_pool(const psdet::Tensor& maps, const Box& roi, int k, double scale) {
  const int C = static_cast<int>(maps.dim(0)), H = static_cast<int>(maps.dim(1)),
            W = static_cast<int>(maps.dim(2));
  const int M = C / (k * k);
  psdet::Tensor out({static_cast<std::size_t>(M), static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
  const double x1 = roi.x1 * scale, y1 = roi.y1 * scale;
  const double bw = (roi.x2 - roi.x1) * scale / k, bh = (roi.y2 - roi.y1) * scale / k;
  for (int i = 0; i < M; ++i) {
    for (int by = 0; by < k; ++by) {
      for (int bx = 0; bx < k; ++bx) {
        const int ch = (by * k + bx) * M + i;
        const int ys = std::clamp(static_cast<int>(std::floor(y1 + by * bh)), 0, H);
        int ye = std::clamp(static_cast<int>(std::ceil(y1 + (by + 1) * bh)), 0, H);
        const int xs = std::clamp(static_cast<int>(std::floor(x1 + bx * bw)), 0, W);
        int xe = std::clamp(static_cast<int>(std::ceil(x1 + (bx + 1) * bw)), 0, W);
        if (ye <= ys && ys < H) ye = ys + 1;
        if (xe <= xs && xs < W) xe = xs + 1;
        double s = 0;
        int n = 0;
        for (int y = 0; y < H; ++y) {
          for (int x = 0; x < W; ++x) {
            if (y >= ys && y < ye && x >= xs && x < xe) {
              s += maps.at(ch, y, x);
              ++n;
            }
          }
        }
        out.at(i, by, bx) = n ? s / n : 0.0;
      }
    }
  }
  return out;
}

}  // namespace oracle
