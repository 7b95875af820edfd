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

#include "psdet/ohem.hpp"

#include <algorithm>
#include <stdexcept>

namespace psdet {

std::vector<std::size_t> ohem_select(const std::vector<ScoredSample>& samples, int ratio,
                                     int batch_cap, std::mt19937_64& rng) {
  if (ratio < 1) throw std::invalid_argument("ohem_select: ratio must be >= 1");
  if (batch_cap < 1) throw std::invalid_argument("ohem_select: batch_cap must be >= 1");

  std::vector<const ScoredSample*> pos, neg;
  for (const auto& s : samples) (s.positive ? pos : neg).push_back(&s);
  const auto by_index = [](const ScoredSample* a, const ScoredSample* b) {
    return a->index < b->index;
  };
  std::sort(pos.begin(), pos.end(), by_index);

  const std::size_t cap = static_cast<std::size_t>(batch_cap);
  const std::size_t pos_cap = (cap + static_cast<std::size_t>(ratio)) / (1 + ratio);
  if (pos.size() > pos_cap) {
    // Partial Fisher-Yates: the first pos_cap slots become a uniform subsample.
    for (std::size_t i = 0; i < pos_cap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pos.size() - 1);
      std::swap(pos[i], pos[pick(rng)]);
    }
    pos.resize(pos_cap);
    std::sort(pos.begin(), pos.end(), by_index);
  }

  std::size_t want_neg;
  if (pos.empty()) {
    want_neg = std::min(cap, neg.size());
  } else {
    want_neg = std::min({static_cast<std::size_t>(ratio) * pos.size(), neg.size(),
                         cap - pos.size()});
  }
  const auto harder = [](const ScoredSample* a, const ScoredSample* b) {
    if (a->loss != b->loss) return a->loss > b->loss;
    return a->index < b->index;
  };
  std::partial_sort(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(want_neg), neg.end(),
                    harder);

  std::vector<std::size_t> out;
  out.reserve(pos.size() + want_neg);
  for (const auto* p : pos) out.push_back(p->index);
  for (std::size_t i = 0; i < want_neg; ++i) out.push_back(neg[i]->index);
  return out;
}

}  // namespace psdet
