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

#include <cstdint>
#include <random>
#include <vector>

namespace psdet {

struct ScoredSample {
  std::size_t index = 0;
  bool positive = false;
  double loss = 0;  // per-sample classification loss, >= 0
};

/// Online hard example mining. Keeps all positives up to
/// ceil(batch_cap / (1 + ratio)) (a seeded uniform subsample when there are
/// more), then the hardest negatives: min(ratio * positives, available,
/// batch_cap - positives). Without positives, the min(batch_cap, available)
/// hardest negatives are taken. Loss ties go to the lower index.
/// Returns sample indices: positives ascending, then negatives hardest first.
std::vector<std::size_t> ohem_select(const std::vector<ScoredSample>& samples, int ratio,
                                     int batch_cap, std::mt19937_64& rng);

}  // namespace psdet
