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

#include <span>
#include <vector>

#include "psdet/geometry.hpp"
#include "psdet/tensor.hpp"

namespace psdet {

struct LossReport {
  double cls_loss = 0;
  double reg_loss = 0;
  double total = 0;
  int n_pos = 0;
  int n_neg = 0;
};

struct SoftmaxCeResult {
  double loss = 0;
  Tensor grad_logits;           // (n, C)
  std::vector<double> per_sample;  // -log p(label) for each row
};

/// Mean cross-entropy of row-wise softmax over (n, C) logits. Throws
/// std::out_of_range for a label outside [0, C). n = 0 gives loss 0.
SoftmaxCeResult softmax_ce(const Tensor& logits, std::span<const int> labels);

/// Numerically stable softmax of one row.
std::vector<double> softmax(std::span<const double> logits);

struct SmoothL1Result {
  double loss = 0;
  std::vector<BoxDelta> grad_pred;
};

/// Sum over the four coordinates of 0.5 d^2 (|d| < 1) or |d| - 0.5, averaged
/// over boxes. Empty input gives loss 0.
SmoothL1Result smooth_l1(std::span<const BoxDelta> pred, std::span<const BoxDelta> target);

double smooth_l1_scalar(double d) noexcept;
double smooth_l1_grad(double d) noexcept;

}  // namespace psdet
