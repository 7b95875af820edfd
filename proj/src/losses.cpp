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

#include "psdet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "psdet/error.hpp"

namespace psdet {

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p[c] = std::exp(logits[c] - mx);
    z += p[c];
  }
  for (auto& v : p) v /= z;
  return p;
}

SoftmaxCeResult softmax_ce(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("softmax_ce: logits must be (n, C)");
  const std::size_t n = logits.dim(0), C = logits.dim(1);
  if (labels.size() != n) throw ShapeError("softmax_ce: label count mismatch");
  SoftmaxCeResult r{0.0, Tensor(logits.shape()), std::vector<double>(n, 0.0)};
  if (n == 0) return r;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t s = 0; s < n; ++s) {
    const int lab = labels[s];
    if (lab < 0 || static_cast<std::size_t>(lab) >= C) {
      throw std::out_of_range("softmax_ce: label " + std::to_string(lab) + " outside [0, " +
                              std::to_string(C) + ")");
    }
    std::span<const double> row(logits.data() + s * C, C);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = std::log(z) + mx;
    r.per_sample[s] = log_z - row[lab];
    r.loss += r.per_sample[s];
    for (std::size_t c = 0; c < C; ++c) {
      const double p = std::exp(row[c] - log_z);
      r.grad_logits[s * C + c] = (p - (static_cast<int>(c) == lab ? 1.0 : 0.0)) * inv_n;
    }
  }
  r.loss *= inv_n;
  return r;
}

double smooth_l1_scalar(double d) noexcept {
  const double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

double smooth_l1_grad(double d) noexcept {
  if (d >= 1.0) return 1.0;
  if (d <= -1.0) return -1.0;
  return d;
}

SmoothL1Result smooth_l1(std::span<const BoxDelta> pred, std::span<const BoxDelta> target) {
  if (pred.size() != target.size()) throw ShapeError("smooth_l1: size mismatch");
  SmoothL1Result r{0.0, std::vector<BoxDelta>(pred.size())};
  if (pred.empty()) return r;
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d[4] = {pred[i].dx - target[i].dx, pred[i].dy - target[i].dy,
                         pred[i].dw - target[i].dw, pred[i].dh - target[i].dh};
    double g[4];
    for (int c = 0; c < 4; ++c) {
      r.loss += smooth_l1_scalar(d[c]);
      g[c] = smooth_l1_grad(d[c]) * inv_n;
    }
    r.grad_pred[i] = {g[0], g[1], g[2], g[3]};
  }
  r.loss *= inv_n;
  return r;
}

}  // namespace psdet
