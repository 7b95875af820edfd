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

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "psdet/geometry.hpp"
#include "psdet/tensor.hpp"

namespace testing_support {

using psdet::Box;

inline Box random_box(std::mt19937_64& rng, double extent, double min_side = 1.0,
                      double max_side = 40.0) {
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(rng);
  const double h = side(rng);
  std::uniform_real_distribution<double> px(0.0, std::max(1e-9, extent - w));
  std::uniform_real_distribution<double> py(0.0, std::max(1e-9, extent - h));
  const double x = px(rng);
  const double y = py(rng);
  return Box(x, y, x + w, y + h);
}

// Integer-cornered boxes make exact IoU ties common.
inline Box random_grid_box(std::mt19937_64& rng, int extent, int max_side) {
  std::uniform_int_distribution<int> side(1, max_side);
  const int w = side(rng);
  const int h = side(rng);
  std::uniform_int_distribution<int> px(0, extent - w);
  std::uniform_int_distribution<int> py(0, extent - h);
  const int x = px(rng);
  const int y = py(rng);
  return Box(x, y, x + w, y + h);
}

inline psdet::Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                                   double lo = -1.0, double hi = 1.0) {
  psdet::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

inline double central_diff(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

// Relative error with a floor on the scale so tiny gradients compare absolutely.
inline double rel_err(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace testing_support
