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

/// Learnable per-position weights for position-sensitive average pooling.
/// Starts at all ones, which is plain global average pooling.
struct PoolWeights {
  std::vector<double> w;
  std::vector<double> grad_w;

  PoolWeights() = default;
  explicit PoolWeights(std::size_t positions) : w(positions, 1.0), grad_w(positions, 0.0) {}
  std::size_t size() const noexcept { return w.size(); }
};

/// Feature-grid cell range [start, end) covered by one pooling bin.
struct BinRange {
  int start, end;
  bool empty() const noexcept { return end <= start; }
};

/// Bin edges along one axis: floor of the continuous start, ceil of the
/// continuous end, clamped to [0, extent) and widened to at least one cell.
BinRange bin_range(double roi_start, double bin_size, int bin, int extent);

/// Position-sensitive RoI pooling of one RoI. `maps` is (k*k*M, H, W); the
/// result is (M, k, k) where bin j of output map i averages channel j*M + i.
Tensor psroi_pool_forward(const Tensor& maps, const Box& roi, int k, double spatial_scale);

/// Adjoint of psroi_pool_forward. Returns a tensor shaped like the maps.
Tensor psroi_pool_backward(const Tensor& grad_out, const Box& roi, int k, double spatial_scale,
                           const std::vector<std::size_t>& maps_shape);

/// Pools every RoI. Parallel over RoIs.
std::vector<Tensor> psroi_pool_forward_batch(const Tensor& maps, std::span<const Box> rois, int k,
                                             double spatial_scale);

/// Accumulates the adjoint of every RoI into `grad_maps` (shape of the maps).
/// Parallel over channels; each channel sums RoIs in index order, so the
/// result does not depend on the thread count.
void psroi_pool_backward_batch(std::span<const Tensor> grad_out, std::span<const Box> rois, int k,
                               double spatial_scale, Tensor& grad_maps);

namespace reference {
/// Single-threaded batch adjoint, RoI-major accumulation.
void psroi_pool_backward_batch(std::span<const Tensor> grad_out, std::span<const Box> rois, int k,
                               double spatial_scale, Tensor& grad_maps);
}  // namespace reference

/// Position-sensitive average pooling: y_i = (sum_j w_j * x_ij) / N^2 for a
/// pooled feature x of shape (M, N, N).
std::vector<double> ps_avg_pool_forward(const Tensor& x, const PoolWeights& w);

struct PsAvgPoolGrad {
  Tensor grad_x;
  std::vector<double> grad_w;
};

PsAvgPoolGrad ps_avg_pool_backward(std::span<const double> grad_y, const Tensor& x,
                                   const PoolWeights& w);

/// Plain global average pooling of a (M, N, N) feature, same accumulation
/// order as ps_avg_pool_forward.
std::vector<double> global_avg_pool(const Tensor& x);

}  // namespace psdet
