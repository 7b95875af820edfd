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

#include "psdet/pooling.hpp"

#include <algorithm>
#include <cmath>

#include "psdet/error.hpp"

namespace psdet {

BinRange bin_range(double roi_start, double bin_size, int bin, int extent) {
  int start = static_cast<int>(std::floor(roi_start + bin * bin_size));
  int end = static_cast<int>(std::ceil(roi_start + (bin + 1) * bin_size));
  start = std::clamp(start, 0, extent);
  end = std::clamp(end, 0, extent);
  if (end <= start && start < extent) end = start + 1;
  return {start, end};
}

namespace {

struct Geometry {
  std::size_t channels, height, width, groups;  // groups = M
};

Geometry check_maps(const std::vector<std::size_t>& shape, int k) {
  if (k < 1) throw ShapeError("psroi_pool: k must be >= 1");
  if (shape.size() != 3) throw ShapeError("psroi_pool: maps must be rank 3");
  const std::size_t kk = static_cast<std::size_t>(k) * k;
  if (shape[0] == 0 || shape[0] % kk != 0) {
    throw ShapeError("psroi_pool: channel count " + std::to_string(shape[0]) +
                     " not divisible by k*k=" + std::to_string(kk));
  }
  return {shape[0], shape[1], shape[2], shape[0] / kk};
}

struct RoiGrid {
  double x0, y0, bin_w, bin_h;
};

RoiGrid roi_grid(const Box& roi, int k, double scale) {
  const double x0 = roi.x1 * scale, y0 = roi.y1 * scale;
  const double w = (roi.x2 - roi.x1) * scale, h = (roi.y2 - roi.y1) * scale;
  if (!(w > 0) || !(h > 0)) throw std::invalid_argument("psroi_pool: RoI has no area");
  return {x0, y0, w / k, h / k};
}

void pool_one(const Tensor& maps, const Geometry& g, const Box& roi, int k, double scale,
              Tensor& out) {
  const auto grid = roi_grid(roi, k, scale);
  const int H = static_cast<int>(g.height), W = static_cast<int>(g.width);
  for (int ph = 0; ph < k; ++ph) {
    const auto ry = bin_range(grid.y0, grid.bin_h, ph, H);
    for (int pw = 0; pw < k; ++pw) {
      const auto rx = bin_range(grid.x0, grid.bin_w, pw, W);
      const std::size_t j = static_cast<std::size_t>(ph) * k + pw;
      for (std::size_t i = 0; i < g.groups; ++i) {
        double v = 0.0;
        if (!ry.empty() && !rx.empty()) {
          const std::size_t c = j * g.groups + i;
          double sum = 0.0;
          for (int y = ry.start; y < ry.end; ++y) {
            for (int x = rx.start; x < rx.end; ++x) sum += maps.at(c, y, x);
          }
          v = sum / static_cast<double>((ry.end - ry.start) * (rx.end - rx.start));
        }
        out.at(i, ph, pw) = v;
      }
    }
  }
}

void check_grad(const Tensor& grad_out, const Geometry& g, int k) {
  const std::vector<std::size_t> want{g.groups, static_cast<std::size_t>(k),
                                      static_cast<std::size_t>(k)};
  if (grad_out.shape() != want) {
    throw ShapeError("psroi_pool_backward: grad shape " + grad_out.shape_str() +
                     " does not match the pooled shape");
  }
}

// Adds the adjoint of one RoI restricted to channels [c_lo, c_hi).
void scatter_one(const Tensor& grad_out, const Geometry& g, const Box& roi, int k, double scale,
                 Tensor& grad_maps, std::size_t c_lo, std::size_t c_hi) {
  const auto grid = roi_grid(roi, k, scale);
  const int H = static_cast<int>(g.height), W = static_cast<int>(g.width);
  for (std::size_t c = c_lo; c < c_hi; ++c) {
    const std::size_t j = c / g.groups, i = c % g.groups;
    const int ph = static_cast<int>(j) / k, pw = static_cast<int>(j) % k;
    const auto ry = bin_range(grid.y0, grid.bin_h, ph, H);
    const auto rx = bin_range(grid.x0, grid.bin_w, pw, W);
    if (ry.empty() || rx.empty()) continue;
    const double share = grad_out.at(i, ph, pw) /
                         static_cast<double>((ry.end - ry.start) * (rx.end - rx.start));
    for (int y = ry.start; y < ry.end; ++y) {
      for (int x = rx.start; x < rx.end; ++x) grad_maps.at(c, y, x) += share;
    }
  }
}

}  // namespace

Tensor psroi_pool_forward(const Tensor& maps, const Box& roi, int k, double spatial_scale) {
  const auto g = check_maps(maps.shape(), k);
  Tensor out({g.groups, static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
  pool_one(maps, g, roi, k, spatial_scale, out);
  return out;
}

Tensor psroi_pool_backward(const Tensor& grad_out, const Box& roi, int k, double spatial_scale,
                           const std::vector<std::size_t>& maps_shape) {
  const auto g = check_maps(maps_shape, k);
  check_grad(grad_out, g, k);
  Tensor grad(maps_shape);
  scatter_one(grad_out, g, roi, k, spatial_scale, grad, 0, g.channels);
  return grad;
}

std::vector<Tensor> psroi_pool_forward_batch(const Tensor& maps, std::span<const Box> rois, int k,
                                             double spatial_scale) {
  const auto g = check_maps(maps.shape(), k);
  std::vector<Tensor> out(rois.size());
  const auto n = static_cast<std::ptrdiff_t>(rois.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    Tensor t({g.groups, static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
    pool_one(maps, g, rois[r], k, spatial_scale, t);
    out[r] = std::move(t);
  }
  return out;
}

void psroi_pool_backward_batch(std::span<const Tensor> grad_out, std::span<const Box> rois, int k,
                               double spatial_scale, Tensor& grad_maps) {
  const auto g = check_maps(grad_maps.shape(), k);
  if (grad_out.size() != rois.size()) throw ShapeError("psroi_pool_backward: count mismatch");
  for (const auto& go : grad_out) check_grad(go, g, k);
  const auto nc = static_cast<std::ptrdiff_t>(g.channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    for (std::size_t r = 0; r < rois.size(); ++r) {
      scatter_one(grad_out[r], g, rois[r], k, spatial_scale, grad_maps, c, c + 1);
    }
  }
}

namespace reference {

void psroi_pool_backward_batch(std::span<const Tensor> grad_out, std::span<const Box> rois, int k,
                               double spatial_scale, Tensor& grad_maps) {
  const auto g = check_maps(grad_maps.shape(), k);
  if (grad_out.size() != rois.size()) throw ShapeError("psroi_pool_backward: count mismatch");
  for (std::size_t r = 0; r < rois.size(); ++r) {
    check_grad(grad_out[r], g, k);
    scatter_one(grad_out[r], g, rois[r], k, spatial_scale, grad_maps, 0, g.channels);
  }
}

}  // namespace reference

namespace {

std::size_t check_pooled(const Tensor& x, std::size_t positions) {
  if (x.rank() != 3 || x.dim(1) != x.dim(2)) {
    throw ShapeError("ps_avg_pool: pooled feature must be (M, N, N), got " + x.shape_str());
  }
  if (x.dim(1) * x.dim(2) != positions) {
    throw ShapeError("ps_avg_pool: " + std::to_string(positions) + " weights for " +
                     std::to_string(x.dim(1) * x.dim(2)) + " positions");
  }
  return x.dim(0);
}

}  // namespace

std::vector<double> ps_avg_pool_forward(const Tensor& x, const PoolWeights& w) {
  const std::size_t P = w.size();
  const std::size_t M = check_pooled(x, P);
  std::vector<double> y(M);
  for (std::size_t i = 0; i < M; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < P; ++j) sum += w.w[j] * x[i * P + j];
    y[i] = sum / static_cast<double>(P);
  }
  return y;
}

std::vector<double> global_avg_pool(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("global_avg_pool: rank 3 expected");
  const std::size_t P = x.dim(1) * x.dim(2);
  const std::size_t M = x.dim(0);
  std::vector<double> y(M);
  for (std::size_t i = 0; i < M; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < P; ++j) sum += x[i * P + j];
    y[i] = sum / static_cast<double>(P);
  }
  return y;
}

PsAvgPoolGrad ps_avg_pool_backward(std::span<const double> grad_y, const Tensor& x,
                                   const PoolWeights& w) {
  const std::size_t P = w.size();
  const std::size_t M = check_pooled(x, P);
  if (grad_y.size() != M) throw ShapeError("ps_avg_pool_backward: grad_y length mismatch");
  PsAvgPoolGrad g{Tensor(x.shape()), std::vector<double>(P, 0.0)};
  const double inv = 1.0 / static_cast<double>(P);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < P; ++j) {
      g.grad_x[i * P + j] = grad_y[i] * w.w[j] * inv;
      g.grad_w[j] += grad_y[i] * x[i * P + j] * inv;
    }
  }
  return g;
}

}  // namespace psdet
