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

#include <vector>

#include "psdet/tensor.hpp"

namespace psdet {

/// 2-D convolution with square stride, dilation and zero padding.
struct ConvLayer {
  Tensor kernel;              // (out_ch, in_ch, kh, kw)
  std::vector<double> bias;   // out_ch
  int stride = 1;
  int dilation = 1;
  int padding = 0;

  ConvLayer() = default;
  ConvLayer(std::size_t out_ch, std::size_t in_ch, std::size_t kh, std::size_t kw, int stride,
            int dilation, int padding);

  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(1); }
  std::size_t parameter_count() const { return kernel.size() + bias.size(); }
  /// Output extent along an axis of input extent `n` (kernel extent `kn`).
  int output_extent(int n, int kn) const;
};

struct ConvGrad {
  Tensor grad_kernel;
  std::vector<double> grad_bias;
};

/// Input (C, H, W) -> output (O, Ho, Wo). im2col + row-parallel product.
Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer);

/// Returns the gradient w.r.t. the input and adds parameter gradients into
/// `grad` (which must be shaped like the layer). With `need_input_grad`
/// false the returned tensor is empty.
Tensor conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_out,
                       ConvGrad& grad, bool need_input_grad = true);

ConvGrad zero_grad_like(const ConvLayer& layer);

void relu_forward_inplace(Tensor& t);
/// Zeroes grad entries where the forward output was not positive.
void relu_backward_inplace(const Tensor& activated, Tensor& grad);

namespace reference {
/// Direct nested-loop convolution, single-threaded.
Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer);
Tensor conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_out,
                       ConvGrad& grad);
}  // namespace reference

}  // namespace psdet
