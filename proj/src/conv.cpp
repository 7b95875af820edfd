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

#include "psdet/conv.hpp"

#include <algorithm>

#include "psdet/error.hpp"

namespace psdet {

ConvLayer::ConvLayer(std::size_t out_ch, std::size_t in_ch, std::size_t kh, std::size_t kw,
                     int stride_, int dilation_, int padding_)
    : kernel({out_ch, in_ch, kh, kw}),
      bias(out_ch, 0.0),
      stride(stride_),
      dilation(dilation_),
      padding(padding_) {
  if (stride < 1 || dilation < 1 || padding < 0) {
    throw std::invalid_argument("ConvLayer: stride and dilation must be >= 1, padding >= 0");
  }
}

int ConvLayer::output_extent(int n, int kn) const {
  const int span = dilation * (kn - 1) + 1;
  const int padded = n + 2 * padding;
  if (padded < span) return 0;
  return (padded - span) / stride + 1;
}

ConvGrad zero_grad_like(const ConvLayer& layer) {
  return {Tensor(layer.kernel.shape()), std::vector<double>(layer.bias.size(), 0.0)};
}

namespace {

struct Dims {
  int C, H, W, O, KH, KW, Ho, Wo;
};

Dims check(const Tensor& input, const ConvLayer& layer) {
  if (input.rank() != 3) throw ShapeError("conv2d: input must be (C, H, W)");
  if (layer.kernel.rank() != 4) throw ShapeError("conv2d: kernel must be rank 4");
  if (input.dim(0) != layer.in_channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(0)) + " channels, layer " +
                     std::to_string(layer.in_channels()));
  }
  Dims d{};
  d.C = static_cast<int>(input.dim(0));
  d.H = static_cast<int>(input.dim(1));
  d.W = static_cast<int>(input.dim(2));
  d.O = static_cast<int>(layer.kernel.dim(0));
  d.KH = static_cast<int>(layer.kernel.dim(2));
  d.KW = static_cast<int>(layer.kernel.dim(3));
  d.Ho = layer.output_extent(d.H, d.KH);
  d.Wo = layer.output_extent(d.W, d.KW);
  if (d.Ho <= 0 || d.Wo <= 0) throw ShapeError("conv2d: input smaller than the kernel span");
  return d;
}

void check_grad_shapes(const Dims& d, const ConvLayer& layer, const Tensor& grad_out,
                       const ConvGrad& grad) {
  const std::vector<std::size_t> want{static_cast<std::size_t>(d.O), static_cast<std::size_t>(d.Ho),
                                      static_cast<std::size_t>(d.Wo)};
  if (grad_out.shape() != want) throw ShapeError("conv2d_backward: grad_out shape mismatch");
  if (grad.grad_kernel.shape() != layer.kernel.shape() || grad.grad_bias.size() != layer.bias.size()) {
    throw ShapeError("conv2d_backward: parameter gradient shape mismatch");
  }
}

// col is (C*KH*KW, Ho*Wo).
std::vector<double> im2col(const Tensor& input, const ConvLayer& layer, const Dims& d) {
  const int K = d.C * d.KH * d.KW;
  const std::size_t P = static_cast<std::size_t>(d.Ho) * d.Wo;
  std::vector<double> col(static_cast<std::size_t>(K) * P);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < K; ++r) {
    const int c = r / (d.KH * d.KW);
    const int ky = (r / d.KW) % d.KH;
    const int kx = r % d.KW;
    double* dst = col.data() + static_cast<std::size_t>(r) * P;
    for (int oy = 0; oy < d.Ho; ++oy) {
      const int iy = oy * layer.stride - layer.padding + ky * layer.dilation;
      double* row = dst + static_cast<std::size_t>(oy) * d.Wo;
      if (iy < 0 || iy >= d.H) {
        std::fill(row, row + d.Wo, 0.0);
        continue;
      }
      const double* src = input.data() + (static_cast<std::size_t>(c) * d.H + iy) * d.W;
      for (int ox = 0; ox < d.Wo; ++ox) {
        const int ix = ox * layer.stride - layer.padding + kx * layer.dilation;
        row[ox] = (ix >= 0 && ix < d.W) ? src[ix] : 0.0;
      }
    }
  }
  return col;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
  const auto d = check(input, layer);
  const auto col = im2col(input, layer, d);
  const int K = d.C * d.KH * d.KW;
  const std::size_t P = static_cast<std::size_t>(d.Ho) * d.Wo;
  Tensor out({static_cast<std::size_t>(d.O), static_cast<std::size_t>(d.Ho),
              static_cast<std::size_t>(d.Wo)});
  const double* wk = layer.kernel.data();
#pragma omp parallel for schedule(static)
  for (int o = 0; o < d.O; ++o) {
    double* dst = out.data() + static_cast<std::size_t>(o) * P;
    std::fill(dst, dst + P, layer.bias[o]);
    const double* wrow = wk + static_cast<std::size_t>(o) * K;
    for (int k = 0; k < K; ++k) {
      const double w = wrow[k];
      if (w == 0.0) continue;
      const double* src = col.data() + static_cast<std::size_t>(k) * P;
      for (std::size_t p = 0; p < P; ++p) dst[p] += w * src[p];
    }
  }
  return out;
}

Tensor conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_out,
                       ConvGrad& grad, bool need_input_grad) {
  const auto d = check(input, layer);
  check_grad_shapes(d, layer, grad_out, grad);
  const auto col = im2col(input, layer, d);
  const int K = d.C * d.KH * d.KW;
  const std::size_t P = static_cast<std::size_t>(d.Ho) * d.Wo;
  const double* go = grad_out.data();

#pragma omp parallel for schedule(static)
  for (int o = 0; o < d.O; ++o) {
    const double* g = go + static_cast<std::size_t>(o) * P;
    double bsum = 0.0;
    for (std::size_t p = 0; p < P; ++p) bsum += g[p];
    grad.grad_bias[o] += bsum;
    double* gw = grad.grad_kernel.data() + static_cast<std::size_t>(o) * K;
    for (int k = 0; k < K; ++k) {
      const double* src = col.data() + static_cast<std::size_t>(k) * P;
      double s = 0.0;
      for (std::size_t p = 0; p < P; ++p) s += g[p] * src[p];
      gw[k] += s;
    }
  }
  if (!need_input_grad) return {};

  std::vector<double> gcol(static_cast<std::size_t>(K) * P, 0.0);
  const double* wk = layer.kernel.data();
#pragma omp parallel for schedule(static)
  for (int k = 0; k < K; ++k) {
    double* dst = gcol.data() + static_cast<std::size_t>(k) * P;
    for (int o = 0; o < d.O; ++o) {
      const double w = wk[static_cast<std::size_t>(o) * K + k];
      if (w == 0.0) continue;
      const double* g = go + static_cast<std::size_t>(o) * P;
      for (std::size_t p = 0; p < P; ++p) dst[p] += w * g[p];
    }
  }

  Tensor grad_in(input.shape());
  const int taps = d.KH * d.KW;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < d.C; ++c) {
    double* gi = grad_in.data() + static_cast<std::size_t>(c) * d.H * d.W;
    for (int t = 0; t < taps; ++t) {
      const int ky = t / d.KW, kx = t % d.KW;
      const double* src = gcol.data() + static_cast<std::size_t>(c * taps + t) * P;
      for (int oy = 0; oy < d.Ho; ++oy) {
        const int iy = oy * layer.stride - layer.padding + ky * layer.dilation;
        if (iy < 0 || iy >= d.H) continue;
        for (int ox = 0; ox < d.Wo; ++ox) {
          const int ix = ox * layer.stride - layer.padding + kx * layer.dilation;
          if (ix >= 0 && ix < d.W) gi[static_cast<std::size_t>(iy) * d.W + ix] += src[oy * d.Wo + ox];
        }
      }
    }
  }
  return grad_in;
}

void relu_forward_inplace(Tensor& t) {
  auto v = t.values();
  const auto n = static_cast<std::ptrdiff_t>(v.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
}

void relu_backward_inplace(const Tensor& activated, Tensor& grad) {
  if (!activated.same_shape(grad)) throw ShapeError("relu_backward: shape mismatch");
  auto g = grad.values();
  auto a = activated.values();
  const auto n = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (!(a[i] > 0.0)) g[i] = 0.0;
  }
}

namespace reference {

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
  const auto d = check(input, layer);
  Tensor out({static_cast<std::size_t>(d.O), static_cast<std::size_t>(d.Ho),
              static_cast<std::size_t>(d.Wo)});
  for (int o = 0; o < d.O; ++o) {
    for (int oy = 0; oy < d.Ho; ++oy) {
      for (int ox = 0; ox < d.Wo; ++ox) {
        double s = layer.bias[o];
        for (int c = 0; c < d.C; ++c) {
          for (int ky = 0; ky < d.KH; ++ky) {
            const int iy = oy * layer.stride - layer.padding + ky * layer.dilation;
            if (iy < 0 || iy >= d.H) continue;
            for (int kx = 0; kx < d.KW; ++kx) {
              const int ix = ox * layer.stride - layer.padding + kx * layer.dilation;
              if (ix < 0 || ix >= d.W) continue;
              s += layer.kernel[((static_cast<std::size_t>(o) * d.C + c) * d.KH + ky) * d.KW + kx] *
                   input.at(c, iy, ix);
            }
          }
        }
        out.at(o, oy, ox) = s;
      }
    }
  }
  return out;
}

Tensor conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_out,
                       ConvGrad& grad) {
  const auto d = check(input, layer);
  check_grad_shapes(d, layer, grad_out, grad);
  Tensor grad_in(input.shape());
  for (int o = 0; o < d.O; ++o) {
    for (int oy = 0; oy < d.Ho; ++oy) {
      for (int ox = 0; ox < d.Wo; ++ox) {
        const double g = grad_out.at(o, oy, ox);
        grad.grad_bias[o] += g;
        for (int c = 0; c < d.C; ++c) {
          for (int ky = 0; ky < d.KH; ++ky) {
            const int iy = oy * layer.stride - layer.padding + ky * layer.dilation;
            if (iy < 0 || iy >= d.H) continue;
            for (int kx = 0; kx < d.KW; ++kx) {
              const int ix = ox * layer.stride - layer.padding + kx * layer.dilation;
              if (ix < 0 || ix >= d.W) continue;
              const std::size_t wi = ((static_cast<std::size_t>(o) * d.C + c) * d.KH + ky) * d.KW + kx;
              grad.grad_kernel[wi] += g * input.at(c, iy, ix);
              grad_in.at(c, iy, ix) += g * layer.kernel[wi];
            }
          }
        }
      }
    }
  }
  return grad_in;
}

}  // namespace reference

}  // namespace psdet
