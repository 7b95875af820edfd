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

#include <filesystem>

#include "psdet/tensor.hpp"

namespace psdet {

/// Images are (3, H, W) tensors with values in [0, 1].
Tensor make_image(std::size_t height, std::size_t width, double fill = 0.0);

/// Bilinear resize with half-pixel centers and edge clamping. Same-size
/// requests return a copy.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// Binary 8-bit RGB (P6) image files.
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);

/// Rounds every value to the nearest multiple of 1/255 within [0, 1], which
/// makes write_ppm/read_ppm lossless.
void quantize_8bit(Tensor& image);

}  // namespace psdet
