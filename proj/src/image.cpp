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

#include "psdet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "psdet/error.hpp"

namespace psdet {

Tensor make_image(std::size_t height, std::size_t width, double fill) {
  return Tensor({3, height, width}, fill);
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw ShapeError("resize_bilinear: image must be (C, H, W)");
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: empty target size");
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  if (out_h == H && out_w == W) return image;

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  const auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      const std::size_t hi = std::min(lo + 1, in - 1);
      t[o] = {lo, hi, src - static_cast<double>(lo)};
    }
    return t;
  };
  const auto ty = taps(H, out_h);
  const auto tx = taps(W, out_w);

  Tensor out({C, out_h, out_w});
  const auto rows = static_cast<std::ptrdiff_t>(C * out_h);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t c = static_cast<std::size_t>(r) / out_h;
    const std::size_t y = static_cast<std::size_t>(r) % out_h;
    const auto& a = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto& b = tx[x];
      const double top = image.at(c, a.lo, b.lo) * (1 - b.frac) + image.at(c, a.lo, b.hi) * b.frac;
      const double bot = image.at(c, a.hi, b.lo) * (1 - b.frac) + image.at(c, a.hi, b.hi) * b.frac;
      out.at(c, y, x) = top * (1 - a.frac) + bot * a.frac;
    }
  }
  return out;
}

void quantize_8bit(Tensor& image) {
  for (auto& v : image.values()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_ppm: need a (3, H, W) image");
  const std::size_t H = image.dim(1), W = image.dim(2);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_ppm: cannot open " + path.string());
  f << "P6\n" << W << " " << H << "\n255\n";
  std::vector<unsigned char> row(W * 3);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        row[x * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw std::runtime_error("write_ppm: write failed for " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_ppm: cannot open " + path.string());
  if (header_token(f) != "P6") throw ParseError("read_ppm: not a binary PPM: " + path.string(), 0);
  std::size_t W = 0, H = 0, maxval = 0;
  try {
    W = std::stoul(header_token(f));
    H = std::stoul(header_token(f));
    maxval = std::stoul(header_token(f));
  } catch (const std::exception&) {
    throw ParseError("read_ppm: bad header in " + path.string(), 0);
  }
  if (W == 0 || H == 0 || maxval == 0 || maxval > 255) {
    throw ParseError("read_ppm: unsupported header in " + path.string(), 0);
  }
  std::vector<unsigned char> buf(W * H * 3);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw ParseError("read_ppm: truncated pixel data in " + path.string(), 0);
  }
  Tensor img({3, H, W});
  const auto denom = static_cast<double>(maxval);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = buf[(y * W + x) * 3 + c] / denom;
    }
  }
  return img;
}

}  // namespace psdet
