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

#include "psdet/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "psdet/error.hpp"
#include "psdet/image.hpp"

namespace psdet {

void DatasetSpec::validate() const {
  if (count < 0) throw std::invalid_argument("dataset: count must be >= 0");
  if (image_size < 16) throw std::invalid_argument("dataset: image_size must be >= 16");
  if (min_targets < 0 || max_targets < min_targets) {
    throw std::invalid_argument("dataset: bad targets-per-image range");
  }
  if (min_target_size < 2 || max_target_size < min_target_size ||
      max_target_size > image_size / 2) {
    throw std::invalid_argument("dataset: bad target size range");
  }
  if (clutter < 0) throw std::invalid_argument("dataset: clutter must be >= 0");
}

namespace {

using Rgb = std::array<double, 3>;

// Coverage of each pixel by a shape, 4x4 supersampled.
template <typename Inside>
void paint(Tensor& img, double x0, double y0, double x1, double y1, const Rgb& color,
           Inside inside) {
  const int H = static_cast<int>(img.dim(1)), W = static_cast<int>(img.dim(2));
  const int px0 = std::max(0, static_cast<int>(std::floor(x0)));
  const int py0 = std::max(0, static_cast<int>(std::floor(y0)));
  const int px1 = std::min(W, static_cast<int>(std::ceil(x1)));
  const int py1 = std::min(H, static_cast<int>(std::ceil(y1)));
  constexpr int kSub = 4;
  for (int y = py0; y < py1; ++y) {
    for (int x = px0; x < px1; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          if (inside(x + (sx + 0.5) / kSub, y + (sy + 0.5) / kSub)) ++hits;
        }
      }
      if (hits == 0) continue;
      const double a = static_cast<double>(hits) / (kSub * kSub);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = (1 - a) * img.at(c, y, x) + a * color[c];
    }
  }
}

void paint_ellipse(Tensor& img, double cx, double cy, double rx, double ry, const Rgb& color) {
  paint(img, cx - rx, cy - ry, cx + rx, cy + ry, color, [&](double x, double y) {
    const double u = (x - cx) / rx, v = (y - cy) / ry;
    return u * u + v * v <= 1.0;
  });
}

void paint_rect(Tensor& img, double x0, double y0, double x1, double y1, const Rgb& color) {
  paint(img, x0, y0, x1, y1, color, [&](double x, double y) {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  });
}

void paint_face(Tensor& img, const Box& b, const Rgb& skin, const Rgb& feature) {
  const double w = b.width(), h = b.height();
  const double cx = b.cx(), cy = b.cy();
  paint_ellipse(img, cx, cy, 0.5 * w, 0.5 * h, skin);
  const double eye_r = std::max(0.45, 0.1 * w);
  paint_ellipse(img, cx - 0.22 * w, cy - 0.12 * h, eye_r, eye_r, feature);
  paint_ellipse(img, cx + 0.22 * w, cy - 0.12 * h, eye_r, eye_r, feature);
  const double mouth_h = std::max(0.45, 0.06 * h);
  paint_rect(img, cx - 0.2 * w, cy + 0.22 * h - mouth_h, cx + 0.2 * w, cy + 0.22 * h + mouth_h,
             feature);
}

std::uint64_t sample_seed(std::uint64_t seed, int index) {
  // splitmix64 of (seed, index)
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(index) + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Sample generate_one(const DatasetSpec& spec, int index) {
  spec.validate();
  std::mt19937_64 rng(sample_seed(spec.seed, index));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
  const int S = spec.image_size;

  Sample s;
  char id[32];
  std::snprintf(id, sizeof id, "img_%05d", index);
  s.id = id;
  s.image = make_image(S, S);

  // Background: base color, linear gradient, per-pixel noise.
  Rgb base;
  for (auto& c : base) c = uni(0.15, 0.85);
  const double gx = uni(-0.2, 0.2);
  const double gy = uni(-0.2, 0.2);
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const double ramp = gx * (x / double(S) - 0.5) + gy * (y / double(S) - 0.5);
      for (int c = 0; c < 3; ++c) s.image.at(c, y, x) = base[c] + ramp + uni(-0.04, 0.04);
    }
  }

  for (int i = 0; i < spec.clutter; ++i) {
    const double w = uni(3, S / 3.0);
    const double h = uni(3, S / 3.0);
    const double x0 = uni(-w / 2, S - w / 2);
    const double y0 = uni(-h / 2, S - h / 2);
    Rgb color;
    for (auto& c : color) c = u01(rng);
    paint_rect(s.image, x0, y0, x0 + w, y0 + h, color);
  }

  std::uniform_int_distribution<int> n_dist(spec.min_targets, spec.max_targets);
  const int n_targets = n_dist(rng);
  const double log_lo = std::log(static_cast<double>(spec.min_target_size));
  const double log_hi = std::log(static_cast<double>(spec.max_target_size) + 1.0);
  for (int t = 0; t < n_targets; ++t) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const int w = std::clamp(static_cast<int>(std::floor(std::exp(uni(log_lo, log_hi)))),
                               spec.min_target_size, spec.max_target_size);
      const int h = std::clamp(static_cast<int>(std::lround(w * uni(1.0, 1.25))),
                               spec.min_target_size, spec.max_target_size);
      std::uniform_int_distribution<int> px(0, S - w), py(0, S - h);
      const int x0 = px(rng);
      const int y0 = py(rng);
      const Box cand(x0, y0, x0 + w, y0 + h);
      const bool clear = std::none_of(s.gts.begin(), s.gts.end(), [&](const Box& o) {
        return cand.x1 < o.x2 + 1 && o.x1 < cand.x2 + 1 && cand.y1 < o.y2 + 1 && o.y1 < cand.y2 + 1;
      });
      if (!clear) continue;
      // Draw order is sequenced explicitly so the stream is compiler-independent.
      const Rgb skin_base{0.86, 0.66, 0.52};
      Rgb skin, feature;
      for (int c = 0; c < 3; ++c) skin[c] = std::clamp(skin_base[c] + uni(-0.1, 0.1), 0.0, 1.0);
      for (int c = 0; c < 3; ++c) feature[c] = uni(0.0, 0.18);
      paint_face(s.image, cand, skin, feature);
      s.gts.push_back(cand);
      break;
    }
  }
  quantize_8bit(s.image);
  return s;
}

std::vector<Sample> generate(const DatasetSpec& spec) {
  spec.validate();
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) out.push_back(generate_one(spec, i));
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& tok, double& v) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(first, last, v);
  return ec == std::errc() && p == last && std::isfinite(v);
}

}  // namespace

std::vector<AnnotationRecord> parse_annotations(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  const auto next = [&](std::string& dst) {
    while (std::getline(in, dst)) {
      ++lineno;
      dst = trim(dst);
      if (!dst.empty()) return true;
    }
    return false;
  };

  while (next(line)) {
    AnnotationRecord rec;
    rec.image_path = line;
    std::string count_line;
    if (!next(count_line)) throw ParseError("annotations: missing box count", lineno + 1);
    long count = 0;
    {
      auto [p, ec] = std::from_chars(count_line.data(), count_line.data() + count_line.size(), count);
      if (ec != std::errc() || p != count_line.data() + count_line.size() || count < 0) {
        throw ParseError("annotations: bad box count '" + count_line + "'", lineno);
      }
    }
    for (long i = 0; i < count; ++i) {
      std::string box_line;
      if (!next(box_line)) throw ParseError("annotations: missing box line", lineno + 1);
      std::istringstream ss(box_line);
      std::string tok[4];
      double v[4];
      for (int c = 0; c < 4; ++c) {
        if (!(ss >> tok[c]) || !parse_double(tok[c], v[c])) {
          throw ParseError("annotations: bad box line '" + box_line + "'", lineno);
        }
      }
      if (v[2] < 0 || v[3] < 0) throw ParseError("annotations: negative box size", lineno);
      rec.gts.emplace_back(v[0], v[1], v[0] + v[2], v[1] + v[3]);
    }
    if (count == 0) {
      // Optional placeholder line of zeros, as in the public WIDER lists.
      const auto pos = in.tellg();
      const auto saved = lineno;
      std::string peek;
      if (next(peek)) {
        std::istringstream ss(peek);
        std::string tok;
        double v;
        bool zeros = true;
        int n = 0;
        while (ss >> tok) {
          if (!parse_double(tok, v) || v != 0) {
            zeros = false;
            break;
          }
          ++n;
        }
        if (!(zeros && n >= 4)) {
          in.clear();
          in.seekg(pos);
          lineno = saved;
        }
      } else {
        in.clear();
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& list_path) {
  std::ifstream f(list_path);
  if (!f) throw std::runtime_error("annotations: cannot open " + list_path.string());
  return parse_annotations(f);
}

namespace {

// Width w with x + w == x2 exactly, so the reader reconstructs the corner.
double exact_extent(double x, double x2) {
  double w = x2 - x;
  for (int i = 0; i < 64 && x + w != x2; ++i) {
    w = (x + w < x2) ? std::nextafter(w, INFINITY) : std::nextafter(w, -INFINITY);
  }
  return w;
}

std::string fmt(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

void write_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  for (const auto& r : records) {
    out << r.image_path << "\n" << r.gts.size() << "\n";
    for (const auto& b : r.gts) {
      out << fmt(b.x1) << " " << fmt(b.y1) << " " << fmt(exact_extent(b.x1, b.x2)) << " "
          << fmt(exact_extent(b.y1, b.y2)) << "\n";
    }
  }
}

void write_annotations(const std::filesystem::path& list_path,
                       const std::vector<AnnotationRecord>& records) {
  std::ofstream f(list_path);
  if (!f) throw std::runtime_error("annotations: cannot open " + list_path.string());
  write_annotations(f, records);
  if (!f) throw std::runtime_error("annotations: write failed for " + list_path.string());
}

}  // namespace psdet
