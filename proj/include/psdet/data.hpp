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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psdet/geometry.hpp"
#include "psdet/tensor.hpp"

namespace psdet {

struct Sample {
  Tensor image;  // (3, H, W) in [0, 1]
  std::vector<Box> gts;
  std::string id;
};

/// Parameters of the synthetic face-like dataset. Targets are filled ellipses
/// with two eye dots and a mouth bar, drawn over a textured background with
/// rectangular clutter. Target sizes are drawn log-uniformly.
struct DatasetSpec {
  std::uint64_t seed = 1;
  int count = 100;
  int image_size = 128;
  int min_targets = 1;
  int max_targets = 6;
  int min_target_size = 4;
  int max_target_size = 32;
  int clutter = 6;  // clutter rectangles per image

  void validate() const;
};

/// Deterministic in `spec`; sample i depends only on (seed, i). Pixel values
/// are multiples of 1/255.
std::vector<Sample> generate(const DatasetSpec& spec);
Sample generate_one(const DatasetSpec& spec, int index);

/// One record of a WIDER-style annotation list.
struct AnnotationRecord {
  std::string image_path;
  std::vector<Box> gts;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// Record layout: image path line, box count line, then one "x y w h [...]"
/// line per box. A zero count may be followed by one placeholder line of
/// zeros. Throws ParseError carrying the offending line number.
std::vector<AnnotationRecord> parse_annotations(std::istream& in);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& list_path);

/// Writes boxes as "x y w h" with round-trip precision.
void write_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records);
void write_annotations(const std::filesystem::path& list_path,
                       const std::vector<AnnotationRecord>& records);

}  // namespace psdet
