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
#include <iosfwd>
#include <string>
#include <vector>

#include "psdet/data.hpp"
#include "psdet/net.hpp"
#include "psdet/pyramid.hpp"

namespace psdet {

struct EvalConfig {
  double iou_thresh = 0.5;
  std::vector<int> fp_checkpoints{10, 50, 100};
};

struct PathConfig {
  std::string train_dir = "data/train";
  std::string checkpoint = "model.psd";
  std::string loss_log = "loss.csv";
};

/// Everything a run needs, read from `section.key = value` lines. '#' starts
/// a comment; lists are comma separated.
struct RunConfig {
  DatasetSpec data;
  NetConfig net;
  TrainConfig train;
  PyramidConfig pyramid;
  DetectConfig detect;
  EvalConfig eval;
  PathConfig paths;

  /// Throws ParseError naming the line for unknown keys or bad values.
  static RunConfig parse(std::istream& in);
  static RunConfig load(const std::filesystem::path& path);
  /// Applies one `section.key = value` assignment.
  void set(const std::string& key, const std::string& value);
  /// Every key with its current value, one `key = value` line each.
  std::string dump() const;
  /// Cross-section consistency checks.
  void validate() const;
};

/// Network-topology keys only (the net.* and anchors.* sections).
std::string dump_net_config(const NetConfig& cfg);
NetConfig parse_net_config(const std::string& text);

}  // namespace psdet
