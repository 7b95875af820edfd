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

#include "psdet/net.hpp"

namespace psdet {

/// Checkpoint container, all integers little-endian:
///
///   "PSD1"            magic
///   u32               format version (1)
///   u64 + bytes       config echo (net.* / anchors.* lines, then free text)
///   u64               iteration counter
///   u64               record count
///   per record:       u32 name length, name bytes, u32 rank, u64 extents,
///                     IEEE-754 binary64 values
///
/// Records hold every parameter tensor followed by its momentum buffer
/// ("velocity.<name>").
void save_checkpoint(std::ostream& out, const NetworkState& state,
                     const std::string& extra_echo = {});
void save_checkpoint(const std::filesystem::path& path, const NetworkState& state,
                     const std::string& extra_echo = {});

struct LoadedCheckpoint {
  NetworkState state;
  std::string echo;
};

/// Throws ParseError on a malformed container.
LoadedCheckpoint load_checkpoint(std::istream& in);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace psdet
