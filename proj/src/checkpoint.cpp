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

#include "psdet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "psdet/config.hpp"
#include "psdet/error.hpp"

namespace psdet {

namespace {

constexpr char kMagic[4] = {'P', 'S', 'D', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kEchoSeparator = "# --\n";

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_integral_v<T>);
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  in.read(reinterpret_cast<char*>(b), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw ParseError("checkpoint: truncated", 0);
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

void put_string(std::ostream& out, const std::string& s, bool wide) {
  if (wide) {
    put_le<std::uint64_t>(out, s.size());
  } else {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  }
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, bool wide) {
  const std::uint64_t n = wide ? get_le<std::uint64_t>(in) : get_le<std::uint32_t>(in);
  if (n > (1u << 30)) throw ParseError("checkpoint: implausible string length", 0);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) throw ParseError("checkpoint: truncated", 0);
  return s;
}

void put_record(std::ostream& out, const std::string& name, const std::vector<std::size_t>& shape,
                std::span<const double> values) {
  put_string(out, name, false);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put_le<std::uint64_t>(out, d);
  for (double v : values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

}  // namespace

void save_checkpoint(std::ostream& out, const NetworkState& state, const std::string& extra_echo) {
  auto& s = const_cast<NetworkState&>(state);
  const auto params = parameters(s);
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_string(out, dump_net_config(state.cfg) + kEchoSeparator + extra_echo, true);
  put_le<std::uint64_t>(out, state.iteration);
  put_le<std::uint64_t>(out, 2 * params.size());
  for (const auto& p : params) put_record(out, p.name, p.shape, p.values);
  for (std::size_t i = 0; i < params.size(); ++i) {
    put_record(out, "velocity." + params[i].name, params[i].shape, state.velocity[i]);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const NetworkState& state,
                     const std::string& extra_echo) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path.string());
  save_checkpoint(f, state, extra_echo);
}

LoadedCheckpoint load_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError("checkpoint: bad magic", 0);
  }
  if (const auto v = get_le<std::uint32_t>(in); v != kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(v), 0);
  }
  LoadedCheckpoint lc;
  const std::string echo = get_string(in, true);
  const auto sep = echo.find(kEchoSeparator);
  if (sep == std::string::npos) throw ParseError("checkpoint: config echo missing", 0);
  lc.echo = echo.substr(sep + std::strlen(kEchoSeparator));
  lc.state = init_network(parse_net_config(echo.substr(0, sep)), 0);
  lc.state.iteration = get_le<std::uint64_t>(in);

  auto params = parameters(lc.state);
  std::map<std::string, std::pair<std::vector<std::size_t>, std::span<double>>> slots;
  for (std::size_t i = 0; i < params.size(); ++i) {
    slots[params[i].name] = {params[i].shape, params[i].values};
    slots["velocity." + params[i].name] = {params[i].shape, lc.state.velocity[i]};
  }
  const auto count = get_le<std::uint64_t>(in);
  if (count != slots.size()) throw ParseError("checkpoint: record count mismatch", 0);
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::string name = get_string(in, false);
    auto it = slots.find(name);
    if (it == slots.end()) throw ParseError("checkpoint: unknown record " + name, 0);
    const auto rank = get_le<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = get_le<std::uint64_t>(in);
    if (shape != it->second.first) throw ParseError("checkpoint: shape mismatch for " + name, 0);
    for (auto& v : it->second.second) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    slots.erase(it);
  }
  return lc;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path.string());
  return load_checkpoint(f);
}

}  // namespace psdet
