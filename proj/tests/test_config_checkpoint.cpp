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

#include <gtest/gtest.h>

#include <sstream>

#include "psdet/checkpoint.hpp"
#include "psdet/config.hpp"
#include "psdet/data.hpp"
#include "psdet/error.hpp"

using namespace psdet;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return RunConfig::parse(in);
}

std::size_t error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

NetConfig small_net() {
  NetConfig c;
  c.widths = {4, 4, 6, 6, 8, 8};
  c.rpn_width = 6;
  c.anchors.scales = {1, 2};
  return c;
}

std::string bytes(const NetworkState& st, const std::string& echo = {}) {
  std::ostringstream out;
  save_checkpoint(out, st, echo);
  return out.str();
}

}  // namespace

TEST(Config, ParsesSectionsAndLists) {
  const auto c = parse(
      "# comment\n"
      "data.count = 7   # trailing\n"
      "anchors.scales = 1, 2, 4\n"
      "net.atrous = false\n"
      "anchors.base_stride = 16\n"
      "train.learning_rate = 0.02\n"
      "train.lr_steps = 100,200\n"
      "pyramid.test_scales = 0.5, 1, 2\n"
      "pyramid.train_short_sides = 64, 96\n"
      "paths.checkpoint = out/m.psd\n");
  EXPECT_EQ(c.data.count, 7);
  EXPECT_EQ(c.net.anchors.scales, (std::vector<double>{1, 2, 4}));
  EXPECT_FALSE(c.net.atrous);
  EXPECT_EQ(c.pyramid.size_multiple, 16);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.02);
  EXPECT_EQ(c.train.lr_steps, (std::vector<int>{100, 200}));
  EXPECT_EQ(c.pyramid.test_scales, (std::vector<double>{0.5, 1, 2}));
  EXPECT_EQ(c.train.multiscale_train_sizes, (std::vector<int>{64, 96}));
  EXPECT_EQ(c.paths.checkpoint, "out/m.psd");
}

TEST(Config, RejectsUnknownKeysWithLine) {
  EXPECT_EQ(error_line("data.count = 3\n\ntrain.bogus = 1\n"), 3u);
  EXPECT_EQ(error_line("data.count = three\n"), 1u);
  EXPECT_EQ(error_line("just words\n"), 1u);
  EXPECT_EQ(error_line("net.atrous = maybe\n"), 1u);
  EXPECT_THROW(parse("net.atrous = false\n"), ParseError);  // stride 16 vs anchors 8
}

TEST(Config, DumpRoundTrips) {
  auto c = parse("train.seed = 99\nanchors.scales = 1, 3\ndetect.score_thresh = 0.25\n");
  const auto again = parse(c.dump());
  EXPECT_EQ(again.dump(), c.dump());
  EXPECT_EQ(again.train.seed, 99u);
}

TEST(Config, NetEcho) {
  const auto n = small_net();
  const auto back = parse_net_config(dump_net_config(n));
  EXPECT_EQ(back.widths, n.widths);
  EXPECT_EQ(back.anchors.scales, n.anchors.scales);
  EXPECT_THROW(parse_net_config("train.seed = 1\n"), ParseError);
}

TEST(Checkpoint, BitwiseRoundTrip) {
  auto st = init_network(small_net(), 3);
  const auto s = generate_one(DatasetSpec{1, 1, 64, 1, 3, 8, 24, 2}, 0);
  std::mt19937_64 rng(1);
  TrainConfig tc;
  for (int i = 0; i < 3; ++i) train_step(s.image, s.gts, st, tc, rng);
  const auto b = bytes(st, "free text\n");
  std::istringstream in(b);
  const auto lc = load_checkpoint(in);
  EXPECT_TRUE(lc.state == st);
  EXPECT_EQ(lc.echo, "free text\n");
  EXPECT_EQ(bytes(lc.state, lc.echo), b);
}

TEST(Checkpoint, Layout) {
  const auto st = init_network(small_net(), 1);
  const auto b = bytes(st);
  EXPECT_EQ(b.substr(0, 4), "PSD1");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 0);
}

TEST(Checkpoint, RejectsCorruption) {
  const auto st = init_network(small_net(), 1);
  auto b = bytes(st);
  {
    auto bad = b;
    bad[0] = 'X';
    std::istringstream in(bad);
    EXPECT_THROW(load_checkpoint(in), ParseError);
  }
  {
    std::istringstream in(b.substr(0, b.size() / 2));
    EXPECT_THROW(load_checkpoint(in), ParseError);
  }
  EXPECT_THROW(load_checkpoint(std::filesystem::path("/nonexistent/x.psd")), std::runtime_error);
}
