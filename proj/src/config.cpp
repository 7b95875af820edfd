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

#include "psdet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "psdet/error.hpp"

namespace psdet {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("bad boolean '" + s + "'");
}

std::string fmt(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }
template <typename Seq>
std::string fmt_list(const Seq& xs) {
  std::string s;
  for (const auto& x : xs) {
    if (!s.empty()) s += ", ";
    s += fmt(x);
  }
  return s;
}

template <typename T>
void assign(T& dst, const std::string& v) {
  if constexpr (std::is_same_v<T, bool>) {
    dst = parse_bool(v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    dst = v;
  } else {
    dst = parse_number<T>(v);
  }
}

template <typename T>
void assign_list(std::vector<T>& dst, const std::string& v) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(parse_number<T>(item));
  dst = std::move(out);
}

template <typename T, std::size_t N>
void assign_array(std::array<T, N>& dst, const std::string& v) {
  const auto items = split_list(v);
  if (items.size() != N) {
    throw std::invalid_argument("expected " + std::to_string(N) + " values, got " +
                                std::to_string(items.size()));
  }
  for (std::size_t i = 0; i < N; ++i) dst[i] = parse_number<T>(items[i]);
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PSDET_SCALAR(name, member)                                          \
  Field {                                                                   \
    name, [](RunConfig& c, const std::string& v) { assign(c.member, v); }, \
        [](const RunConfig& c) { return fmt(c.member); }                    \
  }
#define PSDET_LIST(name, member)                                                 \
  Field {                                                                        \
    name, [](RunConfig& c, const std::string& v) { assign_list(c.member, v); }, \
        [](const RunConfig& c) { return fmt_list(c.member); }                    \
  }
#define PSDET_ARRAY(name, member)                                                 \
  Field {                                                                         \
    name, [](RunConfig& c, const std::string& v) { assign_array(c.member, v); }, \
        [](const RunConfig& c) { return fmt_list(c.member); }                     \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      PSDET_SCALAR("data.seed", data.seed),
      PSDET_SCALAR("data.count", data.count),
      PSDET_SCALAR("data.image_size", data.image_size),
      PSDET_SCALAR("data.min_targets", data.min_targets),
      PSDET_SCALAR("data.max_targets", data.max_targets),
      PSDET_SCALAR("data.min_target_size", data.min_target_size),
      PSDET_SCALAR("data.max_target_size", data.max_target_size),
      PSDET_SCALAR("data.clutter", data.clutter),

      PSDET_SCALAR("anchors.base_stride", net.anchors.base_stride),
      PSDET_LIST("anchors.scales", net.anchors.scales),
      PSDET_LIST("anchors.aspect_ratios", net.anchors.aspect_ratios),

      PSDET_SCALAR("net.num_classes", net.num_classes),
      PSDET_SCALAR("net.k", net.k),
      PSDET_SCALAR("net.atrous", net.atrous),
      PSDET_ARRAY("net.widths", net.widths),
      PSDET_SCALAR("net.rpn_width", net.rpn_width),
      PSDET_ARRAY("net.bbox_std", net.bbox_std),

      PSDET_SCALAR("train.seed", train.seed),
      PSDET_SCALAR("train.learning_rate", train.learning_rate),
      PSDET_SCALAR("train.momentum", train.momentum),
      PSDET_SCALAR("train.weight_decay", train.weight_decay),
      PSDET_SCALAR("train.iterations", train.iterations),
      PSDET_LIST("train.lr_steps", train.lr_steps),
      PSDET_SCALAR("train.rpn_batch", train.rpn_batch),
      PSDET_SCALAR("train.rfcn_batch", train.rfcn_batch),
      PSDET_SCALAR("train.ohem_ratio", train.ohem_ratio),
      PSDET_SCALAR("train.ohem_rpn", train.ohem_rpn),
      PSDET_SCALAR("train.ohem_rfcn", train.ohem_rfcn),
      PSDET_SCALAR("train.frozen_stem_layers", train.frozen_stem_layers),
      PSDET_SCALAR("train.freeze_cls_pool", train.freeze_cls_pool),
      PSDET_SCALAR("train.freeze_box_pool", train.freeze_box_pool),
      PSDET_SCALAR("train.reg_weight", train.reg_weight),
      PSDET_SCALAR("train.rpn_pos_iou", train.rpn_pos_iou),
      PSDET_SCALAR("train.rpn_neg_iou", train.rpn_neg_iou),
      PSDET_SCALAR("train.roi_pos_iou", train.roi_pos_iou),
      PSDET_SCALAR("train.roi_neg_lo", train.roi_neg_lo),
      PSDET_SCALAR("train.rois_include_gt", train.rois_include_gt),
      PSDET_SCALAR("train.pre_nms_top", train.proposals.pre_nms_top),
      PSDET_SCALAR("train.post_nms_top", train.proposals.post_nms_top),
      PSDET_SCALAR("train.proposal_nms_thresh", train.proposals.nms_thresh),
      PSDET_SCALAR("train.proposal_min_size", train.proposals.min_size),

      PSDET_LIST("pyramid.train_short_sides", pyramid.train_short_sides),
      PSDET_LIST("pyramid.test_scales", pyramid.test_scales),
      PSDET_SCALAR("pyramid.merge_nms_thresh", pyramid.merge_nms_thresh),

      PSDET_SCALAR("detect.score_thresh", detect.score_thresh),
      PSDET_SCALAR("detect.nms_thresh", detect.nms_thresh),
      PSDET_SCALAR("detect.max_detections", detect.max_detections),
      PSDET_SCALAR("detect.pre_nms_top", detect.proposals.pre_nms_top),
      PSDET_SCALAR("detect.post_nms_top", detect.proposals.post_nms_top),
      PSDET_SCALAR("detect.proposal_nms_thresh", detect.proposals.nms_thresh),
      PSDET_SCALAR("detect.proposal_min_size", detect.proposals.min_size),

      PSDET_SCALAR("eval.iou_thresh", eval.iou_thresh),
      PSDET_LIST("eval.fp_checkpoints", eval.fp_checkpoints),

      PSDET_SCALAR("paths.train_dir", paths.train_dir),
      PSDET_SCALAR("paths.checkpoint", paths.checkpoint),
      PSDET_SCALAR("paths.loss_log", paths.loss_log),
  };
  return f;
}

#undef PSDET_SCALAR
#undef PSDET_LIST
#undef PSDET_ARRAY

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

bool is_net_key(const std::string& key) {
  return key.rfind("net.", 0) == 0 || key.rfind("anchors.", 0) == 0;
}

// Parses lines into `cfg`; when `only_net` is set other keys are rejected.
void parse_into(RunConfig& cfg, std::istream& in, bool only_net) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected 'key = value': " + line, lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (only_net && !is_net_key(key)) throw ParseError("config: unexpected key '" + key + "'", lineno);
    try {
      cfg.set(key, value);
    } catch (const std::invalid_argument& e) {
      throw ParseError("config: " + key + ": " + e.what(), lineno);
    }
  }
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw std::invalid_argument("unknown key");
  f->set(*this, value);
}

std::string RunConfig::dump() const {
  std::string s;
  for (const auto& f : fields()) s += f.key + " = " + f.get(*this) + "\n";
  return s;
}

void RunConfig::validate() const {
  data.validate();
  net.validate();
  train.validate();
  pyramid.validate();
  if (pyramid.size_multiple != net.stride()) {
    throw std::invalid_argument("config: pyramid size multiple must equal the network stride");
  }
}

RunConfig RunConfig::parse(std::istream& in) {
  RunConfig cfg;
  parse_into(cfg, in, false);
  cfg.pyramid.size_multiple = cfg.net.stride();
  cfg.train.multiscale_train_sizes = cfg.pyramid.train_short_sides;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path.string());
  return parse(f);
}

std::string dump_net_config(const NetConfig& cfg) {
  RunConfig rc;
  rc.net = cfg;
  std::string s;
  for (const auto& f : fields()) {
    if (is_net_key(f.key)) s += f.key + " = " + f.get(rc) + "\n";
  }
  return s;
}

NetConfig parse_net_config(const std::string& text) {
  RunConfig rc;
  std::istringstream in(text);
  parse_into(rc, in, true);
  return rc.net;
}

}  // namespace psdet
