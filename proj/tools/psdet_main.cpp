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

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "psdet/checkpoint.hpp"
#include "psdet/config.hpp"
#include "psdet/data.hpp"
#include "psdet/error.hpp"
#include "psdet/eval.hpp"
#include "psdet/image.hpp"
#include "psdet/train.hpp"

namespace fs = std::filesystem;
using namespace psdet;

namespace {

enum Exit { kOk = 0, kUsage = 1, kDiverged = 2, kMissing = 3, kEvalInput = 4 };

struct Failure {
  int code;
  std::string message;
};

std::string num(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) {
    std::istringstream empty;
    return RunConfig::parse(empty);
  }
  if (!fs::exists(path)) throw Failure{kUsage, "config not found: " + path};
  return RunConfig::load(path);
}

std::vector<Sample> load_samples(const fs::path& dir) {
  const auto list = dir / "annotations.txt";
  if (!fs::exists(list)) throw Failure{kMissing, "no annotations.txt in " + dir.string()};
  std::vector<Sample> out;
  for (auto& rec : load_annotations(list)) {
    const fs::path img = fs::path(rec.image_path).is_absolute() ? fs::path(rec.image_path) : dir / rec.image_path;
    if (!fs::exists(img)) throw Failure{kMissing, "image not found: " + img.string()};
    out.push_back({read_ppm(img), std::move(rec.gts), img.stem().string()});
  }
  return out;
}

int cmd_gen(const std::string& config, const std::string& out_dir) {
  const auto cfg = load_config(config);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw Failure{kUsage, "cannot create " + out_dir};
  std::vector<AnnotationRecord> recs;
  for (int i = 0; i < cfg.data.count; ++i) {
    auto s = generate_one(cfg.data, i);
    const std::string name = s.id + ".ppm";
    write_ppm(fs::path(out_dir) / name, s.image);
    recs.push_back({name, std::move(s.gts)});
  }
  write_annotations(fs::path(out_dir) / "annotations.txt", recs);
  std::cerr << "wrote " << recs.size() << " images to " << out_dir << "\n";
  return kOk;
}

int cmd_train(const std::string& config, std::string data_dir, std::string ckpt, std::string log) {
  auto cfg = load_config(config);
  if (data_dir.empty()) data_dir = cfg.paths.train_dir;
  if (ckpt.empty()) ckpt = cfg.paths.checkpoint;
  if (log.empty()) log = cfg.paths.loss_log;
  const auto samples = load_samples(data_dir);
  auto state = init_network(cfg.net, cfg.train.seed);
  std::ofstream lf(log);
  if (!lf) throw Failure{kUsage, "cannot write " + log};
  lf << "step,cls_loss,reg_loss,total\n";
  try {
    train(state, samples, cfg.train, [&](std::uint64_t it, const LossReport& r) {
      lf << it << "," << num(r.cls_loss) << "," << num(r.reg_loss) << "," << num(r.total) << "\n";
      if (it % 100 == 0) std::cerr << "iter " << it << " loss " << r.total << "\n";
    });
  } catch (const DivergenceError& e) {
    throw Failure{kDiverged, std::string("training diverged: ") + e.what()};
  }
  save_checkpoint(ckpt, state, cfg.dump());
  std::cerr << "checkpoint written to " << ckpt << "\n";
  return kOk;
}

std::vector<fs::path> list_images(const fs::path& input) {
  if (!fs::exists(input)) throw Failure{kMissing, "input not found: " + input.string()};
  if (!fs::is_directory(input)) return {input};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(input)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });
  return out;
}

int cmd_detect(const std::string& config, const std::string& ckpt, const std::string& input,
               bool pyramid, const std::string& out_path) {
  const auto cfg = load_config(config);
  if (!fs::exists(ckpt)) throw Failure{kMissing, "checkpoint not found: " + ckpt};
  const auto state = load_checkpoint(fs::path(ckpt)).state;
  PyramidConfig pc = cfg.pyramid;
  pc.size_multiple = state.cfg.stride();
  if (!pyramid) pc.test_scales = {1.0};
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw Failure{kUsage, "cannot write " + out_path};
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  const Detector det = [&](const Tensor& im) { return detect(im, state, cfg.detect); };
  for (const auto& path : list_images(input)) {
    const auto id = path.stem().string();
    for (const auto& d : detect_pyramid(read_ppm(path), pc, det)) {
      out << id << " " << num(d.box.x1) << " " << num(d.box.y1) << " " << num(d.box.x2) << " "
          << num(d.box.y2) << " " << num(d.score) << "\n";
    }
  }
  return kOk;
}

std::map<std::string, std::vector<Detection>> read_detections(const fs::path& path) {
  if (!fs::exists(path)) throw Failure{kMissing, "detections not found: " + path.string()};
  std::ifstream f(path);
  std::map<std::string, std::vector<Detection>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string id;
    double x1, y1, x2, y2, s;
    if (!(ss >> id >> x1 >> y1 >> x2 >> y2 >> s)) {
      throw Failure{kEvalInput, "detections line " + std::to_string(lineno) + ": malformed"};
    }
    try {
      out[id].push_back({Box(x1, y1, x2, y2), s, ""});
    } catch (const std::invalid_argument& e) {
      throw Failure{kEvalInput, "detections line " + std::to_string(lineno) + ": " + e.what()};
    }
  }
  return out;
}

int cmd_eval(const std::string& config, const std::string& dets_path, const std::string& ann_path,
             const std::string& out_dir) {
  const auto cfg = load_config(config);
  auto dets = read_detections(dets_path);
  if (!fs::exists(ann_path)) throw Failure{kMissing, "annotations not found: " + ann_path};
  std::vector<AnnotationRecord> recs;
  try {
    recs = load_annotations(ann_path);
  } catch (const ParseError& e) {
    throw Failure{kEvalInput, e.what()};
  }
  std::vector<std::vector<Detection>> d;
  std::vector<std::vector<Box>> g;
  std::size_t total = 0;
  for (const auto& r : recs) {
    const auto id = fs::path(r.image_path).stem().string();
    d.push_back(std::move(dets[id]));
    g.push_back(r.gts);
    total += r.gts.size();
  }
  if (total == 0) throw Failure{kEvalInput, "annotations contain no ground truths"};
  const auto score = score_dataset(d, g, cfg.eval.iou_thresh, cfg.eval.fp_checkpoints);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_curve_csv(fs::path(out_dir) / "pr.csv", score.pr, "recall", "precision");
  write_curve_csv(fs::path(out_dir) / "roc.csv", score.roc, "false_positives", "tpr");
  std::ostringstream sum;
  sum << "ap_all = " << num(score.all.ap) << "\n";
  for (const auto& b : default_buckets()) {
    const auto it = score.buckets.find(b.name);
    sum << "ap_" << b.name << " = " << (it == score.buckets.end() ? std::string("nan") : num(it->second.ap))
        << "\n";
  }
  for (const auto& [k, v] : score.roc.summary) sum << k << " = " << num(v) << "\n";
  std::ofstream(fs::path(out_dir) / "summary.txt") << sum.str();
  std::cout << sum.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"psdet: position-sensitive face detector toolkit"};
  app.require_subcommand(1);
  std::string config, out, data, ckpt, log, input, dets, ann;
  bool pyramid = false;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("-c,--config", config, "run config");
  gen->add_option("-o,--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("-c,--config", config, "run config");
  tr->add_option("-d,--data", data, "dataset directory (default paths.train_dir)");
  tr->add_option("--checkpoint", ckpt, "checkpoint to write (default paths.checkpoint)");
  tr->add_option("--log", log, "loss log (default paths.loss_log)");

  auto* det = app.add_subcommand("detect", "run detection");
  det->add_option("-c,--config", config, "run config");
  det->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  det->add_option("-i,--input", input, "image file or directory of .ppm images")->required();
  det->add_flag("--pyramid", pyramid, "test on every pyramid.test_scales level");
  det->add_option("-o,--out", out, "output file (default stdout)");

  auto* ev = app.add_subcommand("eval", "score detections");
  ev->add_option("-c,--config", config, "run config");
  ev->add_option("--detections", dets, "detections text")->required();
  ev->add_option("--annotations", ann, "annotation list")->required();
  ev->add_option("-o,--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(config, out);
    if (*tr) return cmd_train(config, data, ckpt, log);
    if (*det) return cmd_detect(config, ckpt, input, pyramid, out);
    if (*ev) return cmd_eval(config, dets, ann, out);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
