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

#include "psdet/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "psdet/error.hpp"
#include "psdet/ohem.hpp"

namespace psdet {

void NetConfig::validate() const {
  if (num_classes < 1) throw std::invalid_argument("net: num_classes must be >= 1");
  if (k < 1) throw std::invalid_argument("net: k must be >= 1");
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("net: layer widths must be >= 1");
  }
  if (rpn_width < 1) throw std::invalid_argument("net: rpn_width must be >= 1");
  for (double s : bbox_std) {
    if (!(s > 0)) throw std::invalid_argument("net: bbox_std entries must be > 0");
  }
  anchors.validate();
  if (anchors.base_stride != stride()) {
    throw std::invalid_argument("net: anchors.base_stride " + std::to_string(anchors.base_stride) +
                                " differs from the network stride " + std::to_string(stride()));
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0)) throw std::invalid_argument("train: learning_rate must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("train: momentum in [0, 1)");
  if (!(weight_decay >= 0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
  if (rpn_batch < 1 || rfcn_batch < 1) throw std::invalid_argument("train: batch sizes must be >= 1");
  if (ohem_ratio < 1) throw std::invalid_argument("train: ohem_ratio must be >= 1");
  if (multiscale_train_sizes.empty()) throw std::invalid_argument("train: no training sizes");
  for (int s : multiscale_train_sizes) {
    if (s < 1) throw std::invalid_argument("train: training sizes must be >= 1");
  }
  if (frozen_stem_layers < 0 || frozen_stem_layers > 6) {
    throw std::invalid_argument("train: frozen_stem_layers must be in [0, 6]");
  }
  if (!(reg_weight >= 0)) throw std::invalid_argument("train: reg_weight must be >= 0");
}

bool operator==(const NetworkState& a, const NetworkState& b) {
  const auto layers_eq = [](const ConvLayer& x, const ConvLayer& y) {
    return x.kernel == y.kernel && x.bias == y.bias && x.stride == y.stride &&
           x.dilation == y.dilation && x.padding == y.padding;
  };
  if (a.backbone.size() != b.backbone.size()) return false;
  for (std::size_t i = 0; i < a.backbone.size(); ++i) {
    if (!layers_eq(a.backbone[i], b.backbone[i])) return false;
  }
  return layers_eq(a.rpn_conv, b.rpn_conv) && layers_eq(a.rpn_cls, b.rpn_cls) &&
         layers_eq(a.rpn_bbox, b.rpn_bbox) && layers_eq(a.rfcn_cls, b.rfcn_cls) &&
         layers_eq(a.rfcn_bbox, b.rfcn_bbox) && a.cls_pool.w == b.cls_pool.w &&
         a.box_pool.w == b.box_pool.w && a.velocity == b.velocity && a.iteration == b.iteration;
}

namespace {

constexpr std::size_t kConvLayers = 11;  // 6 backbone + 5 heads

std::vector<ConvLayer*> conv_layers(NetworkState& s) {
  std::vector<ConvLayer*> v;
  for (auto& l : s.backbone) v.push_back(&l);
  for (auto* l : {&s.rpn_conv, &s.rpn_cls, &s.rpn_bbox, &s.rfcn_cls, &s.rfcn_bbox}) v.push_back(l);
  return v;
}

const char* const kHeadNames[] = {"rpn_conv", "rpn_cls", "rpn_bbox", "rfcn_cls", "rfcn_bbox"};

std::string layer_name(std::size_t i) {
  return i < 6 ? "backbone." + std::to_string(i) : kHeadNames[i - 6];
}

// Parameter-list index of a conv layer's weight (bias is +1).
constexpr std::size_t weight_slot(std::size_t layer) { return 2 * layer; }
constexpr std::size_t kClsPoolSlot = 2 * kConvLayers;
constexpr std::size_t kBoxPoolSlot = kClsPoolSlot + 1;

}  // namespace

std::vector<ParamView> parameters(NetworkState& state) {
  std::vector<ParamView> out;
  const auto layers = conv_layers(state);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = *layers[i];
    out.push_back({layer_name(i) + ".weight", l.kernel.shape(), l.kernel.values()});
    out.push_back({layer_name(i) + ".bias", {l.bias.size()}, l.bias});
  }
  out.push_back({"cls_pool.w", {state.cls_pool.w.size()}, state.cls_pool.w});
  out.push_back({"box_pool.w", {state.box_pool.w.size()}, state.box_pool.w});
  return out;
}

std::size_t parameter_count(const NetworkState& state) {
  auto& s = const_cast<NetworkState&>(state);
  std::size_t n = 0;
  for (const auto& p : parameters(s)) n += p.values.size();
  return n;
}

Gradients Gradients::zeros_like(NetworkState& state) {
  Gradients g;
  for (const auto& p : parameters(state)) g.g.emplace_back(p.values.size(), 0.0);
  return g;
}

NetworkState init_network(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  NetworkState s;
  s.cfg = cfg;
  std::size_t in = 3;
  for (int i = 0; i < 6; ++i) {
    const auto out = static_cast<std::size_t>(cfg.widths[i]);
    if (i == 5) {
      s.backbone.emplace_back(out, in, 3, 3, cfg.atrous ? 1 : 2, cfg.atrous ? 2 : 1,
                              cfg.atrous ? 2 : 1);
    } else {
      s.backbone.emplace_back(out, in, 3, 3, i % 2 == 0 ? 2 : 1, 1, 1);
    }
    in = out;
  }
  const std::size_t A = cfg.anchors.per_cell();
  const auto kk = static_cast<std::size_t>(cfg.k) * cfg.k;
  const auto rw = static_cast<std::size_t>(cfg.rpn_width);
  s.rpn_conv = ConvLayer(rw, in, 3, 3, 1, 1, 1);
  s.rpn_cls = ConvLayer(2 * A, rw, 1, 1, 1, 1, 0);
  s.rpn_bbox = ConvLayer(4 * A, rw, 1, 1, 1, 1, 0);
  s.rfcn_cls = ConvLayer(kk * static_cast<std::size_t>(cfg.num_classes + 1), in, 1, 1, 1, 1, 0);
  s.rfcn_bbox = ConvLayer(kk * 4, in, 1, 1, 1, 1, 0);
  s.cls_pool = PoolWeights(kk);
  s.box_pool = PoolWeights(kk);

  std::mt19937_64 rng(seed);
  const auto layers = conv_layers(s);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = *layers[i];
    const double fan_in = static_cast<double>(l.kernel.dim(1) * l.kernel.dim(2) * l.kernel.dim(3));
    const bool hidden = i <= 6;  // backbone and rpn_conv feed a ReLU
    const double stddev = hidden ? std::sqrt(2.0 / fan_in) : 0.1 * std::sqrt(1.0 / fan_in);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : l.kernel.values()) v = dist(rng);
  }
  for (const auto& p : parameters(s)) s.velocity.emplace_back(p.values.size(), 0.0);
  return s;
}

namespace {

struct ForwardCache {
  Tensor input;
  std::vector<Tensor> acts;  // post-ReLU backbone outputs
  Tensor rpn_hidden;
  NetOutputs out;
};

ForwardCache forward_cached(const Tensor& image, const NetworkState& state) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("forward: image must be (3, H, W)");
  const auto stride = static_cast<std::size_t>(state.cfg.stride());
  if (image.dim(1) % stride != 0 || image.dim(2) % stride != 0) {
    throw ShapeError("forward: image " + image.shape_str() + " not divisible by stride " +
                     std::to_string(stride));
  }
  ForwardCache c;
  c.input = image;
  for (auto& v : c.input.values()) v -= 0.5;
  const Tensor* x = &c.input;
  for (const auto& layer : state.backbone) {
    Tensor y = conv2d_forward(*x, layer);
    relu_forward_inplace(y);
    c.acts.push_back(std::move(y));
    x = &c.acts.back();
  }
  const Tensor& feat = c.acts.back();
  c.rpn_hidden = conv2d_forward(feat, state.rpn_conv);
  relu_forward_inplace(c.rpn_hidden);
  c.out.rpn_logits = conv2d_forward(c.rpn_hidden, state.rpn_cls);
  c.out.rpn_deltas = conv2d_forward(c.rpn_hidden, state.rpn_bbox);
  c.out.cls_maps = conv2d_forward(feat, state.rfcn_cls);
  c.out.box_maps = conv2d_forward(feat, state.rfcn_bbox);
  return c;
}

void add_into(std::vector<double>& dst, const ConvGrad& g, std::vector<double>& dst_bias) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g.grad_kernel[i];
  for (std::size_t i = 0; i < dst_bias.size(); ++i) dst_bias[i] += g.grad_bias[i];
}

void add_tensor(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor layer_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_out,
                      std::size_t layer_index, Gradients& grads, bool need_input_grad) {
  ConvGrad g = zero_grad_like(layer);
  Tensor gin = conv2d_backward(input, layer, grad_out, g, need_input_grad);
  const std::size_t slot = weight_slot(layer_index);
  add_into(grads.g[slot], g, grads.g[slot + 1]);
  return gin;
}

void backward(const NetworkState& state, const ForwardCache& c, const NetOutputs& gout,
              int frozen_layers, Gradients& grads) {
  const Tensor& feat = c.acts.back();
  Tensor g_feat = layer_backward(feat, state.rfcn_cls, gout.cls_maps, 9, grads, true);
  add_tensor(g_feat, layer_backward(feat, state.rfcn_bbox, gout.box_maps, 10, grads, true));

  Tensor g_hidden = layer_backward(c.rpn_hidden, state.rpn_cls, gout.rpn_logits, 7, grads, true);
  add_tensor(g_hidden, layer_backward(c.rpn_hidden, state.rpn_bbox, gout.rpn_deltas, 8, grads, true));
  relu_backward_inplace(c.rpn_hidden, g_hidden);
  add_tensor(g_feat, layer_backward(feat, state.rpn_conv, g_hidden, 6, grads, true));

  Tensor g = std::move(g_feat);
  for (int i = 5; i >= frozen_layers; --i) {
    relu_backward_inplace(c.acts[i], g);
    const Tensor& in = i == 0 ? c.input : c.acts[i - 1];
    const bool need_in = i > frozen_layers;
    g = layer_backward(in, state.backbone[i], g, static_cast<std::size_t>(i), grads, need_in);
  }
}

inline std::size_t anchor_cell(std::size_t anchor, std::size_t A) { return anchor / A; }

}  // namespace

NetOutputs forward(const Tensor& image, const NetworkState& state) {
  return forward_cached(image, state).out;
}

std::vector<double> objectness(const Tensor& rpn_logits) {
  const std::size_t A = rpn_logits.dim(0) / 2;
  const std::size_t cells = rpn_logits.dim(1) * rpn_logits.dim(2);
  std::vector<double> p(cells * A);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    for (std::size_t a = 0; a < A; ++a) {
      const double l0 = rpn_logits[(2 * a) * cells + cell];
      const double l1 = rpn_logits[(2 * a + 1) * cells + cell];
      p[cell * A + a] = 1.0 / (1.0 + std::exp(l0 - l1));
    }
  }
  return p;
}

BoxDelta rpn_delta(const Tensor& rpn_deltas, std::size_t anchor_index, std::size_t A) {
  const std::size_t cells = rpn_deltas.dim(1) * rpn_deltas.dim(2);
  const std::size_t cell = anchor_cell(anchor_index, A), a = anchor_index % A;
  return {rpn_deltas[(4 * a + 0) * cells + cell], rpn_deltas[(4 * a + 1) * cells + cell],
          rpn_deltas[(4 * a + 2) * cells + cell], rpn_deltas[(4 * a + 3) * cells + cell]};
}

Proposals propose(const Tensor& rpn_logits, const Tensor& rpn_deltas,
                  const std::vector<Box>& anchors, std::size_t image_h, std::size_t image_w,
                  const ProposalConfig& cfg) {
  const std::size_t A = rpn_logits.dim(0) / 2;
  if (rpn_deltas.dim(0) != 4 * A || rpn_logits.dim(1) != rpn_deltas.dim(1) ||
      rpn_logits.dim(2) != rpn_deltas.dim(2) ||
      anchors.size() != A * rpn_logits.dim(1) * rpn_logits.dim(2)) {
    throw ShapeError("propose: outputs do not match the anchor grid");
  }
  const auto obj = objectness(rpn_logits);
  const Box window(0, 0, static_cast<double>(image_w), static_cast<double>(image_h));

  std::vector<Box> boxes;
  std::vector<double> scores;
  std::vector<std::size_t> src;
  for (std::size_t n = 0; n < anchors.size(); ++n) {
    const Box b = decode(rpn_delta(rpn_deltas, n, A), anchors[n], window);
    if (b.width() < cfg.min_size || b.height() < cfg.min_size) continue;
    boxes.push_back(b);
    scores.push_back(obj[n]);
    src.push_back(n);
  }
  auto order = score_order(scores);
  if (cfg.pre_nms_top >= 0 && order.size() > static_cast<std::size_t>(cfg.pre_nms_top)) {
    order.resize(static_cast<std::size_t>(cfg.pre_nms_top));
  }
  std::vector<Box> top_boxes;
  std::vector<double> top_scores;
  for (auto i : order) {
    top_boxes.push_back(boxes[i]);
    top_scores.push_back(scores[i]);
  }
  auto keep = nms_indices(top_boxes, top_scores, cfg.nms_thresh);
  if (cfg.post_nms_top >= 0 && keep.size() > static_cast<std::size_t>(cfg.post_nms_top)) {
    keep.resize(static_cast<std::size_t>(cfg.post_nms_top));
  }
  Proposals p;
  for (auto i : keep) {
    p.boxes.push_back(top_boxes[i]);
    p.scores.push_back(top_scores[i]);
    p.anchor_index.push_back(src[order[i]]);
  }
  return p;
}

namespace {

struct HeadOutput {
  std::vector<Tensor> pooled;         // per RoI, (C+1, k, k) or (4, k, k)
  std::vector<std::vector<double>> y;  // per RoI, pooled through PS average pooling
};

HeadOutput head_forward(const Tensor& maps, std::span<const Box> rois, const PoolWeights& w,
                        int k, double scale) {
  HeadOutput h;
  h.pooled = psroi_pool_forward_batch(maps, rois, k, scale);
  h.y.reserve(rois.size());
  for (const auto& p : h.pooled) h.y.push_back(ps_avg_pool_forward(p, w));
  return h;
}

// Back through PS average pooling, then PS-RoI pooling into grad_maps.
void head_backward(const HeadOutput& h, std::span<const std::vector<double>> grad_y,
                   std::span<const Box> rois, const PoolWeights& w, int k, double scale,
                   Tensor& grad_maps, std::vector<double>& grad_w) {
  std::vector<Tensor> grad_pooled;
  grad_pooled.reserve(rois.size());
  for (std::size_t r = 0; r < rois.size(); ++r) {
    auto g = ps_avg_pool_backward(grad_y[r], h.pooled[r], w);
    for (std::size_t j = 0; j < grad_w.size(); ++j) grad_w[j] += g.grad_w[j];
    grad_pooled.push_back(std::move(g.grad_x));
  }
  psroi_pool_backward_batch(grad_pooled, rois, k, scale, grad_maps);
}

LossReport evaluate_plan(const NetworkState& state, const ForwardCache& c, const TrainPlan& plan,
                         double reg_weight, Gradients* grads) {
  const auto& out = c.out;
  const std::size_t A = state.cfg.anchors.per_cell();
  const std::size_t cells = out.rpn_logits.dim(1) * out.rpn_logits.dim(2);
  const int k = state.cfg.k;
  const double scale = 1.0 / state.cfg.stride();
  const auto C1 = static_cast<std::size_t>(state.cfg.num_classes + 1);

  NetOutputs g;
  if (grads) {
    g.rpn_logits = Tensor(out.rpn_logits.shape());
    g.rpn_deltas = Tensor(out.rpn_deltas.shape());
    g.cls_maps = Tensor(out.cls_maps.shape());
    g.box_maps = Tensor(out.box_maps.shape());
  }
  LossReport rep;

  // Proposal stage.
  {
    Tensor logits({plan.rpn.size(), 2});
    std::vector<int> labels;
    std::vector<BoxDelta> pred, target;
    std::vector<std::size_t> pos_anchor;
    for (std::size_t s = 0; s < plan.rpn.size(); ++s) {
      const auto& smp = plan.rpn[s];
      const std::size_t cell = anchor_cell(smp.anchor, A), a = smp.anchor % A;
      logits[2 * s] = out.rpn_logits[(2 * a) * cells + cell];
      logits[2 * s + 1] = out.rpn_logits[(2 * a + 1) * cells + cell];
      labels.push_back(smp.label > 0 ? 1 : 0);
      (smp.label > 0 ? rep.n_pos : rep.n_neg)++;
      if (smp.target) {
        pred.push_back(rpn_delta(out.rpn_deltas, smp.anchor, A));
        target.push_back(*smp.target);
        pos_anchor.push_back(smp.anchor);
      }
    }
    const auto ce = softmax_ce(logits, labels);
    const auto l1 = smooth_l1(pred, target);
    rep.cls_loss += ce.loss;
    rep.reg_loss += l1.loss;
    if (grads) {
      for (std::size_t s = 0; s < plan.rpn.size(); ++s) {
        const std::size_t cell = anchor_cell(plan.rpn[s].anchor, A), a = plan.rpn[s].anchor % A;
        g.rpn_logits[(2 * a) * cells + cell] += ce.grad_logits[2 * s];
        g.rpn_logits[(2 * a + 1) * cells + cell] += ce.grad_logits[2 * s + 1];
      }
      for (std::size_t s = 0; s < pos_anchor.size(); ++s) {
        const std::size_t cell = anchor_cell(pos_anchor[s], A), a = pos_anchor[s] % A;
        const auto& gd = l1.grad_pred[s];
        g.rpn_deltas[(4 * a + 0) * cells + cell] += reg_weight * gd.dx;
        g.rpn_deltas[(4 * a + 1) * cells + cell] += reg_weight * gd.dy;
        g.rpn_deltas[(4 * a + 2) * cells + cell] += reg_weight * gd.dw;
        g.rpn_deltas[(4 * a + 3) * cells + cell] += reg_weight * gd.dh;
      }
    }
  }

  // Detection head.
  {
    std::vector<Box> rois;
    std::vector<int> labels;
    std::vector<Box> pos_rois;
    std::vector<BoxDelta> target;
    for (const auto& smp : plan.rfcn) {
      rois.push_back(smp.roi);
      labels.push_back(smp.label);
      (smp.label > 0 ? rep.n_pos : rep.n_neg)++;
      if (smp.target) {
        pos_rois.push_back(smp.roi);
        target.push_back(*smp.target);
      }
    }
    const auto cls = head_forward(out.cls_maps, rois, state.cls_pool, k, scale);
    Tensor logits({rois.size(), C1});
    for (std::size_t r = 0; r < rois.size(); ++r) {
      for (std::size_t c = 0; c < C1; ++c) logits[r * C1 + c] = cls.y[r][c];
    }
    const auto ce = softmax_ce(logits, labels);

    const auto box = head_forward(out.box_maps, pos_rois, state.box_pool, k, scale);
    std::vector<BoxDelta> pred;
    for (const auto& y : box.y) pred.push_back({y[0], y[1], y[2], y[3]});
    const auto l1 = smooth_l1(pred, target);
    rep.cls_loss += ce.loss;
    rep.reg_loss += l1.loss;

    if (grads) {
      std::vector<std::vector<double>> gy(rois.size());
      for (std::size_t r = 0; r < rois.size(); ++r) {
        gy[r].assign(ce.grad_logits.data() + r * C1, ce.grad_logits.data() + (r + 1) * C1);
      }
      head_backward(cls, gy, rois, state.cls_pool, k, scale, g.cls_maps, grads->g[kClsPoolSlot]);
      std::vector<std::vector<double>> gb(pos_rois.size());
      for (std::size_t r = 0; r < pos_rois.size(); ++r) {
        const auto& d = l1.grad_pred[r];
        gb[r] = {reg_weight * d.dx, reg_weight * d.dy, reg_weight * d.dw, reg_weight * d.dh};
      }
      head_backward(box, gb, pos_rois, state.box_pool, k, scale, g.box_maps,
                    grads->g[kBoxPoolSlot]);
    }
  }

  rep.total = rep.cls_loss + reg_weight * rep.reg_loss;
  if (grads) backward(state, c, g, 0, *grads);
  return rep;
}

double sample_ce(double l_bg, double l_fg, int label) {
  const double mx = std::max(l_bg, l_fg);
  const double lse = mx + std::log(std::exp(l_bg - mx) + std::exp(l_fg - mx));
  return lse - (label > 0 ? l_fg : l_bg);
}

std::vector<std::size_t> select_samples(const std::vector<ScoredSample>& cands, bool hard,
                                        int ratio, int cap, std::mt19937_64& rng) {
  if (hard) return ohem_select(cands, ratio, cap, rng);
  // Random sampling with the same quotas: rank negatives by a random key.
  std::vector<ScoredSample> keyed = cands;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& s : keyed) s.loss = u(rng);
  return ohem_select(keyed, ratio, cap, rng);
}

TrainPlan build_plan_from(const ForwardCache& c, std::size_t H, std::size_t W,
                          const std::vector<Box>& gts, const NetworkState& state,
                          const TrainConfig& cfg, std::mt19937_64& rng) {
  const auto& out = c.out;
  const std::size_t fh = out.rpn_logits.dim(1), fw = out.rpn_logits.dim(2);
  const std::size_t A = state.cfg.anchors.per_cell();
  const std::size_t cells = fh * fw;
  TrainPlan plan;
  plan.anchors = generate_anchors(state.cfg.anchors, static_cast<int>(fh), static_cast<int>(fw));

  const auto as = assign_anchors(plan.anchors, gts, cfg.rpn_pos_iou, cfg.rpn_neg_iou);
  std::vector<ScoredSample> cands;
  for (std::size_t n = 0; n < as.size(); ++n) {
    if (as[n].label == Label::kIgnore) continue;
    const bool pos = as[n].label == Label::kPositive;
    const std::size_t cell = anchor_cell(n, A), a = n % A;
    const double loss = sample_ce(out.rpn_logits[(2 * a) * cells + cell],
                                  out.rpn_logits[(2 * a + 1) * cells + cell], pos ? 1 : 0);
    cands.push_back({n, pos, loss});
  }
  for (auto n : select_samples(cands, cfg.ohem_rpn, cfg.ohem_ratio, cfg.rpn_batch, rng)) {
    TrainPlan::AnchorSample smp{n, 0, std::nullopt};
    if (as[n].label == Label::kPositive) {
      smp.label = 1;
      smp.target = encode(gts[*as[n].matched_gt], plan.anchors[n]);
    }
    plan.rpn.push_back(smp);
  }

  auto props = propose(out.rpn_logits, out.rpn_deltas, plan.anchors, H, W, cfg.proposals);
  std::vector<Box> rois = std::move(props.boxes);
  if (cfg.rois_include_gt) {
    for (const auto& g : gts) {
      if (g.width() > 0 && g.height() > 0) rois.push_back(g);
    }
  }
  const auto ra = assign_rois(rois, gts, cfg.roi_pos_iou, cfg.roi_neg_lo);
  std::vector<Box> cand_rois;
  std::vector<std::size_t> cand_src;
  for (std::size_t r = 0; r < rois.size(); ++r) {
    if (ra[r].label == Label::kIgnore) continue;
    cand_rois.push_back(rois[r]);
    cand_src.push_back(r);
  }
  const int k = state.cfg.k;
  const double scale = 1.0 / state.cfg.stride();
  const auto scored = head_forward(out.cls_maps, cand_rois, state.cls_pool, k, scale);
  std::vector<ScoredSample> roi_cands;
  for (std::size_t i = 0; i < cand_rois.size(); ++i) {
    const bool pos = ra[cand_src[i]].label == Label::kPositive;
    const auto& y = scored.y[i];
    const double mx = *std::max_element(y.begin(), y.end());
    double z = 0;
    for (double v : y) z += std::exp(v - mx);
    const double loss = mx + std::log(z) - y[pos ? 1 : 0];
    roi_cands.push_back({i, pos, loss});
  }
  const auto& sd = state.cfg.bbox_std;
  for (auto i : select_samples(roi_cands, cfg.ohem_rfcn, cfg.ohem_ratio, cfg.rfcn_batch, rng)) {
    const auto& assign = ra[cand_src[i]];
    TrainPlan::RoiSample smp{cand_rois[i], 0, std::nullopt};
    if (assign.label == Label::kPositive) {
      smp.label = 1;
      const auto d = encode(gts[*assign.matched_gt], cand_rois[i]);
      smp.target = BoxDelta{d.dx / sd[0], d.dy / sd[1], d.dw / sd[2], d.dh / sd[3]};
    }
    plan.rfcn.push_back(smp);
  }
  return plan;
}

}  // namespace

TrainPlan build_plan(const Tensor& image, const std::vector<Box>& gts, const NetworkState& state,
                     const TrainConfig& cfg, std::mt19937_64& rng) {
  const auto c = forward_cached(image, state);
  return build_plan_from(c, image.dim(1), image.dim(2), gts, state, cfg, rng);
}

LossReport plan_loss(const NetworkState& state, const Tensor& image, const TrainPlan& plan,
                     double reg_weight, Gradients* grads) {
  const auto c = forward_cached(image, state);
  return evaluate_plan(state, c, plan, reg_weight, grads);
}

double learning_rate_at(const TrainConfig& cfg, std::uint64_t iteration) {
  double lr = cfg.learning_rate;
  for (int s : cfg.lr_steps) {
    if (iteration >= static_cast<std::uint64_t>(s)) lr *= 0.1;
  }
  return lr;
}

void sgd_update(NetworkState& state, const Gradients& grads, const TrainConfig& cfg) {
  auto params = parameters(state);
  if (grads.g.size() != params.size()) throw ShapeError("sgd_update: gradient count mismatch");
  const double lr = learning_rate_at(cfg, state.iteration);
  for (std::size_t p = 0; p < params.size(); ++p) {
    const bool frozen_stem = p < weight_slot(static_cast<std::size_t>(cfg.frozen_stem_layers));
    const bool frozen = frozen_stem || (p == kClsPoolSlot && cfg.freeze_cls_pool) ||
                        (p == kBoxPoolSlot && cfg.freeze_box_pool);
    if (frozen) continue;
    const bool decay = p < kClsPoolSlot && p % 2 == 0;  // conv weights only
    auto& v = state.velocity[p];
    auto vals = params[p].values;
    const auto& g = grads.g[p];
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double gi = decay ? g[i] + cfg.weight_decay * vals[i] : g[i];
      v[i] = cfg.momentum * v[i] - lr * gi;
      vals[i] += v[i];
    }
  }
}

LossReport train_step(const Tensor& image, const std::vector<Box>& gts, NetworkState& state,
                      const TrainConfig& cfg, std::mt19937_64& rng) {
  const auto c = forward_cached(image, state);
  const auto plan = build_plan_from(c, image.dim(1), image.dim(2), gts, state, cfg, rng);
  auto grads = Gradients::zeros_like(state);
  const auto rep = evaluate_plan(state, c, plan, cfg.reg_weight, &grads);
  if (!std::isfinite(rep.total)) {
    throw DivergenceError("non-finite loss at iteration " + std::to_string(state.iteration) +
                          " (cls " + std::to_string(rep.cls_loss) + ", reg " +
                          std::to_string(rep.reg_loss) + ")");
  }
  sgd_update(state, grads, cfg);
  ++state.iteration;
  return rep;
}

std::vector<Detection> detect(const Tensor& image, const NetworkState& state,
                              const DetectConfig& cfg) {
  const auto out = forward(image, state);
  const std::size_t H = image.dim(1), W = image.dim(2);
  const auto anchors = generate_anchors(state.cfg.anchors, static_cast<int>(out.rpn_logits.dim(1)),
                                        static_cast<int>(out.rpn_logits.dim(2)));
  const auto props = propose(out.rpn_logits, out.rpn_deltas, anchors, H, W, cfg.proposals);
  const int k = state.cfg.k;
  const double scale = 1.0 / state.cfg.stride();
  const auto cls = head_forward(out.cls_maps, props.boxes, state.cls_pool, k, scale);
  const auto box = head_forward(out.box_maps, props.boxes, state.box_pool, k, scale);
  const Box window(0, 0, static_cast<double>(W), static_cast<double>(H));
  const auto& sd = state.cfg.bbox_std;

  std::vector<Detection> all;
  for (int c = 1; c <= state.cfg.num_classes; ++c) {
    std::vector<Detection> cand;
    for (std::size_t r = 0; r < props.boxes.size(); ++r) {
      const auto p = softmax(cls.y[r]);
      if (!(p[c] >= cfg.score_thresh)) continue;
      const auto& y = box.y[r];
      const BoxDelta d{y[0] * sd[0], y[1] * sd[1], y[2] * sd[2], y[3] * sd[3]};
      cand.push_back({decode(d, props.boxes[r], window), p[c], ""});
    }
    for (auto& d : nms(cand, cfg.nms_thresh)) all.push_back(std::move(d));
  }
  std::vector<double> scores;
  for (const auto& d : all) scores.push_back(d.score);
  std::vector<Detection> sorted;
  for (auto i : score_order(scores)) {
    if (cfg.max_detections >= 0 && sorted.size() >= static_cast<std::size_t>(cfg.max_detections)) break;
    sorted.push_back(all[i]);
  }
  return sorted;
}

}  // namespace psdet
