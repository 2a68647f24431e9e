/* Copyright 2026 The padlab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "padlab/models.hpp"

#include <cmath>
#include <unordered_map>

namespace padlab {

Tensor Initializer::he_uniform(const Shape& shape) {
  const Scalar fan_in = static_cast<Scalar>(shape.c * shape.h * shape.w);
  const Scalar bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<Scalar> u(-bound, bound);
  Tensor t(shape);
  for (Index i = 0; i < t.numel(); ++i) t[i] = u(rng_);
  return t;
}

Tensor Initializer::xavier_uniform(const Shape& shape) {
  const Scalar receptive = static_cast<Scalar>(shape.h * shape.w);
  const Scalar fan_in = static_cast<Scalar>(shape.c) * receptive;
  const Scalar fan_out = static_cast<Scalar>(shape.n) * receptive;
  const Scalar bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<Scalar> u(-bound, bound);
  Tensor t(shape);
  for (Index i = 0; i < t.numel(); ++i) t[i] = u(rng_);
  return t;
}

namespace {

ConvLayer make_conv(Initializer& init, Index cin, Index cout, Index kernel,
                    const PaddingMode& mode, Index stride, bool xavier = false) {
  const Shape shape{cout, cin, kernel, kernel};
  return ConvLayer{make_param(xavier ? init.xavier_uniform(shape)
                                     : init.he_uniform(shape)),
                   make_param(Tensor(cout, 1, 1, 1)), mode, stride};
}

void add_conv(std::vector<NamedParam>& out, const std::string& prefix,
              const ConvLayer& conv) {
  out.push_back({prefix + ".weight", conv.weight});
  out.push_back({prefix + ".bias", conv.bias});
}

void add_norm(std::vector<NamedParam>& out, const std::string& prefix,
              const BatchNormLayer& bn) {
  out.push_back({prefix + ".gamma", bn.gamma});
  out.push_back({prefix + ".beta", bn.beta});
}

void add_norm_buffers(std::vector<NamedBuffer>& out, const std::string& prefix,
                      BatchNormLayer& bn) {
  out.push_back({prefix + ".running_mean", &bn.state.running_mean});
  out.push_back({prefix + ".running_var", &bn.state.running_var});
}

}  // namespace

BatchNormLayer::BatchNormLayer(Index channels)
    : gamma(make_param(Tensor(channels, 1, 1, 1, 1.0))),
      beta(make_param(Tensor(channels, 1, 1, 1, 0.0))),
      state(channels) {}

std::vector<Var> ModelBase::parameters() const {
  std::vector<Var> out;
  for (auto& p : named_params()) out.push_back(p.var);
  return out;
}

std::vector<Var> ModelBase::trainable_parameters() const {
  std::vector<Var> out;
  for (auto& p : named_params())
    if (p.var->requires_grad) out.push_back(p.var);
  return out;
}

Index ModelBase::parameter_count() const {
  Index total = 0;
  for (auto& p : named_params()) total += p.var->value.numel();
  return total;
}

void ModelBase::set_trainable(bool trainable) {
  for (auto& p : named_params()) {
    p.var->requires_grad = trainable;
    p.var->zero_grad();
  }
}

std::vector<NamedTensor> ModelBase::state() {
  std::vector<NamedTensor> out;
  for (auto& p : named_params()) out.push_back({p.name, p.var->value});
  for (auto& b : named_buffers()) out.push_back({b.name, *b.tensor});
  return out;
}

void ModelBase::load_state(std::span<const NamedTensor> tensors) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const NamedTensor& t : tensors) by_name[t.name] = &t.value;
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks '" + name + "'");
    if (it->second->shape() != shape)
      throw FormatError("checkpoint entry '" + name + "' has shape " +
                        to_string(it->second->shape()) + ", model expects " +
                        to_string(shape));
    return *it->second;
  };
  for (auto& p : named_params()) p.var->value = fetch(p.name, p.var->value.shape());
  for (auto& b : named_buffers()) *b.tensor = fetch(b.name, b.tensor->shape());
}

// ---------------------------------------------------------------------------
// VGG-5
// ---------------------------------------------------------------------------

Vgg5 Vgg5::build(const Vgg5Config& config, std::uint64_t seed) {
  if (config.classes < 2) throw ArgumentError("VGG-5 needs at least 2 classes");
  Vgg5 net;
  net.config_ = config;
  Initializer init(seed);
  Index cin = 3;
  for (int i = 0; i < kStages; ++i) {
    const Index cout = config.widths[static_cast<std::size_t>(i)];
    net.convs_[static_cast<std::size_t>(i)] =
        make_conv(init, cin, cout, 3, config.mode, 1);
    net.norms_[static_cast<std::size_t>(i)] = BatchNormLayer(cout);
    cin = cout;
  }
  net.head_ = LinearLayer{make_param(init.he_uniform({config.classes, cin, 1, 1})),
                          make_param(Tensor(config.classes, 1, 1, 1))};
  net.stage_extents(config.input, config.input);
  return net;
}

std::vector<std::array<Index, 2>> Vgg5::stage_extents(Index h, Index w) const {
  std::vector<std::array<Index, 2>> out;
  const Index a = config_.mode.amount;
  const bool realign = config_.realign && a == 0;
  for (int i = 0; i < kStages; ++i) {
    Index oh = conv_out_extent(h, 3, a, 1);
    Index ow = conv_out_extent(w, 3, a, 1);
    if (realign) {
      oh = h;
      ow = w;
    }
    if (i < kStages - 1) {
      if (oh % 2 != 0 || ow % 2 != 0)
        throw GeometryError("VGG-5 block " + std::to_string(i + 1) +
                            " would max-pool an odd extent " +
                            std::to_string(oh) + "x" + std::to_string(ow));
      oh /= 2;
      ow /= 2;
    }
    out.push_back({oh, ow});
    h = oh;
    w = ow;
  }
  return out;
}

Index Vgg5::stage_width(int stage) const {
  if (stage < 1 || stage > kStages)
    throw RangeError("VGG-5 stage " + std::to_string(stage) + " outside [1," +
                     std::to_string(kStages) + "]");
  return config_.widths[static_cast<std::size_t>(stage - 1)];
}

std::vector<Var> Vgg5::stages(Tape& tape, const Var& x, bool training) {
  std::vector<Var> out;
  Var h = x;
  const bool realign = config_.realign && config_.mode.amount == 0;
  for (int i = 0; i < kStages; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const Index in_h = h->value.h(), in_w = h->value.w();
    h = convs_[idx](tape, h);
    if (realign) h = bilinear_resize(tape, h, in_h, in_w, config_.align);
    h = norms_[idx](tape, h, training);
    h = relu(tape, h);
    if (i < kStages - 1) h = maxpool2d(tape, h);
    out.push_back(h);
  }
  return out;
}

Var Vgg5::forward(Tape& tape, const Var& x, bool training) {
  Var f = stages(tape, x, training).back();
  return head_(tape, global_avg_pool(tape, f));
}

std::vector<NamedParam> Vgg5::named_params() const {
  std::vector<NamedParam> out;
  for (int i = 0; i < kStages; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const std::string prefix = "block" + std::to_string(i + 1);
    add_conv(out, prefix + ".conv", convs_[idx]);
    add_norm(out, prefix + ".bn", norms_[idx]);
  }
  out.push_back({"fc.weight", head_.weight});
  out.push_back({"fc.bias", head_.bias});
  return out;
}

std::vector<NamedBuffer> Vgg5::named_buffers() {
  std::vector<NamedBuffer> out;
  for (int i = 0; i < kStages; ++i)
    add_norm_buffers(out, "block" + std::to_string(i + 1) + ".bn",
                     norms_[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<BatchNormState*> Vgg5::norm_states() {
  std::vector<BatchNormState*> out;
  for (auto& n : norms_) out.push_back(&n.state);
  return out;
}

std::vector<Tensor> stage_features(Vgg5& backbone, const Tensor& images,
                                   std::span<const int> taps) {
  for (int t : taps) backbone.stage_width(t);  // range check
  Tape tape(false);
  auto all = backbone.stages(tape, make_const(images), false);
  std::vector<Tensor> out;
  for (int t : taps) out.push_back(all[static_cast<std::size_t>(t - 1)]->value);
  return out;
}

// ---------------------------------------------------------------------------
// Position probe
// ---------------------------------------------------------------------------

PosProbe PosProbe::build(Vgg5* backbone, const ProbeConfig& config,
                         std::uint64_t seed) {
  if (config.align < 1) throw ArgumentError("probe align size must be positive");
  PosProbe probe;
  probe.backbone_ = backbone;
  probe.config_ = config;
  if (backbone) {
    if (config.taps.empty()) throw ArgumentError("probe needs at least one tap");
    for (int t : config.taps) probe.input_channels_ += backbone->stage_width(t);
    backbone->set_trainable(false);
  } else {
    probe.input_channels_ = 3;
  }
  Initializer init(seed);
  probe.conv_ = make_conv(init, probe.input_channels_, 1, 3, config.readout_mode,
                          1, /*xavier=*/true);
  probe.output_size();  // geometry check
  return probe;
}

Index PosProbe::output_size() const {
  return conv_out_extent(config_.align, 3, config_.readout_mode.amount, 1);
}

Tensor PosProbe::extract(const Tensor& images) const {
  if (!backbone_) return align_taps({images});
  return align_taps(stage_features(*backbone_, images, config_.taps));
}

Tensor PosProbe::align_taps(const std::vector<Tensor>& taps) const {
  const Index a = config_.align;
  if (taps.size() == 1) return resize_bilinear(taps.front(), a, a);
  std::vector<Var> parts;
  for (const auto& t : taps) parts.push_back(make_const(resize_bilinear(t, a, a)));
  Tape tape(false);
  return concat_channels(tape, parts)->value;
}

Var PosProbe::readout(Tape& tape, const Tensor& features) const {
  if (features.c() != input_channels_)
    throw DimensionError("probe expects " + std::to_string(input_channels_) +
                         " feature channels, got " + std::to_string(features.c()));
  return sigmoid(tape, conv_(tape, make_const(features)));
}

std::vector<NamedParam> PosProbe::named_params() const {
  std::vector<NamedParam> out;
  add_conv(out, "readout", conv_);
  return out;
}

// ---------------------------------------------------------------------------
// Grid network
// ---------------------------------------------------------------------------

std::string to_string(GridTask task) {
  return task == GridTask::Classify ? "classify" : "segment";
}

GridTask parse_grid_task(std::string_view name) {
  if (name == "classify") return GridTask::Classify;
  if (name == "segment") return GridTask::Segment;
  throw ArgumentError("grid task must be classify|segment");
}

GridNet GridNet::build(const GridNetConfig& config, std::uint64_t seed) {
  if (config.classes < 2) throw ArgumentError("grid network needs >= 2 classes");
  if (config.widths.empty()) throw ArgumentError("grid network needs >= 1 block");
  if (config.rf_limit && config.rf_limit->depth < 0)
    throw ArgumentError("rf_limit depth must be nonnegative");
  GridNet net;
  net.config_ = config;
  Initializer init(seed);
  Index cin = 3;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    const Index cout = config.widths[i];
    const Index stride = config.downsample && i % 2 == 1 ? 2 : 1;
    const bool pointwise =
        config.rf_limit && static_cast<Index>(i) + 1 > config.rf_limit->depth;
    const Index kernel = pointwise ? 1 : 3;
    const PaddingMode mode =
        pointwise ? PaddingMode(config.mode.kind, 0) : config.mode;
    Block block;
    block.conv = make_conv(init, cin, cout, kernel, mode, stride);
    if (config.batchnorm) block.norm.emplace(cout);
    block.residual = config.residual;
    if (config.residual && (cin != cout || stride != 1))
      block.projection = make_conv(init, cin, cout, 1, PaddingMode::none(), stride);
    net.blocks_.push_back(std::move(block));
    cin = cout;
  }
  if (config.task == GridTask::Classify) {
    net.classifier_ =
        LinearLayer{make_param(init.he_uniform({config.classes, cin, 1, 1})),
                    make_param(Tensor(config.classes, 1, 1, 1))};
  } else {
    net.segmenter_ =
        make_conv(init, cin, config.classes + 1, 1, PaddingMode::none(), 1);
  }
  return net;
}

Var GridNet::features(Tape& tape, const Var& x, bool training) {
  Var h = x;
  for (Block& b : blocks_) {
    Var y = b.conv(tape, h);
    if (b.norm) y = (*b.norm)(tape, y, training);
    if (b.residual) {
      Var shortcut = b.projection ? (*b.projection)(tape, h) : h;
      if (shortcut->value.h() != y->value.h() || shortcut->value.w() != y->value.w())
        shortcut = bilinear_resize(tape, shortcut, y->value.h(), y->value.w(),
                                   config_.align);
      y = add(tape, y, shortcut);
    }
    h = relu(tape, y);
  }
  return h;
}

Var GridNet::forward(Tape& tape, const Var& x, bool training) {
  Var f = features(tape, x, training);
  if (classifier_) return (*classifier_)(tape, global_avg_pool(tape, f));
  Var logits = (*segmenter_)(tape, f);
  return bilinear_resize(tape, logits, x->value.h(), x->value.w(), config_.align);
}

Span1 GridNet::receptive_field(Index o) const {
  Span1 s{o, o};
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    const ConvLayer& c = it->conv;
    s.lo = s.lo * c.stride - c.mode.amount;
    s.hi = s.hi * c.stride - c.mode.amount + c.kernel() - 1;
  }
  return s;
}

std::vector<NamedParam> GridNet::named_params() const {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i + 1);
    add_conv(out, prefix + ".conv", blocks_[i].conv);
    if (blocks_[i].norm) add_norm(out, prefix + ".bn", *blocks_[i].norm);
    if (blocks_[i].projection) add_conv(out, prefix + ".proj", *blocks_[i].projection);
  }
  if (classifier_) {
    out.push_back({"fc.weight", classifier_->weight});
    out.push_back({"fc.bias", classifier_->bias});
  }
  if (segmenter_) add_conv(out, "seg", *segmenter_);
  return out;
}

std::vector<NamedBuffer> GridNet::named_buffers() {
  std::vector<NamedBuffer> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].norm)
      add_norm_buffers(out, "block" + std::to_string(i + 1) + ".bn",
                       *blocks_[i].norm);
  return out;
}

std::vector<BatchNormState*> GridNet::norm_states() {
  std::vector<BatchNormState*> out;
  for (Block& b : blocks_)
    if (b.norm) out.push_back(&b.norm->state);
  return out;
}

}  // namespace padlab
