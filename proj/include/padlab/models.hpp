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

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "padlab/autodiff.hpp"
#include "padlab/checkpoint.hpp"

namespace padlab {

struct NamedParam {
  std::string name;
  Var var;
};

struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

/// Weight initializers over a seeded engine.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  /// U(-b, b) with b = sqrt(6 / fan_in).
  Tensor he_uniform(const Shape& shape);
  /// U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
  Tensor xavier_uniform(const Shape& shape);

 private:
  std::mt19937_64 rng_;
};

struct ConvLayer {
  Var weight;
  Var bias;
  PaddingMode mode;
  Index stride = 1;

  Index kernel() const { return weight->value.h(); }
  Index out_channels() const { return weight->value.n(); }
  Var operator()(Tape& tape, const Var& x) const {
    return conv2d(tape, x, weight, bias, mode, stride);
  }
};

struct BatchNormLayer {
  Var gamma;
  Var beta;
  BatchNormState state;

  explicit BatchNormLayer(Index channels = 0);
  Var operator()(Tape& tape, const Var& x, bool training) {
    return batchnorm2d(tape, x, gamma, beta, state, training);
  }
};

struct LinearLayer {
  Var weight;
  Var bias;
  Var operator()(Tape& tape, const Var& x) const {
    return linear(tape, x, weight, bias);
  }
};

/// Shared bookkeeping for every model: named parameters, buffers, and
/// checkpoint state.
class ModelBase {
 public:
  virtual ~ModelBase() = default;
  virtual std::vector<NamedParam> named_params() const = 0;
  virtual std::vector<NamedBuffer> named_buffers() { return {}; }
  virtual std::vector<BatchNormState*> norm_states() { return {}; }

  std::vector<Var> parameters() const;
  std::vector<Var> trainable_parameters() const;
  Index parameter_count() const;
  void set_trainable(bool trainable);

  /// Parameters followed by buffers, in declaration order.
  std::vector<NamedTensor> state();
  /// Copies matching entries back; throws FormatError on a missing name or
  /// shape mismatch.
  void load_state(std::span<const NamedTensor> tensors);
};

// ---------------------------------------------------------------------------
// VGG-5
// ---------------------------------------------------------------------------

struct Vgg5Config {
  int classes = 10;
  PaddingMode mode = PaddingMode::zero(1);
  Index input = 56;
  std::array<Index, 4> widths{32, 64, 128, 256};
  /// With pad amount 0, resize every conv output back to its input extent
  /// (parameter-free) so the stage sizes match the padded network.
  bool realign = false;
  ResizeAlign align = ResizeAlign::Center;
};

/// Four 3x3 conv -> batch norm -> relu blocks (max pool after the first
/// three), global average pooling and a linear head.
class Vgg5 : public ModelBase {
 public:
  static constexpr int kStages = 4;

  /// Builds and validates geometry on config.input x config.input.
  static Vgg5 build(const Vgg5Config& config, std::uint64_t seed);

  /// Stage output extents for an h x w input; throws GeometryError when a
  /// pool would see an odd extent or a kernel does not fit.
  std::vector<std::array<Index, 2>> stage_extents(Index h, Index w) const;

  /// Outputs of blocks 1..4.
  std::vector<Var> stages(Tape& tape, const Var& x, bool training);
  Var forward(Tape& tape, const Var& x, bool training);

  const Vgg5Config& config() const { return config_; }
  Index stage_width(int stage) const;
  std::vector<NamedParam> named_params() const override;
  std::vector<NamedBuffer> named_buffers() override;
  std::vector<BatchNormState*> norm_states() override;

 private:
  Vgg5Config config_;
  std::array<ConvLayer, 4> convs_;
  std::array<BatchNormLayer, 4> norms_;
  LinearLayer head_;
};

/// Frozen stage taps of a backbone in evaluation mode, 1-based. Nothing is
/// recorded on any tape. Throws RangeError for an unknown stage.
std::vector<Tensor> stage_features(Vgg5& backbone, const Tensor& images,
                                   std::span<const int> taps);

// ---------------------------------------------------------------------------
// Position probe
// ---------------------------------------------------------------------------

struct ProbeConfig {
  /// 1-based stage taps of the backbone; ignored without a backbone.
  std::vector<int> taps{Vgg5::kStages};
  Index align = 28;
  /// Border handling of the single readout conv.
  PaddingMode readout_mode = PaddingMode::none();
};

/// Readout of a gradient-like position map from frozen features: all taps
/// are resized to align x align, concatenated, and passed through one 3x3
/// conv with a sigmoid. Without a backbone the readout sees the resized
/// image itself.
class PosProbe : public ModelBase {
 public:
  /// Freezes `backbone` (if any). The backbone must outlive the probe.
  static PosProbe build(Vgg5* backbone, const ProbeConfig& config,
                        std::uint64_t seed);

  /// Aligned, concatenated frozen features (n, input_channels, align, align).
  Tensor extract(const Tensor& images) const;
  /// Resizes stage taps to align x align and concatenates their channels.
  Tensor align_taps(const std::vector<Tensor>& taps) const;
  /// Predicted map from extracted features.
  Var readout(Tape& tape, const Tensor& features) const;
  Var forward(Tape& tape, const Tensor& images) const {
    return readout(tape, extract(images));
  }

  Index input_channels() const { return input_channels_; }
  Index output_size() const;
  const ProbeConfig& config() const { return config_; }
  bool has_backbone() const { return backbone_ != nullptr; }
  std::vector<NamedParam> named_params() const override;

 private:
  Vgg5* backbone_ = nullptr;
  ProbeConfig config_;
  Index input_channels_ = 0;
  ConvLayer conv_;
};

// ---------------------------------------------------------------------------
// Grid-task network
// ---------------------------------------------------------------------------

enum class GridTask { Classify, Segment };
std::string to_string(GridTask task);
GridTask parse_grid_task(std::string_view name);

/// Blocks deeper than `depth` (1-based) use 1x1 kernels without padding.
struct RfLimit {
  Index depth = 2;
};

struct GridNetConfig {
  GridTask task = GridTask::Classify;
  int classes = 10;
  PaddingMode mode = PaddingMode::zero(1);
  bool residual = false;
  std::optional<RfLimit> rf_limit;
  std::vector<Index> widths{32, 32, 64, 64, 128, 128};
  /// Stride 2 in every second block.
  bool downsample = true;
  bool batchnorm = true;
  ResizeAlign align = ResizeAlign::Center;
};

/// Closed input interval [lo, hi] along one axis.
struct Span1 {
  Index lo;
  Index hi;
};

class GridNet : public ModelBase {
 public:
  static GridNet build(const GridNetConfig& config, std::uint64_t seed);

  /// Output of the last block.
  Var features(Tape& tape, const Var& x, bool training);
  /// Classify: (n, classes, 1, 1). Segment: (n, classes + 1, H, W).
  Var forward(Tape& tape, const Var& x, bool training);

  Index latent_dim() const { return config_.widths.back(); }
  /// Theoretical receptive field of feature-map index `o` along one axis.
  Span1 receptive_field(Index o) const;

  const GridNetConfig& config() const { return config_; }
  std::vector<NamedParam> named_params() const override;
  std::vector<NamedBuffer> named_buffers() override;
  std::vector<BatchNormState*> norm_states() override;

 private:
  struct Block {
    ConvLayer conv;
    std::optional<BatchNormLayer> norm;
    std::optional<ConvLayer> projection;
    bool residual = false;
  };

  GridNetConfig config_;
  std::vector<Block> blocks_;
  std::optional<LinearLayer> classifier_;
  std::optional<ConvLayer> segmenter_;
};

}  // namespace padlab
