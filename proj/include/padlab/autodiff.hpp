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

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "padlab/border.hpp"
#include "padlab/tensor.hpp"

namespace padlab {

/// A value in the computation graph. Leaves are parameters or inputs; inner
/// nodes carry the rule that pushes their gradient to their parents.
struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::function<void(Node&)> backward;
  std::vector<std::shared_ptr<Node>> parents;

  /// grad += g, allocating on first use.
  void accumulate(const Tensor& g);
  void zero_grad();
};

using Var = std::shared_ptr<Node>;

/// Trainable leaf.
Var make_param(Tensor value);
/// Leaf that never receives a gradient.
Var make_const(Tensor value);

/// Ordered record of differentiable operations.
///
/// An op is recorded only when at least one input requires a gradient, so
/// forward passes over frozen parameters leave the tape empty. A tape built
/// with `recording = false` never records; use it for inference.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Var record(Tensor value, std::vector<Var> parents,
             std::function<void(Node&)> backward);

  /// Reverse-mode sweep from a scalar loss. Intermediate gradients are reset
  /// first; leaf gradients accumulate across calls.
  void backward(const Var& loss);

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Var>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

 private:
  bool recording_;
  std::vector<Var> nodes_;
};

/// Running statistics of a batch-norm layer, shapes (c,1,1,1).
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  Scalar momentum = 0.1;
  Scalar eps = 1e-5;

  explicit BatchNormState(Index channels = 0)
      : running_mean(channels, 1, 1, 1, 0.0),
        running_var(channels, 1, 1, 1, 1.0) {}
};

enum class ResizeAlign { Center, Corner };

// Layer operations. Vector-valued parameters (bias, gamma, beta) have shape
// (len,1,1,1); conv weights are (c_out, c_in, kh, kw); linear weights are
// (k, d, 1, 1).

/// 2-D cross-correlation with border handling from `mode`. `bias` may be
/// null. Partial mode rescales the pre-bias response by partial_scale_mask.
Var conv2d(Tape& tape, const Var& x, const Var& weight, const Var& bias,
           const PaddingMode& mode, Index stride = 1);
Var relu(Tape& tape, const Var& x);
Var sigmoid(Tape& tape, const Var& x);
/// 2x2 window, stride 2; gradient goes to the first maximum in scan order.
Var maxpool2d(Tape& tape, const Var& x);
Var batchnorm2d(Tape& tape, const Var& x, const Var& gamma, const Var& beta,
                BatchNormState& state, bool training);
Var linear(Tape& tape, const Var& x, const Var& weight, const Var& bias);
Var global_avg_pool(Tape& tape, const Var& x);
Var bilinear_resize(Tape& tape, const Var& x, Index out_h, Index out_w,
                    ResizeAlign align = ResizeAlign::Center);
Var add(Tape& tape, const Var& a, const Var& b);
Var concat_channels(Tape& tape, std::span<const Var> parts);

// Scalar reductions and losses. All return shape (1,1,1,1).

Var sum(Tape& tape, const Var& x);
/// sum(x * weights) for a constant weight tensor of the same shape.
Var weighted_sum(Tape& tape, const Var& x, const Tensor& weights);
Var mse_loss(Tape& tape, const Var& pred, const Tensor& target);
/// Mean over the batch of -log softmax(logits)[label]; logits (n,C,1,1).
Var softmax_cross_entropy(Tape& tape, const Var& logits,
                          std::span<const int> labels);
/// Mean over all pixels of per-pixel cross entropy; labels (n,1,h,w) hold
/// class indices.
Var pixelwise_cross_entropy(Tape& tape, const Var& logits,
                            const Tensor& labels);

/// Forward-only bilinear resampling (no graph).
Tensor resize_bilinear(const Tensor& x, Index out_h, Index out_w,
                       ResizeAlign align = ResizeAlign::Center);

}  // namespace padlab
