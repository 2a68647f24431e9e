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

#include <span>
#include <vector>

#include "padlab/autodiff.hpp"

namespace padlab {

struct SgdConfig {
  Scalar learning_rate = 0.01;
  Scalar momentum = 0.9;
  Scalar weight_decay = 1e-4;

  /// Throws ArgumentError unless lr > 0, momentum in [0,1), decay >= 0.
  void validate() const;
};

/// Momentum SGD with L2 decay folded into the velocity:
///   v <- momentum * v + grad + weight_decay * p;  p <- p - lr * v.
/// Gradients are cleared after every step.
class Sgd {
 public:
  Sgd(std::vector<Var> params, SgdConfig config);

  /// Throws ContractError if any parameter has no gradient.
  void step();
  void zero_grad();

  const SgdConfig& config() const { return config_; }
  void set_learning_rate(Scalar lr);
  const std::vector<Var>& params() const { return params_; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> velocity_;
  SgdConfig config_;
};

}  // namespace padlab
