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

#include "padlab/optim.hpp"

namespace padlab {

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0))
    throw ArgumentError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ArgumentError("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0))
    throw ArgumentError("weight_decay must be nonnegative");
}

Sgd::Sgd(std::vector<Var> params, SgdConfig config)
    : params_(std::move(params)), config_(config) {
  config_.validate();
  velocity_.reserve(params_.size());
  for (const Var& p : params_) velocity_.emplace_back(p->value.shape());
}

void Sgd::step() {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (!params_[i]->has_grad)
      throw ContractError("sgd step: parameter " + std::to_string(i) +
                          " has no gradient");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Node& p = *params_[i];
    auto& v = velocity_[i].data();
    v = config_.momentum * v + p.grad.data() +
        config_.weight_decay * p.value.data();
    p.value.data() -= config_.learning_rate * v;
  }
  zero_grad();
}

void Sgd::zero_grad() {
  for (const Var& p : params_) p->zero_grad();
}

void Sgd::set_learning_rate(Scalar lr) {
  SgdConfig next = config_;
  next.learning_rate = lr;
  next.validate();
  config_ = next;
}

}  // namespace padlab
