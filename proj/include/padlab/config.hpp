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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "padlab/border.hpp"
#include "padlab/metrics.hpp"
#include "padlab/models.hpp"
#include "padlab/optim.hpp"
#include "padlab/synth.hpp"

namespace padlab {

enum class Experiment {
  Probe,
  PadCompare,
  StageSweep,
  GridClassify,
  GridSegment,
  DistToBorder,
  RingRegion,
  Dimest,
  ReachMap,
};

std::string to_string(Experiment e);
Experiment parse_experiment(std::string_view name);
const std::vector<Experiment>& all_experiments();

enum class DatasetKind { Cifar10, Synthetic };

/// The default sweep: every padding kind, amount 1 (none has amount 0).
std::vector<PaddingMode> default_sweep_modes();

struct TrainConfig {
  Index epochs = 10;
  Index batch = 32;
  SgdConfig sgd;
  /// Epochs (1-based) after which the learning rate is multiplied by 0.1.
  std::vector<Index> decay_epochs;
  /// Batches used to re-estimate batch-norm statistics with the final
  /// weights (cumulative average); 0 keeps the running averages.
  Index bn_batches = 0;
};

/// Every setting of one run. Each field has a default; the config file only
/// lists what differs.
struct RunConfig {
  Experiment experiment = Experiment::Probe;
  std::uint64_t seed = 0;
  std::filesystem::path out = "padlab_out";

  // [data]
  DatasetKind dataset = DatasetKind::Cifar10;
  /// Empty means $PADLAB_DATA.
  std::filesystem::path data_root;
  Index train_size = 5000;
  Index val_size = 1000;
  int classes = 10;
  Index patch = 32;

  // [train] main model: the backbone for probe families, GridNet otherwise.
  TrainConfig train{10, 32, {}, {}, 32};

  // [backbone]
  bool use_backbone = true;
  Vgg5Config backbone = [] {
    Vgg5Config c;
    c.realign = true;
    return c;
  }();

  // [probe]
  Pattern pattern = Pattern::H;
  TargetParams target;
  ProbeConfig probe;
  TrainConfig probe_train{15, 16, {}, {}};
  Index probe_images = 1000;
  Index probe_val_images = 200;

  // [grid]
  GridSpec grid;
  bool allow_large_k = false;
  GridNetConfig gridnet;
  Index eval_batch = 32;

  // [sweep]
  std::vector<PaddingMode> sweep_modes = default_sweep_modes();
  std::vector<int> sweep_stages{1, 2, 3, 4};

  // [dimest]
  Index pairs = 2048;
  /// Trained grid model to analyse; empty trains one first.
  std::filesystem::path dimest_checkpoint;

  // [reach]
  std::string reach_model = "gridnet";

  // [ring]
  std::vector<Band> bands{{0, 20}, {20, 40}, {40, 60}, {60, 80}, {80, 100}};

  /// Throws ArgumentError when fields are inconsistent.
  void validate() const;
  /// Full config in file syntax, every field listed with its doc line.
  std::string echo() const;
  /// Root directory of the CIFAR-10 binary files.
  std::filesystem::path resolved_data_root() const;
};

/// Parses key = value lines grouped under [section] headers. Blank lines and
/// lines starting with '#' or ';' are skipped. Unknown sections or keys,
/// duplicate keys and malformed values raise ArgumentError naming the line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace padlab
