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
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "padlab/config.hpp"
#include "padlab/dimest.hpp"
#include "padlab/io.hpp"
#include "padlab/metrics.hpp"
#include "padlab/models.hpp"

namespace padlab {

/// Independent seed for a named purpose, so adding draws to one stream never
/// shifts another.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct Datasets {
  std::vector<LabeledPatch> train;
  std::vector<LabeledPatch> val;
  std::string source;
};

/// Training and held-out patches at the configured patch side. CIFAR-10 is
/// read from data_batch_{1..5}.bin and test_batch.bin; a missing file throws
/// FormatError naming the synthetic fallback.
Datasets load_datasets(const RunConfig& cfg);

/// Stacks patches into (n,3,side,side), resizing when needed.
Tensor stack_patches(std::span<const LabeledPatch> patches, Index side);

/// Progress sink for long runs. `out` receives plain lines, `log` the same
/// lines with a timestamp; null streams are skipped.
struct Progress {
  std::ostream* out = nullptr;
  std::ostream* log = nullptr;
  void operator()(const std::string& line) const;
};

/// Replaces the running batch-norm statistics of `model` by the cumulative
/// average over `batches` training-mode forward passes; `forward(t)` runs
/// batch t without recording. No-op for zero batches or a model without
/// batch norm.
void recalibrate_batchnorm(ModelBase& model, Index batches,
                           const std::function<void(Index)>& forward);

/// VGG-5 classifier trained on the patches resized to backbone.input.
/// Appends (epoch, loss, train_accuracy) rows to `log` when given.
Vgg5 train_backbone(const RunConfig& cfg, const PaddingMode& mode,
                    const Datasets& data, CsvTable* log = nullptr,
                    const Progress& progress = {});

struct ProbeOutcome {
  Scalar spc = 0.0;
  Scalar mae = 0.0;
  Tensor prediction;  // first held-out image, (1,1,o,o)
  Tensor target;      // (1,1,o,o)
  std::vector<NamedTensor> state;
};

/// Trains a readout on frozen taps (or raw images without a backbone) to
/// regress the configured target, then scores SPC and MAE per held-out
/// image and averages them. Appends (epoch, loss, spc, mae) rows to `log`.
ProbeOutcome train_probe(Vgg5* backbone, const std::vector<int>& taps,
                         const PaddingMode& readout_mode, const RunConfig& cfg,
                         const Datasets& data, CsvTable* log = nullptr,
                         const Progress& progress = {});

/// GridNet trained on grid canvases with a fresh random location per patch
/// and epoch. Appends (epoch, loss, train_metric) rows to `log`.
GridNet train_gridnet(const RunConfig& cfg, const Datasets& data,
                      CsvTable* log = nullptr, const Progress& progress = {});

/// Network config derived from the run config.
GridNetConfig gridnet_config(const RunConfig& cfg);

/// Accuracy (classify) or mean IoU (segment) of every grid location.
LocationTable evaluate_locations(GridNet& net, const RunConfig& cfg,
                                 std::span<const LabeledPatch> val);

/// Layer geometry of the configured reach model.
std::vector<ReachLayer> reach_layers(const RunConfig& cfg);

/// Runs one experiment end to end and writes its artifacts to cfg.out:
/// config.ini, summary.csv, experiment-specific CSVs and PGMs, checkpoints,
/// and run.log (the only file carrying timestamps). Returns the summary.
CsvTable run_experiment(const RunConfig& cfg, std::ostream* progress = nullptr);

/// Combines finished run directories. Every directory must hold config.ini
/// and summary.csv. Writes summary.csv (one row per run, prefixed by run
/// id) and, when dist-to-border runs are present, ring_diff.csv with the
/// per-ring no-pad minus padded accuracy. Throws FormatError for an
/// incomplete directory and ArgumentError when a dist-to-border group lacks
/// its padded or no-pad run.
std::vector<std::filesystem::path> write_report(
    std::span<const std::filesystem::path> runs, const std::filesystem::path& out);

}  // namespace padlab
