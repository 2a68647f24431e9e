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

#include "padlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "padlab/checkpoint.hpp"

namespace padlab {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void Progress::operator()(const std::string& line) const {
  if (out) *out << line << std::endl;
  if (log) {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    *log << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << line << std::endl;
  }
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

namespace {

std::vector<LabeledPatch> resize_patchset(std::vector<LabeledPatch> patches, Index side) {
  for (LabeledPatch& p : patches)
    if (p.image.h() != side || p.image.w() != side)
      p.image = resize_bilinear(p.image, side, side);
  return patches;
}

std::vector<LabeledPatch> take_cifar(const std::vector<fs::path>& files, int classes,
                                     std::size_t count) {
  std::vector<LabeledPatch> out;
  for (const fs::path& f : files) {
    for (LabeledPatch& p : load_cifar10(f)) {
      if (out.size() == count) return out;
      if (p.label < classes) out.push_back(std::move(p));
    }
  }
  return out;
}

bool probe_family(Experiment e) {
  return e == Experiment::Probe || e == Experiment::PadCompare ||
         e == Experiment::StageSweep;
}

}  // namespace

Datasets load_datasets(const RunConfig& cfg) {
  std::size_t n_train = static_cast<std::size_t>(cfg.train_size);
  std::size_t n_val = static_cast<std::size_t>(cfg.val_size);
  if (probe_family(cfg.experiment)) {
    n_train = std::max(n_train, static_cast<std::size_t>(cfg.probe_images));
    n_val = std::max(n_val, static_cast<std::size_t>(cfg.probe_val_images));
  }
  Datasets d;
  if (cfg.dataset == DatasetKind::Synthetic) {
    d.source = "synthetic";
    d.train = gen_synthetic_patchset(static_cast<Index>(n_train), cfg.classes,
                                     derive_seed(cfg.seed, 1), cfg.patch);
    d.val = gen_synthetic_patchset(static_cast<Index>(n_val), cfg.classes,
                                   derive_seed(cfg.seed, 2), cfg.patch);
    return d;
  }
  const fs::path root = cfg.resolved_data_root();
  const std::string fallback =
      " (set PADLAB_DATA or [data] root, or use dataset = synthetic under [data]"
      " for the generated patchset)";
  if (root.empty()) throw FormatError("no CIFAR-10 directory given" + fallback);
  fs::path dir = root;
  if (!fs::exists(dir / "test_batch.bin") && fs::exists(root / "cifar-10-batches-bin"))
    dir = root / "cifar-10-batches-bin";
  std::vector<fs::path> train_files;
  for (int i = 1; i <= 5; ++i) train_files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  const fs::path test_file = dir / "test_batch.bin";
  for (const fs::path& f : train_files)
    if (!fs::exists(f)) throw FormatError("CIFAR-10 file " + f.string() + " not found" + fallback);
  if (!fs::exists(test_file))
    throw FormatError("CIFAR-10 file " + test_file.string() + " not found" + fallback);
  d.source = dir.string();
  d.train = resize_patchset(take_cifar(train_files, cfg.classes, n_train), cfg.patch);
  d.val = resize_patchset(take_cifar({test_file}, cfg.classes, n_val), cfg.patch);
  return d;
}

Tensor stack_patches(std::span<const LabeledPatch> patches, Index side) {
  std::vector<Tensor> parts;
  parts.reserve(patches.size());
  for (const LabeledPatch& p : patches)
    parts.push_back(p.image.h() == side && p.image.w() == side
                        ? p.image
                        : resize_bilinear(p.image, side, side));
  return stack_batch(parts);
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

namespace {

Tensor gather(const Tensor& t, std::span<const std::size_t> idx) {
  const Index per = t.c() * t.h() * t.w();
  Tensor out(static_cast<Index>(idx.size()), t.c(), t.h(), t.w());
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::memcpy(out.ptr() + static_cast<Index>(i) * per,
                t.ptr() + static_cast<Index>(idx[i]) * per,
                static_cast<std::size_t>(per) * sizeof(Scalar));
  return out;
}

Scalar scheduled_lr(const TrainConfig& t, Index epoch) {
  Scalar lr = t.sgd.learning_rate;
  for (Index e : t.decay_epochs)
    if (epoch > e) lr *= 0.1;
  return lr;
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// Minibatch index ranges over `order`; a trailing single-sample batch is
// dropped.
std::vector<std::span<const std::size_t>> batches(const std::vector<std::size_t>& order,
                                                  Index batch) {
  std::vector<std::span<const std::size_t>> out;
  const auto b = static_cast<std::size_t>(batch);
  for (std::size_t i = 0; i < order.size(); i += b) {
    const std::size_t n = std::min(b, order.size() - i);
    if (n < 2 && order.size() > 1) break;
    out.emplace_back(order.data() + i, n);
  }
  return out;
}

std::string epoch_line(const std::string& what, Index epoch, Index epochs, Scalar loss,
                       const std::string& metric, Scalar value) {
  std::ostringstream s;
  s << what << " epoch " << epoch << "/" << epochs << " loss " << std::setprecision(4)
    << loss << " " << metric << " " << value;
  return s.str();
}

Index count_hits(const Tensor& logits, std::span<const int> labels) {
  Index hits = 0;
  for (Index n = 0; n < logits.n(); ++n)
    hits += argmax_channel(logits, n, 0, 0) == labels[static_cast<std::size_t>(n)];
  return hits;
}

}  // namespace

void recalibrate_batchnorm(ModelBase& model, Index batches,
                           const std::function<void(Index)>& forward) {
  const auto states = model.norm_states();
  if (batches < 1 || states.empty()) return;
  std::vector<Scalar> momentum;
  for (BatchNormState* s : states) momentum.push_back(s->momentum);
  for (Index t = 0; t < batches; ++t) {
    for (BatchNormState* s : states) s->momentum = 1.0 / static_cast<Scalar>(t + 1);
    forward(t);
  }
  for (std::size_t i = 0; i < states.size(); ++i) states[i]->momentum = momentum[i];
}

Vgg5 train_backbone(const RunConfig& cfg, const PaddingMode& mode, const Datasets& data,
                    CsvTable* log, const Progress& progress) {
  Vgg5Config vc = cfg.backbone;
  vc.mode = mode;
  vc.classes = cfg.classes;
  Vgg5 net = Vgg5::build(vc, derive_seed(cfg.seed, 10));
  const std::size_t n =
      std::min(data.train.size(), static_cast<std::size_t>(cfg.train_size));
  const std::span<const LabeledPatch> train(data.train.data(), n);
  const Tensor images = stack_patches(train, vc.input);
  std::vector<int> labels;
  for (const LabeledPatch& p : train) labels.push_back(p.label);

  Sgd opt(net.trainable_parameters(), cfg.train.sgd);
  std::mt19937_64 rng(derive_seed(cfg.seed, 11));
  for (Index epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    opt.set_learning_rate(scheduled_lr(cfg.train, epoch));
    Scalar loss_sum = 0.0;
    Index hits = 0, seen = 0;
    const auto order = shuffled(n, rng);
    for (auto idx : batches(order, cfg.train.batch)) {
      std::vector<int> y;
      for (std::size_t i : idx) y.push_back(labels[i]);
      Tape tape;
      Var logits = net.forward(tape, make_const(gather(images, idx)), true);
      Var loss = softmax_cross_entropy(tape, logits, y);
      tape.backward(loss);
      opt.step();
      loss_sum += loss->value[0] * static_cast<Scalar>(idx.size());
      hits += count_hits(logits->value, y);
      seen += static_cast<Index>(idx.size());
    }
    const Scalar loss = loss_sum / static_cast<Scalar>(std::max<Index>(seen, 1));
    const Scalar acc = static_cast<Scalar>(hits) / static_cast<Scalar>(std::max<Index>(seen, 1));
    if (log)
      log->add_row({std::to_string(epoch), format_number(loss), format_number(acc)});
    progress(epoch_line("backbone[" + mode.name() + ":" + std::to_string(mode.amount) + "]",
                        epoch, cfg.train.epochs, loss, "acc", acc));
  }
  const auto order = shuffled(n, rng);
  const auto groups = batches(order, cfg.train.batch);
  recalibrate_batchnorm(net, std::min<Index>(cfg.train.bn_batches, static_cast<Index>(groups.size())),
                        [&](Index t) {
                          Tape tape(false);
                          net.forward(tape, make_const(gather(images, groups[static_cast<std::size_t>(t)])), true);
                        });
  return net;
}

namespace {

// Frozen inputs of the readout for a set of images: the native-resolution
// taps (or the images themselves), aligned per minibatch.
struct ProbeInputs {
  std::vector<Tensor> taps;

  Tensor batch(const PosProbe& probe, std::span<const std::size_t> idx) const {
    std::vector<Tensor> parts;
    for (const Tensor& t : taps) parts.push_back(gather(t, idx));
    return probe.align_taps(parts);
  }
  std::size_t size() const { return taps.empty() ? 0 : static_cast<std::size_t>(taps[0].n()); }
};

ProbeInputs probe_inputs(Vgg5* backbone, const std::vector<int>& taps,
                         const Tensor& images) {
  ProbeInputs in;
  if (!backbone) {
    in.taps.push_back(images);
    return in;
  }
  const Index chunk = 64;
  std::vector<std::vector<Tensor>> per_tap(taps.size());
  for (Index b = 0; b < images.n(); b += chunk) {
    auto feats = stage_features(*backbone, slice_batch(images, b, std::min(chunk, images.n() - b)), taps);
    for (std::size_t t = 0; t < taps.size(); ++t) per_tap[t].push_back(std::move(feats[t]));
  }
  for (auto& parts : per_tap) in.taps.push_back(stack_batch(parts));
  return in;
}

Tensor repeat_map(const Tensor& map, Index n) {
  Tensor out(n, 1, map.h(), map.w());
  for (Index i = 0; i < n; ++i) out.plane(i, 0) = map.plane(0, 0);
  return out;
}

}  // namespace

ProbeOutcome train_probe(Vgg5* backbone, const std::vector<int>& taps,
                         const PaddingMode& readout_mode, const RunConfig& cfg,
                         const Datasets& data, CsvTable* log, const Progress& progress) {
  ProbeConfig pc = cfg.probe;
  pc.taps = taps;
  pc.readout_mode = readout_mode;
  PosProbe probe = PosProbe::build(backbone, pc, derive_seed(cfg.seed, 20));
  const Index side = backbone ? cfg.backbone.input : cfg.patch;
  const std::size_t n_train =
      std::min(data.train.size(), static_cast<std::size_t>(cfg.probe_images));
  const std::size_t n_val =
      std::min(data.val.size(), static_cast<std::size_t>(cfg.probe_val_images));
  const ProbeInputs train = probe_inputs(
      backbone, taps, stack_patches({data.train.data(), n_train}, side));
  const ProbeInputs val =
      probe_inputs(backbone, taps, stack_patches({data.val.data(), n_val}, side));

  const Index o = probe.output_size();
  const Tensor target = gen_position_target(cfg.pattern, o, o, cfg.target).map;

  Sgd opt(probe.trainable_parameters(), cfg.probe_train.sgd);
  std::mt19937_64 rng(derive_seed(cfg.seed, 21));
  ProbeOutcome outcome;
  outcome.target = target;
  std::vector<std::size_t> val_order(n_val);
  std::iota(val_order.begin(), val_order.end(), 0);

  auto evaluate = [&] {
    Scalar spc = 0.0, err = 0.0;
    const Index chunk = 64;
    for (std::size_t b = 0; b < n_val; b += chunk) {
      const std::size_t m = std::min<std::size_t>(chunk, n_val - b);
      Tape tape(false);
      const Tensor pred =
          probe.readout(tape, val.batch(probe, {val_order.data() + b, m}))->value;
      for (Index i = 0; i < pred.n(); ++i) {
        const Tensor one = slice_batch(pred, i, 1);
        spc += spearman(one, target);
        err += mae(one, target);
        if (b == 0 && i == 0) outcome.prediction = one;
      }
    }
    outcome.spc = spc / static_cast<Scalar>(n_val);
    outcome.mae = err / static_cast<Scalar>(n_val);
  };

  for (Index epoch = 1; epoch <= cfg.probe_train.epochs; ++epoch) {
    opt.set_learning_rate(scheduled_lr(cfg.probe_train, epoch));
    Scalar loss_sum = 0.0;
    Index seen = 0;
    const auto order = shuffled(n_train, rng);
    for (auto idx : batches(order, cfg.probe_train.batch)) {
      Tape tape;
      Var pred = probe.readout(tape, train.batch(probe, idx));
      Var loss = mse_loss(tape, pred, repeat_map(target, static_cast<Index>(idx.size())));
      tape.backward(loss);
      opt.step();
      loss_sum += loss->value[0] * static_cast<Scalar>(idx.size());
      seen += static_cast<Index>(idx.size());
    }
    evaluate();
    const Scalar loss = loss_sum / static_cast<Scalar>(std::max<Index>(seen, 1));
    if (log)
      log->add_row({std::to_string(epoch), format_number(loss), format_number(outcome.spc),
                    format_number(outcome.mae)});
    progress(epoch_line("probe", epoch, cfg.probe_train.epochs, loss, "spc", outcome.spc));
  }
  if (cfg.probe_train.epochs == 0) evaluate();
  outcome.state = probe.state();
  return outcome;
}

GridNetConfig gridnet_config(const RunConfig& cfg) {
  GridNetConfig gc = cfg.gridnet;
  gc.classes = cfg.classes;
  if (cfg.experiment == Experiment::GridClassify) gc.task = GridTask::Classify;
  if (cfg.experiment == Experiment::GridSegment || cfg.experiment == Experiment::RingRegion)
    gc.task = GridTask::Segment;
  return gc;
}

namespace {

GridSpec grid_spec(const RunConfig& cfg) {
  GridSpec spec = cfg.grid;
  spec.patch = cfg.patch;
  return spec;
}

}  // namespace

GridNet train_gridnet(const RunConfig& cfg, const Datasets& data, CsvTable* log,
                      const Progress& progress) {
  const GridNetConfig gc = gridnet_config(cfg);
  GridNet net = GridNet::build(gc, derive_seed(cfg.seed, 30));
  const GridSpec spec = grid_spec(cfg);
  const std::size_t n =
      std::min(data.train.size(), static_cast<std::size_t>(cfg.train_size));
  Sgd opt(net.trainable_parameters(), cfg.train.sgd);
  std::mt19937_64 rng(derive_seed(cfg.seed, 31));
  std::uniform_int_distribution<Index> where(1, spec.locations());
  const bool classify = gc.task == GridTask::Classify;

  for (Index epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    opt.set_learning_rate(scheduled_lr(cfg.train, epoch));
    Scalar loss_sum = 0.0, metric_sum = 0.0;
    Index seen = 0;
    const auto order = shuffled(n, rng);
    for (auto idx : batches(order, cfg.train.batch)) {
      std::vector<Tensor> images, seg;
      std::vector<int> labels;
      for (std::size_t i : idx) {
        GridSample s = compose_grid_sample(data.train[i].image, data.train[i].label,
                                           where(rng), spec);
        images.push_back(std::move(s.image));
        seg.push_back(std::move(s.seg_labels));
        labels.push_back(s.class_label);
      }
      Tape tape;
      Var out = net.forward(tape, make_const(stack_batch(images)), true);
      Var loss;
      Scalar metric = 0.0;
      if (classify) {
        loss = softmax_cross_entropy(tape, out, labels);
        metric = static_cast<Scalar>(count_hits(out->value, labels));
      } else {
        const Tensor gt = stack_batch(seg);
        loss = pixelwise_cross_entropy(tape, out, gt);
        const Tensor pred = argmax_labels(out->value);
        metric = (pred.data() == gt.data()).cast<Scalar>().sum() /
                 static_cast<Scalar>(gt.plane_size());
      }
      tape.backward(loss);
      opt.step();
      loss_sum += loss->value[0] * static_cast<Scalar>(idx.size());
      metric_sum += metric;
      seen += static_cast<Index>(idx.size());
    }
    const Scalar denom = static_cast<Scalar>(std::max<Index>(seen, 1));
    const Scalar loss = loss_sum / denom;
    const Scalar metric = metric_sum / denom;
    if (log)
      log->add_row({std::to_string(epoch), format_number(loss), format_number(metric)});
    progress(epoch_line("grid", epoch, cfg.train.epochs, loss,
                        classify ? "acc" : "pixel_acc", metric));
  }
  std::mt19937_64 bn_rng(derive_seed(cfg.seed, 32));
  const auto order = shuffled(n, bn_rng);
  const auto groups = batches(order, cfg.train.batch);
  recalibrate_batchnorm(
      net, std::min<Index>(cfg.train.bn_batches, static_cast<Index>(groups.size())),
      [&](Index t) {
        std::vector<Tensor> images;
        for (std::size_t i : groups[static_cast<std::size_t>(t)])
          images.push_back(compose_grid_sample(data.train[i].image, data.train[i].label,
                                               where(bn_rng), spec)
                               .image);
        Tape tape(false);
        net.forward(tape, make_const(stack_batch(images)), true);
      });
  return net;
}

LocationTable evaluate_locations(GridNet& net, const RunConfig& cfg,
                                 std::span<const LabeledPatch> val) {
  const bool classify = net.config().task == GridTask::Classify;
  const std::size_t n = std::min(val.size(), static_cast<std::size_t>(cfg.val_size));
  const Predictor predict = [&net](const Tensor& x) {
    Tape tape(false);
    return net.forward(tape, make_const(x), false)->value;
  };
  return per_location_eval(predict, val.subspan(0, n), grid_spec(cfg),
                           classify ? LocationMetric::Accuracy : LocationMetric::MeanIoU,
                           classify ? cfg.classes : cfg.classes + 1, Normalization{},
                           cfg.eval_batch);
}

std::vector<ReachLayer> reach_layers(const RunConfig& cfg) {
  std::vector<ReachLayer> layers;
  if (cfg.reach_model == "vgg5") {
    for (int i = 0; i < Vgg5::kStages; ++i) {
      layers.push_back({3, 1, cfg.backbone.mode.amount});
      if (i < Vgg5::kStages - 1) layers.push_back({2, 2, 0});
    }
    return layers;
  }
  const GridNetConfig gc = gridnet_config(cfg);
  for (std::size_t i = 0; i < gc.widths.size(); ++i) {
    const bool pointwise = gc.rf_limit && static_cast<Index>(i) + 1 > gc.rf_limit->depth;
    layers.push_back({pointwise ? 1 : 3, gc.downsample && i % 2 == 1 ? 2 : 1,
                      pointwise ? 0 : gc.mode.amount});
  }
  return layers;
}

// ---------------------------------------------------------------------------
// Experiment drivers
// ---------------------------------------------------------------------------

namespace {

std::string mode_label(const PaddingMode& m) { return m.name() + ":" + std::to_string(m.amount); }

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

std::string opt_number(const std::optional<Scalar>& v) { return v ? format_number(*v) : ""; }

CsvTable with_prefix(const CsvTable& rows, const std::vector<std::string>& prefix_header,
                     const std::vector<std::vector<std::string>>& prefixes) {
  std::vector<std::string> header = prefix_header;
  header.insert(header.end(), rows.header().begin(), rows.header().end());
  CsvTable out(header);
  for (std::size_t i = 0; i < rows.rows().size(); ++i) {
    std::vector<std::string> r = prefixes[i];
    r.insert(r.end(), rows.rows()[i].begin(), rows.rows()[i].end());
    out.add_row(r);
  }
  return out;
}

struct RunContext {
  const RunConfig& cfg;
  Progress progress;
  fs::path dir;
};

const std::vector<std::string> kBackboneLogHeader{"epoch", "loss", "train_accuracy"};
const std::vector<std::string> kProbeLogHeader{"epoch", "loss", "spc", "mae"};

void save_probe_artifacts(const ProbeOutcome& o, const fs::path& dir, const std::string& tag) {
  write_pgm(dir / ("prediction" + tag + ".pgm"), o.prediction, 0.0, 1.0);
  write_pgm(dir / ("target" + tag + ".pgm"), o.target, 0.0, 1.0);
  save_checkpoint(dir / ("probe" + tag + ".ckpt"), o.state);
}

CsvTable run_probe(RunContext& ctx, const Datasets& data) {
  const RunConfig& cfg = ctx.cfg;
  std::optional<Vgg5> backbone;
  if (cfg.use_backbone) {
    CsvTable bb(kBackboneLogHeader);
    backbone.emplace(train_backbone(cfg, cfg.backbone.mode, data, &bb, ctx.progress));
    bb.save(ctx.dir / "backbone_metrics.csv");
    save_checkpoint(ctx.dir / "backbone.ckpt", backbone->state());
  }
  CsvTable log(kProbeLogHeader);
  const ProbeOutcome o = train_probe(backbone ? &*backbone : nullptr, cfg.probe.taps,
                                     cfg.probe.readout_mode, cfg, data, &log, ctx.progress);
  log.save(ctx.dir / "metrics.csv");
  save_probe_artifacts(o, ctx.dir, "");
  CsvTable summary({"experiment", "pattern", "backbone", "readout", "taps", "spc", "mae"});
  summary.add_row({to_string(cfg.experiment), to_string(cfg.pattern),
                   cfg.use_backbone ? mode_label(cfg.backbone.mode) : "off",
                   mode_label(cfg.probe.readout_mode), join_ints(cfg.probe.taps),
                   format_number(o.spc), format_number(o.mae)});
  return summary;
}

CsvTable run_pad_compare(RunContext& ctx, const Datasets& data) {
  const RunConfig& cfg = ctx.cfg;
  CsvTable summary({"experiment", "pattern", "padding", "amount", "spc", "mae"});
  std::vector<std::vector<std::string>> probe_prefix, bb_prefix;
  CsvTable probe_rows(kProbeLogHeader), bb_rows(kBackboneLogHeader);
  for (const PaddingMode& mode : cfg.sweep_modes) {
    const std::string tag = "_" + mode.name() + std::to_string(mode.amount);
    std::optional<Vgg5> backbone;
    CsvTable bb(kBackboneLogHeader), log(kProbeLogHeader);
    if (cfg.use_backbone) {
      backbone.emplace(train_backbone(cfg, mode, data, &bb, ctx.progress));
      save_checkpoint(ctx.dir / ("backbone" + tag + ".ckpt"), backbone->state());
    }
    const PaddingMode readout = cfg.use_backbone ? cfg.probe.readout_mode : mode;
    const ProbeOutcome o = train_probe(backbone ? &*backbone : nullptr, cfg.probe.taps,
                                       readout, cfg, data, &log, ctx.progress);
    save_probe_artifacts(o, ctx.dir, tag);
    for (const auto& r : bb.rows()) {
      bb_rows.add_row(r);
      bb_prefix.push_back({mode.name(), std::to_string(mode.amount)});
    }
    for (const auto& r : log.rows()) {
      probe_rows.add_row(r);
      probe_prefix.push_back({mode.name(), std::to_string(mode.amount)});
    }
    summary.add_row({to_string(cfg.experiment), to_string(cfg.pattern), mode.name(),
                     std::to_string(mode.amount), format_number(o.spc), format_number(o.mae)});
  }
  with_prefix(probe_rows, {"padding", "amount"}, probe_prefix).save(ctx.dir / "metrics.csv");
  if (cfg.use_backbone)
    with_prefix(bb_rows, {"padding", "amount"}, bb_prefix)
        .save(ctx.dir / "backbone_metrics.csv");
  return summary;
}

CsvTable run_stage_sweep(RunContext& ctx, const Datasets& data) {
  const RunConfig& cfg = ctx.cfg;
  CsvTable bb(kBackboneLogHeader);
  Vgg5 backbone = train_backbone(cfg, cfg.backbone.mode, data, &bb, ctx.progress);
  bb.save(ctx.dir / "backbone_metrics.csv");
  save_checkpoint(ctx.dir / "backbone.ckpt", backbone.state());
  CsvTable summary({"experiment", "pattern", "backbone", "stage", "spc", "mae"});
  CsvTable rows(kProbeLogHeader);
  std::vector<std::vector<std::string>> prefix;
  for (int stage : cfg.sweep_stages) {
    CsvTable log(kProbeLogHeader);
    const ProbeOutcome o = train_probe(&backbone, {stage}, cfg.probe.readout_mode, cfg, data,
                                       &log, ctx.progress);
    save_probe_artifacts(o, ctx.dir, "_f" + std::to_string(stage));
    for (const auto& r : log.rows()) {
      rows.add_row(r);
      prefix.push_back({std::to_string(stage)});
    }
    summary.add_row({to_string(cfg.experiment), to_string(cfg.pattern),
                     mode_label(cfg.backbone.mode), std::to_string(stage),
                     format_number(o.spc), format_number(o.mae)});
  }
  with_prefix(rows, {"stage"}, prefix).save(ctx.dir / "metrics.csv");
  return summary;
}

GridNet obtain_gridnet(RunContext& ctx, const Datasets& data) {
  const RunConfig& cfg = ctx.cfg;
  if (cfg.experiment == Experiment::Dimest && !cfg.dimest_checkpoint.empty()) {
    GridNet net = GridNet::build(gridnet_config(cfg), derive_seed(cfg.seed, 30));
    net.load_state(load_checkpoint(cfg.dimest_checkpoint));
    ctx.progress("loaded " + cfg.dimest_checkpoint.string());
    return net;
  }
  CsvTable log({"epoch", "loss", "train_metric"});
  GridNet net = train_gridnet(cfg, data, &log, ctx.progress);
  log.save(ctx.dir / "metrics.csv");
  save_checkpoint(ctx.dir / "model.ckpt", net.state());
  return net;
}

std::vector<std::string> grid_summary_header() {
  return {"experiment", "task", "padding", "amount", "canvas", "k",
          "residual",   "rf_limit", "mean"};
}

std::vector<std::string> grid_summary_row(const RunConfig& cfg, const GridNetConfig& gc,
                                          Scalar mean) {
  return {to_string(cfg.experiment),
          to_string(gc.task),
          gc.mode.name(),
          std::to_string(gc.mode.amount),
          cfg.grid.canvas.name,
          std::to_string(cfg.grid.k),
          gc.residual ? "true" : "false",
          std::to_string(gc.rf_limit ? gc.rf_limit->depth : 0),
          format_number(mean)};
}

CsvTable run_grid(RunContext& ctx, const Datasets& data) {
  const RunConfig& cfg = ctx.cfg;
  GridNet net = obtain_gridnet(ctx, data);
  const LocationTable table = evaluate_locations(net, cfg, data.val);
  const Index k = cfg.grid.k;
  CsvTable locations({"location", "row", "col", "distance", "value"});
  Tensor map(1, 1, k, k);
  for (Index l = 1; l <= k * k; ++l) {
    const GridCell c = cell_of(l, k);
    locations.add_row({std::to_string(l), std::to_string(c.row), std::to_string(c.col),
                       std::to_string(border_distance(l, k)), format_number(table.at(l))});
    map(0, 0, c.row, c.col) = table.at(l);
  }
  locations.save(ctx.dir / "locations.csv");
  write_pgm(ctx.dir / "location_map.pgm", map, 0.0, 1.0);
  if (cfg.experiment == Experiment::DistToBorder) {
    const RingReport rings = distance_rings(table);
    CsvTable out({"distance", "cells", "mean"});
    for (std::size_t i = 0; i < rings.distances.size(); ++i)
      out.add_row({std::to_string(rings.distances[i]), std::to_string(rings.counts[i]),
                   format_number(rings.means[i])});
    out.save(ctx.dir / "rings.csv");
  }
  CsvTable summary(grid_summary_header());
  summary.add_row(grid_summary_row(cfg, net.config(), table.mean()));
  return summary;
}

CsvTable run_ring_region(RunContext& ctx, const Datasets& data) {
  const RunConfig& cfg = ctx.cfg;
  GridNet net = obtain_gridnet(ctx, data);
  const GridSpec spec = grid_spec(cfg);
  const std::size_t n = std::min(data.val.size(), static_cast<std::size_t>(cfg.val_size));
  RingRegionAccumulator acc(cfg.classes + 1, cfg.bands);
  for (Index l = 1; l <= spec.locations(); ++l)
    for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(cfg.eval_batch)) {
      const std::size_t e = std::min(n, b + static_cast<std::size_t>(cfg.eval_batch));
      std::vector<Tensor> images, labels;
      for (std::size_t i = b; i < e; ++i) {
        GridSample s = compose_grid_sample(data.val[i].image, data.val[i].label, l, spec);
        images.push_back(std::move(s.image));
        labels.push_back(std::move(s.seg_labels));
      }
      Tape tape(false);
      const Tensor logits = net.forward(tape, make_const(stack_batch(images)), false)->value;
      acc.add(argmax_labels(logits), stack_batch(labels));
    }
  const auto mious = acc.miou();
  CsvTable bands({"lo", "hi", "miou"});
  for (std::size_t i = 0; i < cfg.bands.size(); ++i)
    bands.add_row({format_number(cfg.bands[i].lo), format_number(cfg.bands[i].hi),
                   opt_number(mious[i])});
  bands.save(ctx.dir / "bands.csv");
  Scalar mean = 0.0;
  int present = 0;
  for (const auto& m : mious)
    if (m) {
      mean += *m;
      ++present;
    }
  CsvTable summary(grid_summary_header());
  summary.add_row(grid_summary_row(cfg, net.config(), present ? mean / present : 0.0));
  return summary;
}

CsvTable run_dimest(RunContext& ctx, const Datasets& data) {
  const RunConfig& cfg = ctx.cfg;
  GridNet net = obtain_gridnet(ctx, data);
  const std::size_t n = std::min(data.val.size(), static_cast<std::size_t>(cfg.val_size));
  const Encoder encoder = [&net](const Tensor& x) { return latent_of(net, x); };
  const FactorReport r =
      estimate_dimensions(encoder, net.latent_dim(), {data.val.data(), n}, grid_spec(cfg),
                          cfg.pairs, derive_seed(cfg.seed, 40));
  std::vector<std::string> header;
  std::stringstream hs{std::string(kFactorReportHeader)};
  for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
  CsvTable summary(header);
  summary.add_row({cfg.out.filename().string(), mode_label(net.config().mode),
                   cfg.grid.canvas.name, to_string(net.config().task),
                   format_number(r.scores[0]), format_number(r.scores[1]),
                   format_number(r.scores[2]), format_number(r.percent(Factor::Location)),
                   format_number(r.percent(Factor::Class))});
  CsvTable alloc({"factor", "score", "dims", "percent"});
  for (Factor f : {Factor::Location, Factor::Class, Factor::Residual}) {
    const auto i = static_cast<std::size_t>(f);
    alloc.add_row({to_string(f), format_number(r.scores[i]), std::to_string(r.alloc[i]),
                   format_number(r.percent(f))});
  }
  alloc.save(ctx.dir / "allocation.csv");
  summary.save(ctx.dir / "factors.csv");
  return summary;
}

CsvTable run_reach_map(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Index side = cfg.reach_model == "vgg5" ? cfg.backbone.input : cfg.grid.k * cfg.patch;
  const Tensor map = positional_reach(reach_layers(cfg), side, side);
  CsvTable cells({"row", "col", "reach"});
  for (Index y = 0; y < map.h(); ++y)
    for (Index x = 0; x < map.w(); ++x)
      cells.add_row({std::to_string(y), std::to_string(x), format_number(map(0, 0, y, x))});
  cells.save(ctx.dir / "reach.csv");
  write_pgm(ctx.dir / "reach.pgm", map);
  const PaddingMode mode = cfg.reach_model == "vgg5" ? cfg.backbone.mode : cfg.gridnet.mode;
  CsvTable summary({"experiment", "model", "padding", "amount", "input", "out_h", "out_w",
                    "max_reach", "mean_reach"});
  summary.add_row({to_string(cfg.experiment), cfg.reach_model, mode.name(),
                   std::to_string(mode.amount), std::to_string(side), std::to_string(map.h()),
                   std::to_string(map.w()), format_number(map.data().maxCoeff()),
                   format_number(map.data().mean())});
  return summary;
}

}  // namespace

CsvTable run_experiment(const RunConfig& cfg, std::ostream* progress) {
  cfg.validate();
  fs::create_directories(cfg.out);
  {
    std::ofstream echo(cfg.out / "config.ini");
    echo << cfg.echo();
    if (!echo) throw FormatError("cannot write " + (cfg.out / "config.ini").string());
  }
  std::ofstream log(cfg.out / "run.log", std::ios::app);
  RunContext ctx{cfg, Progress{progress, &log}, cfg.out};
  ctx.progress("start " + to_string(cfg.experiment) + " seed " + std::to_string(cfg.seed));
  CsvTable summary({"experiment"});
  if (cfg.experiment == Experiment::ReachMap) {
    summary = run_reach_map(ctx);
  } else {
    const Datasets data = load_datasets(cfg);
    ctx.progress("dataset " + data.source + ": " + std::to_string(data.train.size()) +
                 " train, " + std::to_string(data.val.size()) + " held-out patches");
    switch (cfg.experiment) {
      case Experiment::Probe: summary = run_probe(ctx, data); break;
      case Experiment::PadCompare: summary = run_pad_compare(ctx, data); break;
      case Experiment::StageSweep: summary = run_stage_sweep(ctx, data); break;
      case Experiment::GridClassify:
      case Experiment::GridSegment:
      case Experiment::DistToBorder: summary = run_grid(ctx, data); break;
      case Experiment::RingRegion: summary = run_ring_region(ctx, data); break;
      case Experiment::Dimest: summary = run_dimest(ctx, data); break;
      case Experiment::ReachMap: break;
    }
  }
  summary.save(cfg.out / "summary.csv");
  ctx.progress("done");
  return summary;
}

}  // namespace padlab
