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

#include "padlab/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "padlab/io.hpp"

namespace padlab {

namespace {

const char* const kExperimentNames[] = {
    "probe",         "pad-compare",    "stage-sweep", "grid-classify", "grid-segment",
    "dist-to-border", "ring-region",   "dimest",      "reach-map"};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto end = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, end == std::string_view::npos ? end : end - pos)));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view s) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
    throw ArgumentError("'" + std::string(s) + "' is not a valid number");
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ArgumentError("'" + std::string(s) + "' is not a boolean");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

template <class T>
std::string join(const std::vector<T>& v, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    if constexpr (std::is_floating_point_v<T>)
      out += format_number(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

template <class T>
std::vector<T> parse_list(std::string_view s) {
  std::vector<T> out;
  for (auto part : split(s, ',')) out.push_back(parse_number<T>(part));
  return out;
}

std::string mode_list_str(const std::vector<PaddingMode>& modes) {
  std::string out;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (i) out += ',';
    out += modes[i].name() + ":" + std::to_string(modes[i].amount);
  }
  return out;
}

std::vector<PaddingMode> parse_mode_list(std::string_view s) {
  std::vector<PaddingMode> out;
  for (auto part : split(s, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string_view::npos) {
      const PadKind kind = parse_pad_kind(part);
      out.push_back(PaddingMode(kind, kind == PadKind::None ? 0 : 1));
    } else {
      out.push_back(PaddingMode::parse(trim(part.substr(0, colon)),
                                       parse_number<Index>(trim(part.substr(colon + 1)))));
    }
  }
  return out;
}

std::string band_list_str(const std::vector<Band>& bands) {
  std::string out;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (i) out += ',';
    out += format_number(bands[i].lo) + ":" + format_number(bands[i].hi);
  }
  return out;
}

std::vector<Band> parse_band_list(std::string_view s) {
  std::vector<Band> out;
  for (auto part : split(s, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string_view::npos)
      throw ArgumentError("band '" + std::string(part) + "' must read lo:hi");
    out.push_back({parse_number<double>(trim(part.substr(0, colon))),
                   parse_number<double>(trim(part.substr(colon + 1)))});
  }
  return out;
}

std::string align_str(ResizeAlign a) { return a == ResizeAlign::Center ? "center" : "corner"; }

ResizeAlign parse_align(std::string_view s) {
  if (s == "center") return ResizeAlign::Center;
  if (s == "corner") return ResizeAlign::Corner;
  throw ArgumentError("align must be center|corner");
}

struct Field {
  std::string section;
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <class T>
Field number_field(std::string section, std::string key, std::string doc,
                   T RunConfig::*member) {
  return {std::move(section), std::move(key), std::move(doc),
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_number(c.*member);
            else
              return std::to_string(c.*member);
          },
          [member](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(v); }};
}

void train_fields(std::vector<Field>& f, const std::string& section,
                  TrainConfig RunConfig::*member) {
  f.push_back({section, "epochs", "training epochs",
               [=](const RunConfig& c) { return std::to_string((c.*member).epochs); },
               [=](RunConfig& c, std::string_view v) {
                 (c.*member).epochs = parse_number<Index>(v);
               }});
  f.push_back({section, "batch", "minibatch size",
               [=](const RunConfig& c) { return std::to_string((c.*member).batch); },
               [=](RunConfig& c, std::string_view v) {
                 (c.*member).batch = parse_number<Index>(v);
               }});
  f.push_back({section, "lr", "SGD learning rate",
               [=](const RunConfig& c) { return format_number((c.*member).sgd.learning_rate); },
               [=](RunConfig& c, std::string_view v) {
                 (c.*member).sgd.learning_rate = parse_number<double>(v);
               }});
  f.push_back({section, "momentum", "SGD momentum",
               [=](const RunConfig& c) { return format_number((c.*member).sgd.momentum); },
               [=](RunConfig& c, std::string_view v) {
                 (c.*member).sgd.momentum = parse_number<double>(v);
               }});
  f.push_back({section, "weight_decay", "L2 weight decay",
               [=](const RunConfig& c) { return format_number((c.*member).sgd.weight_decay); },
               [=](RunConfig& c, std::string_view v) {
                 (c.*member).sgd.weight_decay = parse_number<double>(v);
               }});
  f.push_back({section, "decay_epochs", "epochs after which lr is multiplied by 0.1",
               [=](const RunConfig& c) { return join((c.*member).decay_epochs); },
               [=](RunConfig& c, std::string_view v) {
                 (c.*member).decay_epochs = parse_list<Index>(v);
               }});
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"run", "experiment",
                 "probe|pad-compare|stage-sweep|grid-classify|grid-segment|"
                 "dist-to-border|ring-region|dimest|reach-map",
                 [](const RunConfig& c) { return to_string(c.experiment); },
                 [](RunConfig& c, std::string_view v) { c.experiment = parse_experiment(v); }});
    f.push_back(number_field("run", "seed", "seed of every random draw", &RunConfig::seed));
    f.push_back({"run", "out", "output directory",
                 [](const RunConfig& c) { return c.out.string(); },
                 [](RunConfig& c, std::string_view v) { c.out = std::string(v); }});

    f.push_back({"data", "dataset",
                 "cifar10 (binary batches under root) or synthetic (generated patchset)",
                 [](const RunConfig& c) {
                   return std::string(c.dataset == DatasetKind::Cifar10 ? "cifar10" : "synthetic");
                 },
                 [](RunConfig& c, std::string_view v) {
                   if (v == "cifar10")
                     c.dataset = DatasetKind::Cifar10;
                   else if (v == "synthetic")
                     c.dataset = DatasetKind::Synthetic;
                   else
                     throw ArgumentError("dataset must be cifar10|synthetic");
                 }});
    f.push_back({"data", "root", "CIFAR-10 directory; empty means $PADLAB_DATA",
                 [](const RunConfig& c) { return c.data_root.string(); },
                 [](RunConfig& c, std::string_view v) { c.data_root = std::string(v); }});
    f.push_back(number_field("data", "train_size", "training patches", &RunConfig::train_size));
    f.push_back(number_field("data", "val_size", "held-out patches", &RunConfig::val_size));
    f.push_back(number_field("data", "classes", "patch classes", &RunConfig::classes));
    f.push_back(number_field("data", "patch", "patch side in pixels", &RunConfig::patch));

    train_fields(f, "train", &RunConfig::train);
    f.push_back({"train", "bn_batches",
                 "batches that re-estimate batch-norm statistics after training; 0 disables",
                 [](const RunConfig& c) { return std::to_string(c.train.bn_batches); },
                 [](RunConfig& c, std::string_view v) {
                   c.train.bn_batches = parse_number<Index>(v);
                 }});

    f.push_back({"backbone", "enabled", "train a VGG-5 backbone for the probe",
                 [](const RunConfig& c) { return bool_str(c.use_backbone); },
                 [](RunConfig& c, std::string_view v) { c.use_backbone = parse_bool(v); }});
    f.push_back({"backbone", "input", "side the images are resized to",
                 [](const RunConfig& c) { return std::to_string(c.backbone.input); },
                 [](RunConfig& c, std::string_view v) { c.backbone.input = parse_number<Index>(v); }});
    f.push_back({"backbone", "widths", "channels of the four blocks",
                 [](const RunConfig& c) {
                   return join(std::vector<Index>(c.backbone.widths.begin(), c.backbone.widths.end()));
                 },
                 [](RunConfig& c, std::string_view v) {
                   const auto w = parse_list<Index>(v);
                   if (w.size() != 4) throw ArgumentError("VGG-5 needs exactly four widths");
                   std::copy(w.begin(), w.end(), c.backbone.widths.begin());
                 }});
    f.push_back({"backbone", "padding", "padding kind of every conv",
                 [](const RunConfig& c) { return c.backbone.mode.name(); },
                 [](RunConfig& c, std::string_view v) {
                   c.backbone.mode = PaddingMode::parse(v, c.backbone.mode.amount);
                 }});
    f.push_back({"backbone", "amount", "padding amount",
                 [](const RunConfig& c) { return std::to_string(c.backbone.mode.amount); },
                 [](RunConfig& c, std::string_view v) {
                   c.backbone.mode.amount = parse_number<Index>(v);
                 }});
    f.push_back({"backbone", "realign", "resize unpadded conv outputs back to the input extent",
                 [](const RunConfig& c) { return bool_str(c.backbone.realign); },
                 [](RunConfig& c, std::string_view v) { c.backbone.realign = parse_bool(v); }});

    f.push_back({"probe", "pattern", "target map H|V|G|HS|VS",
                 [](const RunConfig& c) { return to_string(c.pattern); },
                 [](RunConfig& c, std::string_view v) { c.pattern = parse_pattern(v); }});
    f.push_back({"probe", "taps", "backbone stages fed to the readout",
                 [](const RunConfig& c) { return join(c.probe.taps); },
                 [](RunConfig& c, std::string_view v) { c.probe.taps = parse_list<int>(v); }});
    f.push_back({"probe", "align", "side every tap is resized to",
                 [](const RunConfig& c) { return std::to_string(c.probe.align); },
                 [](RunConfig& c, std::string_view v) { c.probe.align = parse_number<Index>(v); }});
    f.push_back({"probe", "readout_padding", "padding kind of the readout conv",
                 [](const RunConfig& c) { return c.probe.readout_mode.name(); },
                 [](RunConfig& c, std::string_view v) {
                   c.probe.readout_mode = PaddingMode::parse(v, c.probe.readout_mode.amount);
                 }});
    f.push_back({"probe", "readout_amount", "padding amount of the readout conv",
                 [](const RunConfig& c) { return std::to_string(c.probe.readout_mode.amount); },
                 [](RunConfig& c, std::string_view v) {
                   c.probe.readout_mode.amount = parse_number<Index>(v);
                 }});
    f.push_back({"probe", "sigma_fraction", "Gaussian target sigma over map height",
                 [](const RunConfig& c) { return format_number(c.target.sigma_fraction); },
                 [](RunConfig& c, std::string_view v) {
                   c.target.sigma_fraction = parse_number<double>(v);
                 }});
    f.push_back({"probe", "stripes", "ramps in the HS and VS targets",
                 [](const RunConfig& c) { return std::to_string(c.target.stripes); },
                 [](RunConfig& c, std::string_view v) { c.target.stripes = parse_number<Index>(v); }});
    train_fields(f, "probe", &RunConfig::probe_train);
    f.push_back(number_field("probe", "images", "training images of the readout",
                             &RunConfig::probe_images));
    f.push_back(number_field("probe", "val_images", "held-out images scored by SPC and MAE",
                             &RunConfig::probe_val_images));

    f.push_back({"grid", "k", "grid side (odd); canvas is k*patch pixels",
                 [](const RunConfig& c) { return std::to_string(c.grid.k); },
                 [](RunConfig& c, std::string_view v) { c.grid.k = parse_number<Index>(v); }});
    f.push_back({"grid", "allow_large_k", "permit k above 7",
                 [](const RunConfig& c) { return bool_str(c.allow_large_k); },
                 [](RunConfig& c, std::string_view v) { c.allow_large_k = parse_bool(v); }});
    f.push_back({"grid", "canvas", "black|white|mean|r,g,b",
                 [](const RunConfig& c) { return c.grid.canvas.name; },
                 [](RunConfig& c, std::string_view v) { c.grid.canvas = CanvasColor::parse(v); }});
    f.push_back({"grid", "task", "head used by dist-to-border and dimest: classify|segment",
                 [](const RunConfig& c) { return to_string(c.gridnet.task); },
                 [](RunConfig& c, std::string_view v) { c.gridnet.task = parse_grid_task(v); }});
    f.push_back({"grid", "padding", "padding kind of the 3x3 convs",
                 [](const RunConfig& c) { return c.gridnet.mode.name(); },
                 [](RunConfig& c, std::string_view v) {
                   c.gridnet.mode = PaddingMode::parse(v, c.gridnet.mode.amount);
                 }});
    f.push_back({"grid", "amount", "padding amount",
                 [](const RunConfig& c) { return std::to_string(c.gridnet.mode.amount); },
                 [](RunConfig& c, std::string_view v) {
                   c.gridnet.mode.amount = parse_number<Index>(v);
                 }});
    f.push_back({"grid", "residual", "shortcut connections",
                 [](const RunConfig& c) { return bool_str(c.gridnet.residual); },
                 [](RunConfig& c, std::string_view v) { c.gridnet.residual = parse_bool(v); }});
    f.push_back({"grid", "rf_limit", "blocks deeper than this use 1x1 kernels; 0 disables",
                 [](const RunConfig& c) {
                   return std::to_string(c.gridnet.rf_limit ? c.gridnet.rf_limit->depth : 0);
                 },
                 [](RunConfig& c, std::string_view v) {
                   const auto d = parse_number<Index>(v);
                   if (d > 0)
                     c.gridnet.rf_limit = RfLimit{d};
                   else
                     c.gridnet.rf_limit.reset();
                 }});
    f.push_back({"grid", "widths", "channels per block",
                 [](const RunConfig& c) { return join(c.gridnet.widths); },
                 [](RunConfig& c, std::string_view v) { c.gridnet.widths = parse_list<Index>(v); }});
    f.push_back({"grid", "downsample", "stride 2 in every second block",
                 [](const RunConfig& c) { return bool_str(c.gridnet.downsample); },
                 [](RunConfig& c, std::string_view v) { c.gridnet.downsample = parse_bool(v); }});
    f.push_back({"grid", "batchnorm", "batch normalization after each conv",
                 [](const RunConfig& c) { return bool_str(c.gridnet.batchnorm); },
                 [](RunConfig& c, std::string_view v) { c.gridnet.batchnorm = parse_bool(v); }});
    f.push_back({"grid", "align", "bilinear sampling grid: center|corner",
                 [](const RunConfig& c) { return align_str(c.gridnet.align); },
                 [](RunConfig& c, std::string_view v) {
                   c.gridnet.align = parse_align(v);
                   c.backbone.align = c.gridnet.align;
                 }});
    f.push_back(number_field("grid", "eval_batch", "batch size of evaluation sweeps",
                             &RunConfig::eval_batch));

    f.push_back({"sweep", "modes", "padding modes compared by pad-compare, kind:amount",
                 [](const RunConfig& c) { return mode_list_str(c.sweep_modes); },
                 [](RunConfig& c, std::string_view v) { c.sweep_modes = parse_mode_list(v); }});
    f.push_back({"sweep", "stages", "backbone stages probed by stage-sweep",
                 [](const RunConfig& c) { return join(c.sweep_stages); },
                 [](RunConfig& c, std::string_view v) { c.sweep_stages = parse_list<int>(v); }});

    f.push_back(number_field("dimest", "pairs", "image pairs per factor", &RunConfig::pairs));
    f.push_back({"dimest", "checkpoint", "trained grid model; empty trains one first",
                 [](const RunConfig& c) { return c.dimest_checkpoint.string(); },
                 [](RunConfig& c, std::string_view v) { c.dimest_checkpoint = std::string(v); }});

    f.push_back({"reach", "model", "layer stack mapped by reach-map: gridnet|vgg5",
                 [](const RunConfig& c) { return c.reach_model; },
                 [](RunConfig& c, std::string_view v) {
                   if (v != "gridnet" && v != "vgg5")
                     throw ArgumentError("reach model must be gridnet|vgg5");
                   c.reach_model = std::string(v);
                 }});

    f.push_back({"ring", "bands", "relative border-distance bands lo:hi in percent",
                 [](const RunConfig& c) { return band_list_str(c.bands); },
                 [](RunConfig& c, std::string_view v) { c.bands = parse_band_list(v); }});
    return f;
  }();
  return table;
}

}  // namespace

std::string to_string(Experiment e) { return kExperimentNames[static_cast<int>(e)]; }

const std::vector<Experiment>& all_experiments() {
  static const std::vector<Experiment> all{
      Experiment::Probe,        Experiment::PadCompare,   Experiment::StageSweep,
      Experiment::GridClassify, Experiment::GridSegment,  Experiment::DistToBorder,
      Experiment::RingRegion,   Experiment::Dimest,       Experiment::ReachMap};
  return all;
}

Experiment parse_experiment(std::string_view name) {
  for (Experiment e : all_experiments())
    if (to_string(e) == name) return e;
  throw ArgumentError("unknown experiment '" + std::string(name) + "'");
}

std::vector<PaddingMode> default_sweep_modes() {
  std::vector<PaddingMode> out;
  for (PadKind k : all_pad_kinds()) out.push_back(PaddingMode(k, k == PadKind::None ? 0 : 1));
  return out;
}

void RunConfig::validate() const {
  auto check_train = [](const TrainConfig& t, const char* section) {
    if (t.epochs < 0 || t.batch < 1 || t.bn_batches < 0)
      throw ArgumentError(std::string("[") + section + "] needs epochs >= 0 and batch >= 1");
    t.sgd.validate();
  };
  check_train(train, "train");
  check_train(probe_train, "probe");
  if (train_size < 1 || val_size < 1) throw ArgumentError("train_size and val_size must be >= 1");
  if (classes < 2) throw ArgumentError("need at least 2 classes");
  if (patch < 4) throw ArgumentError("patch side must be >= 4");
  if (dataset == DatasetKind::Cifar10 && classes > 10)
    throw ArgumentError("CIFAR-10 has 10 classes");
  grid.validate();
  if (grid.k > 7 && !allow_large_k)
    throw ArgumentError("k above 7 requires allow_large_k = true in [grid]");
  if (gridnet.widths.empty()) throw ArgumentError("grid widths must be nonempty");
  if (eval_batch < 1) throw ArgumentError("eval_batch must be >= 1");
  if (probe.align < 3) throw ArgumentError("probe align must be >= 3");
  for (int t : probe.taps)
    if (t < 1 || t > Vgg5::kStages) throw RangeError("probe tap outside [1,4]");
  for (int t : sweep_stages)
    if (t < 1 || t > Vgg5::kStages) throw RangeError("sweep stage outside [1,4]");
  if (probe_images < 1 || probe_val_images < 1)
    throw ArgumentError("probe image counts must be >= 1");
  if (pairs < 2) throw ArgumentError("dimest needs at least 2 pairs");
  band_membership(1, 1, bands);
  std::vector<const PaddingMode*> modes{&backbone.mode, &probe.readout_mode, &gridnet.mode};
  for (const PaddingMode& m : sweep_modes) modes.push_back(&m);
  for (const PaddingMode* m : modes)
    if (m->kind == PadKind::None && m->amount != 0)
      throw ArgumentError("padding none must have amount 0");
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  std::string section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << "# " << f.doc << '\n' << f.key << " = " << f.get(*this) << '\n';
  }
  return out.str();
}

std::filesystem::path RunConfig::resolved_data_root() const {
  if (!data_root.empty()) return data_root;
  if (const char* env = std::getenv("PADLAB_DATA")) return env;
  return {};
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::set<std::string> sections;
  for (const Field& f : fields()) sections.insert(f.section);
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string_view line = trim(raw);
    const auto where = "config line " + std::to_string(lineno) + ": ";
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ArgumentError(where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!sections.count(section)) throw ArgumentError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ArgumentError(where + "expected key = value");
    if (section.empty()) throw ArgumentError(where + "key outside any [section]");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const Field& f : fields())
      if (f.section == section && f.key == key) field = &f;
    if (!field) throw ArgumentError(where + "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second)
      throw ArgumentError(where + "duplicate key '" + key + "'");
    try {
      field->set(cfg, value);
    } catch (const std::exception& e) {
      throw ArgumentError(where + key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace padlab
