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

// Acceptance suite. Each argument is a criterion number; every criterion
// prints one PASS/FAIL line with the measured values. The process exits
// nonzero when any requested criterion fails.
//
// Trained-model criteria write their run directories below
// $PADLAB_ACCEPTANCE_DIR (default: <tmp>/padlab_acceptance).

#include <array>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "padlab/checkpoint.hpp"
#include "padlab/experiments.hpp"
#include "support.hpp"

namespace padlab {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kSeeds[] = {0, 1, 2};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(Scalar v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string list(const std::vector<Scalar>& v, int digits = 4) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + num(v[i], digits);
  return out + "]";
}

Scalar mean_of(const std::vector<Scalar>& v) {
  Scalar s = 0.0;
  for (Scalar x : v) s += x;
  return s / static_cast<Scalar>(v.size());
}

fs::path work_root() {
  if (const char* env = std::getenv("PADLAB_ACCEPTANCE_DIR"); env && *env) return env;
  return fs::temp_directory_path() / "padlab_acceptance";
}

// ---------------------------------------------------------------------------
// 1, 2, 10, 11: exact properties
// ---------------------------------------------------------------------------

Outcome gradients() {
  constexpr int kInstances = 20;
  constexpr Scalar kTolerance = 1e-4;
  Scalar worst = 0.0;
  std::string worst_case;
  int failures = 0;
  for (const auto& c : testing::gradient_cases())
    for (int i = 0; i < kInstances; ++i) {
      const Scalar e = c.run(1000 + static_cast<std::uint64_t>(i));
      if (!(e < kTolerance)) ++failures;
      if (!(e <= worst)) {
        worst = e;
        worst_case = c.name;
      }
    }
  std::ostringstream d;
  d << testing::gradient_cases().size() << " ops x " << kInstances
    << " instances, worst relative error " << std::scientific << std::setprecision(2) << worst
    << " (" << worst_case << "), " << failures << " above 1e-4";
  return {failures == 0, d.str()};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(77);
  const std::vector<Band> bands{{0, 20}, {20, 50}, {50, 100}};
  int mismatches = 0;
  Scalar worst = 0.0;
  auto close = [&](Scalar a, Scalar b) {
    const Scalar e = std::abs(a - b);
    worst = std::max(worst, e);
    if (!(e <= 1e-12)) ++mismatches;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 40);
    std::vector<Scalar> a, b;
    for (Index i = 0; i < n; ++i) {
      a.push_back(static_cast<Scalar>(rng() % 5));
      b.push_back(std::uniform_real_distribution<>(-1, 1)(rng));
    }
    if (average_ranks(a) != testing::oracle_ranks(a)) ++mismatches;
    if (average_ranks(b) != testing::oracle_ranks(b)) ++mismatches;
    close(spearman(a, b), testing::oracle_spearman(a, b));
    close(mae(a, b), testing::oracle_mae(a, b));

    const int classes = 2 + static_cast<int>(rng() % 4);
    const Index h = 1 + static_cast<Index>(rng() % 12), w = 1 + static_cast<Index>(rng() % 12);
    Tensor p(1, 1, h, w), g(1, 1, h, w);
    std::vector<int> pv, gv;
    for (Index i = 0; i < h * w; ++i) {
      pv.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(classes)));
      gv.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(classes)));
      p[i] = pv.back();
      g[i] = gv.back();
    }
    close(miou(p, g, classes), *testing::oracle_miou(pv, gv, classes));
    const auto got = ring_region_miou(p, g, classes, bands);
    const auto want = testing::oracle_ring_region(pv, gv, h, w, classes, bands);
    for (std::size_t i = 0; i < bands.size(); ++i) {
      if (got[i].has_value() != want[i].has_value()) ++mismatches;
      else if (got[i]) close(*got[i], *want[i]);
    }

    const Index k = 3 + 2 * static_cast<Index>(rng() % 5);
    LocationTable t{k, {}};
    for (Index i = 0; i < k * k; ++i)
      t.values.push_back(std::uniform_real_distribution<>(0, 1)(rng));
    const RingReport rings = distance_rings(t);
    const auto oracle = testing::oracle_rings(t.values, k);
    if (rings.distances.size() != oracle.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t i = 0; i < rings.distances.size(); ++i) {
      const auto& [m, count] = oracle.at(rings.distances[i]);
      if (rings.counts[i] != count) ++mismatches;
      close(rings.means[i], m);
    }
  }
  std::ostringstream d;
  d << "200 instances of spearman, mae, miou, distance_rings, ring_region_miou: " << mismatches
    << " mismatches, worst float gap " << std::scientific << std::setprecision(2) << worst;
  return {mismatches == 0, d.str()};
}

Outcome partial_constant() {
  std::mt19937_64 rng(31);
  Scalar worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index k = 3 + 2 * static_cast<Index>(rng() % 3);
    const Index amount =
        1 + static_cast<Index>(rng() % static_cast<std::uint64_t>((k - 1) / 2));
    const Index cin = 1 + static_cast<Index>(rng() % 3);
    const Index h = k + static_cast<Index>(rng() % 8), w = k + static_cast<Index>(rng() % 8);
    const Index stride = 1 + static_cast<Index>(rng() % 2);
    Tape tape(false);
    const Var y = conv2d(tape, make_const(Tensor(1, cin, h, w, 1.0)),
                         make_const(Tensor(1, cin, k, k, 1.0)), nullptr,
                         PaddingMode::partial(amount), stride);
    worst = std::max(worst, y->value.data().maxCoeff() - y->value.data().minCoeff());
  }
  std::ostringstream d;
  d << "20 geometries, worst max-min " << std::scientific << std::setprecision(2) << worst;
  return {worst < 1e-9, d.str()};
}

Outcome rf_restriction() {
  GridNetConfig c;
  c.classes = 4;
  c.widths = {4, 4, 6, 6, 8, 8};
  c.rf_limit = RfLimit{2};
  GridNet net = GridNet::build(c, 21);
  constexpr Index kSide = 48;
  std::mt19937_64 rng(22);
  const Tensor x = testing::random_tensor({1, 3, kSide, kSide}, rng);
  Tape tape(false);
  const Tensor base = net.features(tape, make_const(x), false)->value;
  int changed = 0, reached = 0;
  Scalar largest = 0.0;
  for (int probe = 0; probe < 50; ++probe) {
    const Index oy = static_cast<Index>(rng() % static_cast<std::uint64_t>(base.h()));
    const Index ox = static_cast<Index>(rng() % static_cast<std::uint64_t>(base.w()));
    const Span1 ry = net.receptive_field(oy), rx = net.receptive_field(ox);
    Index py, px;
    do {
      py = static_cast<Index>(rng() % kSide);
      px = static_cast<Index>(rng() % kSide);
    } while (py >= ry.lo && py <= ry.hi && px >= rx.lo && px <= rx.hi);
    Tensor y = x;
    y(0, static_cast<Index>(rng() % 3), py, px) += 3.0;
    const Tensor out = net.features(tape, make_const(y), false)->value;
    bool moved = false;
    for (Index ch = 0; ch < out.c(); ++ch) {
      const Scalar diff = std::abs(out(0, ch, oy, ox) - base(0, ch, oy, ox));
      largest = std::max(largest, diff);
      moved = moved || diff != 0.0;
    }
    changed += moved;

    // Control: the centre of the field does reach the unit.
    Tensor z = x;
    z(0, 0, (ry.lo + ry.hi) / 2, (rx.lo + rx.hi) / 2) += 3.0;
    const Tensor inside = net.features(tape, make_const(z), false)->value;
    for (Index ch = 0; ch < out.c(); ++ch)
      if (inside(0, ch, oy, ox) != base(0, ch, oy, ox)) {
        ++reached;
        break;
      }
  }
  std::ostringstream d;
  d << "50 probes outside the field, " << changed << " changed the unit, largest change "
    << largest << "; centre-of-field control moved " << reached << "/50";
  return {changed == 0 && reached > 0, d.str()};
}

// ---------------------------------------------------------------------------
// 3, 4: probe without backbone
// ---------------------------------------------------------------------------

RunConfig probe_only_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.dataset = DatasetKind::Synthetic;
  cfg.train_size = 10;
  cfg.val_size = 10;
  cfg.use_backbone = false;
  cfg.pattern = Pattern::H;
  cfg.probe_images = 500;
  cfg.probe_val_images = 100;
  cfg.probe_train.sgd.learning_rate = 0.05;
  return cfg;
}

Scalar probe_only_spc(const PaddingMode& mode, std::uint64_t seed) {
  const RunConfig cfg = probe_only_config(seed);
  const Datasets data = load_datasets(cfg);
  return train_probe(nullptr, {}, mode, cfg, data).spc;
}

Outcome probe_null() {
  std::vector<Scalar> spc;
  for (std::uint64_t s : kSeeds) spc.push_back(probe_only_spc(PaddingMode::none(), s));
  const Scalar m = mean_of(spc);
  return {std::abs(m) < 0.2, "no backbone, no padding: mean SPC " + num(m) + " per seed " +
                                 list(spc) + ", need |SPC| < 0.2"};
}

Outcome probe_padding_amount() {
  std::vector<Scalar> means;
  std::string detail = "mean SPC by padding amount:";
  for (Index amount : {0, 1, 2}) {
    const PaddingMode mode = amount == 0 ? PaddingMode::none() : PaddingMode::zero(amount);
    std::vector<Scalar> spc;
    for (std::uint64_t s : kSeeds) spc.push_back(probe_only_spc(mode, s));
    means.push_back(mean_of(spc));
    detail += " " + std::to_string(amount) + "=" + num(means.back()) + " " + list(spc, 3);
  }
  const bool pass = means[1] - means[0] >= 0.05 && means[2] - means[1] >= 0.05;
  return {pass, detail + ", need steps >= 0.05"};
}

// ---------------------------------------------------------------------------
// 5, 6: trained VGG-5 backbones
// ---------------------------------------------------------------------------

RunConfig backbone_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.dataset = DatasetKind::Synthetic;
  cfg.train_size = 1000;
  cfg.val_size = 100;
  cfg.train.epochs = 6;
  cfg.backbone.input = 32;
  cfg.backbone.widths = {16, 32, 64, 128};
  cfg.pattern = Pattern::H;
  cfg.probe_images = 300;
  cfg.probe_val_images = 100;
  cfg.probe_train.sgd.learning_rate = 0.05;
  return cfg;
}

struct BackboneRuns {
  std::map<std::pair<std::string, std::uint64_t>, Vgg5> nets;
  std::map<std::uint64_t, Datasets> data;

  const Datasets& dataset(std::uint64_t seed) {
    auto it = data.find(seed);
    if (it == data.end()) it = data.emplace(seed, load_datasets(backbone_config(seed))).first;
    return it->second;
  }

  Vgg5& net(const PaddingMode& mode, std::uint64_t seed) {
    const auto key = std::make_pair(mode.name() + std::to_string(mode.amount), seed);
    auto it = nets.find(key);
    if (it == nets.end()) {
      const RunConfig cfg = backbone_config(seed);
      it = nets.emplace(key, train_backbone(cfg, mode, dataset(seed))).first;
      const fs::path dir = work_root() / "backbones";
      fs::create_directories(dir);
      save_checkpoint(dir / (key.first + "_seed" + std::to_string(seed) + ".ckpt"),
                      it->second.state());
    }
    return it->second;
  }

  Scalar spc(const PaddingMode& mode, const std::vector<int>& taps, std::uint64_t seed) {
    const RunConfig cfg = backbone_config(seed);
    Vgg5& backbone = net(mode, seed);
    return train_probe(&backbone, taps, cfg.probe.readout_mode, cfg, dataset(seed)).spc;
  }
};

BackboneRuns& backbone_runs() {
  static BackboneRuns runs;
  return runs;
}

Outcome padding_type_order() {
  const std::vector<PaddingMode> modes{PaddingMode::zero(1), PaddingMode::circular(1),
                                       PaddingMode::reflect(1), PaddingMode::none()};
  const std::vector<int> taps = backbone_config(0).probe.taps;
  std::map<std::string, Scalar> mean;
  std::string detail = "mean SPC:";
  for (const PaddingMode& mode : modes) {
    std::vector<Scalar> spc;
    for (std::uint64_t s : kSeeds) spc.push_back(backbone_runs().spc(mode, taps, s));
    mean[mode.name()] = mean_of(spc);
    detail += " " + mode.name() + "=" + num(mean_of(spc)) + " " + list(spc, 3);
  }
  const bool pass =
      mean["zero"] - mean["reflect"] >= 0.05 && mean["zero"] - mean["none"] >= 0.05;
  return {pass, detail + ", need zero above reflect and none by >= 0.05 (circular not gated)"};
}

Outcome stage_trend() {
  std::vector<Scalar> shallow, deep;
  for (std::uint64_t s : kSeeds) {
    shallow.push_back(backbone_runs().spc(PaddingMode::zero(1), {1}, s));
    deep.push_back(backbone_runs().spc(PaddingMode::zero(1), {Vgg5::kStages}, s));
  }
  const Scalar gap = mean_of(deep) - mean_of(shallow);
  return {gap >= 0.1, "zero-pad backbone, mean SPC stage 1 " + num(mean_of(shallow)) + " " +
                          list(shallow, 3) + ", stage " + std::to_string(Vgg5::kStages) +
                          " " + num(mean_of(deep)) + " " + list(deep, 3) + ", gain " +
                          num(gap) + ", need >= 0.1"};
}

// ---------------------------------------------------------------------------
// 7, 8, 9: grid classification
// ---------------------------------------------------------------------------

RunConfig grid_config(Index k, const CanvasColor& canvas, const PaddingMode& mode,
                      std::uint64_t seed) {
  RunConfig cfg;
  cfg.experiment = Experiment::DistToBorder;
  cfg.seed = seed;
  cfg.dataset = DatasetKind::Synthetic;
  cfg.train_size = 1000;
  cfg.val_size = 100;
  cfg.patch = 10;
  cfg.train.epochs = 6;
  cfg.train.batch = 16;
  cfg.train.sgd.learning_rate = 0.05;
  cfg.grid.k = k;
  cfg.grid.canvas = canvas;
  cfg.gridnet.mode = mode;
  cfg.gridnet.widths = {16, 16, 32, 32, 64, 64};
  cfg.out = work_root() / "grid" /
            ("k" + std::to_string(k) + "_" + canvas.name + "_" + mode.name() + "_seed" +
             std::to_string(seed));
  return cfg;
}

// Runs (or reuses, when its summary exists) one grid configuration and
// returns its run directory.
fs::path grid_run(Index k, const CanvasColor& canvas, const PaddingMode& mode,
                  std::uint64_t seed) {
  const RunConfig cfg = grid_config(k, canvas, mode, seed);
  const fs::path done = cfg.out / "summary.csv";
  if (fs::exists(done) && fs::exists(cfg.out / "model.ckpt")) {
    std::ifstream in(cfg.out / "config.ini");
    std::stringstream text;
    text << in.rdbuf();
    if (text.str() == cfg.echo()) return cfg.out;
  }
  fs::remove_all(cfg.out);
  run_experiment(cfg);
  return cfg.out;
}

Scalar grid_mean(Index k, const CanvasColor& canvas, const PaddingMode& mode,
                 std::uint64_t seed) {
  const CsvTable s = CsvTable::load(grid_run(k, canvas, mode, seed) / "summary.csv");
  return std::stod(s.rows().at(0).back());
}

// Percentage-point drop from k = 3 to k = 7, averaged over seeds.
Scalar grid_drop(const CanvasColor& canvas, const PaddingMode& mode, std::string& detail) {
  std::vector<Scalar> a3, a7;
  for (std::uint64_t s : kSeeds) {
    a3.push_back(grid_mean(3, canvas, mode, s));
    a7.push_back(grid_mean(7, canvas, mode, s));
  }
  const Scalar drop = 100.0 * (mean_of(a3) - mean_of(a7));
  detail += " " + mode.name() + "/" + canvas.name + " k3 " + num(mean_of(a3), 3) + " k7 " +
            num(mean_of(a7), 3) + " drop " + num(drop, 2) + ";";
  return drop;
}

Outcome canvas_interaction() {
  std::string detail;
  const Scalar white = grid_drop(CanvasColor::white(), PaddingMode::none(), detail);
  const Scalar black = grid_drop(CanvasColor::black(), PaddingMode::none(), detail);
  const Scalar zero_white = grid_drop(CanvasColor::white(), PaddingMode::zero(1), detail);
  const bool pass = white - black >= 5.0 && zero_white <= 0.5 * white;
  return {pass, "accuracy over 3 seeds:" + detail + " need white-black drop gap >= 5 (got " +
                    num(white - black, 2) + ") and zero/white drop <= " +
                    num(0.5 * white, 2)};
}

// Ring means of the k = 7 white-canvas runs, averaged over seeds.
std::vector<Scalar> mean_rings(const PaddingMode& mode) {
  std::vector<Scalar> sum;
  for (std::uint64_t s : kSeeds) {
    const CsvTable t =
        CsvTable::load(grid_run(7, CanvasColor::white(), mode, s) / "rings.csv");
    sum.resize(t.rows().size(), 0.0);
    for (std::size_t i = 0; i < t.rows().size(); ++i) sum[i] += std::stod(t.rows()[i].at(2));
  }
  for (Scalar& v : sum) v /= static_cast<Scalar>(std::size(kSeeds));
  return sum;
}

Outcome border_shape() {
  const std::vector<Scalar> nopad = mean_rings(PaddingMode::none());
  const std::vector<Scalar> padded = mean_rings(PaddingMode::zero(1));
  const bool minimum = *std::min_element(nopad.begin(), nopad.end()) == nopad.front();
  const Scalar edge = padded.front() - nopad.front();
  const Scalar center = padded.back() - nopad.back();
  return {minimum && edge > center,
          "no-pad white k=7 rings d=0..3 " + list(nopad, 3) + ", zero-pad " + list(padded, 3) +
              ", padded minus no-pad at d=0 " + num(edge, 3) + " vs center " + num(center, 3)};
}

struct Allocation {
  Index location = 0;
  std::array<Scalar, 3> scores{};
  bool affine_stable = true;
};

// Location dims of one trained black k = 7 classifier, plus whether a
// per-dimension affine rescaling of its latents changes any allocation.
Allocation location_dims(const PaddingMode& mode, std::uint64_t seed) {
  const RunConfig cfg = grid_config(7, CanvasColor::black(), mode, seed);
  const fs::path dir = grid_run(7, CanvasColor::black(), mode, seed);
  GridNet net = GridNet::build(gridnet_config(cfg), 0);
  net.load_state(load_checkpoint(dir / "model.ckpt"));
  const Datasets data = load_datasets(cfg);
  GridSpec spec = cfg.grid;
  spec.patch = cfg.patch;
  constexpr Index kPairs = 1024;

  std::vector<Eigen::MatrixXd> seen;
  const Encoder plain = [&](const Tensor& x) {
    seen.push_back(latent_of(net, x));
    return seen.back();
  };
  const FactorReport base =
      estimate_dimensions(plain, net.latent_dim(), data.val, spec, kPairs, seed + 40);

  std::mt19937_64 rng(seed + 41);
  Eigen::RowVectorXd scale(net.latent_dim()), shift(net.latent_dim());
  for (Index j = 0; j < net.latent_dim(); ++j) {
    scale(j) = std::uniform_real_distribution<>(0.1, 10.0)(rng);
    shift(j) = std::uniform_real_distribution<>(-5.0, 5.0)(rng);
  }
  std::size_t next = 0;
  const Encoder rescaled = [&](const Tensor&) {
    Eigen::MatrixXd z = seen.at(next++);
    for (Index r = 0; r < z.rows(); ++r) z.row(r) = z.row(r).cwiseProduct(scale) + shift;
    return z;
  };
  const FactorReport again =
      estimate_dimensions(rescaled, net.latent_dim(), data.val, spec, kPairs, seed + 40);
  return {base.alloc[0], base.scores, again.alloc == base.alloc};
}

Outcome dimensionality() {
  std::vector<Scalar> zero, none;
  std::array<Scalar, 3> zero_scores{}, none_scores{};
  bool stable = true;
  for (std::uint64_t s : kSeeds) {
    const Allocation z = location_dims(PaddingMode::zero(1), s);
    const Allocation n = location_dims(PaddingMode::none(), s);
    zero.push_back(static_cast<Scalar>(z.location));
    none.push_back(static_cast<Scalar>(n.location));
    for (std::size_t f = 0; f < 3; ++f) {
      zero_scores[f] += z.scores[f] / static_cast<Scalar>(std::size(kSeeds));
      none_scores[f] += n.scores[f] / static_cast<Scalar>(std::size(kSeeds));
    }
    stable = stable && z.affine_stable && n.affine_stable;
  }
  auto scores = [](const std::array<Scalar, 3>& c) {
    return list(std::vector<Scalar>(c.begin(), c.end()), 2);
  };
  const bool pass = mean_of(zero) > mean_of(none) && stable;
  return {pass, "black k=7 location dims, zero-pad " + list(zero, 0) + " mean " +
                    num(mean_of(zero), 2) + ", no-pad " + list(none, 0) + " mean " +
                    num(mean_of(none), 2) + ", mean (location, class, residual) scores " +
                    scores(zero_scores) + " vs " + scores(none_scores) + ", affine rescaling " +
                    (stable ? "kept every allocation" : "changed an allocation")};
}

const std::map<int, std::function<Outcome()>>& criteria() {
  static const std::map<int, std::function<Outcome()>> table{
      {1, gradients},           {2, metric_oracles},     {3, probe_null},
      {4, probe_padding_amount}, {5, padding_type_order}, {6, stage_trend},
      {7, canvas_interaction},  {8, border_shape},       {9, dimensionality},
      {10, partial_constant},   {11, rf_restriction},
  };
  return table;
}

}  // namespace
}  // namespace padlab

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  if (wanted.empty())
    for (const auto& [n, fn] : padlab::criteria()) wanted.push_back(n);
  int failed = 0;
  for (int n : wanted) {
    const auto it = padlab::criteria().find(n);
    if (it == padlab::criteria().end()) {
      std::cerr << "unknown criterion " << n << '\n';
      return 2;
    }
    const auto start = std::chrono::steady_clock::now();
    padlab::Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << "  [" << std::fixed << std::setprecision(1) << secs << " s]" << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
