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

#include "padlab/dimest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace padlab {

std::string to_string(Factor f) {
  switch (f) {
    case Factor::Location: return "location";
    case Factor::Class: return "class";
    case Factor::Residual: return "residual";
  }
  return "?";
}

const std::vector<CanvasColor>& pair_canvases() {
  static const std::vector<CanvasColor> canvases{
      CanvasColor::black(), CanvasColor::white(), CanvasColor::mean()};
  return canvases;
}

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

template <class Pred>
std::size_t pick_where(Rng& rng, const std::vector<std::size_t>& pool, Pred ok) {
  std::vector<std::size_t> match;
  for (std::size_t i : pool)
    if (ok(i)) match.push_back(i);
  return match[pick(rng, match.size())];
}

}  // namespace

PairBatch sample_pairs(Factor factor, std::span<const LabeledPatch> dataset,
                       const GridSpec& spec, Index n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw ArgumentError("need at least one pair");
  if (dataset.empty()) throw ArgumentError("cannot draw pairs from an empty dataset");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset[i].label].push_back(i);
  if (factor == Factor::Location && by_class.size() < 2)
    throw ArgumentError("location pairs need at least two classes");
  std::vector<std::size_t> all(dataset.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  const auto& canvases = pair_canvases();
  const auto locations = static_cast<std::size_t>(spec.locations());
  Rng rng(seed);
  PairBatch batch{factor, {}};
  batch.pairs.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const std::size_t a = pick(rng, dataset.size());
    const Index la = static_cast<Index>(pick(rng, locations)) + 1;
    const std::size_t ca = pick(rng, canvases.size());
    ImagePair pair{{a, la, canvases[ca]}, {}};
    if (factor == Factor::Residual) {
      pair.b = {pick(rng, dataset.size()), static_cast<Index>(pick(rng, locations)) + 1,
                canvases[pick(rng, canvases.size())]};
    } else {
      const std::size_t cb = (ca + 1 + pick(rng, canvases.size() - 1)) % canvases.size();
      if (factor == Factor::Location) {
        const int label = dataset[a].label;
        const std::size_t b = pick_where(
            rng, all, [&](std::size_t j) { return dataset[j].label != label; });
        pair.b = {b, la, canvases[cb]};
      } else {
        const auto& same = by_class.at(dataset[a].label);
        std::size_t b = a;
        if (same.size() > 1)
          b = pick_where(rng, same, [&](std::size_t j) { return j != a; });
        const Index lb = (la + static_cast<Index>(pick(rng, locations - 1))) %
                             static_cast<Index>(locations) + 1;
        pair.b = {b, lb, canvases[cb]};
      }
    }
    batch.pairs.push_back(std::move(pair));
  }
  return batch;
}

Tensor render_draws(std::span<const GridDraw> draws,
                    std::span<const LabeledPatch> dataset, const GridSpec& spec,
                    const Normalization& norm) {
  std::vector<Tensor> images;
  images.reserve(draws.size());
  for (const GridDraw& d : draws) {
    if (d.patch >= dataset.size()) throw RangeError("draw refers to a missing patch");
    GridSpec s = spec;
    s.canvas = d.canvas;
    images.push_back(
        compose_grid_sample(dataset[d.patch].image, dataset[d.patch].label, d.location, s, norm)
            .image);
  }
  return stack_batch(images);
}

Scalar factor_correlation(const Eigen::MatrixXd& za, const Eigen::MatrixXd& zb) {
  if (za.rows() != zb.rows() || za.cols() != zb.cols())
    throw DimensionError("latent matrices differ in shape");
  if (za.rows() < 2) throw ArgumentError("factor correlation needs at least 2 pairs");
  const Eigen::MatrixXd da = za.rowwise() - za.colwise().mean();
  const Eigen::MatrixXd db = zb.rowwise() - zb.colwise().mean();
  Scalar total = 0.0;
  for (Index j = 0; j < za.cols(); ++j) {
    const Scalar vaa = da.col(j).squaredNorm();
    const Scalar vbb = db.col(j).squaredNorm();
    if (vaa <= 0.0 || vbb <= 0.0) continue;
    total += da.col(j).dot(db.col(j)) / std::sqrt(vaa * vbb);
  }
  return total;
}

Scalar factor_correlation(const Encoder& encoder, const PairBatch& batch,
                          std::span<const LabeledPatch> dataset,
                          const GridSpec& spec, const Normalization& norm,
                          Index chunk) {
  const auto n = static_cast<Index>(batch.pairs.size());
  if (n < 2) throw ArgumentError("factor correlation needs at least 2 pairs");
  if (chunk < 1) throw ArgumentError("chunk must be positive");
  Eigen::MatrixXd za, zb;
  for (Index begin = 0; begin < n; begin += chunk) {
    const Index count = std::min(chunk, n - begin);
    std::vector<GridDraw> da, db;
    for (Index i = begin; i < begin + count; ++i) {
      da.push_back(batch.pairs[static_cast<std::size_t>(i)].a);
      db.push_back(batch.pairs[static_cast<std::size_t>(i)].b);
    }
    const Eigen::MatrixXd ea = encoder(render_draws(da, dataset, spec, norm));
    const Eigen::MatrixXd eb = encoder(render_draws(db, dataset, spec, norm));
    if (ea.rows() != count || eb.rows() != count)
      throw DimensionError("encoder must return one row per image");
    if (begin == 0) {
      za.resize(n, ea.cols());
      zb.resize(n, eb.cols());
    }
    za.middleRows(begin, count) = ea;
    zb.middleRows(begin, count) = eb;
  }
  return factor_correlation(za, zb);
}

std::vector<Index> allocate_dims(std::span<const Scalar> scores, Index total) {
  if (total < 1) throw ArgumentError("total dimension must be >= 1");
  if (scores.empty()) throw ArgumentError("need at least one factor score");
  for (Scalar s : scores)
    if (!std::isfinite(s)) throw ArgumentError("factor scores must be finite");
  const Scalar top = *std::max_element(scores.begin(), scores.end());
  std::vector<Scalar> e;
  Scalar z = 0.0;
  for (Scalar s : scores) {
    e.push_back(std::exp(s - top));
    z += e.back();
  }
  std::vector<Index> alloc;
  for (Scalar v : e) {
    const Scalar share = v / z * static_cast<Scalar>(total);
    alloc.push_back(static_cast<Index>(std::floor(share + 1e-9)));
  }
  return alloc;
}

namespace {

Eigen::MatrixXd spatial_mean(const Tensor& f) {
  Eigen::MatrixXd z(f.n(), f.c());
  for (Index n = 0; n < f.n(); ++n)
    for (Index c = 0; c < f.c(); ++c) z(n, c) = f.plane(n, c).mean();
  return z;
}

}  // namespace

Eigen::MatrixXd latent_of(GridNet& model, const Tensor& images) {
  Tape tape(false);
  return spatial_mean(model.features(tape, make_const(images), false)->value);
}

Eigen::MatrixXd latent_of(Vgg5& model, const Tensor& images) {
  Tape tape(false);
  return spatial_mean(model.stages(tape, make_const(images), false).back()->value);
}

Scalar FactorReport::percent(Factor f) const {
  const auto i = static_cast<std::size_t>(f);
  if (total < 1 || i >= alloc.size()) return 0.0;
  return 100.0 * static_cast<Scalar>(alloc[i]) / static_cast<Scalar>(total);
}

FactorReport estimate_dimensions(const Encoder& encoder, Index latent_dim,
                                 std::span<const LabeledPatch> dataset,
                                 const GridSpec& spec, Index pairs,
                                 std::uint64_t seed, const Normalization& norm) {
  FactorReport report;
  report.total = latent_dim;
  for (Factor f : {Factor::Location, Factor::Class, Factor::Residual}) {
    const auto i = static_cast<std::uint64_t>(f);
    const PairBatch batch = sample_pairs(f, dataset, spec, pairs, seed + 7919 * (i + 1));
    report.scores[i] = factor_correlation(encoder, batch, dataset, spec, norm);
  }
  report.alloc = allocate_dims(report.scores, latent_dim);
  return report;
}

}  // namespace padlab
