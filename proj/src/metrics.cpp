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

#include "padlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "padlab/autodiff.hpp"

namespace padlab {

std::vector<Scalar> average_ranks(std::span<const Scalar> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<Scalar> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 (0-based) share rank mean((i+1)..j).
    const Scalar rank = 0.5 * static_cast<Scalar>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

namespace {

void check_pair(std::size_t a, std::size_t b) {
  if (a != b)
    throw DimensionError("metric inputs differ in size: " + std::to_string(a) +
                         " vs " + std::to_string(b));
}

std::span<const Scalar> flat(const Tensor& t) {
  return {t.ptr(), static_cast<std::size_t>(t.numel())};
}

}  // namespace

Scalar spearman(std::span<const Scalar> pred, std::span<const Scalar> gt) {
  check_pair(pred.size(), gt.size());
  if (pred.size() < 2) throw ArgumentError("spearman needs at least 2 values");
  const auto rp = average_ranks(pred);
  const auto rg = average_ranks(gt);
  const Eigen::Map<const Eigen::ArrayXd> a(rp.data(), static_cast<Index>(rp.size()));
  const Eigen::Map<const Eigen::ArrayXd> b(rg.data(), static_cast<Index>(rg.size()));
  const Eigen::ArrayXd da = a - a.mean();
  const Eigen::ArrayXd db = b - b.mean();
  const Scalar saa = da.square().sum();
  const Scalar sbb = db.square().sum();
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  const Scalar r = (da * db).sum() / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

Scalar spearman(const Tensor& pred, const Tensor& gt) {
  return spearman(flat(pred), flat(gt));
}

Scalar mae(std::span<const Scalar> pred, std::span<const Scalar> gt) {
  check_pair(pred.size(), gt.size());
  if (pred.empty()) throw ArgumentError("mae of empty maps");
  Scalar s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - gt[i]);
  return s / static_cast<Scalar>(pred.size());
}

Scalar mae(const Tensor& pred, const Tensor& gt) { return mae(flat(pred), flat(gt)); }

int argmax_channel(const Tensor& logits, Index n, Index y, Index x) {
  int best = 0;
  for (Index c = 1; c < logits.c(); ++c)
    if (logits(n, c, y, x) > logits(n, best, y, x)) best = static_cast<int>(c);
  return best;
}

Scalar accuracy(const Tensor& logits, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != logits.n())
    throw DimensionError("accuracy: label count != batch size");
  if (labels.empty()) return 0.0;
  Index hits = 0;
  for (Index n = 0; n < logits.n(); ++n)
    hits += argmax_channel(logits, n, 0, 0) == labels[static_cast<std::size_t>(n)];
  return static_cast<Scalar>(hits) / static_cast<Scalar>(labels.size());
}

Tensor argmax_labels(const Tensor& logits) {
  Tensor out(logits.n(), 1, logits.h(), logits.w());
  for (Index n = 0; n < logits.n(); ++n)
    for (Index y = 0; y < logits.h(); ++y)
      for (Index x = 0; x < logits.w(); ++x)
        out(n, 0, y, x) = argmax_channel(logits, n, y, x);
  return out;
}

ConfusionCounts::ConfusionCounts(int num_classes)
    : num_classes_(num_classes),
      counts_(Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>::Zero(
          num_classes, num_classes)) {
  if (num_classes < 1) throw ArgumentError("need at least one class");
}

void ConfusionCounts::add(int pred, int gt) {
  if (pred < 0 || pred >= num_classes_ || gt < 0 || gt >= num_classes_)
    throw RangeError("label outside [0," + std::to_string(num_classes_) + ")");
  ++counts_(gt, pred);
}

void ConfusionCounts::add(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape())
    throw DimensionError("label maps differ: " + to_string(pred.shape()) + " vs " +
                         to_string(gt.shape()));
  for (Index i = 0; i < pred.numel(); ++i)
    add(static_cast<int>(std::lround(pred[i])), static_cast<int>(std::lround(gt[i])));
}

std::optional<Scalar> ConfusionCounts::iou(int c) const {
  const long long inter = counts_(c, c);
  const long long uni = counts_.row(c).sum() + counts_.col(c).sum() - inter;
  if (uni == 0) return std::nullopt;
  return static_cast<Scalar>(inter) / static_cast<Scalar>(uni);
}

std::optional<Scalar> ConfusionCounts::miou() const {
  Scalar s = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes_; ++c)
    if (auto v = iou(c)) {
      s += *v;
      ++present;
    }
  if (present == 0) return std::nullopt;
  return s / present;
}

long long ConfusionCounts::total() const { return counts_.sum(); }

Scalar miou(const Tensor& pred, const Tensor& gt, int num_classes) {
  ConfusionCounts counts(num_classes);
  counts.add(pred, gt);
  return counts.miou().value_or(0.0);
}

Scalar LocationTable::at(Index location) const {
  if (location < 1 || location > static_cast<Index>(values.size()))
    throw RangeError("location outside table");
  return values[static_cast<std::size_t>(location - 1)];
}

Scalar LocationTable::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<Scalar>(values.size());
}

LocationTable per_location_eval(Index k, const std::function<Scalar(Index)>& metric) {
  LocationTable table{k, {}};
  table.values.reserve(static_cast<std::size_t>(k * k));
  for (Index l = 1; l <= k * k; ++l) table.values.push_back(metric(l));
  return table;
}

LocationTable per_location_eval(const Predictor& predict,
                                std::span<const LabeledPatch> dataset,
                                const GridSpec& spec, LocationMetric metric,
                                int num_classes, const Normalization& norm,
                                Index batch) {
  spec.validate();
  if (dataset.empty()) throw ArgumentError("empty evaluation set");
  if (batch < 1) throw ArgumentError("batch must be positive");
  return per_location_eval(spec.k, [&](Index location) {
    Index hits = 0;
    ConfusionCounts counts(num_classes);
    for (std::size_t begin = 0; begin < dataset.size();
         begin += static_cast<std::size_t>(batch)) {
      const std::size_t end =
          std::min(dataset.size(), begin + static_cast<std::size_t>(batch));
      std::vector<Tensor> images, labels;
      std::vector<int> classes;
      for (std::size_t i = begin; i < end; ++i) {
        GridSample s = compose_grid_sample(dataset[i].image, dataset[i].label,
                                           location, spec, norm);
        images.push_back(std::move(s.image));
        labels.push_back(std::move(s.seg_labels));
        classes.push_back(dataset[i].label);
      }
      const Tensor logits = predict(stack_batch(images));
      if (metric == LocationMetric::Accuracy) {
        for (Index n = 0; n < logits.n(); ++n)
          hits += argmax_channel(logits, n, 0, 0) == classes[static_cast<std::size_t>(n)];
      } else {
        counts.add(argmax_labels(logits), stack_batch(labels));
      }
    }
    if (metric == LocationMetric::Accuracy)
      return static_cast<Scalar>(hits) / static_cast<Scalar>(dataset.size());
    return counts.miou().value_or(0.0);
  });
}

Scalar RingReport::weighted_mean() const {
  Scalar s = 0.0;
  Index n = 0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    s += means[i] * static_cast<Scalar>(counts[i]);
    n += counts[i];
  }
  return n ? s / static_cast<Scalar>(n) : 0.0;
}

RingReport distance_rings(const LocationTable& table) {
  const Index k = table.k;
  if (static_cast<Index>(table.values.size()) != k * k)
    throw DimensionError("location table does not hold k^2 values");
  const Index rings = (k - 1) / 2 + 1;
  RingReport report;
  std::vector<Scalar> sums(static_cast<std::size_t>(rings), 0.0);
  report.counts.assign(static_cast<std::size_t>(rings), 0);
  for (Index l = 1; l <= k * k; ++l) {
    const auto d = static_cast<std::size_t>(border_distance(l, k));
    sums[d] += table.values[static_cast<std::size_t>(l - 1)];
    ++report.counts[d];
  }
  for (Index d = 0; d < rings; ++d) {
    const auto i = static_cast<std::size_t>(d);
    report.distances.push_back(d);
    report.means.push_back(sums[i] / static_cast<Scalar>(report.counts[i]));
  }
  return report;
}

std::vector<int> band_membership(Index h, Index w, std::span<const Band> bands) {
  for (const Band& b : bands)
    if (b.lo < 0.0 || b.hi > 100.0 || b.lo > b.hi)
      throw ArgumentError("bands must satisfy 0 <= lo <= hi <= 100");
  const Scalar half = 0.5 * static_cast<Scalar>(std::min(h, w));
  std::vector<int> member(static_cast<std::size_t>(h * w), -1);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const Index d = std::min({y, x, h - 1 - y, w - 1 - x});
      const Scalar pct = std::min(1.0, static_cast<Scalar>(d) / half) * 100.0;
      for (std::size_t b = 0; b < bands.size(); ++b) {
        const bool in = (pct > bands[b].lo && pct <= bands[b].hi) ||
                        (bands[b].lo == 0.0 && pct == 0.0);
        if (in) {
          member[static_cast<std::size_t>(y * w + x)] = static_cast<int>(b);
          break;
        }
      }
    }
  return member;
}

RingRegionAccumulator::RingRegionAccumulator(int num_classes, std::vector<Band> bands)
    : num_classes_(num_classes), bands_(std::move(bands)) {
  band_membership(1, 1, bands_);  // validates
  counts_.assign(bands_.size(), ConfusionCounts(num_classes));
}

void RingRegionAccumulator::add(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape())
    throw DimensionError("label maps differ: " + to_string(pred.shape()) + " vs " +
                         to_string(gt.shape()));
  const auto member = band_membership(pred.h(), pred.w(), bands_);
  for (Index n = 0; n < pred.n(); ++n)
    for (Index y = 0; y < pred.h(); ++y)
      for (Index x = 0; x < pred.w(); ++x) {
        const int b = member[static_cast<std::size_t>(y * pred.w() + x)];
        if (b < 0) continue;
        counts_[static_cast<std::size_t>(b)].add(
            static_cast<int>(std::lround(pred(n, 0, y, x))),
            static_cast<int>(std::lround(gt(n, 0, y, x))));
      }
}

std::vector<std::optional<Scalar>> RingRegionAccumulator::miou() const {
  std::vector<std::optional<Scalar>> out;
  for (const ConfusionCounts& c : counts_) out.push_back(c.miou());
  return out;
}

std::vector<std::optional<Scalar>> ring_region_miou(const Tensor& pred,
                                                    const Tensor& gt,
                                                    int num_classes,
                                                    std::span<const Band> bands) {
  RingRegionAccumulator acc(num_classes, {bands.begin(), bands.end()});
  acc.add(pred, gt);
  return acc.miou();
}

}  // namespace padlab
