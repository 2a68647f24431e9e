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
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "padlab/synth.hpp"
#include "padlab/tensor.hpp"

namespace padlab {

/// 1-based ranks; tied values share the mean of their positions.
std::vector<Scalar> average_ranks(std::span<const Scalar> values);

/// Spearman rank correlation: Pearson correlation of average ranks. Returns
/// 0 when either side is constant. Throws DimensionError on a size mismatch
/// and ArgumentError for fewer than two values.
Scalar spearman(std::span<const Scalar> pred, std::span<const Scalar> gt);
Scalar spearman(const Tensor& pred, const Tensor& gt);

/// Mean absolute difference.
Scalar mae(std::span<const Scalar> pred, std::span<const Scalar> gt);
Scalar mae(const Tensor& pred, const Tensor& gt);

/// Index of the largest channel; ties resolve to the lowest index.
int argmax_channel(const Tensor& logits, Index n, Index y, Index x);

/// Fraction of samples whose argmax logit equals the label; logits
/// (n,C,1,1).
Scalar accuracy(const Tensor& logits, std::span<const int> labels);

/// Per-pixel argmax labels (n,1,h,w) of (n,C,h,w) logits.
Tensor argmax_labels(const Tensor& logits);

/// Pixel confusion counts for IoU-style metrics.
class ConfusionCounts {
 public:
  explicit ConfusionCounts(int num_classes);

  /// Adds every pixel of two (n,1,h,w) label maps. Throws RangeError for a
  /// label outside [0, num_classes).
  void add(const Tensor& pred, const Tensor& gt);
  void add(int pred, int gt);

  /// IoU of class c, or nullopt when c is absent from both pred and gt.
  std::optional<Scalar> iou(int c) const;
  /// Mean IoU over classes present in pred or gt; nullopt if no pixels.
  std::optional<Scalar> miou() const;
  int num_classes() const { return num_classes_; }
  long long total() const;

 private:
  int num_classes_;
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> counts_;  // [gt][pred]
};

/// Mean IoU over classes present in pred or gt (label maps of equal shape).
Scalar miou(const Tensor& pred, const Tensor& gt, int num_classes);

/// One metric value per grid cell, indexed by L - 1.
struct LocationTable {
  Index k = 0;
  std::vector<Scalar> values;

  Scalar at(Index location) const;
  /// Unweighted mean over cells.
  Scalar mean() const;
};

/// Fills a table by calling `metric(L)` for L = 1..k^2 in order.
LocationTable per_location_eval(Index k,
                                const std::function<Scalar(Index)>& metric);

enum class LocationMetric { Accuracy, MeanIoU };

/// Maps a batch of images (n,3,H,W) to logits: (n,C,1,1) for accuracy,
/// (n,C,H,W) for mean IoU.
using Predictor = std::function<Tensor(const Tensor&)>;

/// Runs every validation patch at every grid location. Accuracy is
/// averaged over patches; mean IoU pools pixel counts of all patches at one
/// location. `num_classes` counts the background for mean IoU.
LocationTable per_location_eval(const Predictor& predict,
                                std::span<const LabeledPatch> dataset,
                                const GridSpec& spec, LocationMetric metric,
                                int num_classes, const Normalization& norm = {},
                                Index batch = 32);

struct RingReport {
  std::vector<Index> distances;
  std::vector<Scalar> means;
  std::vector<Index> counts;

  /// Mean of ring means weighted by cell counts.
  Scalar weighted_mean() const;
};

/// Groups cells by distance to the nearest border,
/// d(L) = min(row, col, k-1-row, k-1-col), and averages each group.
RingReport distance_rings(const LocationTable& table);

/// Relative-distance band (lo%, hi%]; a band starting at 0 also holds r = 0.
struct Band {
  Scalar lo;
  Scalar hi;
};

/// Band index of every pixel of an h x w map, or -1 outside all bands.
/// r(p) = min-border-distance(p) / (min(h, w) / 2), clipped to [0, 1].
std::vector<int> band_membership(Index h, Index w, std::span<const Band> bands);

/// Pools confusion counts per band over any number of label maps.
class RingRegionAccumulator {
 public:
  RingRegionAccumulator(int num_classes, std::vector<Band> bands);
  void add(const Tensor& pred, const Tensor& gt);
  /// Per-band mean IoU; nullopt for a band that received no pixels.
  std::vector<std::optional<Scalar>> miou() const;
  const std::vector<Band>& bands() const { return bands_; }

 private:
  int num_classes_;
  std::vector<Band> bands_;
  std::vector<ConfusionCounts> counts_;
};

std::vector<std::optional<Scalar>> ring_region_miou(const Tensor& pred,
                                                    const Tensor& gt,
                                                    int num_classes,
                                                    std::span<const Band> bands);

}  // namespace padlab
