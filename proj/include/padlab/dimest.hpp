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

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "padlab/models.hpp"
#include "padlab/synth.hpp"

namespace padlab {

enum class Factor { Location, Class, Residual };
std::string to_string(Factor f);

/// One grid image: which patch, where, and on which canvas.
struct GridDraw {
  std::size_t patch;
  Index location;
  CanvasColor canvas;
};

struct ImagePair {
  GridDraw a;
  GridDraw b;
};

struct PairBatch {
  Factor factor;
  std::vector<ImagePair> pairs;
};

/// The canvases pairs are drawn from: black, white and the dataset mean.
const std::vector<CanvasColor>& pair_canvases();

/// Draws `n` pairs sharing exactly `factor`. Location pairs share L and
/// differ in class and canvas; class pairs share the class and differ in L
/// and canvas; residual pairs are independent draws. `spec.canvas` is not
/// used. Throws ArgumentError when the dataset cannot satisfy the
/// constraints.
PairBatch sample_pairs(Factor factor, std::span<const LabeledPatch> dataset,
                       const GridSpec& spec, Index n, std::uint64_t seed);

/// Renders a range of draws into one (count,3,H,W) batch.
Tensor render_draws(std::span<const GridDraw> draws,
                    std::span<const LabeledPatch> dataset, const GridSpec& spec,
                    const Normalization& norm = {});

/// Maps a batch of images to latents, one row per image.
using Encoder = std::function<Eigen::MatrixXd(const Tensor&)>;

/// Sum over columns of the Pearson correlation between za and zb (rows are
/// pairs). Columns with zero variance on either side contribute 0. Throws
/// ArgumentError for fewer than two pairs.
Scalar factor_correlation(const Eigen::MatrixXd& za, const Eigen::MatrixXd& zb);

/// Encodes both sides of every pair in chunks and scores them.
Scalar factor_correlation(const Encoder& encoder, const PairBatch& batch,
                          std::span<const LabeledPatch> dataset,
                          const GridSpec& spec, const Normalization& norm = {},
                          Index chunk = 64);

/// |z_k| = floor(softmax(C)_k * N).
std::vector<Index> allocate_dims(std::span<const Scalar> scores, Index total);

/// Last conv-stage output averaged over space: (n, width).
Eigen::MatrixXd latent_of(GridNet& model, const Tensor& images);
Eigen::MatrixXd latent_of(Vgg5& model, const Tensor& images);

struct FactorReport {
  std::array<Scalar, 3> scores{};  // location, class, residual
  std::vector<Index> alloc;
  Index total = 0;

  Scalar percent(Factor f) const;
};

/// Scores all three factors with `pairs` pairs each and allocates dims.
FactorReport estimate_dimensions(const Encoder& encoder, Index latent_dim,
                                 std::span<const LabeledPatch> dataset,
                                 const GridSpec& spec, Index pairs,
                                 std::uint64_t seed,
                                 const Normalization& norm = {});

inline constexpr std::string_view kFactorReportHeader =
    "run,padding,canvas,task,c_loc,c_class,c_res,pct_loc,pct_class";

}  // namespace padlab
