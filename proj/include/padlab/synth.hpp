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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "padlab/tensor.hpp"

namespace padlab {

// ---------------------------------------------------------------------------
// Position targets
// ---------------------------------------------------------------------------

/// Gradient-like ground-truth patterns: horizontal ramp, vertical ramp,
/// Gaussian bump, horizontal stripes, vertical stripes.
enum class Pattern { H, V, G, HS, VS };

std::string to_string(Pattern p);
Pattern parse_pattern(std::string_view name);

struct TargetParams {
  /// Gaussian sigma as a fraction of the image height.
  Scalar sigma_fraction = 0.25;
  /// Number of repeated ramps in HS/VS.
  Index stripes = 4;
};

struct PositionTarget {
  Pattern pattern;
  Tensor map;  // (1,1,h,w), min 0 and max 1
};

/// Builds a min-max normalized target map.
///
/// H ramps left to right, V top to bottom. G is an isotropic Gaussian at the
/// image center. HS/VS repeat `stripes` ramps along the axis, each running
/// from 0 at its first pixel to 1 at its last, so one stripe equals H/V.
PositionTarget gen_position_target(Pattern pattern, Index h, Index w,
                                   const TargetParams& params = {});

// ---------------------------------------------------------------------------
// Grid canvases
// ---------------------------------------------------------------------------

struct CanvasColor {
  std::string name;
  std::array<Scalar, 3> rgb;

  static CanvasColor black() { return {"black", {0.0, 0.0, 0.0}}; }
  static CanvasColor white() { return {"white", {1.0, 1.0, 1.0}}; }
  /// CIFAR-10 dataset mean.
  static CanvasColor mean() { return {"mean", {0.491, 0.482, 0.446}}; }
  /// Accepts black|white|mean or "r,g,b" with components in [0,1].
  static CanvasColor parse(std::string_view text);

  friend bool operator==(const CanvasColor& a, const CanvasColor& b) {
    return a.rgb == b.rgb;
  }
};

struct GridSpec {
  Index k = 3;
  Index patch = 32;
  CanvasColor canvas = CanvasColor::black();

  /// Throws ArgumentError unless k is odd in [3, 13] and patch >= 1.
  void validate() const;
  Index extent() const { return k * patch; }
  Index locations() const { return k * k; }
};

/// Per-channel patch normalization applied before pasting.
struct Normalization {
  std::array<Scalar, 3> mean{0.491, 0.482, 0.446};
  std::array<Scalar, 3> std{0.247, 0.243, 0.262};
};

struct GridCell {
  Index row;
  Index col;
};

/// Cell of the 1-based row-major location L on a k x k grid.
GridCell cell_of(Index location, Index k);
/// Cell distance to the nearest grid border.
Index border_distance(Index location, Index k);

struct GridSample {
  Tensor image;       // (1,3,k*p,k*p)
  int class_label;    // in [0, classes)
  Index location;     // 1-based row-major cell index
  Tensor seg_labels;  // (1,1,k*p,k*p); 0 = background, class_label+1 = object
};

/// Normalizes `patch` (1,3,p,p) and pastes it into cell L of a raw-colored
/// canvas.
GridSample compose_grid_sample(const Tensor& patch, int label, Index location,
                               const GridSpec& spec,
                               const Normalization& norm = {});

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct LabeledPatch {
  Tensor image;  // (1,3,p,p), values in [0,1]
  int label;
};

inline constexpr Index kCifarSide = 32;
inline constexpr Index kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

/// Reads a CIFAR-10 binary batch: 3073-byte records of one label byte then
/// 1024 red, 1024 green, 1024 blue bytes (row-major), scaled by 1/255.
std::vector<LabeledPatch> load_cifar10(const std::filesystem::path& path);

/// Writes patches in the same record layout. Pixels are rounded to bytes;
/// every patch must be 3x32x32 with label < 256.
void write_cifar10(const std::filesystem::path& path,
                   std::span<const LabeledPatch> patches);

/// Desk-scale stand-in for CIFAR-10.
///
/// Sample i has label i mod classes. Its background is uniform noise in
/// [0.25, 0.75] per channel. A filled shape (square, disc or diamond, chosen
/// by label mod 3) of side 55-70% of the patch is placed at a random offset
/// and painted with the class color plus small Gaussian jitter. Class colors
/// are evenly spaced hues at full saturation, so the mean patch color
/// identifies the class.
std::vector<LabeledPatch> gen_synthetic_patchset(Index n, int classes,
                                                 std::uint64_t seed,
                                                 Index side = kCifarSide);

/// Class color used by gen_synthetic_patchset.
std::array<Scalar, 3> synthetic_class_color(int label, int classes);

enum class ProbeImageKind { Black, White, Noise };
ProbeImageKind parse_probe_image_kind(std::string_view name);

/// (n,3,h,w) images: all 0, all 1, or seeded uniform(0,1) noise.
Tensor synthetic_probe_images(ProbeImageKind kind, Index n, Index h, Index w,
                              std::uint64_t seed);

}  // namespace padlab
