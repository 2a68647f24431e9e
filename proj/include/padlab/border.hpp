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

#include <string>
#include <string_view>
#include <vector>

#include "padlab/tensor.hpp"

namespace padlab {

/// Border-handling strategy applied before a convolution.
enum class PadKind { Zero, Reflect, Replicate, Circular, Partial, None };

/// A padding kind plus the number of pixels added to each spatial side.
///
/// `None` always carries amount 0. `Partial` pads with zeros like `Zero`; the
/// convolution then rescales each output by the partial_scale_mask.
struct PaddingMode {
  PadKind kind = PadKind::Zero;
  Index amount = 1;

  PaddingMode() = default;
  PaddingMode(PadKind kind, Index amount);

  static PaddingMode zero(Index amount = 1) { return {PadKind::Zero, amount}; }
  static PaddingMode reflect(Index amount = 1) {
    return {PadKind::Reflect, amount};
  }
  static PaddingMode replicate(Index amount = 1) {
    return {PadKind::Replicate, amount};
  }
  static PaddingMode circular(Index amount = 1) {
    return {PadKind::Circular, amount};
  }
  static PaddingMode partial(Index amount = 1) {
    return {PadKind::Partial, amount};
  }
  static PaddingMode none() { return {PadKind::None, 0}; }

  /// Parses the lowercase config name (zero|reflect|replicate|circular|
  /// partial|none). `none` ignores `amount`.
  static PaddingMode parse(std::string_view kind, Index amount);

  /// Lowercase config name of the kind.
  std::string name() const;
  bool zero_filled() const {
    return kind == PadKind::Zero || kind == PadKind::Partial;
  }
  friend bool operator==(const PaddingMode&, const PaddingMode&) = default;
};

std::string to_string(PadKind kind);
PadKind parse_pad_kind(std::string_view name);

/// All six kinds in the order used by sweeps and reports.
const std::vector<PadKind>& all_pad_kinds();

/// Source coordinate in [0, extent) that padded coordinate `i` reads from, or
/// -1 when the position is zero-filled. `i` ranges over [-amount,
/// extent + amount).
Index pad_source(PadKind kind, Index i, Index extent);

/// Output extent of a convolution along one axis. Throws GeometryError when
/// the kernel does not fit in the padded input.
Index conv_out_extent(Index in, Index kernel, Index pad, Index stride);

/// Grows both spatial axes by 2 * mode.amount. Interior values are unchanged.
Tensor pad(const Tensor& x, const PaddingMode& mode);

/// Adjoint of pad(): folds a gradient over the padded tensor back onto the
/// input positions it was read from.
Tensor pad_adjoint(const Tensor& grad_padded, const Shape& input,
                   const PaddingMode& mode);

/// Per-output rescaling of a partial convolution: (kh * kw) divided by the
/// number of in-image taps under the window. Windows lying entirely in the
/// padding get 0.
Tensor partial_scale_mask(Index h, Index w, Index kh, Index kw, Index amount,
                          Index stride);

/// One convolution layer in a positional_reach query.
struct ReachLayer {
  Index kernel = 3;
  Index stride = 1;
  Index amount = 1;
};

/// Number of padding cells (summed over all layers) inside the dependency
/// cone of each final-layer unit. The map has the final layer's spatial
/// extent, which equals (h, w) for stride-1 size-preserving stacks. With no
/// layers the map is (h, w) of zeros.
Tensor positional_reach(const std::vector<ReachLayer>& layers, Index h,
                        Index w);

}  // namespace padlab
