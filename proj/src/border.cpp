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

#include "padlab/border.hpp"

#include <algorithm>

namespace padlab {

PaddingMode::PaddingMode(PadKind k, Index a) : kind(k), amount(a) {
  if (amount < 0) throw ArgumentError("padding amount must be nonnegative");
  if (kind == PadKind::None && amount != 0)
    throw ArgumentError("padding kind 'none' requires amount 0");
}

PaddingMode PaddingMode::parse(std::string_view kind, Index amount) {
  const PadKind k = parse_pad_kind(kind);
  return PaddingMode(k, k == PadKind::None ? 0 : amount);
}

std::string PaddingMode::name() const { return to_string(kind); }

std::string to_string(PadKind kind) {
  switch (kind) {
    case PadKind::Zero: return "zero";
    case PadKind::Reflect: return "reflect";
    case PadKind::Replicate: return "replicate";
    case PadKind::Circular: return "circular";
    case PadKind::Partial: return "partial";
    case PadKind::None: return "none";
  }
  return "?";
}

PadKind parse_pad_kind(std::string_view name) {
  for (PadKind k : all_pad_kinds())
    if (to_string(k) == name) return k;
  throw ArgumentError("unknown padding kind '" + std::string(name) + "'");
}

const std::vector<PadKind>& all_pad_kinds() {
  static const std::vector<PadKind> kinds = {
      PadKind::Zero,      PadKind::Partial, PadKind::Circular,
      PadKind::Replicate, PadKind::Reflect, PadKind::None};
  return kinds;
}

Index pad_source(PadKind kind, Index i, Index extent) {
  if (i >= 0 && i < extent) return i;
  switch (kind) {
    case PadKind::Zero:
    case PadKind::Partial:
    case PadKind::None:
      return -1;
    case PadKind::Replicate:
      return i < 0 ? 0 : extent - 1;
    case PadKind::Reflect:
      // Mirror about the edge pixel; the edge itself is not repeated.
      return i < 0 ? -i : 2 * (extent - 1) - i;
    case PadKind::Circular:
      return ((i % extent) + extent) % extent;
  }
  return -1;
}

Index conv_out_extent(Index in, Index kernel, Index pad, Index stride) {
  if (kernel < 1 || stride < 1)
    throw ArgumentError("kernel and stride must be positive");
  const Index padded = in + 2 * pad;
  if (padded < kernel)
    throw GeometryError("kernel extent " + std::to_string(kernel) +
                        " exceeds padded input extent " +
                        std::to_string(padded));
  return (padded - kernel) / stride + 1;
}

namespace {

void check_pad_geometry(const Shape& s, const PaddingMode& mode) {
  if (mode.kind == PadKind::Reflect &&
      (mode.amount >= s.h || mode.amount >= s.w))
    throw GeometryError("reflect padding of " + std::to_string(mode.amount) +
                        " needs spatial extent > amount, got " +
                        std::to_string(s.h) + "x" + std::to_string(s.w));
  if (mode.kind == PadKind::Circular || mode.kind == PadKind::Replicate) {
    if (mode.amount > 0 && (s.h == 0 || s.w == 0))
      throw GeometryError("cannot pad an empty plane");
  }
}

std::vector<Index> source_table(PadKind kind, Index extent, Index amount) {
  std::vector<Index> table(static_cast<std::size_t>(extent + 2 * amount));
  for (Index i = 0; i < extent + 2 * amount; ++i)
    table[static_cast<std::size_t>(i)] = pad_source(kind, i - amount, extent);
  return table;
}

}  // namespace

Tensor pad(const Tensor& x, const PaddingMode& mode) {
  if (mode.amount == 0) return x;
  check_pad_geometry(x.shape(), mode);
  const Index a = mode.amount;
  const Index ph = x.h() + 2 * a;
  const Index pw = x.w() + 2 * a;
  const auto rows = source_table(mode.kind, x.h(), a);
  const auto cols = source_table(mode.kind, x.w(), a);
  Tensor out(x.n(), x.c(), ph, pw);
  for (Index n = 0; n < x.n(); ++n)
    for (Index c = 0; c < x.c(); ++c) {
      auto src = x.plane(n, c);
      auto dst = out.plane(n, c);
      for (Index y = 0; y < ph; ++y) {
        const Index sy = rows[static_cast<std::size_t>(y)];
        if (sy < 0) continue;
        for (Index xx = 0; xx < pw; ++xx) {
          const Index sx = cols[static_cast<std::size_t>(xx)];
          if (sx >= 0) dst(y, xx) = src(sy, sx);
        }
      }
    }
  return out;
}

Tensor pad_adjoint(const Tensor& grad_padded, const Shape& input,
                   const PaddingMode& mode) {
  if (mode.amount == 0) return grad_padded;
  const Index a = mode.amount;
  if (grad_padded.h() != input.h + 2 * a || grad_padded.w() != input.w + 2 * a)
    throw DimensionError("pad_adjoint: gradient shape does not match input");
  const auto rows = source_table(mode.kind, input.h, a);
  const auto cols = source_table(mode.kind, input.w, a);
  Tensor out(input);
  for (Index n = 0; n < input.n; ++n)
    for (Index c = 0; c < input.c; ++c) {
      auto src = grad_padded.plane(n, c);
      auto dst = out.plane(n, c);
      for (Index y = 0; y < grad_padded.h(); ++y) {
        const Index sy = rows[static_cast<std::size_t>(y)];
        if (sy < 0) continue;
        for (Index xx = 0; xx < grad_padded.w(); ++xx) {
          const Index sx = cols[static_cast<std::size_t>(xx)];
          if (sx >= 0) dst(sy, sx) += src(y, xx);
        }
      }
    }
  return out;
}

namespace {

// Number of window taps in [o*stride - amount, o*stride - amount + k) that
// land inside [0, extent).
Index valid_taps(Index o, Index k, Index amount, Index stride, Index extent) {
  const Index lo = o * stride - amount;
  const Index hi = lo + k;  // exclusive
  return std::max<Index>(0, std::min(hi, extent) - std::max<Index>(lo, 0));
}

}  // namespace

Tensor partial_scale_mask(Index h, Index w, Index kh, Index kw, Index amount,
                          Index stride) {
  const Index oh = conv_out_extent(h, kh, amount, stride);
  const Index ow = conv_out_extent(w, kw, amount, stride);
  Tensor mask(1, 1, oh, ow);
  const Scalar window = static_cast<Scalar>(kh * kw);
  for (Index y = 0; y < oh; ++y) {
    const Index vy = valid_taps(y, kh, amount, stride, h);
    for (Index x = 0; x < ow; ++x) {
      const Index taps = vy * valid_taps(x, kw, amount, stride, w);
      mask(0, 0, y, x) = taps == 0 ? 0.0 : window / static_cast<Scalar>(taps);
    }
  }
  return mask;
}

namespace {

struct AxisCone {
  // Count of dependency positions inside the image and in total, per layer.
  std::vector<Index> inside;
  std::vector<Index> total;
};

// Walks one final-layer coordinate back through the stack, recording how
// many of the positions it depends on at each layer input are in-image.
AxisCone axis_cone(const std::vector<ReachLayer>& layers,
                   const std::vector<Index>& extents, Index final_index) {
  const std::size_t depth = layers.size();
  AxisCone cone{std::vector<Index>(depth), std::vector<Index>(depth)};
  std::vector<char> current{1};  // over the output of the last layer
  Index current_offset = final_index;  // coordinate of current[0]
  for (std::size_t l = depth; l-- > 0;) {
    const ReachLayer& layer = layers[l];
    const Index extent = extents[l];
    const Index a = layer.amount;
    // Dependency positions in padded coordinates [-a, extent + a).
    std::vector<char> dep(static_cast<std::size_t>(extent + 2 * a), 0);
    for (std::size_t i = 0; i < current.size(); ++i) {
      if (!current[i]) continue;
      const Index o = current_offset + static_cast<Index>(i);
      for (Index t = 0; t < layer.kernel; ++t)
        dep[static_cast<std::size_t>(o * layer.stride + t)] = 1;
    }
    Index inside = 0, total = 0;
    std::vector<char> next(static_cast<std::size_t>(extent), 0);
    for (Index p = 0; p < extent + 2 * a; ++p) {
      if (!dep[static_cast<std::size_t>(p)]) continue;
      ++total;
      const Index q = p - a;
      if (q >= 0 && q < extent) {
        ++inside;
        next[static_cast<std::size_t>(q)] = 1;
      }
    }
    cone.inside[l] = inside;
    cone.total[l] = total;
    current = std::move(next);
    current_offset = 0;
  }
  return cone;
}

}  // namespace

Tensor positional_reach(const std::vector<ReachLayer>& layers, Index h,
                        Index w) {
  std::vector<Index> hs{h}, ws{w};
  for (const ReachLayer& l : layers) {
    hs.push_back(conv_out_extent(hs.back(), l.kernel, l.amount, l.stride));
    ws.push_back(conv_out_extent(ws.back(), l.kernel, l.amount, l.stride));
  }
  const Index oh = hs.back();
  const Index ow = ws.back();
  Tensor reach(1, 1, oh, ow);
  if (layers.empty()) return reach;

  std::vector<AxisCone> rows, cols;
  for (Index y = 0; y < oh; ++y) rows.push_back(axis_cone(layers, hs, y));
  for (Index x = 0; x < ow; ++x) cols.push_back(axis_cone(layers, ws, x));
  for (Index y = 0; y < oh; ++y)
    for (Index x = 0; x < ow; ++x) {
      Index count = 0;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& r = rows[static_cast<std::size_t>(y)];
        const auto& c = cols[static_cast<std::size_t>(x)];
        count += r.total[l] * c.total[l] - r.inside[l] * c.inside[l];
      }
      reach(0, 0, y, x) = static_cast<Scalar>(count);
    }
  return reach;
}

}  // namespace padlab
