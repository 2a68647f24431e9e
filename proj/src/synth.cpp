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

#include "padlab/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

namespace padlab {

std::string to_string(Pattern p) {
  switch (p) {
    case Pattern::H: return "H";
    case Pattern::V: return "V";
    case Pattern::G: return "G";
    case Pattern::HS: return "HS";
    case Pattern::VS: return "VS";
  }
  return "?";
}

Pattern parse_pattern(std::string_view name) {
  for (Pattern p : {Pattern::H, Pattern::V, Pattern::G, Pattern::HS, Pattern::VS})
    if (to_string(p) == name) return p;
  throw ArgumentError("unknown position pattern '" + std::string(name) + "'");
}

namespace {

// Stripe ramp along an axis of length `extent` split into `stripes` runs.
Scalar stripe_value(Index i, Index extent, Index stripes) {
  const Index seg = i * stripes / extent;
  const Index start = seg * extent / stripes;
  const Index stop = (seg + 1) * extent / stripes;  // exclusive
  return static_cast<Scalar>(i - start) / static_cast<Scalar>(stop - start - 1);
}

void normalize(Tensor& map) {
  const Scalar lo = map.data().minCoeff();
  const Scalar hi = map.data().maxCoeff();
  if (!(hi > lo)) throw ArgumentError("position target is constant at this size");
  map.data() = (map.data() - lo) / (hi - lo);
}

}  // namespace

PositionTarget gen_position_target(Pattern pattern, Index h, Index w,
                                   const TargetParams& params) {
  if (h < 1 || w < 1) throw ArgumentError("target extents must be positive");
  PositionTarget target{pattern, Tensor(1, 1, h, w)};
  Tensor& m = target.map;
  switch (pattern) {
    case Pattern::H:
    case Pattern::HS: {
      const Index stripes = pattern == Pattern::H ? 1 : params.stripes;
      if (stripes < 1 || w < 2 * stripes)
        throw ArgumentError("width too small for the requested ramps");
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) m(0, 0, y, x) = stripe_value(x, w, stripes);
      break;
    }
    case Pattern::V:
    case Pattern::VS: {
      const Index stripes = pattern == Pattern::V ? 1 : params.stripes;
      if (stripes < 1 || h < 2 * stripes)
        throw ArgumentError("height too small for the requested ramps");
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) m(0, 0, y, x) = stripe_value(y, h, stripes);
      break;
    }
    case Pattern::G: {
      if (!(params.sigma_fraction > 0.0))
        throw ArgumentError("sigma_fraction must be positive");
      const Scalar sigma = params.sigma_fraction * static_cast<Scalar>(h);
      const Scalar cy = 0.5 * static_cast<Scalar>(h - 1);
      const Scalar cx = 0.5 * static_cast<Scalar>(w - 1);
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const Scalar dy = static_cast<Scalar>(y) - cy;
          const Scalar dx = static_cast<Scalar>(x) - cx;
          m(0, 0, y, x) = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
        }
      normalize(m);
      break;
    }
  }
  return target;
}

CanvasColor CanvasColor::parse(std::string_view text) {
  if (text == "black") return black();
  if (text == "white") return white();
  if (text == "mean") return mean();
  CanvasColor color{std::string(text), {}};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? text.find(',', pos) : text.size();
    if (end == std::string_view::npos)
      throw ArgumentError("canvas color must be black|white|mean|r,g,b");
    double v = 0.0;
    const auto part = text.substr(pos, end - pos);
    const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (res.ec != std::errc() || res.ptr != part.data() + part.size() ||
        v < 0.0 || v > 1.0)
      throw ArgumentError("bad canvas color component '" + std::string(part) + "'");
    color.rgb[static_cast<std::size_t>(i)] = v;
    pos = end + 1;
  }
  return color;
}

void GridSpec::validate() const {
  if (k < 3 || k > 13 || k % 2 == 0)
    throw ArgumentError("grid side k must be odd in [3,13], got " +
                        std::to_string(k));
  if (patch < 1) throw ArgumentError("patch side must be positive");
}

GridCell cell_of(Index location, Index k) {
  if (location < 1 || location > k * k)
    throw RangeError("grid location " + std::to_string(location) +
                     " outside [1," + std::to_string(k * k) + "]");
  return {(location - 1) / k, (location - 1) % k};
}

Index border_distance(Index location, Index k) {
  const GridCell cell = cell_of(location, k);
  return std::min({cell.row, cell.col, k - 1 - cell.row, k - 1 - cell.col});
}

GridSample compose_grid_sample(const Tensor& patch, int label, Index location,
                               const GridSpec& spec,
                               const Normalization& norm) {
  spec.validate();
  const Index p = spec.patch;
  if (patch.n() != 1 || patch.c() != 3 || patch.h() != p || patch.w() != p)
    throw DimensionError("patch must be (1,3," + std::to_string(p) + "," +
                         std::to_string(p) + "), got " + to_string(patch.shape()));
  if (label < 0) throw RangeError("class label must be nonnegative");
  const GridCell cell = cell_of(location, spec.k);
  const Index side = spec.extent();
  GridSample s{Tensor(1, 3, side, side), label, location, Tensor(1, 1, side, side)};
  for (Index c = 0; c < 3; ++c) {
    const auto ch = static_cast<std::size_t>(c);
    s.image.plane(0, c).setConstant(spec.canvas.rgb[ch]);
    s.image.plane(0, c).block(cell.row * p, cell.col * p, p, p) =
        (patch.plane(0, c).array() - norm.mean[ch]) / norm.std[ch];
  }
  s.seg_labels.plane(0, 0).block(cell.row * p, cell.col * p, p, p).setConstant(
      static_cast<Scalar>(label + 1));
  return s;
}

std::vector<LabeledPatch> load_cifar10(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open CIFAR-10 file " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), {}};
  if (bytes.size() % static_cast<std::size_t>(kCifarRecordBytes) != 0)
    throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of the 3073-byte record (truncated?)");
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  std::vector<LabeledPatch> out;
  out.reserve(records);
  const Scalar scale = 1.0 / 255.0;
  for (std::size_t r = 0; r < records; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] >= 10)
      throw FormatError(path.string() + ": record " + std::to_string(r) +
                        " has label byte " + std::to_string(rec[0]));
    LabeledPatch p{Tensor(1, 3, kCifarSide, kCifarSide), rec[0]};
    for (Index i = 0; i < 3 * kCifarSide * kCifarSide; ++i)
      p.image[i] = static_cast<Scalar>(rec[1 + i]) * scale;
    out.push_back(std::move(p));
  }
  return out;
}

void write_cifar10(const std::filesystem::path& path,
                   std::span<const LabeledPatch> patches) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string());
  for (const LabeledPatch& p : patches) {
    if (p.image.shape() != Shape{1, 3, kCifarSide, kCifarSide})
      throw DimensionError("CIFAR-10 export needs (1,3,32,32) patches");
    if (p.label < 0 || p.label > 255) throw RangeError("label does not fit a byte");
    out.put(static_cast<char>(p.label));
    for (Index i = 0; i < p.image.numel(); ++i) {
      const long b = std::lround(std::clamp(p.image[i], 0.0, 1.0) * 255.0);
      out.put(static_cast<char>(static_cast<unsigned char>(b)));
    }
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

std::array<Scalar, 3> synthetic_class_color(int label, int classes) {
  // Hue on the RGB wheel; six linear segments.
  const Scalar hue = 6.0 * static_cast<Scalar>(label) / static_cast<Scalar>(classes);
  const int sector = static_cast<int>(std::floor(hue)) % 6;
  const Scalar f = hue - std::floor(hue);
  switch (sector) {
    case 0: return {1.0, f, 0.0};
    case 1: return {1.0 - f, 1.0, 0.0};
    case 2: return {0.0, 1.0, f};
    case 3: return {0.0, 1.0 - f, 1.0};
    case 4: return {f, 0.0, 1.0};
    default: return {1.0, 0.0, 1.0 - f};
  }
}

std::vector<LabeledPatch> gen_synthetic_patchset(Index n, int classes,
                                                 std::uint64_t seed, Index side) {
  if (n < 1 || classes < 1) throw ArgumentError("n and classes must be >= 1");
  if (side < 4) throw ArgumentError("patch side must be >= 4");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> background(0.25, 0.75);
  std::uniform_real_distribution<Scalar> extent(0.55, 0.70);
  std::normal_distribution<Scalar> jitter(0.0, 0.05);
  std::vector<LabeledPatch> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % classes);
    const auto color = synthetic_class_color(label, classes);
    LabeledPatch p{Tensor(1, 3, side, side), label};
    for (Index j = 0; j < p.image.numel(); ++j) p.image[j] = background(rng);

    const Index size = std::max<Index>(
        2, static_cast<Index>(std::lround(extent(rng) * static_cast<Scalar>(side))));
    std::uniform_int_distribution<Index> offset(0, side - size);
    const Index oy = offset(rng);
    const Index ox = offset(rng);
    const Scalar r = 0.5 * static_cast<Scalar>(size);
    const int shape = label % 3;
    for (Index y = 0; y < size; ++y)
      for (Index x = 0; x < size; ++x) {
        const Scalar dy = static_cast<Scalar>(y) + 0.5 - r;
        const Scalar dx = static_cast<Scalar>(x) + 0.5 - r;
        const bool inside = shape == 0   ? true
                            : shape == 1 ? dx * dx + dy * dy <= r * r
                                         : std::abs(dx) + std::abs(dy) <= r;
        if (!inside) continue;
        for (Index c = 0; c < 3; ++c)
          p.image(0, c, oy + y, ox + x) = std::clamp(
              color[static_cast<std::size_t>(c)] + jitter(rng), 0.0, 1.0);
      }
    out.push_back(std::move(p));
  }
  return out;
}

ProbeImageKind parse_probe_image_kind(std::string_view name) {
  if (name == "black") return ProbeImageKind::Black;
  if (name == "white") return ProbeImageKind::White;
  if (name == "noise") return ProbeImageKind::Noise;
  throw ArgumentError("probe image kind must be black|white|noise");
}

Tensor synthetic_probe_images(ProbeImageKind kind, Index n, Index h, Index w,
                              std::uint64_t seed) {
  switch (kind) {
    case ProbeImageKind::Black: return Tensor(n, 3, h, w, 0.0);
    case ProbeImageKind::White: return Tensor(n, 3, h, w, 1.0);
    case ProbeImageKind::Noise: {
      Tensor t(n, 3, h, w);
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<Scalar> u(0.0, 1.0);
      for (Index i = 0; i < t.numel(); ++i) t[i] = u(rng);
      return t;
    }
  }
  return {};
}

}  // namespace padlab
