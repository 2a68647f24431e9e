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

// Shared helpers for the unit tests and the acceptance binary: a central
// finite-difference gradient checker and brute-force metric oracles written
// without reusing library code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "padlab/autodiff.hpp"
#include "padlab/border.hpp"
#include "padlab/metrics.hpp"

namespace padlab::testing {

inline Tensor random_tensor(const Shape& s, std::mt19937_64& rng, Scalar lo = -1.0,
                            Scalar hi = 1.0) {
  std::uniform_real_distribution<Scalar> u(lo, hi);
  Tensor t(s);
  for (Index i = 0; i < t.numel(); ++i) t[i] = u(rng);
  return t;
}

/// Builds the op under test from leaf variables.
using OpBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Worst relative gradient error over all inputs. The op output is reduced
/// to a scalar by a fixed random weighting; each input's error is
/// max|analytic - numeric| / max(max|analytic|, max|numeric|).
inline Scalar gradient_error(const OpBuilder& op, const std::vector<Tensor>& inputs,
                             std::uint64_t seed, Scalar step = 1e-3) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(make_param(t));
  Tape tape;
  const Var out = op(tape, leaves);
  const Tensor weights = random_tensor(out->value.shape(), rng, 0.5, 1.5);
  tape.backward(weighted_sum(tape, out, weights));

  auto value_at = [&](const std::vector<Tensor>& xs) {
    Tape t(false);
    std::vector<Var> vs;
    for (const Tensor& x : xs) vs.push_back(make_const(x));
    const Tensor y = op(t, vs)->value;
    Scalar s = 0.0;
    for (Index i = 0; i < y.numel(); ++i) s += y[i] * weights[i];
    return s;
  };

  Scalar worst = 0.0;
  std::vector<Tensor> xs = inputs;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    const Tensor& analytic = leaves[p]->grad;
    Scalar diff = 0.0, scale = 0.0;
    for (Index i = 0; i < inputs[p].numel(); ++i) {
      const Scalar x0 = xs[p][i];
      xs[p][i] = x0 + step;
      const Scalar up = value_at(xs);
      xs[p][i] = x0 - step;
      const Scalar down = value_at(xs);
      xs[p][i] = x0;
      const Scalar numeric = (up - down) / (2.0 * step);
      const Scalar a = leaves[p]->has_grad ? analytic[i] : 0.0;
      diff = std::max(diff, std::abs(a - numeric));
      scale = std::max({scale, std::abs(a), std::abs(numeric)});
    }
    if (scale > 0.0) worst = std::max(worst, diff / scale);
  }
  return worst;
}

/// Tensor whose values are a shuffled grid spaced 0.05 apart, so a
/// finite-difference step never swaps a maximum.
inline Tensor separated_tensor(const Shape& s, std::mt19937_64& rng) {
  Tensor t(s);
  std::vector<Scalar> v(static_cast<std::size_t>(t.numel()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<Scalar>(i) - 1.0;
  std::shuffle(v.begin(), v.end(), rng);
  for (Index i = 0; i < t.numel(); ++i) t[i] = v[static_cast<std::size_t>(i)];
  return t;
}

struct GradientCase {
  std::string name;
  /// Worst relative error of one random instance drawn from `seed`.
  std::function<Scalar(std::uint64_t)> run;
};

/// Random conv2d instance in `kind`: 1-3 channels in and out, 3x3 or 1x1
/// kernels, pad 0-2 (0 for none), stride 1-2.
inline Scalar conv_gradient_instance(PadKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
  };
  const Index cin = pick(1, 3), cout = pick(1, 3);
  const Index kernel = pick(0, 3) == 0 ? 1 : 3;
  const Index amount = kind == PadKind::None ? 0 : pick(1, 2);
  const Index h = pick(4, 7), w = pick(4, 7);
  const Index stride = pick(1, 2);
  const PaddingMode mode(kind, amount);
  const std::vector<Tensor> inputs{random_tensor({2, cin, h, w}, rng),
                                   random_tensor({cout, cin, kernel, kernel}, rng),
                                   random_tensor({cout, 1, 1, 1}, rng)};
  return gradient_error(
      [&](Tape& t, const std::vector<Var>& v) { return conv2d(t, v[0], v[1], v[2], mode, stride); },
      inputs, seed);
}

/// The differentiable ops of the acceptance gradient criterion.
inline std::vector<GradientCase> gradient_cases() {
  std::vector<GradientCase> cases;
  for (PadKind kind : all_pad_kinds())
    cases.push_back({"conv2d/" + to_string(kind),
                     [kind](std::uint64_t s) { return conv_gradient_instance(kind, s); }});
  cases.push_back({"batchnorm/train", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     const Index c = 1 + static_cast<Index>(s % 3);
                     const std::vector<Tensor> in{random_tensor({3, c, 3, 4}, rng),
                                                  random_tensor({c, 1, 1, 1}, rng, 0.5, 1.5),
                                                  random_tensor({c, 1, 1, 1}, rng)};
                     return gradient_error(
                         [c](Tape& t, const std::vector<Var>& v) {
                           BatchNormState state(c);
                           return batchnorm2d(t, v[0], v[1], v[2], state, true);
                         },
                         in, s);
                   }});
  cases.push_back({"batchnorm/eval", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     const std::vector<Tensor> in{random_tensor({2, 2, 3, 3}, rng),
                                                  random_tensor({2, 1, 1, 1}, rng, 0.5, 1.5),
                                                  random_tensor({2, 1, 1, 1}, rng)};
                     BatchNormState state(2);
                     state.running_mean = random_tensor({2, 1, 1, 1}, rng);
                     state.running_var = random_tensor({2, 1, 1, 1}, rng, 0.5, 2.0);
                     return gradient_error(
                         [state](Tape& t, const std::vector<Var>& v) mutable {
                           return batchnorm2d(t, v[0], v[1], v[2], state, false);
                         },
                         in, s);
                   }});
  cases.push_back({"maxpool2d", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     const Index h = 2 * (1 + static_cast<Index>(s % 3));
                     const std::vector<Tensor> in{separated_tensor({2, 2, h, 4}, rng)};
                     return gradient_error(
                         [](Tape& t, const std::vector<Var>& v) { return maxpool2d(t, v[0]); }, in,
                         s);
                   }});
  cases.push_back({"linear", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     const Index d = 2 + static_cast<Index>(s % 4), k = 1 + static_cast<Index>(s % 3);
                     const std::vector<Tensor> in{random_tensor({3, d, 1, 1}, rng),
                                                  random_tensor({k, d, 1, 1}, rng),
                                                  random_tensor({k, 1, 1, 1}, rng)};
                     return gradient_error(
                         [](Tape& t, const std::vector<Var>& v) {
                           return linear(t, v[0], v[1], v[2]);
                         },
                         in, s);
                   }});
  for (ResizeAlign align : {ResizeAlign::Center, ResizeAlign::Corner})
    cases.push_back({align == ResizeAlign::Center ? "bilinear_resize/center"
                                                  : "bilinear_resize/corner",
                     [align](std::uint64_t s) {
                       std::mt19937_64 rng(s);
                       const Index oh = 2 + static_cast<Index>(s % 6);
                       const Index ow = 2 + static_cast<Index>((s / 6) % 6);
                       const std::vector<Tensor> in{random_tensor({1, 2, 4, 5}, rng)};
                       return gradient_error(
                           [=](Tape& t, const std::vector<Var>& v) {
                             return bilinear_resize(t, v[0], oh, ow, align);
                           },
                           in, s);
                     }});
  cases.push_back({"softmax_cross_entropy", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     const Index classes = 2 + static_cast<Index>(s % 5);
                     std::vector<int> labels;
                     for (int i = 0; i < 4; ++i)
                       labels.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(classes)));
                     const std::vector<Tensor> in{random_tensor({4, classes, 1, 1}, rng, -3.0, 3.0)};
                     return gradient_error(
                         [labels](Tape& t, const std::vector<Var>& v) {
                           return softmax_cross_entropy(t, v[0], labels);
                         },
                         in, s);
                   }});
  cases.push_back({"pixelwise_cross_entropy", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     const Index classes = 2 + static_cast<Index>(s % 4);
                     Tensor labels(2, 1, 3, 3);
                     for (Index i = 0; i < labels.numel(); ++i)
                       labels[i] = static_cast<Scalar>(rng() % static_cast<std::uint64_t>(classes));
                     const std::vector<Tensor> in{random_tensor({2, classes, 3, 3}, rng, -3.0, 3.0)};
                     return gradient_error(
                         [labels](Tape& t, const std::vector<Var>& v) {
                           return pixelwise_cross_entropy(t, v[0], labels);
                         },
                         in, s);
                   }});
  return cases;
}

// ---------------------------------------------------------------------------
// Brute-force metric oracles
// ---------------------------------------------------------------------------

/// Rank of v[i] by counting: 1 + #smaller + (#equal - 1) / 2.
inline std::vector<Scalar> oracle_ranks(const std::vector<Scalar>& v) {
  std::vector<Scalar> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    Scalar less = 0.0, equal = 0.0;
    for (Scalar u : v) {
      if (u < v[i]) less += 1.0;
      if (u == v[i]) equal += 1.0;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline Scalar oracle_spearman(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  const auto ra = oracle_ranks(a);
  const auto rb = oracle_ranks(b);
  const Scalar n = static_cast<Scalar>(a.size());
  Scalar ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i] / n;
    mb += rb[i] / n;
  }
  Scalar sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

inline Scalar oracle_mae(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  Scalar s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<Scalar>(a.size());
}

/// Mean IoU from explicit per-class pixel sets.
inline std::optional<Scalar> oracle_miou(const std::vector<int>& pred, const std::vector<int>& gt,
                                         int classes) {
  Scalar total = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    std::set<std::size_t> p, g;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c) p.insert(i);
      if (gt[i] == c) g.insert(i);
    }
    std::set<std::size_t> uni = p;
    uni.insert(g.begin(), g.end());
    if (uni.empty()) continue;
    std::size_t inter = 0;
    for (std::size_t i : p) inter += g.count(i);
    total += static_cast<Scalar>(inter) / static_cast<Scalar>(uni.size());
    ++present;
  }
  if (present == 0) return std::nullopt;
  return total / present;
}

/// Ring means keyed by distance, from nested cell loops.
inline std::map<Index, std::pair<Scalar, Index>> oracle_rings(const std::vector<Scalar>& cells,
                                                              Index k) {
  std::map<Index, std::pair<Scalar, Index>> acc;
  for (Index r = 0; r < k; ++r)
    for (Index c = 0; c < k; ++c) {
      // Walk toward each edge until falling off.
      Index d = k;
      for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
        Index steps = 0, rr = r, cc = c;
        while (rr + dr >= 0 && rr + dr < k && cc + dc >= 0 && cc + dc < k) {
          rr += dr;
          cc += dc;
          ++steps;
        }
        d = std::min(d, steps);
      }
      auto& [sum, count] = acc[d];
      sum += cells[static_cast<std::size_t>(r * k + c)];
      ++count;
    }
  for (auto& [d, v] : acc) v.first /= static_cast<Scalar>(v.second);
  return acc;
}

/// Per-band mean IoU of one label map pair, from per-pixel band tests.
inline std::vector<std::optional<Scalar>> oracle_ring_region(const std::vector<int>& pred,
                                                             const std::vector<int>& gt, Index h,
                                                             Index w, int classes,
                                                             const std::vector<Band>& bands) {
  std::vector<std::vector<int>> bp(bands.size()), bg(bands.size());
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      Index d = y;
      d = std::min(d, x);
      d = std::min(d, h - 1 - y);
      d = std::min(d, w - 1 - x);
      const Scalar rel = std::min<Scalar>(1.0, 2.0 * d / static_cast<Scalar>(std::min(h, w)));
      const Scalar pct = 100.0 * rel;
      for (std::size_t b = 0; b < bands.size(); ++b) {
        const bool in = bands[b].lo == 0.0 ? pct <= bands[b].hi
                                           : (pct > bands[b].lo && pct <= bands[b].hi);
        if (in) {
          bp[b].push_back(pred[static_cast<std::size_t>(y * w + x)]);
          bg[b].push_back(gt[static_cast<std::size_t>(y * w + x)]);
          break;
        }
      }
    }
  std::vector<std::optional<Scalar>> out;
  for (std::size_t b = 0; b < bands.size(); ++b)
    out.push_back(bp[b].empty() ? std::nullopt : oracle_miou(bp[b], bg[b], classes));
  return out;
}

/// Padding cells in the dependency cone of every final unit, by explicit
/// 2-D set propagation through the layer stack.
inline Tensor oracle_reach(const std::vector<ReachLayer>& layers, Index h, Index w) {
  std::vector<std::pair<Index, Index>> extents{{h, w}};
  for (const ReachLayer& l : layers) {
    auto [eh, ew] = extents.back();
    extents.emplace_back((eh + 2 * l.amount - l.kernel) / l.stride + 1,
                         (ew + 2 * l.amount - l.kernel) / l.stride + 1);
  }
  const auto [oh, ow] = extents.back();
  Tensor out(1, 1, oh, ow);
  for (Index y = 0; y < oh; ++y)
    for (Index x = 0; x < ow; ++x) {
      std::set<std::pair<Index, Index>> cone{{y, x}};
      Index padding = 0;
      for (std::size_t l = layers.size(); l-- > 0;) {
        const ReachLayer& L = layers[l];
        const auto [ih, iw] = extents[l];
        std::set<std::pair<Index, Index>> read;
        for (auto [u, v] : cone)
          for (Index a = 0; a < L.kernel; ++a)
            for (Index b = 0; b < L.kernel; ++b)
              read.insert({u * L.stride - L.amount + a, v * L.stride - L.amount + b});
        cone.clear();
        for (auto [r, c] : read) {
          if (r < 0 || c < 0 || r >= ih || c >= iw)
            ++padding;
          else
            cone.insert({r, c});
        }
      }
      out(0, 0, y, x) = static_cast<Scalar>(padding);
    }
  return out;
}

}  // namespace padlab::testing
