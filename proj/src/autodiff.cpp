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

#include "padlab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace padlab {

void Node::accumulate(const Tensor& g) {
  if (g.shape() != value.shape())
    throw DimensionError("gradient shape " + to_string(g.shape()) +
                         " does not match value shape " +
                         to_string(value.shape()));
  if (!has_grad) {
    grad = g;
    has_grad = true;
  } else {
    grad.data() += g.data();
  }
}

void Node::zero_grad() {
  has_grad = false;
  grad = Tensor();
}

Var make_param(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

Var make_const(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return node;
}

Var Tape::record(Tensor value, std::vector<Var> parents,
                 std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (!recording_) return node;
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const Var& p) { return p && p->requires_grad; });
  if (!needs) return node;
  node->requires_grad = true;
  node->parents = std::move(parents);
  node->backward = std::move(backward);
  nodes_.push_back(node);
  return node;
}

void Tape::backward(const Var& loss) {
  if (!loss) throw ContractError("backward on a null node");
  if (loss->value.numel() != 1)
    throw ContractError("backward requires a scalar loss, got shape " +
                        to_string(loss->value.shape()));
  if (!loss->requires_grad)
    throw ContractError("loss does not depend on any trainable value");
  const bool on_tape = std::any_of(nodes_.begin(), nodes_.end(),
                                   [&](const Var& n) { return n == loss; });
  if (!on_tape && loss->backward)
    throw ContractError("loss was not recorded on this tape");
  for (const Var& n : nodes_) n->zero_grad();
  loss->accumulate(Tensor(loss->value.shape(), 1.0));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& node = **it;
    if (node.has_grad && node.backward) node.backward(node);
  }
}

namespace {

bool wants(const Var& v) { return v && v->requires_grad; }

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

using MatRM = Tensor::MatrixRM;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

// Unfolds one padded sample (c, hp, wp) into (c*kh*kw, oh*ow).
void im2col(const Scalar* src, Index c, Index hp, Index wp, Index kh, Index kw,
            Index stride, Index oh, Index ow, Scalar* cols) {
  const Index plane = oh * ow;
  for (Index ci = 0; ci < c; ++ci)
    for (Index ky = 0; ky < kh; ++ky)
      for (Index kx = 0; kx < kw; ++kx) {
        Scalar* row = cols + ((ci * kh + ky) * kw + kx) * plane;
        const Scalar* base = src + ci * hp * wp + ky * wp + kx;
        if (stride == 1) {
          for (Index oy = 0; oy < oh; ++oy)
            std::copy_n(base + oy * wp, ow, row + oy * ow);
        } else {
          for (Index oy = 0; oy < oh; ++oy) {
            const Scalar* line = base + oy * stride * wp;
            Scalar* out = row + oy * ow;
            for (Index ox = 0; ox < ow; ++ox) out[ox] = line[ox * stride];
          }
        }
      }
}

// Adjoint of im2col: scatters columns back onto the padded sample.
void col2im(const Scalar* cols, Index c, Index hp, Index wp, Index kh,
            Index kw, Index stride, Index oh, Index ow, Scalar* dst) {
  const Index plane = oh * ow;
  for (Index ci = 0; ci < c; ++ci)
    for (Index ky = 0; ky < kh; ++ky)
      for (Index kx = 0; kx < kw; ++kx) {
        const Scalar* row = cols + ((ci * kh + ky) * kw + kx) * plane;
        Scalar* base = dst + ci * hp * wp + ky * wp + kx;
        for (Index oy = 0; oy < oh; ++oy) {
          Scalar* line = base + oy * stride * wp;
          const Scalar* in = row + oy * ow;
          for (Index ox = 0; ox < ow; ++ox) line[ox * stride] += in[ox];
        }
      }
}

}  // namespace

Var conv2d(Tape& tape, const Var& x, const Var& weight, const Var& bias,
           const PaddingMode& mode, Index stride) {
  const Tensor& in = x->value;
  const Tensor& wt = weight->value;
  require(in.c() == wt.c(),
          "conv2d: input channels " + std::to_string(in.c()) +
              " != weight c_in " + std::to_string(wt.c()));
  if (bias)
    require(bias->value.numel() == wt.n(),
            "conv2d: bias length does not match c_out");
  if (stride < 1) throw ArgumentError("conv2d: stride must be positive");
  const Index cout = wt.n(), cin = wt.c(), kh = wt.h(), kw = wt.w();
  const Index a = mode.amount;
  const Index oh = conv_out_extent(in.h(), kh, a, stride);
  const Index ow = conv_out_extent(in.w(), kw, a, stride);

  Tensor padded = pad(in, mode);
  const Index hp = padded.h(), wp = padded.w();
  const Index k = cin * kh * kw;
  const Index plane = oh * ow;

  Tensor mask;
  const bool partial = mode.kind == PadKind::Partial && a > 0;
  if (partial) mask = partial_scale_mask(in.h(), in.w(), kh, kw, a, stride);

  Tensor out(in.n(), cout, oh, ow);
  CMapRM wmat(wt.ptr(), cout, k);
  MatRM cols(k, plane);
  for (Index n = 0; n < in.n(); ++n) {
    im2col(padded.ptr() + n * cin * hp * wp, cin, hp, wp, kh, kw, stride, oh,
           ow, cols.data());
    auto o = out.sample(n);
    o.noalias() = wmat * cols;
    if (partial)
      o.array().rowwise() *=
          Eigen::Map<const Eigen::Array<Scalar, 1, Eigen::Dynamic>>(
              mask.ptr(), plane);
    if (bias)
      o.colwise() += Eigen::Map<const Eigen::VectorXd>(bias->value.ptr(), cout);
  }

  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(bias);
  return tape.record(
      std::move(out), std::move(parents),
      [x, weight, bias, mode, stride, padded = std::move(padded),
       mask = std::move(mask), partial, cout, cin, kh, kw, hp, wp, oh, ow, k,
       plane](Node& self) {
        const Tensor& g = self.grad;
        const Index batch = g.n();
        Tensor gw(weight->value.shape());
        MapRM gwmat(gw.ptr(), cout, k);
        CMapRM wmat(weight->value.ptr(), cout, k);
        Tensor gpad;
        if (wants(x)) gpad = Tensor(padded.shape());
        Eigen::VectorXd gb = Eigen::VectorXd::Zero(cout);
        MatRM cols(k, plane);
        MatRM gcols;
        MatRM geff(cout, plane);
        for (Index n = 0; n < batch; ++n) {
          auto gn = g.sample(n);
          gb += gn.rowwise().sum();
          geff = gn;
          if (partial)
            geff.array().rowwise() *=
                Eigen::Map<const Eigen::Array<Scalar, 1, Eigen::Dynamic>>(
                    mask.ptr(), plane);
          if (wants(weight)) {
            im2col(padded.ptr() + n * cin * hp * wp, cin, hp, wp, kh, kw,
                   stride, oh, ow, cols.data());
            gwmat.noalias() += geff * cols.transpose();
          }
          if (wants(x)) {
            gcols.noalias() = wmat.transpose() * geff;
            col2im(gcols.data(), cin, hp, wp, kh, kw, stride, oh, ow,
                   gpad.ptr() + n * cin * hp * wp);
          }
        }
        if (wants(weight)) weight->accumulate(gw);
        if (wants(bias)) {
          Tensor gbias(bias->value.shape());
          std::copy_n(gb.data(), cout, gbias.ptr());
          bias->accumulate(gbias);
        }
        if (wants(x)) x->accumulate(pad_adjoint(gpad, x->value.shape(), mode));
      });
}

Var relu(Tape& tape, const Var& x) {
  Tensor out(x->value.shape());
  out.data() = x->value.data().max(0.0);
  return tape.record(std::move(out), {x}, [x](Node& self) {
    Tensor g(x->value.shape());
    g.data() = (x->value.data() > 0.0).select(self.grad.data(), 0.0);
    x->accumulate(g);
  });
}

Var sigmoid(Tape& tape, const Var& x) {
  Tensor out(x->value.shape());
  out.data() = 1.0 / (1.0 + (-x->value.data()).exp());
  Tensor saved = out;
  return tape.record(std::move(out), {x},
                     [x, saved = std::move(saved)](Node& self) {
                       Tensor g(x->value.shape());
                       g.data() = self.grad.data() * saved.data() *
                                  (1.0 - saved.data());
                       x->accumulate(g);
                     });
}

Var maxpool2d(Tape& tape, const Var& x) {
  const Tensor& in = x->value;
  if (in.h() % 2 != 0 || in.w() % 2 != 0)
    throw GeometryError("maxpool2d needs even spatial extents, got " +
                        std::to_string(in.h()) + "x" + std::to_string(in.w()));
  const Index oh = in.h() / 2, ow = in.w() / 2;
  Tensor out(in.n(), in.c(), oh, ow);
  std::vector<Index> argmax(static_cast<std::size_t>(out.numel()));
  Index o = 0;
  for (Index n = 0; n < in.n(); ++n)
    for (Index c = 0; c < in.c(); ++c)
      for (Index y = 0; y < oh; ++y)
        for (Index xx = 0; xx < ow; ++xx, ++o) {
          Index best = in.offset(n, c, 2 * y, 2 * xx);
          for (Index dy = 0; dy < 2; ++dy)
            for (Index dx = 0; dx < 2; ++dx) {
              const Index idx = in.offset(n, c, 2 * y + dy, 2 * xx + dx);
              if (in[idx] > in[best]) best = idx;
            }
          argmax[static_cast<std::size_t>(o)] = best;
          out[o] = in[best];
        }
  return tape.record(std::move(out), {x},
                     [x, argmax = std::move(argmax)](Node& self) {
                       Tensor g(x->value.shape());
                       for (std::size_t i = 0; i < argmax.size(); ++i)
                         g[argmax[i]] += self.grad[static_cast<Index>(i)];
                       x->accumulate(g);
                     });
}

Var batchnorm2d(Tape& tape, const Var& x, const Var& gamma, const Var& beta,
                BatchNormState& state, bool training) {
  const Tensor& in = x->value;
  const Index c = in.c();
  require(gamma->value.numel() == c && beta->value.numel() == c &&
              state.running_mean.numel() == c,
          "batchnorm2d: channel count mismatch");
  const Index per = in.n() * in.plane_size();
  if (per == 0) throw ArgumentError("batchnorm2d: empty batch");

  Eigen::VectorXd mean(c), inv_std(c);
  if (training) {
    for (Index ch = 0; ch < c; ++ch) {
      Scalar s = 0.0;
      for (Index n = 0; n < in.n(); ++n) s += in.sample(n).row(ch).sum();
      const Scalar mu = s / static_cast<Scalar>(per);
      Scalar v = 0.0;
      for (Index n = 0; n < in.n(); ++n)
        v += (in.sample(n).row(ch).array() - mu).square().sum();
      const Scalar var = v / static_cast<Scalar>(per);
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(var + state.eps);
      const Scalar unbiased =
          per > 1 ? v / static_cast<Scalar>(per - 1) : var;
      state.running_mean[ch] =
          (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * mu;
      state.running_var[ch] = (1.0 - state.momentum) * state.running_var[ch] +
                              state.momentum * unbiased;
    }
  } else {
    for (Index ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(state.running_var[ch] + state.eps);
    }
  }

  Tensor xhat(in.shape());
  Tensor out(in.shape());
  for (Index n = 0; n < in.n(); ++n)
    for (Index ch = 0; ch < c; ++ch) {
      auto xh = xhat.sample(n).row(ch).array();
      xh = (in.sample(n).row(ch).array() - mean[ch]) * inv_std[ch];
      out.sample(n).row(ch).array() =
          gamma->value[ch] * xh + beta->value[ch];
    }

  return tape.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std, training, per,
       c](Node& self) {
        const Tensor& g = self.grad;
        Eigen::VectorXd sum_g = Eigen::VectorXd::Zero(c);
        Eigen::VectorXd sum_gx = Eigen::VectorXd::Zero(c);
        for (Index n = 0; n < g.n(); ++n)
          for (Index ch = 0; ch < c; ++ch) {
            sum_g[ch] += g.sample(n).row(ch).sum();
            sum_gx[ch] += (g.sample(n).row(ch).array() *
                           xhat.sample(n).row(ch).array())
                              .sum();
          }
        if (wants(gamma)) {
          Tensor gg(gamma->value.shape());
          for (Index ch = 0; ch < c; ++ch) gg[ch] = sum_gx[ch];
          gamma->accumulate(gg);
        }
        if (wants(beta)) {
          Tensor gb(beta->value.shape());
          for (Index ch = 0; ch < c; ++ch) gb[ch] = sum_g[ch];
          beta->accumulate(gb);
        }
        if (!wants(x)) return;
        Tensor gx(x->value.shape());
        const Scalar m = static_cast<Scalar>(per);
        for (Index n = 0; n < g.n(); ++n)
          for (Index ch = 0; ch < c; ++ch) {
            const Scalar k = gamma->value[ch] * inv_std[ch];
            auto gi = g.sample(n).row(ch).array();
            if (training) {
              gx.sample(n).row(ch).array() =
                  k * (gi - sum_g[ch] / m -
                       xhat.sample(n).row(ch).array() * sum_gx[ch] / m);
            } else {
              gx.sample(n).row(ch).array() = k * gi;
            }
          }
        x->accumulate(gx);
      });
}

Var linear(Tape& tape, const Var& x, const Var& weight, const Var& bias) {
  const Tensor& in = x->value;
  const Tensor& wt = weight->value;
  require(in.h() == 1 && in.w() == 1, "linear: input must be (n,d,1,1)");
  require(in.c() == wt.c(), "linear: input width " + std::to_string(in.c()) +
                                " != weight inner dim " +
                                std::to_string(wt.c()));
  const Index n = in.n(), d = in.c(), k = wt.n();
  if (bias) require(bias->value.numel() == k, "linear: bias length mismatch");
  Tensor out(n, k, 1, 1);
  CMapRM xm(in.ptr(), n, d);
  CMapRM wm(wt.ptr(), k, d);
  MapRM ym(out.ptr(), n, k);
  ym.noalias() = xm * wm.transpose();
  if (bias)
    ym.rowwise() +=
        Eigen::Map<const Eigen::RowVectorXd>(bias->value.ptr(), k);
  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(bias);
  return tape.record(std::move(out), std::move(parents),
                     [x, weight, bias, n, d, k](Node& self) {
                       CMapRM gy(self.grad.ptr(), n, k);
                       if (wants(weight)) {
                         Tensor gw(weight->value.shape());
                         MapRM(gw.ptr(), k, d).noalias() =
                             gy.transpose() * CMapRM(x->value.ptr(), n, d);
                         weight->accumulate(gw);
                       }
                       if (wants(bias)) {
                         Tensor gb(bias->value.shape());
                         Eigen::Map<Eigen::RowVectorXd>(gb.ptr(), k) =
                             gy.colwise().sum();
                         bias->accumulate(gb);
                       }
                       if (wants(x)) {
                         Tensor gx(x->value.shape());
                         MapRM(gx.ptr(), n, d).noalias() =
                             gy * CMapRM(weight->value.ptr(), k, d);
                         x->accumulate(gx);
                       }
                     });
}

Var global_avg_pool(Tape& tape, const Var& x) {
  const Tensor& in = x->value;
  if (in.plane_size() == 0) throw GeometryError("global_avg_pool: empty plane");
  Tensor out(in.n(), in.c(), 1, 1);
  const Scalar inv = 1.0 / static_cast<Scalar>(in.plane_size());
  for (Index n = 0; n < in.n(); ++n)
    for (Index c = 0; c < in.c(); ++c)
      out(n, c, 0, 0) = in.sample(n).row(c).sum() * inv;
  return tape.record(std::move(out), {x}, [x, inv](Node& self) {
    Tensor g(x->value.shape());
    for (Index n = 0; n < g.n(); ++n)
      for (Index c = 0; c < g.c(); ++c)
        g.sample(n).row(c).setConstant(self.grad(n, c, 0, 0) * inv);
    x->accumulate(g);
  });
}

namespace {

struct Tap {
  Index lo;
  Index hi;
  Scalar frac;  // weight of `hi`
};

std::vector<Tap> resize_taps(Index in, Index out, ResizeAlign align) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  for (Index t = 0; t < out; ++t) {
    Scalar s;
    if (align == ResizeAlign::Center) {
      s = (static_cast<Scalar>(t) + 0.5) * static_cast<Scalar>(in) /
              static_cast<Scalar>(out) -
          0.5;
    } else {
      s = out > 1 ? static_cast<Scalar>(t) * static_cast<Scalar>(in - 1) /
                        static_cast<Scalar>(out - 1)
                  : 0.0;
    }
    s = std::clamp<Scalar>(s, 0.0, static_cast<Scalar>(in - 1));
    const Index lo = static_cast<Index>(std::floor(s));
    const Index hi = std::min(lo + 1, in - 1);
    taps[static_cast<std::size_t>(t)] = {lo, hi, s - static_cast<Scalar>(lo)};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& in, Index out_h, Index out_w,
                       ResizeAlign align) {
  if (out_h < 1 || out_w < 1)
    throw ArgumentError("bilinear_resize: output extent must be positive");
  if (in.h() < 1 || in.w() < 1)
    throw GeometryError("bilinear_resize: empty input plane");
  if (in.h() == out_h && in.w() == out_w) return in;
  const auto ry = resize_taps(in.h(), out_h, align);
  const auto rx = resize_taps(in.w(), out_w, align);
  Tensor out(in.n(), in.c(), out_h, out_w);
  for (Index n = 0; n < in.n(); ++n)
    for (Index c = 0; c < in.c(); ++c) {
      auto src = in.plane(n, c);
      auto dst = out.plane(n, c);
      for (Index y = 0; y < out_h; ++y) {
        const Tap& ty = ry[static_cast<std::size_t>(y)];
        for (Index x = 0; x < out_w; ++x) {
          const Tap& tx = rx[static_cast<std::size_t>(x)];
          const Scalar top =
              src(ty.lo, tx.lo) * (1 - tx.frac) + src(ty.lo, tx.hi) * tx.frac;
          const Scalar bot =
              src(ty.hi, tx.lo) * (1 - tx.frac) + src(ty.hi, tx.hi) * tx.frac;
          dst(y, x) = top * (1 - ty.frac) + bot * ty.frac;
        }
      }
    }
  return out;
}

Var bilinear_resize(Tape& tape, const Var& x, Index out_h, Index out_w,
                    ResizeAlign align) {
  Tensor out = resize_bilinear(x->value, out_h, out_w, align);
  return tape.record(std::move(out), {x}, [x, out_h, out_w, align](Node& self) {
    const Tensor& in = x->value;
    if (in.h() == out_h && in.w() == out_w) {
      x->accumulate(self.grad);
      return;
    }
    const auto ry = resize_taps(in.h(), out_h, align);
    const auto rx = resize_taps(in.w(), out_w, align);
    Tensor g(in.shape());
    for (Index n = 0; n < in.n(); ++n)
      for (Index c = 0; c < in.c(); ++c) {
        auto gout = self.grad.plane(n, c);
        auto gin = g.plane(n, c);
        for (Index y = 0; y < out_h; ++y) {
          const Tap& ty = ry[static_cast<std::size_t>(y)];
          for (Index xx = 0; xx < out_w; ++xx) {
            const Tap& tx = rx[static_cast<std::size_t>(xx)];
            const Scalar v = gout(y, xx);
            gin(ty.lo, tx.lo) += v * (1 - ty.frac) * (1 - tx.frac);
            gin(ty.lo, tx.hi) += v * (1 - ty.frac) * tx.frac;
            gin(ty.hi, tx.lo) += v * ty.frac * (1 - tx.frac);
            gin(ty.hi, tx.hi) += v * ty.frac * tx.frac;
          }
        }
      }
    x->accumulate(g);
  });
}

Var add(Tape& tape, const Var& a, const Var& b) {
  require(a->value.shape() == b->value.shape(),
          "add: shapes " + to_string(a->value.shape()) + " and " +
              to_string(b->value.shape()) + " differ");
  Tensor out(a->value.shape());
  out.data() = a->value.data() + b->value.data();
  return tape.record(std::move(out), {a, b}, [a, b](Node& self) {
    if (wants(a)) a->accumulate(self.grad);
    if (wants(b)) b->accumulate(self.grad);
  });
}

Var concat_channels(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_channels: no inputs");
  const Shape& s0 = parts.front()->value.shape();
  Index channels = 0;
  for (const Var& p : parts) {
    const Shape& s = p->value.shape();
    require(s.n == s0.n && s.h == s0.h && s.w == s0.w,
            "concat_channels: spatial/batch mismatch");
    channels += s.c;
  }
  Tensor out(s0.n, channels, s0.h, s0.w);
  const Index plane = s0.h * s0.w;
  for (Index n = 0; n < s0.n; ++n) {
    Scalar* dst = out.ptr() + n * channels * plane;
    for (const Var& p : parts)
      dst = std::copy_n(p->value.ptr() + n * p->value.c() * plane,
                        p->value.c() * plane, dst);
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return tape.record(std::move(out), parents,
                     [parents, channels, plane](Node& self) {
                       Index offset = 0;
                       for (const Var& p : parents) {
                         const Index pc = p->value.c();
                         if (wants(p)) {
                           Tensor g(p->value.shape());
                           for (Index n = 0; n < g.n(); ++n)
                             std::copy_n(self.grad.ptr() +
                                             (n * channels + offset) * plane,
                                         pc * plane,
                                         g.ptr() + n * pc * plane);
                           p->accumulate(g);
                         }
                         offset += pc;
                       }
                     });
}

Var sum(Tape& tape, const Var& x) {
  return tape.record(Tensor::scalar(x->value.data().sum()), {x},
                     [x](Node& self) {
                       x->accumulate(Tensor(x->value.shape(), self.grad[0]));
                     });
}

Var weighted_sum(Tape& tape, const Var& x, const Tensor& weights) {
  require(weights.shape() == x->value.shape(),
          "weighted_sum: weight shape mismatch");
  const Scalar v = (x->value.data() * weights.data()).sum();
  return tape.record(Tensor::scalar(v), {x}, [x, weights](Node& self) {
    Tensor g(weights.shape());
    g.data() = weights.data() * self.grad[0];
    x->accumulate(g);
  });
}

Var mse_loss(Tape& tape, const Var& pred, const Tensor& target) {
  require(pred->value.shape() == target.shape(),
          "mse_loss: prediction " + to_string(pred->value.shape()) +
              " vs target " + to_string(target.shape()));
  const Scalar m = static_cast<Scalar>(target.numel());
  Tensor diff(target.shape());
  diff.data() = pred->value.data() - target.data();
  const Scalar loss = diff.data().square().sum() / m;
  return tape.record(Tensor::scalar(loss), {pred},
                     [pred, diff = std::move(diff), m](Node& self) {
                       Tensor g(diff.shape());
                       g.data() = diff.data() * (2.0 * self.grad[0] / m);
                       pred->accumulate(g);
                     });
}

namespace {

// Softmax over channels at each (n, y, x); returns probabilities and the
// summed negative log-likelihood of the labels.
Scalar softmax_nll(const Tensor& logits, const std::vector<int>& labels,
                   Tensor& probs) {
  const Index C = logits.c();
  const Index plane = logits.plane_size();
  probs = Tensor(logits.shape());
  Scalar total = 0.0;
  for (Index n = 0; n < logits.n(); ++n) {
    auto z = logits.sample(n);
    auto p = probs.sample(n);
    for (Index i = 0; i < plane; ++i) {
      const Scalar mx = z.col(i).maxCoeff();
      Scalar denom = 0.0;
      for (Index c = 0; c < C; ++c) {
        const Scalar e = std::exp(z(c, i) - mx);
        p(c, i) = e;
        denom += e;
      }
      p.col(i) /= denom;
      const int label = labels[static_cast<std::size_t>(n * plane + i)];
      total += std::log(denom) + mx - z(label, i);
    }
  }
  return total;
}

Var cross_entropy(Tape& tape, const Var& logits, std::vector<int> labels) {
  const Index C = logits->value.c();
  for (int l : labels)
    if (l < 0 || l >= C)
      throw RangeError("cross entropy label " + std::to_string(l) +
                       " outside [0," + std::to_string(C) + ")");
  Tensor probs;
  const Scalar count = static_cast<Scalar>(labels.size());
  if (labels.empty()) throw ArgumentError("cross entropy over zero items");
  const Scalar loss = softmax_nll(logits->value, labels, probs) / count;
  return tape.record(
      Tensor::scalar(loss), {logits},
      [logits, probs = std::move(probs), labels = std::move(labels),
       count](Node& self) {
        Tensor g = probs;
        const Index plane = g.plane_size();
        for (Index n = 0; n < g.n(); ++n) {
          auto gs = g.sample(n);
          for (Index i = 0; i < plane; ++i)
            gs(labels[static_cast<std::size_t>(n * plane + i)], i) -= 1.0;
        }
        g.data() *= self.grad[0] / count;
        logits->accumulate(g);
      });
}

}  // namespace

Var softmax_cross_entropy(Tape& tape, const Var& logits,
                          std::span<const int> labels) {
  const Tensor& z = logits->value;
  require(z.h() == 1 && z.w() == 1, "softmax_cross_entropy: logits must be (n,C,1,1)");
  require(static_cast<Index>(labels.size()) == z.n(),
          "softmax_cross_entropy: label count != batch size");
  return cross_entropy(tape, logits, {labels.begin(), labels.end()});
}

Var pixelwise_cross_entropy(Tape& tape, const Var& logits,
                            const Tensor& labels) {
  const Tensor& z = logits->value;
  require(labels.n() == z.n() && labels.c() == 1 && labels.h() == z.h() &&
              labels.w() == z.w(),
          "pixelwise_cross_entropy: labels " + to_string(labels.shape()) +
              " do not match logits " + to_string(z.shape()));
  std::vector<int> flat(static_cast<std::size_t>(labels.numel()));
  for (Index i = 0; i < labels.numel(); ++i)
    flat[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(labels[i]));
  return cross_entropy(tape, logits, std::move(flat));
}

}  // namespace padlab
