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

#include "padlab/tensor.hpp"

#include <algorithm>

namespace padlab {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," +
         std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

Tensor slice_batch(const Tensor& t, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > t.n())
    throw RangeError("batch slice out of range");
  Tensor out(count, t.c(), t.h(), t.w());
  const Index per = t.c() * t.plane_size();
  std::copy_n(t.ptr() + begin * per, count * per, out.ptr());
  return out;
}

Tensor stack_batch(const std::vector<Tensor>& parts) {
  if (parts.empty()) return Tensor();
  const Shape& s0 = parts.front().shape();
  Index n = 0;
  for (const Tensor& p : parts) {
    if (p.c() != s0.c || p.h() != s0.h || p.w() != s0.w)
      throw DimensionError("stack_batch: mismatched shapes " +
                           to_string(s0) + " vs " + to_string(p.shape()));
    n += p.n();
  }
  Tensor out(n, s0.c, s0.h, s0.w);
  Scalar* dst = out.ptr();
  for (const Tensor& p : parts) dst = std::copy_n(p.ptr(), p.numel(), dst);
  return out;
}

Tensor flip(const Tensor& t, int axis) {
  if (axis != 2 && axis != 3) throw ArgumentError("flip axis must be 2 or 3");
  Tensor out(t.shape());
  for (Index n = 0; n < t.n(); ++n)
    for (Index c = 0; c < t.c(); ++c)
      for (Index y = 0; y < t.h(); ++y)
        for (Index x = 0; x < t.w(); ++x) {
          const Index sy = axis == 2 ? t.h() - 1 - y : y;
          const Index sx = axis == 3 ? t.w() - 1 - x : x;
          out(n, c, y, x) = t(n, c, sy, sx);
        }
  return out;
}

Tensor crop(const Tensor& t, Index amount) {
  if (amount < 0 || 2 * amount > t.h() || 2 * amount > t.w())
    throw GeometryError("crop amount exceeds spatial extent");
  Tensor out(t.n(), t.c(), t.h() - 2 * amount, t.w() - 2 * amount);
  for (Index n = 0; n < t.n(); ++n)
    for (Index c = 0; c < t.c(); ++c)
      out.plane(n, c) = t.plane(n, c).block(amount, amount, out.h(), out.w());
  return out;
}

}  // namespace padlab
