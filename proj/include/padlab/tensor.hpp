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

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "padlab/errors.hpp"

namespace padlab {

using Index = Eigen::Index;

/// Extents of a 4-D (batch, channel, height, width) tensor.
struct Shape {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  constexpr Index numel() const { return n * c * h * w; }
  constexpr Index plane() const { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense row-major (n, c, h, w) array. Value semantics; copies are deep.
template <typename ScalarT>
class BasicTensor {
 public:
  using Scalar = ScalarT;
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using MatrixRM =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using PlaneMap = Eigen::Map<MatrixRM>;
  using ConstPlaneMap = Eigen::Map<const MatrixRM>;

  BasicTensor() = default;
  explicit BasicTensor(const Shape& shape, Scalar fill = Scalar(0))
      : shape_(shape), data_(Storage::Constant(checked(shape), fill)) {}
  BasicTensor(Index n, Index c, Index h, Index w, Scalar fill = Scalar(0))
      : BasicTensor(Shape{n, c, h, w}, fill) {}

  static BasicTensor from(const Shape& shape,
                          std::initializer_list<Scalar> values) {
    BasicTensor t(shape);
    if (static_cast<Index>(values.size()) != t.numel())
      throw DimensionError("initializer size " + std::to_string(values.size()) +
                           " does not match shape " + to_string(shape));
    Index i = 0;
    for (Scalar v : values) t.data_[i++] = v;
    return t;
  }
  static BasicTensor scalar(Scalar v) { return BasicTensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  Index n() const { return shape_.n; }
  Index c() const { return shape_.c; }
  Index h() const { return shape_.h; }
  Index w() const { return shape_.w; }
  Index numel() const { return shape_.numel(); }
  Index plane_size() const { return shape_.plane(); }
  bool empty() const { return numel() == 0; }

  Storage& data() { return data_; }
  const Storage& data() const { return data_; }
  Scalar* ptr() { return data_.data(); }
  const Scalar* ptr() const { return data_.data(); }

  Index offset(Index n, Index c, Index h, Index w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  Scalar& operator()(Index n, Index c, Index h, Index w) {
    return data_[offset(n, c, h, w)];
  }
  Scalar operator()(Index n, Index c, Index h, Index w) const {
    return data_[offset(n, c, h, w)];
  }
  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Sample `n` viewed as a (c, h*w) row-major matrix.
  PlaneMap sample(Index n) {
    return PlaneMap(ptr() + n * shape_.c * shape_.plane(), shape_.c,
                    shape_.plane());
  }
  ConstPlaneMap sample(Index n) const {
    return ConstPlaneMap(ptr() + n * shape_.c * shape_.plane(), shape_.c,
                         shape_.plane());
  }
  /// Channel plane (n, c) viewed as an (h, w) row-major matrix.
  PlaneMap plane(Index n, Index c) {
    return PlaneMap(ptr() + (n * shape_.c + c) * shape_.plane(), shape_.h,
                    shape_.w);
  }
  ConstPlaneMap plane(Index n, Index c) const {
    return ConstPlaneMap(ptr() + (n * shape_.c + c) * shape_.plane(),
                         shape_.h, shape_.w);
  }

  /// Same data, new extents of equal element count.
  BasicTensor reshaped(const Shape& shape) const {
    if (shape.numel() != numel())
      throw DimensionError("cannot reshape " + to_string(shape_) + " to " +
                           to_string(shape));
    BasicTensor t = *this;
    t.shape_ = shape;
    return t;
  }

  void fill(Scalar v) { data_.setConstant(v); }
  bool all_finite() const { return data_.isFinite().all(); }

 private:
  static Index checked(const Shape& s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
      throw ArgumentError("negative extent in shape " + to_string(s));
    return s.numel();
  }

  Shape shape_{};
  Storage data_;
};

using Scalar = double;
using Tensor = BasicTensor<Scalar>;

/// Batch slice [begin, begin + count) along the n axis.
Tensor slice_batch(const Tensor& t, Index begin, Index count);
/// Concatenate along the n axis; all other extents must agree.
Tensor stack_batch(const std::vector<Tensor>& parts);
/// Mirror left-right (axis = 3) or top-bottom (axis = 2).
Tensor flip(const Tensor& t, int axis);
/// Crop `amount` pixels from every spatial side.
Tensor crop(const Tensor& t, Index amount);

}  // namespace padlab
