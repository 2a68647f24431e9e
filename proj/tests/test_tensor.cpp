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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "padlab/autodiff.hpp"
#include "padlab/checkpoint.hpp"
#include "padlab/tensor.hpp"
#include "support.hpp"

namespace padlab {
namespace {

TEST(Tensor, DataLengthMatchesShape) {
  Tensor t(2, 3, 4, 5, 1.5);
  EXPECT_EQ(t.numel(), 120);
  EXPECT_EQ(t.data().size(), 120);
  EXPECT_EQ(t.offset(1, 2, 3, 4), 119);
  EXPECT_DOUBLE_EQ(t(1, 2, 3, 4), 1.5);
}

TEST(Tensor, FromChecksElementCount) {
  EXPECT_THROW(Tensor::from({1, 1, 2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  const Tensor t = Tensor::from({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(t(0, 0, 1, 0), 3.0);
}

TEST(Tensor, NegativeExtentRejected) {
  EXPECT_THROW(Tensor(1, -1, 2, 2), ArgumentError);
}

TEST(Tensor, ReshapeKeepsDataAndRejectsMismatch) {
  const Tensor t = Tensor::from({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({1, 6, 1, 1});
  EXPECT_DOUBLE_EQ(r(0, 4, 0, 0), 5.0);
  EXPECT_THROW(t.reshaped({1, 1, 4, 2}), DimensionError);
}

TEST(Tensor, SliceAndStackAreInverse) {
  std::mt19937_64 rng(3);
  const Tensor t = testing::random_tensor({5, 2, 3, 3}, rng);
  const Tensor joined = stack_batch({slice_batch(t, 0, 2), slice_batch(t, 2, 3)});
  EXPECT_EQ(joined.shape(), t.shape());
  EXPECT_TRUE((joined.data() == t.data()).all());
  EXPECT_THROW(slice_batch(t, 4, 2), RangeError);
  EXPECT_THROW(stack_batch({Tensor(1, 2, 3, 3), Tensor(1, 2, 3, 4)}), DimensionError);
}

TEST(Tensor, FlipTwiceIsIdentity) {
  const Tensor t = Tensor::from({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor lr = flip(t, 3);
  EXPECT_DOUBLE_EQ(lr(0, 0, 0, 0), 3.0);
  EXPECT_DOUBLE_EQ(flip(t, 2)(0, 0, 0, 0), 4.0);
  EXPECT_TRUE((flip(lr, 3).data() == t.data()).all());
}

TEST(Tensor, CropRemovesBorder) {
  const Tensor t = Tensor::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor c = crop(t, 1);
  ASSERT_EQ(c.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(c[0], 5.0);
}

TEST(Tensor, AllFiniteDetectsNan) {
  Tensor t(1, 1, 1, 2);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

// Hand evaluation of the center-aligned sampling rule for 2x2 -> 4x4:
// source coordinate (i + 0.5) / 2 - 0.5 gives -0.25, 0.25, 0.75, 1.25, which
// clamp to 0, 0.25, 0.75, 1 on both axes. With corners 0,1 (top) and 2,3
// (bottom) the value is 2 * ty + tx.
TEST(Resize, CenterAlignedTwoToFourMatchesHandTable) {
  const Tensor x = Tensor::from({1, 1, 2, 2}, {0, 1, 2, 3});
  const Tensor y = resize_bilinear(x, 4, 4);
  const double expected[4][4] = {{0.0, 0.25, 0.75, 1.0},
                                 {0.5, 0.75, 1.25, 1.5},
                                 {1.5, 1.75, 2.25, 2.5},
                                 {2.0, 2.25, 2.75, 3.0}};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(y(0, 0, r, c), expected[r][c], 1e-15) << r << "," << c;
}

TEST(Resize, IdentityAndConstantExtension) {
  std::mt19937_64 rng(9);
  const Tensor x = testing::random_tensor({2, 3, 5, 4}, rng);
  EXPECT_TRUE((resize_bilinear(x, 5, 4).data() == x.data()).all());
  const Tensor five = resize_bilinear(Tensor(1, 1, 1, 1, 5.0), 3, 3);
  for (Index i = 0; i < five.numel(); ++i) EXPECT_DOUBLE_EQ(five[i], 5.0);
}

TEST(Resize, CornerAlignedHitsCorners) {
  const Tensor x = Tensor::from({1, 1, 2, 2}, {0, 1, 2, 3});
  const Tensor y = resize_bilinear(x, 3, 3, ResizeAlign::Corner);
  EXPECT_DOUBLE_EQ(y(0, 0, 1, 1), 1.5);
  EXPECT_DOUBLE_EQ(y(0, 0, 2, 2), 3.0);
}

TEST(Checkpoint, RoundTripIsExact) {
  std::mt19937_64 rng(1);
  const std::vector<NamedTensor> tensors{{"a.weight", testing::random_tensor({2, 3, 3, 3}, rng)},
                                         {"b", testing::random_tensor({4, 1, 1, 1}, rng)}};
  std::stringstream buf;
  write_checkpoint(buf, tensors);
  const auto back = read_checkpoint(buf);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].name, tensors[i].name);
    EXPECT_EQ(back[i].value.shape(), tensors[i].value.shape());
    EXPECT_TRUE((back[i].value.data() == tensors[i].value.data()).all());
  }
}

TEST(Checkpoint, HeaderLayout) {
  std::stringstream buf;
  const std::vector<NamedTensor> one{{"x", Tensor(1, 1, 1, 1, 2.0)}};
  write_checkpoint(buf, one);
  const std::string bytes = buf.str();
  // magic + version + count + (len + "x" + 4 extents) + one double
  EXPECT_EQ(bytes.size(), 8u + 4 + 4 + 4 + 1 + 32 + 8);
  EXPECT_EQ(bytes.substr(0, 8), "PADLABCK");
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  std::stringstream bad("NOTPADLAB");
  EXPECT_THROW(read_checkpoint(bad), FormatError);
  std::stringstream buf;
  const std::vector<NamedTensor> one{{"x", Tensor(1, 1, 2, 2, 2.0)}};
  write_checkpoint(buf, one);
  std::stringstream cut(buf.str().substr(0, buf.str().size() - 3));
  EXPECT_THROW(read_checkpoint(cut), FormatError);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "padlab_ckpt_test.ckpt";
  const std::vector<NamedTensor> one{{"w", Tensor(1, 2, 1, 1, -0.125)}};
  save_checkpoint(path, one);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_DOUBLE_EQ(back[0].value[1], -0.125);
}

}  // namespace
}  // namespace padlab
