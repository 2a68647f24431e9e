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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "padlab/tensor.hpp"

namespace padlab {

struct NamedTensor {
  std::string name;
  Tensor value;
};

inline constexpr char kCheckpointMagic[8] = {'P', 'A', 'D', 'L',
                                             'A', 'B', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (all integers little-endian):
//   magic "PADLABCK" | u32 version | u32 count
//   count x { u32 name_len | name bytes | u64 n | u64 c | u64 h | u64 w }
//   for each entry in header order: n*c*h*w IEEE-754 binary64, little-endian
void write_checkpoint(std::ostream& out, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace padlab
