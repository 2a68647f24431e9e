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

#include <filesystem>
#include <string>
#include <vector>

#include "padlab/tensor.hpp"

namespace padlab {

/// Writes plane (0, 0) of `map` as an 8-bit binary PGM (P5). Values are
/// mapped linearly from [lo, hi] to [0, 255] and clamped.
void write_pgm(const std::filesystem::path& path, const Tensor& map, Scalar lo,
               Scalar hi);
/// Same, scaling by the map's own min and max (constant maps become 0).
void write_pgm(const std::filesystem::path& path, const Tensor& map);

/// Minimal CSV writer: one header, rows of preformatted cells.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::string str() const;
  void save(const std::filesystem::path& path) const;

  static CsvTable load(const std::filesystem::path& path);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

}  // namespace padlab
