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

#include "padlab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace padlab {

void write_pgm(const std::filesystem::path& path, const Tensor& map, Scalar lo,
               Scalar hi) {
  if (map.empty()) throw ArgumentError("write_pgm: empty map");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string());
  out << "P5\n" << map.w() << " " << map.h() << "\n255\n";
  const Scalar span = hi > lo ? hi - lo : 1.0;
  for (Index y = 0; y < map.h(); ++y)
    for (Index x = 0; x < map.w(); ++x) {
      const Scalar v = (map(0, 0, y, x) - lo) / span;
      const long byte = std::lround(std::clamp<Scalar>(v, 0.0, 1.0) * 255.0);
      out.put(static_cast<char>(static_cast<unsigned char>(byte)));
    }
  if (!out) throw FormatError("failed writing " + path.string());
}

void write_pgm(const std::filesystem::path& path, const Tensor& map) {
  const Index plane = map.plane_size();
  if (plane == 0) throw ArgumentError("write_pgm: empty map");
  const auto head = map.data().head(plane);
  write_pgm(path, map, head.minCoeff(), head.maxCoeff());
}

CsvTable::CsvTable(std::vector<std::string> header)
    : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size())
    throw DimensionError("csv row has " + std::to_string(cells.size()) +
                         " cells, header has " +
                         std::to_string(header_.size()));
  rows_.push_back(std::move(cells));
}

namespace {

void join(std::ostringstream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string CsvTable::str() const {
  std::ostringstream os;
  join(os, header_);
  for (const auto& r : rows_) join(os, r);
  return os.str();
}

void CsvTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string());
  out << str();
}

CsvTable CsvTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + " is empty");
  CsvTable table(split(line));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    table.add_row(split(line));
  }
  return table;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace padlab
