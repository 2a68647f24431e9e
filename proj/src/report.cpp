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

#include <fstream>
#include <map>
#include <tuple>

#include "padlab/experiments.hpp"

namespace padlab {

namespace fs = std::filesystem;

namespace {

struct RunDir {
  std::string id;
  fs::path path;
  RunConfig cfg;
  CsvTable summary;
};

RunDir open_run(const fs::path& dir) {
  for (const char* file : {"config.ini", "summary.csv"})
    if (!fs::exists(dir / file))
      throw FormatError("incomplete run dir " + dir.string() + ": missing " + file);
  std::string id = dir.filename().string();
  if (id.empty() || id == ".") id = dir.parent_path().filename().string();
  return {id, dir, load_config(dir / "config.ini"), CsvTable::load(dir / "summary.csv")};
}

// Ring means of one dist-to-border run, indexed by distance.
std::vector<Scalar> ring_means(const RunDir& run) {
  const fs::path file = run.path / "rings.csv";
  if (!fs::exists(file))
    throw FormatError("incomplete run dir " + run.path.string() + ": missing rings.csv");
  const CsvTable t = CsvTable::load(file);
  std::vector<Scalar> means;
  for (const auto& row : t.rows()) means.push_back(std::stod(row.at(2)));
  return means;
}

std::vector<Scalar> average(const std::vector<std::vector<Scalar>>& runs) {
  std::vector<Scalar> out(runs.front().size(), 0.0);
  for (const auto& r : runs) {
    if (r.size() != out.size()) throw FormatError("dist-to-border runs differ in ring count");
    for (std::size_t i = 0; i < r.size(); ++i) out[i] += r[i];
  }
  for (Scalar& v : out) v /= static_cast<Scalar>(runs.size());
  return out;
}

}  // namespace

std::vector<fs::path> write_report(std::span<const fs::path> runs, const fs::path& out) {
  if (runs.empty()) throw ArgumentError("report needs at least one run directory");
  std::vector<RunDir> dirs;
  for (const fs::path& p : runs) dirs.push_back(open_run(p));
  fs::create_directories(out);
  std::vector<fs::path> written;

  std::map<std::vector<std::string>, std::vector<const RunDir*>> by_header;
  for (const RunDir& d : dirs) by_header[d.summary.header()].push_back(&d);
  for (const auto& [header, group] : by_header) {
    std::vector<std::string> h{"run"};
    h.insert(h.end(), header.begin(), header.end());
    CsvTable table(h);
    for (const RunDir* d : group)
      for (const auto& row : d->summary.rows()) {
        std::vector<std::string> r{d->id};
        r.insert(r.end(), row.begin(), row.end());
        table.add_row(r);
      }
    const fs::path file = by_header.size() == 1
                              ? out / "summary.csv"
                              : out / ("summary_" + to_string(group.front()->cfg.experiment) +
                                       ".csv");
    table.save(file);
    written.push_back(file);
  }

  using Key = std::tuple<std::string, std::string, Index>;
  std::map<Key, std::pair<std::vector<std::vector<Scalar>>, std::vector<std::vector<Scalar>>>>
      groups;
  for (const RunDir& d : dirs) {
    if (d.cfg.experiment != Experiment::DistToBorder) continue;
    auto& [nopad, padded] =
        groups[{to_string(d.cfg.gridnet.task), d.cfg.grid.canvas.name, d.cfg.grid.k}];
    (d.cfg.gridnet.mode.kind == PadKind::None ? nopad : padded).push_back(ring_means(d));
  }
  if (!groups.empty()) {
    CsvTable diff({"task", "canvas", "k", "distance", "nopad", "padded", "difference"});
    for (const auto& [key, runs_of] : groups) {
      const auto& [task, canvas, k] = key;
      const std::string where =
          "dist-to-border group task=" + task + " canvas=" + canvas + " k=" + std::to_string(k);
      if (runs_of.first.empty()) throw ArgumentError(where + " has no no-pad run");
      if (runs_of.second.empty()) throw ArgumentError(where + " has no padded baseline run");
      const auto nopad = average(runs_of.first);
      const auto padded = average(runs_of.second);
      if (nopad.size() != padded.size()) throw FormatError(where + ": ring counts differ");
      for (std::size_t i = 0; i < nopad.size(); ++i)
        diff.add_row({task, canvas, std::to_string(k), std::to_string(i),
                      format_number(nopad[i]), format_number(padded[i]),
                      format_number(nopad[i] - padded[i])});
    }
    diff.save(out / "ring_diff.csv");
    written.push_back(out / "ring_diff.csv");
  }
  return written;
}

}  // namespace padlab
