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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "padlab/experiments.hpp"

namespace {

int run_one(padlab::Experiment experiment, const std::string& config_path,
            const std::optional<std::uint64_t>& seed, const std::string& out,
            bool print_only, bool quiet) {
  padlab::RunConfig cfg = padlab::load_config(config_path);
  cfg.experiment = experiment;
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.out = out;
  cfg.validate();
  if (print_only) {
    std::cout << cfg.echo();
    return 0;
  }
  const padlab::CsvTable summary = padlab::run_experiment(cfg, quiet ? nullptr : &std::cerr);
  std::cout << summary.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"padlab: padding and absolute position experiments"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::optional<std::uint64_t> seed;
  bool print_only = false, quiet = false;
  padlab::Experiment chosen{};
  for (padlab::Experiment e : padlab::all_experiments()) {
    CLI::App* sub = app.add_subcommand(padlab::to_string(e), "run the " +
                                                                 padlab::to_string(e) +
                                                                 " experiment");
    sub->add_option("--config", config_path, "key = value config file")->required();
    sub->add_option("--seed", seed, "override [run] seed");
    sub->add_option("--out", out, "override [run] out directory");
    sub->add_flag("--print-config", print_only, "print the effective config and exit");
    sub->add_flag("--quiet", quiet, "no progress lines on stderr");
    sub->callback([&chosen, e] { chosen = e; });
  }

  std::vector<std::string> run_dirs;
  std::string report_out = "padlab_report";
  CLI::App* report = app.add_subcommand("report", "summarize finished run directories");
  report->add_option("runs", run_dirs, "run directories")->required();
  report->add_option("--out", report_out, "directory for the summary CSVs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      for (const auto& f : padlab::write_report(dirs, report_out)) std::cout << f.string() << '\n';
      return 0;
    }
    return run_one(chosen, config_path, seed, out, print_only, quiet);
  } catch (const padlab::ArgumentError& e) {
    std::cerr << "padlab: invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const padlab::RangeError& e) {
    std::cerr << "padlab: invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "padlab: " << e.what() << '\n';
    return 1;
  }
}
