// Copyright 2026 The qsnn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Criteria 1-4 and 7 are the property checks; 5 and 6 read the tables of a
// cnn4 grid (p = 2, three seeds, both variants, both corrections) trained on
// the bundled 10-class 28x28 subset. The grid is resumable, so a rerun with
// the same --out-dir only re-evaluates.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qsnn/experiment.h"
#include "qsnn/verify.h"

namespace {

std::string Elapsed(std::chrono::steady_clock::time_point start) {
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f s", s);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qsnn acceptance run"};
  std::string data_dir = "data/mnist";
  std::string out_dir = "runs/acceptance";
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int epochs = qsnn::TrainConfig{}.epochs;
  int jobs = 1;
  std::uint64_t check_seed = 0;
  app.add_option("--data", data_dir, "IDX directory for the trend criteria")->capture_default_str();
  app.add_option("--out-dir", out_dir, "experiment output directory (resumable)")->capture_default_str();
  app.add_option("--seeds", seeds, "training seeds")->capture_default_str();
  app.add_option("--epochs", epochs, "training epochs per cell")->capture_default_str();
  app.add_option("--jobs", jobs, "cells trained concurrently")->capture_default_str();
  app.add_option("--check-seed", check_seed, "seed for the property checks")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::vector<qsnn::CheckResult> results;
  auto report = [&](qsnn::CheckResult r, const std::string& elapsed) {
    r.detail += " [" + elapsed + "]";
    std::cout << qsnn::FormatCheck(r) << std::endl;
    results.push_back(std::move(r));
  };

  auto timed = [&](auto&& check) {
    const auto start = std::chrono::steady_clock::now();
    qsnn::CheckResult r = check();
    report(std::move(r), Elapsed(start));
  };
  timed([&] { return qsnn::CheckExpectedMean(check_seed); });
  timed([&] { return qsnn::CheckBackwardReference(check_seed); });
  timed([&] { return qsnn::CheckSingleNeuronEquivalence(); });
  timed([&] { return qsnn::CheckResponseCurve(); });

  qsnn::ExperimentConfig cfg;
  cfg.dataset.kind = qsnn::DatasetKind::kIdx;
  cfg.dataset.path = data_dir;
  cfg.dataset.max_train = 10000;
  cfg.dataset.max_test = 2000;
  cfg.arch.name = "cnn4";
  cfg.upper_bound = 2;
  cfg.seeds = seeds;
  cfg.t_list = {1, 2, 4, 8, 16, 32};
  cfg.corrections = {qsnn::Correction::kNone, qsnn::Correction::kNegativeSpikes};
  cfg.output_dir = out_dir;
  cfg.train.epochs = epochs;
  cfg.jobs = jobs;

  const auto grid_start = std::chrono::steady_clock::now();
  try {
    const qsnn::ExperimentResult grid = qsnn::RunExperiment(cfg, &std::cerr);
    const std::string elapsed = Elapsed(grid_start);
    for (const qsnn::ResultTable& t : grid.tables) std::cout << qsnn::FormatTable(t, qsnn::TableFormat::kMarkdown) << '\n';
    report(qsnn::CheckNoiseTrend(grid.tables[0], cfg.upper_bound), "grid " + elapsed);
    report(qsnn::CheckNegativeSpikeTrend(grid.tables[0], grid.tables[1]), "grid " + elapsed);
  } catch (const std::exception& e) {
    report({5, "noise-trend", false, std::string("experiment failed: ") + e.what()}, Elapsed(grid_start));
    report({6, "negative-spike-trend", false, std::string("experiment failed: ") + e.what()},
           Elapsed(grid_start));
  }

  timed([&] { return qsnn::CheckGradients(check_seed); });

  int failed = 0;
  for (const qsnn::CheckResult& r : results) failed += !r.passed;
  const std::string summary =
      "acceptance: " + std::to_string(results.size()) + " criteria evaluated, " + std::to_string(failed) + " failed";
  std::cout << summary << std::endl;

  // ctest hides the output of passing tests, so keep the verdicts on disk.
  std::filesystem::create_directories(out_dir);
  std::ofstream report_file(std::filesystem::path(out_dir) / "acceptance_report.txt");
  for (const qsnn::CheckResult& r : results) report_file << qsnn::FormatCheck(r) << '\n';
  report_file << summary << '\n';
  return failed == 0 ? 0 : 1;
}
