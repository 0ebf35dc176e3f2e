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

// Experiment grid: for every (variant, seed) cell, train a quantized ANN,
// convert it, and simulate the SNN for max(T_list) steps under each
// requested correction mode.
//
// Output directory layout:
//   config.json                       resolved configuration
//   cells/<variant>_seed<k>/model.ckpt
//   cells/<variant>_seed<k>/train.json    per-epoch history
//   cells/<variant>_seed<k>/sim_<correction>.csv
//   cells/<variant>_seed<k>/result.json   written last; marks the cell done
//   table_<correction>.csv, table_<correction>.md
//
// A cell whose result.json matches the current configuration is loaded
// instead of recomputed. If only the simulation settings changed, the saved
// checkpoint is reused.

#ifndef QSNN_EXPERIMENT_H_
#define QSNN_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qsnn/dataset.h"
#include "qsnn/snn_sim.h"
#include "qsnn/trainer.h"

namespace qsnn {

inline constexpr const char* kVariantNoNoise = "no_na";
inline constexpr const char* kVariantNoise = "na";

struct ExperimentConfig {
  DatasetSpec dataset;
  ArchSpec arch{"cnn4", {}, 10, 2};  // input_shape and num_classes come from the data
  int upper_bound = 2;
  // Subset of {"no_na", "na"}; noise during training is on for "na".
  std::vector<std::string> variants = {kVariantNoNoise, kVariantNoise};
  std::vector<std::uint64_t> seeds = {0};
  std::vector<int> t_list = {1, 2, 4, 8, 16, 32};
  std::vector<Correction> corrections = {Correction::kNone};
  std::string output_dir = "runs/experiment";
  TrainConfig train;  // seed, upper_bound and noise_enabled are set per cell
  int jobs = 1;       // cells trained concurrently
};

// Throws ConfigError: empty seeds, unsorted or non-positive T_list, unknown
// variant, p < 1.
void ValidateExperimentConfig(const ExperimentConfig& cfg);

nlohmann::json ExperimentConfigToJson(const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys are a ConfigError.
ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& j);
ExperimentConfig LoadExperimentConfig(const std::string& path);

struct ResultRow {
  std::string variant;
  std::string seed;  // seed number, or "mean" / "std" for aggregate rows
  bool failed = false;
  std::string message;
  double ann_accuracy = 0.0;
  std::vector<double> snn_accuracy;  // one per T in ResultTable::t_list
};

struct ResultTable {
  Correction correction = Correction::kNone;
  std::vector<int> t_list;
  std::vector<ResultRow> rows;       // per cell, variant-major then seed order
  std::vector<ResultRow> aggregate;  // mean then std per variant, over cells that succeeded

  bool AnyFailed() const;
  // Mean/std rows for `variant`, or nullptr if it has no successful cells.
  const ResultRow* Mean(const std::string& variant) const;
  const ResultRow* Std(const std::string& variant) const;
};

// Fills `aggregate` from `rows`. The std row is the sample standard deviation
// (zero for a single seed).
void Aggregate(ResultTable& table);

enum class TableFormat { kCsv, kMarkdown };

// CSV columns: variant,seed,ann,T=<t>... with four-decimal accuracies.
// Failed cells render as "failed". Throws UsageError for a table without rows.
std::string FormatTable(const ResultTable& table, TableFormat format);
void EmitTable(const ResultTable& table, TableFormat format, const std::string& path);

struct ExperimentResult {
  std::vector<ResultTable> tables;  // one per correction, in config order
  bool AnyFailed() const;
};

// Progress lines go to `log` when non-null.
ExperimentResult RunExperiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

}  // namespace qsnn

#endif  // QSNN_EXPERIMENT_H_
