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

#include "qsnn/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "qsnn/checkpoint.h"
#include "qsnn/errors.h"
#include "qsnn/snn_model.h"

namespace qsnn {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::size_t kSimBatch = 256;

std::string Fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void WriteText(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::optional<json> ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;  // half-written or foreign file: recompute
  }
}

json DatasetToJson(const DatasetSpec& d) {
  return {{"kind", DatasetKindName(d.kind)}, {"path", d.path},        {"sample_shape", d.sample_shape},
          {"max_train", d.max_train},        {"max_test", d.max_test}, {"toy_samples", d.toy_samples},
          {"seed", d.seed}};
}

json TrainToJson(const TrainConfig& t) {
  return {{"epochs", t.epochs},     {"batch_size", t.batch_size},     {"lr0", t.lr0},
          {"momentum", t.momentum}, {"weight_decay", t.weight_decay}, {"warmup_samples", t.warmup_samples}};
}

void CheckKeys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
void Read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

struct CellKey {
  std::string variant;
  std::uint64_t seed = 0;
  std::string Name() const { return variant + "_seed" + std::to_string(seed); }
};

struct CellOutcome {
  bool failed = false;
  std::string message;
  double ann_accuracy = 0.0;
  std::vector<std::vector<double>> snn;  // [correction][T index]
};

// Top-1 accuracy after each step 1..steps, computed in batches so memory stays
// bounded on larger test sets. Also returns the per-step spike totals.
RunResult RunInBatches(const SnnModel& snn, const Dataset& data, const SimConfig& sim) {
  RunResult merged;
  merged.accuracy.assign(static_cast<std::size_t>(sim.steps), 0.0);
  std::vector<double> correct(merged.accuracy.size(), 0.0);
  for (std::size_t begin = 0; begin < data.size(); begin += kSimBatch) {
    const std::size_t end = std::min(begin + kSimBatch, data.size());
    const RunResult part = Run(snn, data.Slice(begin, end), data.LabelSlice(begin, end), sim);
    const double n = static_cast<double>(end - begin);
    for (std::size_t t = 0; t < correct.size(); ++t) correct[t] += std::round(part.accuracy[t] * n);
    if (merged.spikes.empty()) {
      merged.spikes = part.spikes;
    } else {
      for (std::size_t t = 0; t < part.spikes.size(); ++t) {
        for (std::size_t l = 0; l < part.spikes[t].size(); ++l) merged.spikes[t][l] += part.spikes[t][l];
      }
    }
    merged.final_predictions.insert(merged.final_predictions.end(), part.final_predictions.begin(),
                                    part.final_predictions.end());
  }
  for (std::size_t t = 0; t < correct.size(); ++t) {
    merged.accuracy[t] = correct[t] / static_cast<double>(data.size());
  }
  return merged;
}

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, const Dataset& train, const Dataset& test, std::ostream* log)
      : cfg_(cfg), train_(train), test_(test), log_(log) {
    arch_ = cfg.arch;
    arch_.input_shape = train.sample_shape;
    arch_.num_classes = train.num_classes;
    arch_.upper_bound = cfg.upper_bound;
    json sim = {{"t_list", cfg.t_list}, {"corrections", json::array()}};
    for (Correction c : cfg.corrections) sim["corrections"].push_back(CorrectionName(c));
    sim_fingerprint_ = sim.dump();
  }

  CellOutcome RunCell(const CellKey& key) {
    const fs::path dir = fs::path(cfg_.output_dir) / "cells" / key.Name();
    fs::create_directories(dir);
    const std::string train_fp = TrainFingerprint(key);

    const auto previous = ReadJson(dir / "result.json");
    if (previous && previous->value("train_fingerprint", "") == train_fp &&
        previous->value("sim_fingerprint", "") == sim_fingerprint_) {
      Log(key.Name() + ": done, loaded from result.json");
      return OutcomeFromJson(*previous);
    }

    CellOutcome out;
    std::optional<AnnModel> model;
    json train_record;
    if (previous && previous->value("train_fingerprint", "") == train_fp &&
        previous->value("status", "") == "ok" && fs::exists(dir / "model.ckpt")) {
      model = LoadAnnCheckpoint((dir / "model.ckpt").string());
      Log(key.Name() + ": reusing trained checkpoint");
    } else {
      TrainConfig tc = cfg_.train;
      tc.seed = key.seed;
      tc.upper_bound = cfg_.upper_bound;
      tc.noise_enabled = key.variant == kVariantNoise;
      Log(key.Name() + ": training");
      try {
        TrainResult trained = Train(BuildModel(arch_, key.seed), train_, &test_, tc);
        json history = json::array();
        for (const EpochRecord& r : trained.history) {
          history.push_back({{"epoch", r.epoch},
                             {"train_loss", r.train_loss},
                             {"eval_accuracy", r.eval_accuracy},
                             {"last_lr", r.last_lr}});
        }
        WriteText(dir / "train.json",
                  json{{"diverged", trained.diverged}, {"message", trained.message}, {"history", history}}.dump(2));
        if (trained.diverged) {
          out.failed = true;
          out.message = "training diverged: " + trained.message;
        } else {
          model = std::move(trained.model);
          SaveAnnCheckpoint((dir / "model.ckpt").string(), *model, json{{"cell", key.Name()}});
        }
      } catch (const NumericError& e) {
        out.failed = true;
        out.message = std::string("training failed: ") + e.what();
      }
    }

    if (!out.failed) {
      try {
        out.ann_accuracy = EvaluateAnn(*model, test_);
        const SnnModel snn = Convert(*model);
        const int max_t = cfg_.t_list.empty() ? 0 : cfg_.t_list.back();
        for (Correction c : cfg_.corrections) {
          std::vector<double> accs;
          if (max_t > 0) {
            SimConfig sim;
            sim.steps = max_t;
            sim.correction = c;
            const RunResult run = RunInBatches(snn, test_, sim);
            std::ostringstream csv;
            WriteRunCsv(csv, run);
            WriteText(dir / ("sim_" + CorrectionName(c) + ".csv"), csv.str());
            for (int t : cfg_.t_list) accs.push_back(run.accuracy[static_cast<std::size_t>(t - 1)]);
          }
          out.snn.push_back(std::move(accs));
        }
      } catch (const NumericError& e) {
        out.failed = true;
        out.message = std::string("simulation failed: ") + e.what();
      } catch (const ConversionError& e) {
        out.failed = true;
        out.message = std::string("conversion failed: ") + e.what();
      }
    }

    json result = {{"train_fingerprint", train_fp},
                   {"sim_fingerprint", sim_fingerprint_},
                   {"status", out.failed ? "failed" : "ok"},
                   {"message", out.message},
                   {"ann_accuracy", out.ann_accuracy},
                   {"snn", json::object()}};
    for (std::size_t k = 0; k < out.snn.size(); ++k) {
      result["snn"][CorrectionName(cfg_.corrections[k])] = out.snn[k];
    }
    WriteText(dir / "result.json", result.dump(2));
    Log(key.Name() + (out.failed ? ": FAILED " + out.message : ": ann " + Fixed4(out.ann_accuracy)));
    return out;
  }

 private:
  std::string TrainFingerprint(const CellKey& key) const {
    return json{{"dataset", DatasetToJson(cfg_.dataset)},
                {"arch", ArchToJson(arch_)},
                {"train", TrainToJson(cfg_.train)},
                {"variant", key.variant},
                {"seed", key.seed}}
        .dump();
  }

  CellOutcome OutcomeFromJson(const json& j) const {
    CellOutcome out;
    out.failed = j.at("status") != "ok";
    out.message = j.value("message", "");
    out.ann_accuracy = j.value("ann_accuracy", 0.0);
    if (!out.failed) {
      for (Correction c : cfg_.corrections) {
        out.snn.push_back(j.at("snn").at(CorrectionName(c)).get<std::vector<double>>());
      }
    }
    return out;
  }

  void Log(const std::string& line) {
    if (!log_) return;
    std::lock_guard<std::mutex> lock(log_mutex_);
    *log_ << line << std::endl;
  }

  const ExperimentConfig& cfg_;
  const Dataset& train_;
  const Dataset& test_;
  std::ostream* log_;
  ArchSpec arch_;
  std::string sim_fingerprint_;
  std::mutex log_mutex_;
};

}  // namespace

void ValidateExperimentConfig(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (cfg.upper_bound < 1) throw ConfigError("upper bound p must be >= 1");
  for (std::size_t i = 0; i < cfg.t_list.size(); ++i) {
    if (cfg.t_list[i] < 1) throw ConfigError("T_list entries must be >= 1");
    if (i > 0 && cfg.t_list[i] <= cfg.t_list[i - 1]) throw ConfigError("T_list must be strictly ascending");
  }
  if (cfg.variants.empty()) throw ConfigError("variants must be non-empty");
  for (const std::string& v : cfg.variants) {
    if (v != kVariantNoNoise && v != kVariantNoise) {
      throw ConfigError("unknown variant '" + v + "' (no_na, na)");
    }
  }
  if (cfg.corrections.empty()) throw ConfigError("corrections must be non-empty");
  if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
  TrainConfig tc = cfg.train;
  tc.upper_bound = cfg.upper_bound;
  ValidateTrainConfig(tc);
}

json ExperimentConfigToJson(const ExperimentConfig& cfg) {
  json corrections = json::array();
  for (Correction c : cfg.corrections) corrections.push_back(CorrectionName(c));
  return {{"dataset", DatasetToJson(cfg.dataset)},
          {"arch", {{"name", cfg.arch.name}, {"hidden", cfg.arch.hidden}, {"conv_channels", cfg.arch.conv_channels}}},
          {"p", cfg.upper_bound},
          {"variants", cfg.variants},
          {"seeds", cfg.seeds},
          {"t_list", cfg.t_list},
          {"corrections", corrections},
          {"output_dir", cfg.output_dir},
          {"train", TrainToJson(cfg.train)},
          {"jobs", cfg.jobs}};
}

ExperimentConfig ExperimentConfigFromJson(const json& j) {
  ExperimentConfig cfg;
  try {
    CheckKeys(j, {"dataset", "arch", "p", "variants", "seeds", "t_list", "corrections", "output_dir", "train", "jobs"},
              "config");
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      CheckKeys(d, {"kind", "path", "sample_shape", "max_train", "max_test", "toy_samples", "seed"}, "dataset");
      if (d.contains("kind")) cfg.dataset.kind = ParseDatasetKind(d.at("kind").get<std::string>());
      Read(d, "path", cfg.dataset.path);
      Read(d, "sample_shape", cfg.dataset.sample_shape);
      Read(d, "max_train", cfg.dataset.max_train);
      Read(d, "max_test", cfg.dataset.max_test);
      Read(d, "toy_samples", cfg.dataset.toy_samples);
      Read(d, "seed", cfg.dataset.seed);
    }
    if (j.contains("arch")) {
      const json& a = j.at("arch");
      CheckKeys(a, {"name", "hidden", "conv_channels"}, "arch");
      Read(a, "name", cfg.arch.name);
      Read(a, "hidden", cfg.arch.hidden);
      Read(a, "conv_channels", cfg.arch.conv_channels);
    }
    Read(j, "p", cfg.upper_bound);
    Read(j, "variants", cfg.variants);
    Read(j, "seeds", cfg.seeds);
    Read(j, "t_list", cfg.t_list);
    if (j.contains("corrections")) {
      cfg.corrections.clear();
      for (const auto& c : j.at("corrections")) cfg.corrections.push_back(ParseCorrection(c.get<std::string>()));
    }
    Read(j, "output_dir", cfg.output_dir);
    Read(j, "jobs", cfg.jobs);
    if (j.contains("train")) {
      const json& t = j.at("train");
      CheckKeys(t, {"epochs", "batch_size", "lr0", "momentum", "weight_decay", "warmup_samples"}, "train");
      Read(t, "epochs", cfg.train.epochs);
      Read(t, "batch_size", cfg.train.batch_size);
      Read(t, "lr0", cfg.train.lr0);
      Read(t, "momentum", cfg.train.momentum);
      Read(t, "weight_decay", cfg.train.weight_decay);
      Read(t, "warmup_samples", cfg.train.warmup_samples);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  cfg.arch.upper_bound = cfg.upper_bound;
  cfg.train.upper_bound = cfg.upper_bound;
  return cfg;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return ExperimentConfigFromJson(j);
}

bool ResultTable::AnyFailed() const {
  return std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.failed; });
}

const ResultRow* ResultTable::Mean(const std::string& variant) const {
  for (const ResultRow& r : aggregate) {
    if (r.variant == variant && r.seed == "mean") return &r;
  }
  return nullptr;
}

const ResultRow* ResultTable::Std(const std::string& variant) const {
  for (const ResultRow& r : aggregate) {
    if (r.variant == variant && r.seed == "std") return &r;
  }
  return nullptr;
}

void Aggregate(ResultTable& table) {
  table.aggregate.clear();
  std::vector<std::string> variants;
  for (const ResultRow& r : table.rows) {
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
  }
  const std::size_t cols = table.t_list.size() + 1;
  for (const std::string& v : variants) {
    std::vector<std::vector<double>> columns(cols);
    for (const ResultRow& r : table.rows) {
      if (r.variant != v || r.failed) continue;
      columns[0].push_back(r.ann_accuracy);
      for (std::size_t k = 0; k + 1 < cols; ++k) columns[k + 1].push_back(r.snn_accuracy.at(k));
    }
    if (columns[0].empty()) continue;
    ResultRow mean, stddev;
    mean.variant = stddev.variant = v;
    mean.seed = "mean";
    stddev.seed = "std";
    std::vector<double> m(cols), s(cols);
    for (std::size_t k = 0; k < cols; ++k) {
      const auto& c = columns[k];
      double sum = 0.0;
      for (double x : c) sum += x;
      m[k] = sum / static_cast<double>(c.size());
      double ss = 0.0;
      for (double x : c) ss += (x - m[k]) * (x - m[k]);
      s[k] = c.size() > 1 ? std::sqrt(ss / static_cast<double>(c.size() - 1)) : 0.0;
    }
    mean.ann_accuracy = m[0];
    stddev.ann_accuracy = s[0];
    mean.snn_accuracy.assign(m.begin() + 1, m.end());
    stddev.snn_accuracy.assign(s.begin() + 1, s.end());
    table.aggregate.push_back(std::move(mean));
    table.aggregate.push_back(std::move(stddev));
  }
}

std::string FormatTable(const ResultTable& table, TableFormat format) {
  if (table.rows.empty()) throw UsageError("cannot emit an empty result table");
  std::vector<std::string> header = {"variant", "seed", "ann"};
  for (int t : table.t_list) header.push_back("T=" + std::to_string(t));

  auto cells = [&](const ResultRow& r) {
    std::vector<std::string> out = {r.variant, r.seed};
    if (r.failed) {
      out.insert(out.end(), header.size() - 2, "failed");
    } else {
      out.push_back(Fixed4(r.ann_accuracy));
      for (std::size_t k = 0; k < table.t_list.size(); ++k) out.push_back(Fixed4(r.snn_accuracy.at(k)));
    }
    return out;
  };
  std::vector<std::vector<std::string>> lines = {header};
  for (const ResultRow& r : table.rows) lines.push_back(cells(r));
  for (const ResultRow& r : table.aggregate) lines.push_back(cells(r));

  std::string out;
  if (format == TableFormat::kCsv) {
    for (const auto& line : lines) {
      for (std::size_t i = 0; i < line.size(); ++i) out += (i ? "," : "") + line[i];
      out += '\n';
    }
    return out;
  }
  out = "Correction: " + CorrectionName(table.correction) + "\n\n";
  for (std::size_t n = 0; n < lines.size(); ++n) {
    out += '|';
    for (const std::string& c : lines[n]) out += ' ' + c + " |";
    out += '\n';
    if (n == 0) {
      out += '|';
      for (std::size_t i = 0; i < header.size(); ++i) out += i < 2 ? " --- |" : " ---: |";
      out += '\n';
    }
  }
  return out;
}

void EmitTable(const ResultTable& table, TableFormat format, const std::string& path) {
  WriteText(path, FormatTable(table, format));
}

bool ExperimentResult::AnyFailed() const {
  return std::any_of(tables.begin(), tables.end(), [](const ResultTable& t) { return t.AnyFailed(); });
}

ExperimentResult RunExperiment(const ExperimentConfig& cfg, std::ostream* log) {
  ValidateExperimentConfig(cfg);
  const auto [train, test] = LoadDataset(cfg.dataset);
  fs::create_directories(cfg.output_dir);
  WriteText(fs::path(cfg.output_dir) / "config.json", ExperimentConfigToJson(cfg).dump(2) + "\n");

  std::vector<CellKey> keys;
  for (const std::string& v : cfg.variants) {
    for (std::uint64_t seed : cfg.seeds) keys.push_back({v, seed});
  }
  std::vector<CellOutcome> outcomes(keys.size());
  Runner runner(cfg, train, test, log);

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(keys.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      try {
        outcomes[i] = runner.RunCell(keys[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), keys.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 1; i < n_threads; ++i) threads.emplace_back(worker);
  worker();
  for (std::thread& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  for (std::size_t c = 0; c < cfg.corrections.size(); ++c) {
    ResultTable table;
    table.correction = cfg.corrections[c];
    table.t_list = cfg.t_list;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      ResultRow row;
      row.variant = keys[i].variant;
      row.seed = std::to_string(keys[i].seed);
      row.failed = outcomes[i].failed;
      row.message = outcomes[i].message;
      if (!row.failed) {
        row.ann_accuracy = outcomes[i].ann_accuracy;
        row.snn_accuracy = outcomes[i].snn.at(c);
      }
      table.rows.push_back(std::move(row));
    }
    Aggregate(table);
    const std::string stem = (fs::path(cfg.output_dir) / ("table_" + CorrectionName(table.correction))).string();
    EmitTable(table, TableFormat::kCsv, stem + ".csv");
    EmitTable(table, TableFormat::kMarkdown, stem + ".md");
    result.tables.push_back(std::move(table));
  }
  return result;
}

}  // namespace qsnn
