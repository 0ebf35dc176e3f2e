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

// qsnn: train quantized ANNs, convert them to spiking networks, simulate,
// and run experiment grids.
//
// Exit codes: 0 success, 1 a cell or check failed, 2 bad usage or input.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qsnn/checkpoint.h"
#include "qsnn/dataset.h"
#include "qsnn/errors.h"
#include "qsnn/experiment.h"
#include "qsnn/snn_model.h"
#include "qsnn/snn_sim.h"
#include "qsnn/trainer.h"
#include "qsnn/verify.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct DatasetFlags {
  std::string kind = "toy2d";
  std::string path;
  std::size_t max_train = 10000;
  std::size_t max_test = 2000;
  std::size_t toy_samples = 200;
  std::uint64_t seed = 0;

  void Register(CLI::App* app) {
    app->add_option("--dataset", kind, "toy2d, idx or csv")->capture_default_str();
    app->add_option("--data", path, "dataset directory (idx: MNIST file names; csv: train.csv/test.csv)");
    app->add_option("--max-train", max_train, "training samples kept")->capture_default_str();
    app->add_option("--max-test", max_test, "test samples kept")->capture_default_str();
    app->add_option("--toy-samples", toy_samples, "toy2d training samples")->capture_default_str();
    app->add_option("--data-seed", seed, "toy2d generator seed")->capture_default_str();
  }

  qsnn::DatasetSpec Spec() const {
    qsnn::DatasetSpec spec;
    spec.kind = qsnn::ParseDatasetKind(kind);
    spec.path = path;
    spec.max_train = max_train;
    spec.max_test = max_test;
    spec.toy_samples = toy_samples;
    spec.seed = seed;
    return spec;
  }
};

void WriteJson(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string Fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// ---- train ------------------------------------------------------------------

struct TrainFlags {
  DatasetFlags data;
  std::string arch = "cnn4";
  std::size_t hidden = 128;
  std::vector<std::size_t> channels = {16, 32};
  qsnn::TrainConfig cfg;
  bool no_noise = false;
  std::string out_dir = "runs/train";
};

int RunTrain(const TrainFlags& f) {
  const auto [train, test] = qsnn::LoadDataset(f.data.Spec());
  qsnn::TrainConfig cfg = f.cfg;
  cfg.noise_enabled = !f.no_noise;
  qsnn::ArchSpec arch{f.arch, train.sample_shape, train.num_classes, cfg.upper_bound, f.hidden, f.channels};

  fs::create_directories(f.out_dir);
  json resolved = {{"dataset", {{"kind", f.data.kind}, {"path", f.data.path}, {"max_train", f.data.max_train},
                                {"max_test", f.data.max_test}, {"toy_samples", f.data.toy_samples},
                                {"seed", f.data.seed}}},
                   {"arch", qsnn::ArchToJson(arch)},
                   {"train", {{"epochs", cfg.epochs}, {"batch_size", cfg.batch_size}, {"lr0", cfg.lr0},
                              {"momentum", cfg.momentum}, {"weight_decay", cfg.weight_decay},
                              {"warmup_samples", cfg.warmup_samples}, {"seed", cfg.seed},
                              {"p", cfg.upper_bound}, {"noise_enabled", cfg.noise_enabled}}}};
  WriteJson(fs::path(f.out_dir) / "config.json", resolved);

  const qsnn::TrainResult result = qsnn::Train(qsnn::BuildModel(arch, cfg.seed), train, &test, cfg);
  json history = json::array();
  for (const qsnn::EpochRecord& r : result.history) {
    std::cout << "epoch " << r.epoch << "  loss " << Fixed4(r.train_loss) << "  test acc "
              << Fixed4(r.eval_accuracy) << "  lr " << r.last_lr << '\n';
    history.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"eval_accuracy", r.eval_accuracy}});
  }
  WriteJson(fs::path(f.out_dir) / "train.json",
            {{"diverged", result.diverged}, {"message", result.message}, {"history", history}});
  const std::string ckpt = (fs::path(f.out_dir) / "model.ckpt").string();
  qsnn::SaveAnnCheckpoint(ckpt, result.model, resolved);
  std::cout << "ANN test accuracy " << Fixed4(qsnn::EvaluateAnn(result.model, test)) << "\nwrote " << ckpt << '\n';
  if (result.diverged) {
    std::cerr << "training diverged: " << result.message << '\n';
    return 1;
  }
  return 0;
}

// ---- convert ----------------------------------------------------------------

struct ConvertFlags {
  std::string model;
  std::string out;
  DatasetFlags data;
  bool validate = false;
};

int RunConvert(const ConvertFlags& f) {
  json meta;
  const qsnn::AnnModel ann = qsnn::LoadAnnCheckpoint(f.model, &meta);
  const qsnn::SnnModel snn = qsnn::Convert(ann);
  qsnn::SaveSnnCheckpoint(f.out, snn, {{"source", f.model}});
  std::cout << "wrote " << f.out << " (" << snn.NumSpikingLayers() << " spiking layers)\n";
  if (f.validate) {
    const auto [train, test] = qsnn::LoadDataset(f.data.Spec());
    const qsnn::ConversionReport report = qsnn::ValidateConversion(ann, snn, test.Slice(0, test.size()));
    std::cout << "T = " << report.steps << "  top-1 agreement " << Fixed4(report.top1_agreement) << '\n';
    for (std::size_t l = 0; l < report.layer_mean_abs_diff.size(); ++l) {
      std::cout << "  spiking layer " << l << ": mean |ANN level - spike count| = "
                << Fixed4(report.layer_mean_abs_diff[l]) << '\n';
    }
  }
  return 0;
}

// ---- simulate ---------------------------------------------------------------

struct SimulateFlags {
  std::string model;
  DatasetFlags data;
  int steps = 16;
  std::string correction = "none";
  std::string out_dir = "runs/simulate";
};

int RunSimulate(const SimulateFlags& f) {
  const qsnn::SnnModel snn =
      qsnn::CheckpointKind(f.model) == "ann" ? qsnn::Convert(qsnn::LoadAnnCheckpoint(f.model))
                                              : qsnn::LoadSnnCheckpoint(f.model);
  const auto [train, test] = qsnn::LoadDataset(f.data.Spec());
  qsnn::SimConfig cfg;
  cfg.steps = f.steps;
  cfg.correction = qsnn::ParseCorrection(f.correction);

  fs::create_directories(f.out_dir);
  WriteJson(fs::path(f.out_dir) / "config.json",
            {{"model", f.model}, {"dataset", f.data.kind}, {"data", f.data.path}, {"max_test", f.data.max_test},
             {"steps", f.steps}, {"correction", qsnn::CorrectionName(cfg.correction)}});
  const qsnn::RunResult run = qsnn::Run(snn, test.Slice(0, test.size()), test.labels, cfg);
  const fs::path csv = fs::path(f.out_dir) / ("sim_" + qsnn::CorrectionName(cfg.correction) + ".csv");
  std::ofstream out(csv);
  qsnn::WriteRunCsv(out, run);
  const std::size_t steps = run.accuracy.size();
  for (std::size_t t = 1; t < steps; t *= 2) {
    std::cout << "T=" << t << "  accuracy " << Fixed4(run.accuracy[t - 1]) << '\n';
  }
  std::cout << "T=" << steps << "  accuracy " << Fixed4(run.accuracy.back()) << "\nwrote " << csv.string() << '\n';
  return 0;
}

// ---- experiment -------------------------------------------------------------

struct ExperimentFlags {
  std::string config_path;
  DatasetFlags data;
  std::string arch;
  int p = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<int> t_list;
  std::vector<std::string> corrections;
  std::vector<std::string> variants;
  int epochs = 0;
  int jobs = 0;
  std::string out_dir;
};

int RunExperimentVerb(const ExperimentFlags& f, const CLI::App& sub) {
  qsnn::ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = qsnn::LoadExperimentConfig(f.config_path);
  // Flags given on the command line override the config file.
  if (sub.count("--dataset") || sub.count("--data") || sub.count("--max-train") || sub.count("--max-test")) {
    cfg.dataset = f.data.Spec();
  }
  if (!f.arch.empty()) cfg.arch.name = f.arch;
  if (f.p > 0) cfg.upper_bound = f.p;
  if (!f.seeds.empty()) cfg.seeds = f.seeds;
  if (sub.count("--t-list")) cfg.t_list = f.t_list;
  if (!f.variants.empty()) cfg.variants = f.variants;
  if (!f.corrections.empty()) {
    cfg.corrections.clear();
    for (const std::string& c : f.corrections) cfg.corrections.push_back(qsnn::ParseCorrection(c));
  }
  if (f.epochs > 0) cfg.train.epochs = f.epochs;
  if (f.jobs > 0) cfg.jobs = f.jobs;
  if (!f.out_dir.empty()) cfg.output_dir = f.out_dir;
  cfg.arch.upper_bound = cfg.upper_bound;
  cfg.train.upper_bound = cfg.upper_bound;

  const qsnn::ExperimentResult result = qsnn::RunExperiment(cfg, &std::cerr);
  for (const qsnn::ResultTable& table : result.tables) {
    std::cout << qsnn::FormatTable(table, qsnn::TableFormat::kMarkdown) << '\n';
    for (const qsnn::ResultRow& row : table.rows) {
      if (row.failed) std::cerr << row.variant << " seed " << row.seed << " failed: " << row.message << '\n';
    }
  }
  return result.AnyFailed() ? 1 : 0;
}

// ---- curve ------------------------------------------------------------------

struct CurveFlags {
  double threshold = 1.0;
  int steps = 6;
  int points = 1000;
  std::string out;
};

int RunCurve(const CurveFlags& f) {
  const auto curve = qsnn::ResponseCurve(f.threshold, f.steps, f.points);
  std::ofstream file;
  if (!f.out.empty()) {
    file.open(f.out);
    if (!file) throw std::runtime_error("cannot write " + f.out);
  }
  std::ostream& os = f.out.empty() ? std::cout : file;
  os << "accumulated_input,output,spikes,relu_clip\n";
  char buf[128];
  for (const qsnn::ResponsePoint& pt : curve) {
    const double relu = std::clamp(pt.accumulated_input, 0.0, f.steps * f.threshold);
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%d,%.9g\n", pt.accumulated_input, pt.output, pt.spikes, relu);
    os << buf;
  }
  return 0;
}

// ---- verify -----------------------------------------------------------------

int RunVerify(std::uint64_t seed) {
  bool ok = true;
  for (const qsnn::CheckResult& r : qsnn::RunPropertySuite(seed)) {
    std::cout << qsnn::FormatCheck(r) << std::endl;
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized ANN to spiking network conversion toolkit"};
  app.require_subcommand(1);

  TrainFlags train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a quantized ANN and save a checkpoint");
  train.data.Register(train_cmd);
  train_cmd->add_option("--arch", train.arch, "mlp2 or cnn4")->capture_default_str();
  train_cmd->add_option("--hidden", train.hidden, "mlp2 hidden width")->capture_default_str();
  train_cmd->add_option("--channels", train.channels, "cnn4 conv widths")->expected(2);
  train_cmd->add_option("-p,--p", train.cfg.upper_bound, "quantization levels")->capture_default_str();
  train_cmd->add_option("--epochs", train.cfg.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", train.cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", train.cfg.lr0, "initial learning rate")->capture_default_str();
  train_cmd->add_option("--seed", train.cfg.seed)->capture_default_str();
  train_cmd->add_flag("--no-noise", train.no_noise, "disable noise injection in the quantizers");
  train_cmd->add_option("--out-dir", train.out_dir)->capture_default_str();

  ConvertFlags convert;
  CLI::App* convert_cmd = app.add_subcommand("convert", "convert an ANN checkpoint to an SNN checkpoint");
  convert_cmd->add_option("--model", convert.model, "ANN checkpoint")->required();
  convert_cmd->add_option("--out", convert.out, "SNN checkpoint to write")->required();
  convert_cmd->add_flag("--validate", convert.validate, "compare ANN levels and spike counts at T = p");
  convert.data.Register(convert_cmd);

  SimulateFlags simulate;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "run an SNN (or converted ANN) on the test set");
  simulate_cmd->add_option("--model", simulate.model, "ANN or SNN checkpoint")->required();
  simulate.data.Register(simulate_cmd);
  simulate_cmd->add_option("-T,--steps", simulate.steps)->capture_default_str();
  simulate_cmd->add_option("--correction", simulate.correction, "none or negative_spikes")->capture_default_str();
  simulate_cmd->add_option("--out-dir", simulate.out_dir)->capture_default_str();

  ExperimentFlags experiment;
  CLI::App* experiment_cmd = app.add_subcommand("experiment", "train/convert/simulate over a seed x variant grid");
  experiment_cmd->add_option("--config", experiment.config_path, "JSON experiment config");
  experiment.data.Register(experiment_cmd);
  experiment_cmd->add_option("--arch", experiment.arch);
  experiment_cmd->add_option("-p,--p", experiment.p);
  experiment_cmd->add_option("--seeds", experiment.seeds);
  experiment_cmd->add_option("--t-list", experiment.t_list, "simulation lengths, ascending");
  experiment_cmd->add_option("--variants", experiment.variants, "no_na and/or na");
  experiment_cmd->add_option("--corrections", experiment.corrections, "none and/or negative_spikes");
  experiment_cmd->add_option("--epochs", experiment.epochs);
  experiment_cmd->add_option("--jobs", experiment.jobs, "cells trained in parallel");
  experiment_cmd->add_option("--out-dir", experiment.out_dir);

  CurveFlags curve;
  CLI::App* curve_cmd = app.add_subcommand("curve", "dump a single-neuron response curve as CSV");
  curve_cmd->add_option("--threshold", curve.threshold)->capture_default_str();
  curve_cmd->add_option("-T,--steps", curve.steps)->capture_default_str();
  curve_cmd->add_option("--points", curve.points)->capture_default_str();
  curve_cmd->add_option("--out", curve.out, "CSV path (default: stdout)");

  std::uint64_t verify_seed = 0;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run the property checks");
  verify_cmd->add_option("--seed", verify_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return RunTrain(train);
    if (convert_cmd->parsed()) return RunConvert(convert);
    if (simulate_cmd->parsed()) return RunSimulate(simulate);
    if (experiment_cmd->parsed()) return RunExperimentVerb(experiment, *experiment_cmd);
    if (curve_cmd->parsed()) return RunCurve(curve);
    if (verify_cmd->parsed()) return RunVerify(verify_seed);
  } catch (const qsnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const qsnn::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const qsnn::ConversionError& e) {
    std::cerr << "conversion error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
