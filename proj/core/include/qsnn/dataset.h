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

#ifndef QSNN_DATASET_H_
#define QSNN_DATASET_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsnn/tensor.h"

namespace qsnn {

// In-memory labelled samples, features stored sample-major.
struct Dataset {
  Shape sample_shape;
  std::vector<float> features;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t sample_size() const { return NumElements(sample_shape); }

  // [n x sample_shape...] for the given sample indices.
  Tensor Batch(std::span<const std::size_t> indices) const;
  // Contiguous range [begin, end).
  Tensor Slice(std::size_t begin, std::size_t end) const;
  std::span<const int> LabelSlice(std::size_t begin, std::size_t end) const;

  // First n samples (or all, if fewer).
  Dataset Head(std::size_t n) const;
};

enum class DatasetKind { kToy2d, kIdx, kCsv };

std::string DatasetKindName(DatasetKind kind);
DatasetKind ParseDatasetKind(const std::string& name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kToy2d;
  // kIdx: directory holding MNIST-named files; kCsv: directory holding
  // train.csv and test.csv.
  std::string path;
  // kCsv only; empty means infer (square 1 x n x n, else flat).
  Shape sample_shape;
  std::size_t max_train = 10000;
  std::size_t max_test = 2000;
  // kToy2d only.
  std::size_t toy_samples = 200;
  std::uint64_t seed = 0;
};

// IDX (big-endian, magic 0x00000803 images / 0x00000801 labels). Pixels are
// divided by 255. Throws ParseError with the byte offset on malformed input.
Dataset LoadIdx(const std::string& images_path, const std::string& labels_path);

// One sample per line: label first, then pixel values in 0..255 (divided by
// 255). Ragged rows raise ParseError naming the line number.
Dataset LoadCsv(const std::string& path, const Shape& sample_shape = {});

// Balanced two-class 2-D points drawn uniformly from [-1, 1]^2 on either
// side of the line x0 + x1 = 0, keeping a margin of 0.1 around it.
Dataset MakeToy2d(std::size_t n, std::uint64_t seed);

// (train, test).
std::pair<Dataset, Dataset> LoadDataset(const DatasetSpec& spec);

}  // namespace qsnn

#endif  // QSNN_DATASET_H_
