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

#include "qsnn/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "qsnn/errors.h"

namespace qsnn {
namespace {

std::vector<unsigned char> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  std::uint32_t ReadU32BigEndian() {
    Require(4, "header field");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[offset_ + i];
    offset_ += 4;
    return v;
  }

  std::span<const unsigned char> Take(std::size_t n, const char* what) {
    Require(n, what);
    auto out = std::span<const unsigned char>(bytes_).subspan(offset_, n);
    offset_ += n;
    return out;
  }

  std::size_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

 private:
  void Require(std::size_t n, const char* what) const {
    if (bytes_.size() - offset_ < n) {
      throw ParseError(path_ + ": truncated " + what + " at byte offset " +
                       std::to_string(offset_) + " (need " + std::to_string(n) +
                       " bytes, file has " + std::to_string(bytes_.size()) + ")");
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::string path_;
  std::size_t offset_ = 0;
};

Shape InferCsvShape(std::size_t pixels) {
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(pixels))));
  if (side * side == pixels) return {1, side, side};
  if (pixels % 3 == 0) {
    const auto side3 = static_cast<std::size_t>(std::lround(std::sqrt(pixels / 3.0)));
    if (3 * side3 * side3 == pixels) return {3, side3, side3};
  }
  return {pixels};
}

std::size_t CountClasses(const std::vector<int>& labels) {
  int mx = -1;
  for (int l : labels) mx = std::max(mx, l);
  return static_cast<std::size_t>(mx + 1);
}

}  // namespace

Tensor Dataset::Batch(std::span<const std::size_t> indices) const {
  const std::size_t d = sample_size();
  Shape shape{indices.size()};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  std::vector<float> values(indices.size() * d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw InputError("sample index out of range");
    std::copy_n(features.begin() + indices[i] * d, d, values.begin() + i * d);
  }
  return Tensor(std::move(shape), std::move(values));
}

Tensor Dataset::Slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > size()) throw InputError("invalid dataset slice");
  const std::size_t d = sample_size();
  Shape shape{end - begin};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  return Tensor(std::move(shape),
                std::vector<float>(features.begin() + begin * d, features.begin() + end * d));
}

std::span<const int> Dataset::LabelSlice(std::size_t begin, std::size_t end) const {
  return std::span<const int>(labels).subspan(begin, end - begin);
}

Dataset Dataset::Head(std::size_t n) const {
  n = std::min(n, size());
  Dataset out{sample_shape, {}, {}, num_classes};
  out.features.assign(features.begin(), features.begin() + n * sample_size());
  out.labels.assign(labels.begin(), labels.begin() + n);
  return out;
}

std::string DatasetKindName(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kToy2d: return "toy2d";
    case DatasetKind::kIdx: return "idx";
    case DatasetKind::kCsv: return "csv";
  }
  return "unknown";
}

DatasetKind ParseDatasetKind(const std::string& name) {
  if (name == "toy2d") return DatasetKind::kToy2d;
  if (name == "idx" || name == "idx-images") return DatasetKind::kIdx;
  if (name == "csv" || name == "csv-images") return DatasetKind::kCsv;
  throw ConfigError("unknown dataset kind '" + name + "' (toy2d, idx, csv)");
}

Dataset LoadIdx(const std::string& images_path, const std::string& labels_path) {
  const std::vector<unsigned char> image_bytes = ReadFile(images_path);
  const std::vector<unsigned char> label_bytes = ReadFile(labels_path);

  ByteReader images(image_bytes, images_path);
  const std::uint32_t magic = images.ReadU32BigEndian();
  if (magic != 0x00000803) {
    std::ostringstream os;
    os << images_path << ": bad magic number 0x" << std::hex << magic
       << " at byte offset 0 (expected 0x00000803)";
    throw ParseError(os.str());
  }
  const std::uint32_t n = images.ReadU32BigEndian();
  const std::uint32_t rows = images.ReadU32BigEndian();
  const std::uint32_t cols = images.ReadU32BigEndian();
  if (rows == 0 || cols == 0) throw ParseError(images_path + ": zero image extent at byte offset 8");
  const auto pixels = images.Take(static_cast<std::size_t>(n) * rows * cols, "pixel data");

  ByteReader labels(label_bytes, labels_path);
  const std::uint32_t label_magic = labels.ReadU32BigEndian();
  if (label_magic != 0x00000801) {
    std::ostringstream os;
    os << labels_path << ": bad magic number 0x" << std::hex << label_magic
       << " at byte offset 0 (expected 0x00000801)";
    throw ParseError(os.str());
  }
  const std::uint32_t n_labels = labels.ReadU32BigEndian();
  if (n_labels != n) {
    throw ParseError(labels_path + ": label count " + std::to_string(n_labels) +
                     " at byte offset 4 differs from image count " + std::to_string(n));
  }
  const auto label_data = labels.Take(n, "label data");

  Dataset out;
  out.sample_shape = {1, rows, cols};
  out.features.resize(pixels.size());
  std::transform(pixels.begin(), pixels.end(), out.features.begin(),
                 [](unsigned char b) { return static_cast<float>(b) / 255.0f; });
  out.labels.assign(label_data.begin(), label_data.end());
  out.num_classes = CountClasses(out.labels);
  return out;
}

Dataset LoadCsv(const std::string& path, const Shape& sample_shape) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  Dataset out;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<float> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double value = 0.0;
      const char* first = p;
      while (first < comma && *first == ' ') ++first;
      auto [ptr, ec] = std::from_chars(first, comma, value);
      if (ec != std::errc() || ptr != comma) {
        throw ParseError(path + ": line " + std::to_string(line_no) + ": bad number '" +
                         std::string(p, comma) + "'");
      }
      row.push_back(static_cast<float>(value));
      p = comma + 1;
    }
    if (width == 0) {
      width = row.size();
      if (width < 2) throw ParseError(path + ": line " + std::to_string(line_no) + ": no pixels");
    } else if (row.size() != width) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": ragged row with " +
                       std::to_string(row.size()) + " fields, expected " + std::to_string(width));
    }
    const float label = row[0];
    if (label < 0 || label != std::floor(label)) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": invalid label");
    }
    out.labels.push_back(static_cast<int>(label));
    for (std::size_t i = 1; i < row.size(); ++i) out.features.push_back(row[i] / 255.0f);
  }
  if (out.labels.empty()) throw ParseError(path + ": no samples");
  out.sample_shape = sample_shape.empty() ? InferCsvShape(width - 1) : sample_shape;
  if (NumElements(out.sample_shape) != width - 1) {
    throw ParseError(path + ": sample shape " + ShapeToString(out.sample_shape) +
                     " does not match " + std::to_string(width - 1) + " pixels per row");
  }
  out.num_classes = CountClasses(out.labels);
  return out;
}

Dataset MakeToy2d(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> coord(-1.0f, 1.0f);
  Dataset out;
  out.sample_shape = {2};
  out.num_classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    float x0 = 0.0f, x1 = 0.0f;
    do {
      x0 = coord(rng);
      x1 = coord(rng);
    } while (std::abs(x0 + x1) < 0.1f || ((x0 + x1 > 0.0f) != (label == 1)));
    out.features.push_back(x0);
    out.features.push_back(x1);
    out.labels.push_back(label);
  }
  return out;
}

std::pair<Dataset, Dataset> LoadDataset(const DatasetSpec& spec) {
  Dataset train, test;
  namespace fs = std::filesystem;
  switch (spec.kind) {
    case DatasetKind::kToy2d:
      train = MakeToy2d(spec.toy_samples, spec.seed);
      test = MakeToy2d(spec.toy_samples, spec.seed + 1000003);
      break;
    case DatasetKind::kIdx: {
      const fs::path dir(spec.path);
      train = LoadIdx((dir / "train-images-idx3-ubyte").string(),
                      (dir / "train-labels-idx1-ubyte").string());
      test = LoadIdx((dir / "t10k-images-idx3-ubyte").string(),
                     (dir / "t10k-labels-idx1-ubyte").string());
      break;
    }
    case DatasetKind::kCsv: {
      const fs::path dir(spec.path);
      train = LoadCsv((dir / "train.csv").string(), spec.sample_shape);
      test = LoadCsv((dir / "test.csv").string(), spec.sample_shape);
      break;
    }
  }
  if (train.sample_shape != test.sample_shape) {
    throw ParseError("train and test sample shapes differ: " + ShapeToString(train.sample_shape) +
                     " vs " + ShapeToString(test.sample_shape));
  }
  const std::size_t classes = std::max(train.num_classes, test.num_classes);
  train = train.Head(spec.max_train);
  test = test.Head(spec.max_test);
  train.num_classes = test.num_classes = classes;
  return {std::move(train), std::move(test)};
}

}  // namespace qsnn
