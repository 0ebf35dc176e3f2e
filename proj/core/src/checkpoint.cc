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

#include "qsnn/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "qsnn/errors.h"

namespace qsnn {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'Q', 'S', 'N', 'N', 'C', 'K', 'P', 'T'};

class PayloadWriter {
 public:
  json Add(const Tensor& t) {
    json ref = {{"shape", t.shape()}, {"offset", floats_.size()}};
    floats_.insert(floats_.end(), t.values().begin(), t.values().end());
    return ref;
  }
  json AddScalar(float v) { return Add(Tensor::Scalar(v)); }
  const std::vector<float>& floats() const { return floats_; }

 private:
  std::vector<float> floats_;
};

class PayloadReader {
 public:
  explicit PayloadReader(std::vector<float> floats) : floats_(std::move(floats)) {}

  Tensor Get(const json& ref, bool requires_grad) const {
    const Shape shape = ref.at("shape").get<Shape>();
    const std::size_t offset = ref.at("offset").get<std::size_t>();
    const std::size_t n = NumElements(shape);
    if (offset > floats_.size() || floats_.size() - offset < n) {
      throw ParseError("checkpoint payload reference [" + std::to_string(offset) + ", +" +
                       std::to_string(n) + ") outside payload of " +
                       std::to_string(floats_.size()) + " floats");
    }
    return Tensor(shape, std::vector<float>(floats_.begin() + offset, floats_.begin() + offset + n),
                  requires_grad);
  }
  float GetScalar(const json& ref) const { return Get(ref, false).item(); }

 private:
  std::vector<float> floats_;
};

void PutLittleEndian(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t GetLittleEndian(const std::string& in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(in[offset + static_cast<std::size_t>(i)]);
  }
  return v;
}

void WriteFile(const std::string& path, const json& header, const std::vector<float>& payload) {
  const std::string text = header.dump();
  std::string bytes(kMagic, sizeof(kMagic));
  PutLittleEndian(bytes, kCheckpointVersion, 4);
  PutLittleEndian(bytes, text.size(), 8);
  bytes += text;
  bytes.reserve(bytes.size() + payload.size() * 4);
  for (float f : payload) PutLittleEndian(bytes, std::bit_cast<std::uint32_t>(f), 4);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
  }
}

struct RawCheckpoint {
  json header;
  std::vector<float> payload;
};

RawCheckpoint ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(path + ": not a checkpoint (bad magic at byte offset 0)");
  }
  const auto version = GetLittleEndian(bytes, 8, 4);
  if (version != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version) +
                     " at byte offset 8");
  }
  const auto header_len = GetLittleEndian(bytes, 12, 8);
  if (header_len > bytes.size() - 20) {
    throw ParseError(path + ": truncated header at byte offset 20");
  }
  const std::size_t payload_start = 20 + header_len;
  if ((bytes.size() - payload_start) % 4 != 0) {
    throw ParseError(path + ": payload length not a multiple of 4 at byte offset " +
                     std::to_string(payload_start));
  }
  RawCheckpoint raw;
  try {
    raw.header = json::parse(bytes.begin() + 20, bytes.begin() + static_cast<long>(payload_start));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": malformed header: " + e.what());
  }
  raw.payload.resize((bytes.size() - payload_start) / 4);
  for (std::size_t i = 0; i < raw.payload.size(); ++i) {
    raw.payload[i] = std::bit_cast<float>(
        static_cast<std::uint32_t>(GetLittleEndian(bytes, payload_start + 4 * i, 4)));
  }
  return raw;
}

json GeometryToJson(const Conv2dGeometry& g) { return {{"stride", g.stride}, {"padding", g.padding}}; }
Conv2dGeometry GeometryFromJson(const json& j) {
  return {j.at("stride").get<std::size_t>(), j.at("padding").get<std::size_t>()};
}

json PoolToJson(const char* type, std::size_t kernel, std::size_t stride) {
  return {{"type", type}, {"kernel", kernel}, {"stride", stride}};
}

template <class Fn>
auto Guarded(const std::string& path, Fn fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ParseError(path + ": malformed checkpoint header: " + e.what());
  }
}

}  // namespace

json ArchToJson(const ArchSpec& arch) {
  return {{"name", arch.name},
          {"input_shape", arch.input_shape},
          {"num_classes", arch.num_classes},
          {"upper_bound", arch.upper_bound},
          {"hidden", arch.hidden},
          {"conv_channels", arch.conv_channels}};
}

ArchSpec ArchFromJson(const json& j) {
  ArchSpec arch;
  arch.name = j.at("name").get<std::string>();
  arch.input_shape = j.at("input_shape").get<Shape>();
  arch.num_classes = j.at("num_classes").get<std::size_t>();
  arch.upper_bound = j.at("upper_bound").get<int>();
  arch.hidden = j.value("hidden", arch.hidden);
  arch.conv_channels = j.value("conv_channels", arch.conv_channels);
  return arch;
}

void SaveAnnCheckpoint(const std::string& path, const AnnModel& model, const json& metadata) {
  PayloadWriter payload;
  json layers = json::array();
  for (const Layer& layer : model.layers) {
    if (const auto* l = std::get_if<LinearLayer>(&layer)) {
      layers.push_back({{"type", "linear"}, {"weight", payload.Add(l->weight)}, {"bias", payload.Add(l->bias)}});
    } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      layers.push_back({{"type", "conv"},
                        {"weight", payload.Add(c->weight)},
                        {"bias", payload.Add(c->bias)},
                        {"geometry", GeometryToJson(c->geometry)}});
    } else if (const auto* a = std::get_if<AvgPoolLayer>(&layer)) {
      layers.push_back(PoolToJson("avg_pool", a->kernel, a->stride));
    } else if (const auto* m = std::get_if<MaxPoolLayer>(&layer)) {
      layers.push_back(PoolToJson("max_pool", m->kernel, m->stride));
    } else if (const auto* q = std::get_if<QuantizerLayer>(&layer)) {
      layers.push_back({{"type", "quantizer"},
                        {"scale", payload.Add(q->scale)},
                        {"upper_bound", q->upper_bound},
                        {"initialized", q->initialized}});
    } else {
      layers.push_back({{"type", "flatten"}});
    }
  }
  const json header = {{"kind", "ann"}, {"arch", ArchToJson(model.arch)}, {"layers", layers}, {"metadata", metadata}};
  WriteFile(path, header, payload.floats());
}

AnnModel LoadAnnCheckpoint(const std::string& path, json* metadata) {
  RawCheckpoint raw = ReadFile(path);
  return Guarded(path, [&] {
    if (raw.header.at("kind") != "ann") throw ParseError(path + ": not an ANN checkpoint");
    const PayloadReader payload(std::move(raw.payload));
    AnnModel model;
    model.arch = ArchFromJson(raw.header.at("arch"));
    for (const json& l : raw.header.at("layers")) {
      const std::string type = l.at("type").get<std::string>();
      if (type == "linear") {
        model.layers.emplace_back(LinearLayer{payload.Get(l.at("weight"), true), payload.Get(l.at("bias"), true)});
      } else if (type == "conv") {
        model.layers.emplace_back(ConvLayer{payload.Get(l.at("weight"), true), payload.Get(l.at("bias"), true),
                                            GeometryFromJson(l.at("geometry"))});
      } else if (type == "avg_pool") {
        model.layers.emplace_back(AvgPoolLayer{l.at("kernel").get<std::size_t>(), l.at("stride").get<std::size_t>()});
      } else if (type == "max_pool") {
        model.layers.emplace_back(MaxPoolLayer{l.at("kernel").get<std::size_t>(), l.at("stride").get<std::size_t>()});
      } else if (type == "quantizer") {
        model.layers.emplace_back(QuantizerLayer{payload.Get(l.at("scale"), true), l.at("upper_bound").get<int>(),
                                                 l.at("initialized").get<bool>()});
      } else if (type == "flatten") {
        model.layers.emplace_back(FlattenLayer{});
      } else {
        throw ParseError(path + ": unknown layer type '" + type + "'");
      }
    }
    if (metadata) *metadata = raw.header.value("metadata", json::object());
    return model;
  });
}

void SaveSnnCheckpoint(const std::string& path, const SnnModel& model, const json& metadata) {
  PayloadWriter payload;
  json layers = json::array();
  for (const SnnLayer& layer : model.layers) {
    if (const auto* l = std::get_if<LinearLayer>(&layer)) {
      layers.push_back({{"type", "linear"}, {"weight", payload.Add(l->weight)}, {"bias", payload.Add(l->bias)}});
    } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      layers.push_back({{"type", "conv"},
                        {"weight", payload.Add(c->weight)},
                        {"bias", payload.Add(c->bias)},
                        {"geometry", GeometryToJson(c->geometry)}});
    } else if (const auto* a = std::get_if<AvgPoolLayer>(&layer)) {
      layers.push_back(PoolToJson("avg_pool", a->kernel, a->stride));
    } else if (const auto* s = std::get_if<SpikingLayer>(&layer)) {
      layers.push_back({{"type", "spiking"},
                        {"threshold", payload.AddScalar(s->threshold)},
                        {"precharge_fraction", payload.AddScalar(s->precharge_fraction)},
                        {"scale", payload.AddScalar(s->scale)},
                        {"upper_bound", s->upper_bound}});
    } else {
      layers.push_back({{"type", "flatten"}});
    }
  }
  const json header = {{"kind", "snn"},
                       {"arch", ArchToJson(model.arch)},
                       {"dt", payload.AddScalar(model.dt)},
                       {"layers", layers},
                       {"metadata", metadata}};
  WriteFile(path, header, payload.floats());
}

SnnModel LoadSnnCheckpoint(const std::string& path, json* metadata) {
  RawCheckpoint raw = ReadFile(path);
  return Guarded(path, [&] {
    if (raw.header.at("kind") != "snn") throw ParseError(path + ": not an SNN checkpoint");
    const PayloadReader payload(std::move(raw.payload));
    SnnModel model;
    model.arch = ArchFromJson(raw.header.at("arch"));
    model.dt = payload.GetScalar(raw.header.at("dt"));
    for (const json& l : raw.header.at("layers")) {
      const std::string type = l.at("type").get<std::string>();
      if (type == "linear") {
        model.layers.emplace_back(LinearLayer{payload.Get(l.at("weight"), false), payload.Get(l.at("bias"), false)});
      } else if (type == "conv") {
        model.layers.emplace_back(ConvLayer{payload.Get(l.at("weight"), false), payload.Get(l.at("bias"), false),
                                            GeometryFromJson(l.at("geometry"))});
      } else if (type == "avg_pool") {
        model.layers.emplace_back(AvgPoolLayer{l.at("kernel").get<std::size_t>(), l.at("stride").get<std::size_t>()});
      } else if (type == "spiking") {
        SpikingLayer s;
        s.threshold = payload.GetScalar(l.at("threshold"));
        s.precharge_fraction = payload.GetScalar(l.at("precharge_fraction"));
        s.scale = payload.GetScalar(l.at("scale"));
        s.upper_bound = l.at("upper_bound").get<int>();
        model.layers.emplace_back(s);
      } else if (type == "flatten") {
        model.layers.emplace_back(FlattenLayer{});
      } else {
        throw ParseError(path + ": unknown layer type '" + type + "'");
      }
    }
    if (metadata) *metadata = raw.header.value("metadata", json::object());
    return model;
  });
}

std::string CheckpointKind(const std::string& path) {
  const RawCheckpoint raw = ReadFile(path);
  return Guarded(path, [&] { return raw.header.at("kind").get<std::string>(); });
}

}  // namespace qsnn
