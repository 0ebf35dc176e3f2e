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

// Checkpoint file format (version 1):
//
//   bytes 0..7    magic "QSNNCKPT"
//   bytes 8..11   format version, uint32 little-endian
//   bytes 12..19  header length H, uint64 little-endian
//   next H bytes  UTF-8 JSON header
//   remainder     float32 little-endian payload
//
// The header holds "kind" ("ann" or "snn"), "arch", "layers" and free-form
// "metadata". Every float (weights, biases, scales, thresholds) lives in the
// payload and is referenced from the header as {"shape": [...], "offset": k}
// with k counted in floats, so values round-trip bit-exactly.

#ifndef QSNN_CHECKPOINT_H_
#define QSNN_CHECKPOINT_H_

#include <string>

#include <nlohmann/json.hpp>

#include "qsnn/model.h"
#include "qsnn/snn_model.h"

namespace qsnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json ArchToJson(const ArchSpec& arch);
ArchSpec ArchFromJson(const nlohmann::json& j);

void SaveAnnCheckpoint(const std::string& path, const AnnModel& model,
                       const nlohmann::json& metadata = nlohmann::json::object());
AnnModel LoadAnnCheckpoint(const std::string& path, nlohmann::json* metadata = nullptr);

void SaveSnnCheckpoint(const std::string& path, const SnnModel& model,
                       const nlohmann::json& metadata = nlohmann::json::object());
SnnModel LoadSnnCheckpoint(const std::string& path, nlohmann::json* metadata = nullptr);

// "ann" or "snn"; throws ParseError for anything that is not a checkpoint.
std::string CheckpointKind(const std::string& path);

}  // namespace qsnn

#endif  // QSNN_CHECKPOINT_H_
