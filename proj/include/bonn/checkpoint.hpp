// Copyright 2026 The BONN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Binary checkpoints:
//   "BONNCKPT" | u32 version | u32 header length | JSON header | arrays
// The JSON header holds the autoencoder spec, training mode, seed, training
// config, history and a directory of {name, size} entries; the arrays follow
// in directory order as little-endian float32.

#ifndef BONN_CHECKPOINT_HPP
#define BONN_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "bonn/anomaly.hpp"
#include "bonn/bayes_train.hpp"

namespace bonn {

inline constexpr char kCheckpointMagic[8] = {'B', 'O', 'N', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  AutoencoderSpec spec;
  TrainConfig config;
  TrainState state;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bonn

#endif  // BONN_CHECKPOINT_HPP
