#pragma once
//------------------------------------------------------------------------------
//
//   Copyright 2026 The vecmarket Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include "vecmarket/mappo.hpp"

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace vecmarket {
namespace io {

/// Checkpoint files are JSON documents:
///
///   {
///     "format": "vecmarket-checkpoint", "version": 1, "epoch": <n>,
///     "train_config": { ...TrainConfig keys... },
///     "rng_state": "<mt19937_64 state text>",
///     "agent_count": <V>, "shared": <bool>,
///     "actors":  [ { "mean_net": <mlp>, "log_std": <x>,
///                    "net_adam": <adam>, "log_std_adam": <adam> }, ... ],
///     "critics": [ { "net": <mlp>, "adam": <adam> }, ... ]
///   }
///
/// where <mlp> is { "layer_sizes": [...], "values": [...] } with each layer's
/// weights row-major (out x in) followed by its biases, and <adam> is
/// { "step", "learning_rate", "beta1", "beta2", "epsilon",
///   "first_moment": [...], "second_moment": [...] }. Doubles are written in
/// shortest round-trip form, so a load reproduces the saved values bit for bit.
constexpr int kCheckpointVersion = 1;

class CorruptCheckpoint : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class VersionMismatch : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint
{
  mappo::AgentPool   agents;
  std::string        rng_state;
  mappo::TrainConfig train_config;
  std::size_t        epoch = 0;

  bool operator==(Checkpoint const &) const = default;
};

void       save_checkpoint(std::filesystem::path const &path, Checkpoint const &checkpoint);
Checkpoint load_checkpoint(std::filesystem::path const &path);

}  // namespace io
}  // namespace vecmarket
