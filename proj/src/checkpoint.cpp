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

#include "vecmarket/checkpoint.hpp"

#include "vecmarket/config.hpp"

#include "json.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace vecmarket {
namespace io {
namespace {

using nlohmann::json;

constexpr char const *kFormatName = "vecmarket-checkpoint";

json mlp_to_json(neural::MlpParams const &params)
{
  return {{"layer_sizes", params.layer_sizes}, {"values", params.values}};
}

json adam_to_json(neural::AdamState const &state)
{
  return {{"step", state.step},
          {"learning_rate", state.learning_rate},
          {"beta1", state.beta1},
          {"beta2", state.beta2},
          {"epsilon", state.epsilon},
          {"first_moment", state.first_moment},
          {"second_moment", state.second_moment}};
}

json const &require(json const &node, char const *key)
{
  auto const it = node.find(key);
  if (it == node.end())
  {
    throw CorruptCheckpoint(fmt::format("checkpoint is missing '{}'", key));
  }
  return *it;
}

neural::MlpParams mlp_from_json(json const &node)
{
  neural::MlpParams params;
  params.layer_sizes = require(node, "layer_sizes").get<std::vector<std::size_t>>();
  params.values      = require(node, "values").get<std::vector<double>>();
  if (params.layer_sizes.size() < 2 ||
      params.values.size() != neural::parameter_count(params.layer_sizes))
  {
    throw CorruptCheckpoint(fmt::format("network of {} layer sizes holds {} values, shape mismatch",
                                        params.layer_sizes.size(), params.values.size()));
  }
  return params;
}

neural::AdamState adam_from_json(json const &node, std::size_t parameter_count)
{
  neural::AdamState state;
  state.step          = require(node, "step").get<std::uint64_t>();
  state.learning_rate = require(node, "learning_rate").get<double>();
  state.beta1         = require(node, "beta1").get<double>();
  state.beta2         = require(node, "beta2").get<double>();
  state.epsilon       = require(node, "epsilon").get<double>();
  state.first_moment  = require(node, "first_moment").get<std::vector<double>>();
  state.second_moment = require(node, "second_moment").get<std::vector<double>>();
  if (state.first_moment.size() != parameter_count ||
      state.second_moment.size() != parameter_count)
  {
    throw CorruptCheckpoint(fmt::format("optimizer moments do not match {} parameters",
                                        parameter_count));
  }
  return state;
}

Checkpoint checkpoint_from_json(json const &root)
{
  if (!root.is_object() || require(root, "format") != kFormatName)
  {
    throw CorruptCheckpoint("not a vecmarket checkpoint");
  }
  int const version = require(root, "version").get<int>();
  if (version != kCheckpointVersion)
  {
    throw VersionMismatch(
        fmt::format("checkpoint version {} is not supported (expected {})", version,
                    kCheckpointVersion));
  }

  Checkpoint checkpoint;
  checkpoint.epoch        = require(root, "epoch").get<std::size_t>();
  checkpoint.rng_state    = require(root, "rng_state").get<std::string>();
  checkpoint.train_config = experiment::train_config_from_json(require(root, "train_config"),
                                                               "train_config.");

  auto &agents       = checkpoint.agents;
  agents.agent_count = require(root, "agent_count").get<std::size_t>();
  agents.shared      = require(root, "shared").get<bool>();

  for (auto const &node : require(root, "actors"))
  {
    mappo::Actor actor;
    actor.mean_net     = mlp_from_json(require(node, "mean_net"));
    actor.log_std      = require(node, "log_std").get<double>();
    actor.net_adam     = adam_from_json(require(node, "net_adam"), actor.mean_net.values.size());
    actor.log_std_adam = adam_from_json(require(node, "log_std_adam"), 1);
    agents.actors.push_back(std::move(actor));
  }
  for (auto const &node : require(root, "critics"))
  {
    mappo::Critic critic;
    critic.net  = mlp_from_json(require(node, "net"));
    critic.adam = adam_from_json(require(node, "adam"), critic.net.values.size());
    agents.critics.push_back(std::move(critic));
  }

  std::size_t const networks = agents.shared ? 1 : agents.agent_count;
  if (agents.actors.size() != networks || agents.critics.size() != networks)
  {
    throw CorruptCheckpoint(fmt::format("expected {} actor/critic pairs, found {}/{}", networks,
                                        agents.actors.size(), agents.critics.size()));
  }
  for (std::size_t i = 0; i < networks; ++i)
  {
    if (agents.actors[i].mean_net.output_size() != 1 ||
        agents.critics[i].net.output_size() != 1 ||
        agents.actors[i].mean_net.input_size() != agents.actors[0].mean_net.input_size() ||
        agents.critics[i].net.input_size() != agents.critics[0].net.input_size())
    {
      throw CorruptCheckpoint(fmt::format("network {} has an inconsistent shape", i));
    }
  }

  // the stored generator state must be restorable
  Rng probe;
  try
  {
    probe.RestoreState(checkpoint.rng_state);
  }
  catch (std::exception const &)
  {
    throw CorruptCheckpoint("checkpoint rng_state is unreadable");
  }
  return checkpoint;
}

}  // namespace

void save_checkpoint(std::filesystem::path const &path, Checkpoint const &checkpoint)
{
  json actors = json::array();
  for (auto const &actor : checkpoint.agents.actors)
  {
    actors.push_back({{"mean_net", mlp_to_json(actor.mean_net)},
                      {"log_std", actor.log_std},
                      {"net_adam", adam_to_json(actor.net_adam)},
                      {"log_std_adam", adam_to_json(actor.log_std_adam)}});
  }
  json critics = json::array();
  for (auto const &critic : checkpoint.agents.critics)
  {
    critics.push_back({{"net", mlp_to_json(critic.net)}, {"adam", adam_to_json(critic.adam)}});
  }

  json const root = {{"format", kFormatName},
                     {"version", kCheckpointVersion},
                     {"epoch", checkpoint.epoch},
                     {"train_config", experiment::to_json(checkpoint.train_config)},
                     {"rng_state", checkpoint.rng_state},
                     {"agent_count", checkpoint.agents.agent_count},
                     {"shared", checkpoint.agents.shared},
                     {"actors", actors},
                     {"critics", critics}};

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw std::runtime_error(fmt::format("cannot write checkpoint '{}'", path.string()));
  }
  out << root.dump() << '\n';
  if (!out)
  {
    throw std::runtime_error(fmt::format("failed writing checkpoint '{}'", path.string()));
  }
}

Checkpoint load_checkpoint(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw CorruptCheckpoint(fmt::format("cannot open checkpoint '{}'", path.string()));
  }
  std::ostringstream text;
  text << in.rdbuf();

  json root;
  try
  {
    root = json::parse(text.str());
  }
  catch (json::parse_error const &error)
  {
    throw CorruptCheckpoint(
        fmt::format("checkpoint '{}' is truncated or malformed: {}", path.string(), error.what()));
  }

  try
  {
    return checkpoint_from_json(root);
  }
  catch (json::exception const &error)
  {
    throw CorruptCheckpoint(fmt::format("checkpoint '{}' has a bad field: {}", path.string(),
                                        error.what()));
  }
  catch (simenv::InvalidConfig const &error)
  {
    throw CorruptCheckpoint(fmt::format("checkpoint '{}' has a bad training config: {}",
                                        path.string(), error.what()));
  }
}

}  // namespace io
}  // namespace vecmarket
