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

#include "vecmarket/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace vecmarket {
namespace experiment {
namespace {

using nlohmann::json;
using simenv::InvalidConfig;

// Reads the known keys of one JSON object and rejects everything else.
class ObjectReader
{
public:
  ObjectReader(json const &node, std::string prefix)
    : node_(node)
    , prefix_(std::move(prefix))
  {
    if (!node_.is_object())
    {
      throw InvalidConfig(prefix_.empty() ? "<root>" : prefix_.substr(0, prefix_.size() - 1),
                          "must be a JSON object");
    }
  }

  template <typename Apply>
  void Field(char const *key, Apply &&apply)
  {
    known_.insert(key);
    auto const it = node_.find(key);
    if (it == node_.end())
    {
      return;
    }
    try
    {
      apply(*it);
    }
    catch (json::exception const &error)
    {
      throw InvalidConfig(prefix_ + key, error.what());
    }
    catch (std::invalid_argument const &error)
    {
      if (dynamic_cast<InvalidConfig const *>(&error) != nullptr)
      {
        throw;
      }
      throw InvalidConfig(prefix_ + key, error.what());
    }
  }

  void Double(char const *key, double &out)
  {
    Field(key, [&](json const &value) {
      if (!value.is_number())
      {
        throw InvalidConfig(prefix_ + key, "expected a number");
      }
      out = value.get<double>();
    });
  }

  void Size(char const *key, std::size_t &out)
  {
    Field(key, [&](json const &value) {
      if (!value.is_number_unsigned())
      {
        throw InvalidConfig(prefix_ + key, "expected a non-negative integer");
      }
      out = value.get<std::size_t>();
    });
  }

  void U64(char const *key, std::uint64_t &out)
  {
    Field(key, [&](json const &value) {
      if (!value.is_number_unsigned())
      {
        throw InvalidConfig(prefix_ + key, "expected a non-negative integer");
      }
      out = value.get<std::uint64_t>();
    });
  }

  void Bool(char const *key, bool &out)
  {
    Field(key, [&](json const &value) {
      if (!value.is_boolean())
      {
        throw InvalidConfig(prefix_ + key, "expected true or false");
      }
      out = value.get<bool>();
    });
  }

  void String(char const *key, std::string &out)
  {
    Field(key, [&](json const &value) {
      if (!value.is_string())
      {
        throw InvalidConfig(prefix_ + key, "expected a string");
      }
      out = value.get<std::string>();
    });
  }

  void SizeList(char const *key, std::vector<std::size_t> &out)
  {
    Field(key, [&](json const &value) {
      if (!value.is_array())
      {
        throw InvalidConfig(prefix_ + key, "expected a list of non-negative integers");
      }
      std::vector<std::size_t> parsed;
      for (auto const &item : value)
      {
        if (!item.is_number_unsigned())
        {
          throw InvalidConfig(prefix_ + key, "expected a list of non-negative integers");
        }
        parsed.push_back(item.get<std::size_t>());
      }
      out = std::move(parsed);
    });
  }

  // a single name or a list of names
  std::vector<std::string> Names(char const *key)
  {
    std::vector<std::string> names;
    Field(key, [&](json const &value) {
      if (value.is_string())
      {
        names.push_back(value.get<std::string>());
        return;
      }
      if (!value.is_array() || value.empty())
      {
        throw InvalidConfig(prefix_ + key, "expected a name or a non-empty list of names");
      }
      for (auto const &item : value)
      {
        names.push_back(item.get<std::string>());
      }
    });
    return names;
  }

  json const *Child(char const *key)
  {
    known_.insert(key);
    auto const it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  std::string const &prefix() const
  {
    return prefix_;
  }

  void Finish() const
  {
    for (auto const &[key, value] : node_.items())
    {
      if (known_.count(key) == 0)
      {
        throw InvalidConfig(prefix_ + key, "unknown key");
      }
    }
  }

private:
  json const           &node_;
  std::string           prefix_;
  std::set<std::string> known_;
};

simenv::WorldConfig world_from_json(json const &node)
{
  simenv::WorldConfig world;
  ObjectReader        reader(node, "world.");
  reader.Double("area_side", world.area_side);
  reader.Size("rsu_count", world.rsu_count);
  reader.Double("rsu_coverage", world.rsu_coverage);
  reader.Size("vehicle_count", world.vehicle_count);
  reader.Double("mean_speed", world.mean_speed);
  reader.Double("slot_duration", world.slot_duration);
  reader.Size("slots_per_episode", world.slots_per_episode);
  reader.U64("rng_seed", world.rng_seed);
  reader.Size("vms_per_rsu", world.vms_per_rsu);
  reader.Double("request_prob", world.request_prob);
  reader.Double("rate_max", world.rate_max);

  std::string welfare = "sum";
  reader.String("welfare", welfare);
  if (welfare == "sum")
  {
    world.welfare = simenv::WelfareMode::Sum;
  }
  else if (welfare == "gains")
  {
    world.welfare = simenv::WelfareMode::Gains;
  }
  else
  {
    throw InvalidConfig("world.welfare", "expected \"sum\" or \"gains\"");
  }

  std::string log_base = "natural";
  reader.String("valuation_log", log_base);
  if (log_base == "natural")
  {
    world.valuation_log = simenv::ValuationLog::Natural;
  }
  else if (log_base == "log10")
  {
    world.valuation_log = simenv::ValuationLog::Log10;
  }
  else
  {
    throw InvalidConfig("world.valuation_log", "expected \"natural\" or \"log10\"");
  }

  if (auto const *channel = reader.Child("channel"))
  {
    ObjectReader sub(*channel, "world.channel.");
    sub.Double("bandwidth", world.channel.bandwidth);
    sub.Double("reference_distance", world.channel.reference_distance);
    sub.Double("path_loss_exponent", world.channel.path_loss_exponent);
    sub.Double("noise_power", world.channel.noise_power);
    sub.Finish();
  }

  if (auto const *content = reader.Child("content"))
  {
    ObjectReader sub(*content, "world.content.");
    std::string  kind = "synthetic";
    sub.String("kind", kind);
    if (kind == "synthetic")
    {
      world.content.kind = simenv::ContentProfile::Kind::Synthetic;
    }
    else if (kind == "file")
    {
      world.content.kind = simenv::ContentProfile::Kind::FileBacked;
    }
    else
    {
      throw InvalidConfig("world.content.kind", "expected \"synthetic\" or \"file\"");
    }
    sub.Double("median", world.content.median);
    sub.Double("sigma", world.content.sigma);
    sub.String("path", world.content.path);
    sub.Finish();
  }

  reader.Finish();
  return world;
}

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte)
{
  std::size_t line   = 1;
  std::size_t column = 1;
  std::size_t const end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i)
  {
    if (text[i] == '\n')
    {
      ++line;
      column = 1;
    }
    else
    {
      ++column;
    }
  }
  return {line, column};
}

template <typename Validate>
void validate_prefixed(std::string const &prefix, Validate &&check)
{
  try
  {
    check();
  }
  catch (InvalidConfig const &error)
  {
    std::string const what = error.what();
    std::string const tail = what.substr(std::min(what.size(), error.field().size() + 2));
    throw InvalidConfig(prefix + error.field(), tail);
  }
}

}  // namespace

mappo::TrainConfig train_config_from_json(json const &node, std::string const &prefix)
{
  mappo::TrainConfig train;
  ObjectReader       reader(node, prefix);
  reader.Double("gamma", train.gamma);
  reader.Double("gae_lambda", train.gae_lambda);
  reader.Double("clip", train.clip);
  reader.Double("entropy_coef", train.entropy_coef);
  reader.Double("value_coef", train.value_coef);
  reader.Double("budget_coef", train.budget_coef);
  reader.Double("latency_weight", train.latency_weight);
  reader.Double("learning_rate", train.learning_rate);
  reader.Size("epochs", train.epochs);
  reader.Size("minibatch_size", train.minibatch_size);
  reader.Size("ppo_updates_per_batch", train.ppo_updates_per_batch);
  reader.Size("episodes_per_batch", train.episodes_per_batch);
  reader.Size("eval_episodes", train.eval_episodes);
  reader.Size("checkpoint_every", train.checkpoint_every);
  reader.Bool("share_policy_params", train.share_policy_params);
  reader.SizeList("hidden_sizes", train.hidden_sizes);
  reader.Finish();
  return train;
}

void validate(ExperimentConfig const &config)
{
  validate_prefixed("world.", [&] { simenv::validate(config.world); });
  validate_prefixed("train.", [&] { mappo::validate(config.train); });
  if (config.mechanisms.empty())
  {
    throw InvalidConfig("mechanism", "at least one mechanism is required");
  }
  if (config.bidders.empty())
  {
    throw InvalidConfig("bidder", "at least one bidder is required");
  }
  if (config.iov_counts.empty() ||
      std::any_of(config.iov_counts.begin(), config.iov_counts.end(),
                  [](std::size_t n) { return n == 0; }))
  {
    throw InvalidConfig("iov_counts", "must be a non-empty list of positive counts");
  }
  auto has_duplicates = [](auto values) {
    std::sort(values.begin(), values.end());
    return std::adjacent_find(values.begin(), values.end()) != values.end();
  };
  if (has_duplicates(config.iov_counts))
  {
    throw InvalidConfig("iov_counts", "counts must be distinct");
  }
  if (has_duplicates(config.mechanisms))
  {
    throw InvalidConfig("mechanism", "mechanisms must be distinct");
  }
  if (has_duplicates(config.bidders))
  {
    throw InvalidConfig("bidder", "bidders must be distinct");
  }
  if (config.episodes_per_eval == 0)
  {
    throw InvalidConfig("episodes_per_eval", "must be positive");
  }
  if (config.out_dir.empty())
  {
    throw InvalidConfig("out_dir", "must not be empty");
  }
}

ExperimentConfig parse_config_text(std::string_view text)
{
  ExperimentConfig config;
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
  {
    validate(config);
    return config;
  }

  json root;
  try
  {
    root = json::parse(text.begin(), text.end());
  }
  catch (json::parse_error const &error)
  {
    auto const [line, column] = line_and_column(text, error.byte);
    throw ConfigParseError(fmt::format("line {}, column {}: {}", line, column, error.what()), line,
                           column);
  }

  ObjectReader reader(root, "");
  if (auto const *world = reader.Child("world"))
  {
    config.world = world_from_json(*world);
  }
  if (auto const *train = reader.Child("train"))
  {
    config.train = train_config_from_json(*train, "train.");
  }

  auto const mechanisms = reader.Names("mechanism");
  if (!mechanisms.empty())
  {
    config.mechanisms.clear();
    for (auto const &name : mechanisms)
    {
      try
      {
        config.mechanisms.push_back(market::parse_mechanism(name));
      }
      catch (std::invalid_argument const &error)
      {
        throw InvalidConfig("mechanism", error.what());
      }
    }
  }
  auto const bidders = reader.Names("bidder");
  if (!bidders.empty())
  {
    config.bidders.clear();
    for (auto const &name : bidders)
    {
      try
      {
        config.bidders.push_back(mappo::parse_bidder(name));
      }
      catch (std::invalid_argument const &error)
      {
        throw InvalidConfig("bidder", error.what());
      }
    }
  }
  reader.SizeList("iov_counts", config.iov_counts);
  reader.Size("episodes_per_eval", config.episodes_per_eval);
  reader.String("out_dir", config.out_dir);
  reader.U64("seed", config.seed);
  reader.Finish();

  validate(config);
  return config;
}

ExperimentConfig parse_config(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw ConfigParseError(fmt::format("cannot open config file '{}'", path.string()), 0, 0);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

json to_json(simenv::WorldConfig const &world)
{
  json channel = {{"bandwidth", world.channel.bandwidth},
                  {"reference_distance", world.channel.reference_distance},
                  {"path_loss_exponent", world.channel.path_loss_exponent},
                  {"noise_power", world.channel.noise_power}};
  json content = {
      {"kind", world.content.kind == simenv::ContentProfile::Kind::Synthetic ? "synthetic" : "file"},
      {"median", world.content.median},
      {"sigma", world.content.sigma},
      {"path", world.content.path}};
  return {{"area_side", world.area_side},
          {"rsu_count", world.rsu_count},
          {"rsu_coverage", world.rsu_coverage},
          {"vehicle_count", world.vehicle_count},
          {"mean_speed", world.mean_speed},
          {"slot_duration", world.slot_duration},
          {"slots_per_episode", world.slots_per_episode},
          {"rng_seed", world.rng_seed},
          {"vms_per_rsu", world.vms_per_rsu},
          {"request_prob", world.request_prob},
          {"rate_max", world.rate_max},
          {"welfare", world.welfare == simenv::WelfareMode::Sum ? "sum" : "gains"},
          {"valuation_log", world.valuation_log == simenv::ValuationLog::Natural ? "natural" : "log10"},
          {"channel", channel},
          {"content", content}};
}

json to_json(mappo::TrainConfig const &train)
{
  return {{"gamma", train.gamma},
          {"gae_lambda", train.gae_lambda},
          {"clip", train.clip},
          {"entropy_coef", train.entropy_coef},
          {"value_coef", train.value_coef},
          {"budget_coef", train.budget_coef},
          {"latency_weight", train.latency_weight},
          {"learning_rate", train.learning_rate},
          {"epochs", train.epochs},
          {"minibatch_size", train.minibatch_size},
          {"ppo_updates_per_batch", train.ppo_updates_per_batch},
          {"episodes_per_batch", train.episodes_per_batch},
          {"eval_episodes", train.eval_episodes},
          {"checkpoint_every", train.checkpoint_every},
          {"share_policy_params", train.share_policy_params},
          {"hidden_sizes", train.hidden_sizes}};
}

json to_json(ExperimentConfig const &config)
{
  json mechanisms = json::array();
  for (auto const kind : config.mechanisms)
  {
    mechanisms.push_back(std::string(market::to_string(kind)));
  }
  json bidders = json::array();
  for (auto const kind : config.bidders)
  {
    bidders.push_back(std::string(mappo::to_string(kind)));
  }
  return {{"world", to_json(config.world)},
          {"train", to_json(config.train)},
          {"mechanism", mechanisms},
          {"bidder", bidders},
          {"iov_counts", config.iov_counts},
          {"episodes_per_eval", config.episodes_per_eval},
          {"out_dir", config.out_dir},
          {"seed", config.seed}};
}

std::string serialize_config(ExperimentConfig const &config)
{
  return to_json(config).dump(2) + "\n";
}

}  // namespace experiment
}  // namespace vecmarket
