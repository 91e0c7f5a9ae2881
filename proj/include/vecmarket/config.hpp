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
#include "vecmarket/market.hpp"
#include "vecmarket/simenv.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vecmarket {
namespace experiment {

using market::MechanismKind;
using mappo::BidderKind;

/// Everything one `vecmarket` invocation needs. `mechanism` and `bidder`
/// accept a single name or a list; a sweep runs every combination.
struct ExperimentConfig
{
  simenv::WorldConfig        world;
  mappo::TrainConfig         train;
  std::vector<MechanismKind> mechanisms        = {MechanismKind::McAfeeDouble};
  std::vector<BidderKind>    bidders           = {BidderKind::Learned};
  std::vector<std::size_t>   iov_counts        = {20, 40, 60, 80};
  std::size_t                episodes_per_eval = 20;
  std::string                out_dir           = "out";
  std::uint64_t              seed              = 1;

  bool operator==(ExperimentConfig const &) const = default;
};

class ConfigParseError : public std::runtime_error
{
public:
  ConfigParseError(std::string const &message, std::size_t line, std::size_t column)
    : std::runtime_error(message)
    , line_(line)
    , column_(column)
  {}

  std::size_t line() const
  {
    return line_;
  }
  std::size_t column() const
  {
    return column_;
  }

private:
  std::size_t line_;
  std::size_t column_;
};

/// Parses a JSON config; an empty (or whitespace-only) document yields the
/// defaults. Unknown keys and out-of-range values throw simenv::InvalidConfig
/// naming the field; malformed JSON throws ConfigParseError.
ExperimentConfig parse_config(std::filesystem::path const &path);
ExperimentConfig parse_config_text(std::string_view text);

/// Throws simenv::InvalidConfig on the first invalid field.
void validate(ExperimentConfig const &config);

nlohmann::json to_json(ExperimentConfig const &config);
nlohmann::json to_json(simenv::WorldConfig const &config);
nlohmann::json to_json(mappo::TrainConfig const &config);

/// `prefix` is prepended to field names in error messages (e.g. "train.").
mappo::TrainConfig train_config_from_json(nlohmann::json const &node, std::string const &prefix);

std::string serialize_config(ExperimentConfig const &config);

}  // namespace experiment
}  // namespace vecmarket
