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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace {

using namespace vecmarket;
using namespace vecmarket::experiment;

std::string invalid_field(std::string const &text)
{
  try
  {
    parse_config_text(text);
  }
  catch (simenv::InvalidConfig const &error)
  {
    return error.field();
  }
  return "<accepted>";
}

TEST(Config, EmptyDocumentYieldsDefaults)
{
  auto const config = parse_config_text("  \n");
  EXPECT_EQ(config, ExperimentConfig{});
  EXPECT_EQ(config.world.rsu_count, 4u);
  EXPECT_EQ(config.world.vehicle_count, 20u);
  EXPECT_EQ(config.train.gamma, 0.95);
  EXPECT_EQ(config.train.clip, 0.2);
  EXPECT_EQ(config.train.entropy_coef, 0.02);
  EXPECT_EQ(config.train.value_coef, 0.5);
  EXPECT_EQ(parse_config_text("{}"), ExperimentConfig{});
}

TEST(Config, OutOfRangeValueNamesTheField)
{
  EXPECT_EQ(invalid_field(R"({"train": {"gamma": 1.5}})"), "train.gamma");
  EXPECT_EQ(invalid_field(R"({"world": {"rsu_count": 0}})"), "world.rsu_count");
  EXPECT_EQ(invalid_field(R"({"iov_counts": []})"), "iov_counts");
  EXPECT_EQ(invalid_field(R"({"iov_counts": [20, 20]})"), "iov_counts");
}

TEST(Config, UnknownAndMistypedKeysAreRejected)
{
  EXPECT_EQ(invalid_field(R"({"wrold": {}})"), "wrold");
  EXPECT_EQ(invalid_field(R"({"world": {"rsus": 3}})"), "world.rsus");
  EXPECT_EQ(invalid_field(R"({"train": {"epochs": -1}})"), "train.epochs");
  EXPECT_EQ(invalid_field(R"({"mechanism": "vickrey"})"), "mechanism");
}

TEST(Config, MalformedJsonReportsLineAndColumn)
{
  try
  {
    parse_config_text("{\n  \"seed\": 3,\n  oops\n}");
    FAIL() << "expected ConfigParseError";
  }
  catch (ConfigParseError const &error)
  {
    EXPECT_EQ(error.line(), 3u);
    EXPECT_GE(error.column(), 3u);
  }
}

TEST(Config, ScalarOrListSelections)
{
  auto const config = parse_config_text(
      R"({"mechanism": "second-price", "bidder": ["truthful", "random"], "iov_counts": [5]})");
  EXPECT_EQ(config.mechanisms, (std::vector<MechanismKind>{MechanismKind::SecondPrice}));
  EXPECT_EQ(config.bidders, (std::vector<BidderKind>{BidderKind::Truthful, BidderKind::RandomBid}));
  EXPECT_EQ(config.iov_counts, (std::vector<std::size_t>{5}));
}

TEST(Config, SerializationRoundTrips)
{
  ExperimentConfig config;
  config.world.rsu_count           = 9;
  config.world.welfare             = simenv::WelfareMode::Gains;
  config.world.channel.bandwidth   = 2e6;
  config.train.learning_rate       = 0.125;
  config.train.hidden_sizes        = {8};
  config.train.share_policy_params = true;
  config.mechanisms  = {MechanismKind::RandomMatch, MechanismKind::McAfeeDouble};
  config.bidders     = {BidderKind::Truthful};
  config.iov_counts  = {3, 7};
  config.seed        = 0xFFFFFFFFFFFFFFFFull;
  config.out_dir     = "elsewhere";
  auto const text    = serialize_config(config);
  EXPECT_EQ(parse_config_text(text), config);
  EXPECT_EQ(serialize_config(parse_config_text(text)), text);
}

TEST(Config, ReadsFromDisk)
{
  auto const path = std::filesystem::temp_directory_path() / "vecmarket_config_test.json";
  std::ofstream(path) << R"({"seed": 42})";
  EXPECT_EQ(parse_config(path).seed, 42u);
  std::filesystem::remove(path);
  EXPECT_THROW(parse_config(path), std::runtime_error);
}

}  // namespace
