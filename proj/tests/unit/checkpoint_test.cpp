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

#include "json.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

using namespace vecmarket;

class CheckpointTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    path_ = std::filesystem::temp_directory_path() /
            ("vecmarket_ckpt_" +
             std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + ".json");
  }
  void TearDown() override
  {
    std::filesystem::remove(path_);
  }

  io::Checkpoint Sample(bool shared) const
  {
    mappo::TrainConfig config;
    config.hidden_sizes        = {5, 3};
    config.share_policy_params = shared;
    config.learning_rate       = 0.1 / 3.0;
    Rng rng(17);
    io::Checkpoint checkpoint;
    checkpoint.agents       = mappo::make_agent_pool(3, 6, 12, config, rng);
    checkpoint.agents.actors[0].log_std = -0.123456789012345;
    checkpoint.agents.actors[0].net_adam.step = 7;
    checkpoint.agents.actors[0].net_adam.first_moment.assign(
        checkpoint.agents.actors[0].mean_net.values.size(), 1e-300);
    checkpoint.agents.actors[0].net_adam.second_moment.assign(
        checkpoint.agents.actors[0].mean_net.values.size(), 3.0e-17);
    rng.Normal();
    checkpoint.rng_state    = rng.SaveState();
    checkpoint.train_config = config;
    checkpoint.epoch        = 12;
    return checkpoint;
  }

  std::string Text() const
  {
    std::ifstream     in(path_);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  }

  std::filesystem::path path_;
};

TEST_F(CheckpointTest, RoundTripIsExact)
{
  for (bool const shared : {false, true})
  {
    auto const checkpoint = Sample(shared);
    io::save_checkpoint(path_, checkpoint);
    auto const loaded = io::load_checkpoint(path_);
    EXPECT_EQ(loaded, checkpoint);

    Rng a(1);
    Rng b(2);
    a.RestoreState(checkpoint.rng_state);
    b.RestoreState(loaded.rng_state);
    EXPECT_EQ(a.Uniform(), b.Uniform());
  }
}

TEST_F(CheckpointTest, TruncatedFileIsCorrupt)
{
  io::save_checkpoint(path_, Sample(false));
  auto const text = Text();
  std::ofstream(path_, std::ios::trunc) << text.substr(0, text.size() / 2);
  EXPECT_THROW(io::load_checkpoint(path_), io::CorruptCheckpoint);
}

TEST_F(CheckpointTest, WrongShapeIsCorrupt)
{
  io::save_checkpoint(path_, Sample(false));
  auto json = nlohmann::json::parse(Text());
  json["actors"][0]["mean_net"]["values"].erase(0);
  std::ofstream(path_, std::ios::trunc) << json.dump();
  EXPECT_THROW(io::load_checkpoint(path_), io::CorruptCheckpoint);
}

TEST_F(CheckpointTest, OtherVersionIsRejected)
{
  io::save_checkpoint(path_, Sample(false));
  auto json       = nlohmann::json::parse(Text());
  json["version"] = io::kCheckpointVersion + 1;
  std::ofstream(path_, std::ios::trunc) << json.dump();
  EXPECT_THROW(io::load_checkpoint(path_), io::VersionMismatch);
}

TEST_F(CheckpointTest, MissingFileIsCorrupt)
{
  EXPECT_THROW(io::load_checkpoint(path_), io::CorruptCheckpoint);
}

}  // namespace
