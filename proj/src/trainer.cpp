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
#include "vecmarket/mappo.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

namespace vecmarket {
namespace mappo {
namespace {

constexpr std::uint64_t kInitStream     = 0x1A1;
constexpr std::uint64_t kUpdateStream   = 0x0BD;
constexpr std::uint64_t kEvalStream     = 0xE7A1;
constexpr std::uint64_t kEpisodeStream  = 0x100000;
constexpr std::uint64_t kBiddingStream  = 0x200000;

struct Moments
{
  double sum    = 0.0;
  double sum_sq = 0.0;

  void Add(double x)
  {
    sum += x;
    sum_sq += x * x;
  }
};

void finish(Moments const &m, std::size_t n, double &mean, double &std_dev)
{
  auto const count = static_cast<double>(n);
  mean             = m.sum / count;
  std_dev          = std::sqrt(std::max(0.0, m.sum_sq / count - mean * mean));
}

void dump_diagnostic(std::filesystem::path const &out_dir, std::size_t epoch,
                     std::span<TrainingLogRow const> rows, std::string const &reason)
{
  if (out_dir.empty())
  {
    return;
  }
  std::ofstream out(out_dir / "abort_diagnostic.txt");
  out << fmt::format("training aborted at epoch {}: {}\n", epoch, reason);
  write_training_log(out, rows);
}

}  // namespace

namespace {

Aggregate run_evaluation(PolicySource const &source, bool sampled,
                         simenv::WorldConfig const &world_config, MechanismKind mechanism,
                         TrainConfig const &config, std::size_t episodes, std::uint64_t seed,
                         TradeObserver const &observer)
{
  Aggregate aggregate;
  if (episodes == 0)
  {
    return aggregate;
  }

  PolicySource frozen = source;
  frozen.stochastic   = sampled;

  World   world(world_config);
  Moments reward;
  Moments sw;
  Moments budget;
  Moments latency;
  for (std::size_t e = 0; e < episodes; ++e)
  {
    world.Reset(mix_seed(seed, e));
    std::size_t const slot_offset = e * world_config.slots_per_episode;
    TradeObserver     shifted;
    if (observer)
    {
      shifted = [&](std::size_t slot, std::span<market::ClearingOutcome const> outcomes) {
        observer(slot_offset + slot, outcomes);
      };
    }
    auto const buffer =
        collect_rollout(world, frozen, mechanism, config, mix_seed(seed, kBiddingStream + e), shifted);

    auto const slots = static_cast<double>(buffer.slot_rewards.size());
    double     r = 0.0, s = 0.0, b = 0.0, l = 0.0;
    for (std::size_t t = 0; t < buffer.slot_rewards.size(); ++t)
    {
      r += buffer.slot_rewards[t];
      s += buffer.slot_metrics[t].social_welfare;
      b += buffer.slot_metrics[t].global_budget;
      l += buffer.slot_metrics[t].total_latency;
    }
    reward.Add(r / slots);
    sw.Add(s / slots);
    budget.Add(b / slots);
    latency.Add(l / slots);
  }

  aggregate.episodes = episodes;
  finish(reward, episodes, aggregate.reward_mean, aggregate.reward_std);
  finish(sw, episodes, aggregate.sw_mean, aggregate.sw_std);
  finish(budget, episodes, aggregate.budget_mean, aggregate.budget_std);
  finish(latency, episodes, aggregate.latency_mean, aggregate.latency_std);
  return aggregate;
}

}  // namespace

Aggregate evaluate(PolicySource const &source, simenv::WorldConfig const &world_config,
                   MechanismKind mechanism, TrainConfig const &config, std::size_t episodes,
                   std::uint64_t seed, TradeObserver const &observer)
{
  return run_evaluation(source, false, world_config, mechanism, config, episodes, seed, observer);
}

Aggregate evaluate_sampled(PolicySource const &source, simenv::WorldConfig const &world_config,
                           MechanismKind mechanism, TrainConfig const &config,
                           std::size_t episodes, std::uint64_t seed)
{
  return run_evaluation(source, true, world_config, mechanism, config, episodes, seed, {});
}

std::uint64_t training_eval_seed(std::uint64_t seed)
{
  return mix_seed(seed, kEvalStream);
}

TrainingResult train(TrainConfig const &config, simenv::WorldConfig const &world_config,
                     MechanismKind mechanism, std::uint64_t seed,
                     std::filesystem::path const &out_dir)
{
  validate(config);
  simenv::validate(world_config);
  if (!out_dir.empty())
  {
    std::filesystem::create_directories(out_dir);
  }

  World             world(world_config);
  std::size_t const observation_size = world_config.rsu_count + 2;
  std::size_t const state_size       = 3 * world_config.rsu_count;

  Rng            init_rng(mix_seed(seed, kInitStream));
  TrainingResult result;
  result.agents = make_agent_pool(world_config.vehicle_count, observation_size, state_size, config,
                                  init_rng);
  Rng update_rng(mix_seed(seed, kUpdateStream));

  std::uint64_t const eval_seed = training_eval_seed(seed);
  auto score = [&](std::size_t epoch, UpdateStats const &stats) {
    PolicySource const policy{BidderKind::Learned, &result.agents, false};
    auto const agg = evaluate(policy, world_config, mechanism, config, config.eval_episodes, eval_seed);
    auto const sampled =
        evaluate_sampled(policy, world_config, mechanism, config, config.eval_episodes, eval_seed);
    result.log.push_back({epoch, agg.reward_mean, sampled.reward_mean, agg.sw_mean,
                          agg.budget_mean, agg.latency_mean, stats.policy_loss, stats.value_loss,
                          stats.entropy});
  };

  auto save = [&](std::size_t epoch, std::string const &name) {
    if (out_dir.empty())
    {
      return;
    }
    io::Checkpoint checkpoint;
    checkpoint.agents       = result.agents;
    checkpoint.rng_state    = update_rng.SaveState();
    checkpoint.train_config = config;
    checkpoint.epoch        = epoch;
    io::save_checkpoint(out_dir / name, checkpoint);
  };

  score(0, UpdateStats{});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch)
  {
    UpdateStats stats;
    try
    {
      RolloutBuffer     batch;
      PolicySource const sampling{BidderKind::Learned, &result.agents, true};
      for (std::size_t e = 0; e < config.episodes_per_batch; ++e)
      {
        std::uint64_t const episode = epoch * config.episodes_per_batch + e;
        world.Reset(mix_seed(seed, kEpisodeStream + episode));
        batch.Append(collect_rollout(world, sampling, mechanism, config,
                                     mix_seed(seed, kBiddingStream + episode)));
      }
      finalize_buffer(batch, result.agents, config);
      stats = ppo_update(result.agents, batch, config, update_rng);
    }
    catch (TrainingAborted const &error)
    {
      dump_diagnostic(out_dir, epoch, result.log, error.what());
      throw;
    }

    score(epoch, stats);
    auto const &row = result.log.back();
    if (!std::isfinite(row.mean_reward) || !std::isfinite(row.policy_loss) ||
        !std::isfinite(row.value_loss))
    {
      std::string const reason = "non-finite metrics after update";
      dump_diagnostic(out_dir, epoch, result.log, reason);
      throw TrainingAborted(fmt::format("epoch {}: {}", epoch, reason));
    }

    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0)
    {
      save(epoch, fmt::format("checkpoint_epoch_{}.json", epoch));
    }
  }

  if (!out_dir.empty())
  {
    save(config.epochs, "checkpoint_final.json");
    std::ofstream log(out_dir / "training_log.csv");
    write_training_log(log, result.log);
  }
  return result;
}

void write_training_log(std::ostream &out, std::span<TrainingLogRow const> rows)
{
  out << "epoch,mean_reward,sampled_reward,mean_sw,mean_budget,mean_latency,policy_loss,"
         "value_loss,entropy\n";
  for (auto const &row : rows)
  {
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", row.epoch, row.mean_reward,
                       row.sampled_reward, row.mean_sw,
                       row.mean_budget, row.mean_latency, row.policy_loss, row.value_loss,
                       row.entropy);
  }
}

}  // namespace mappo
}  // namespace vecmarket
