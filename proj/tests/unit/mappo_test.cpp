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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace {

using namespace vecmarket;
using namespace vecmarket::mappo;

simenv::WorldConfig single_pair_world()
{
  simenv::WorldConfig cfg;
  cfg.rsu_count         = 1;
  cfg.rsu_coverage      = 800.0;
  cfg.vms_per_rsu       = 1;
  cfg.vehicle_count     = 1;
  cfg.request_prob      = 1.0;
  cfg.slots_per_episode = 1;
  return cfg;
}

simenv::WorldConfig tiny_world()
{
  simenv::WorldConfig cfg;
  cfg.rsu_count         = 1;
  cfg.rsu_coverage      = 800.0;
  cfg.vms_per_rsu       = 2;
  cfg.vehicle_count     = 2;
  cfg.slots_per_episode = 20;
  return cfg;
}

TrainConfig small_train()
{
  TrainConfig cfg;
  cfg.hidden_sizes       = {16, 16};
  cfg.episodes_per_batch = 2;
  cfg.eval_episodes      = 2;
  cfg.checkpoint_every   = 0;
  return cfg;
}

TEST(TrainConfig, GammaOutOfRangeNamesTheField)
{
  TrainConfig cfg;
  cfg.gamma = 1.5;
  try
  {
    validate(cfg);
    FAIL() << "expected InvalidConfig";
  }
  catch (simenv::InvalidConfig const &error)
  {
    EXPECT_EQ(error.field(), "gamma");
  }
  cfg      = TrainConfig{};
  cfg.clip = 0.0;
  EXPECT_THROW(validate(cfg), simenv::InvalidConfig);
}

TEST(Observation, NormalisedComponents)
{
  simenv::World world(simenv::WorldConfig{});
  auto const    counts = world.MarketCounts();
  for (std::size_t v = 0; v < world.vehicles().size(); ++v)
  {
    auto const obs = build_observation(world, v);
    ASSERT_EQ(obs.size(), 6u);
    for (std::size_t n = 0; n < 4; ++n)
    {
      EXPECT_EQ(obs[n], static_cast<double>(counts[n]) / 20.0);
    }
    EXPECT_EQ(obs[4], 0.0);  // no trade before the first slot
    EXPECT_EQ(obs[5], world.CandidateRate(v) / 4e7);
  }
  EXPECT_EQ(build_global_state(world).size(), 12u);
}

TEST(Observation, PriceComponentUsesTheRunningScale)
{
  simenv::World       world(simenv::WorldConfig{});
  std::vector<double> bids(20);
  for (std::size_t v = 0; v < bids.size(); ++v)
  {
    bids[v] = world.vehicles()[v].valuation;
  }
  world.ClearSlot(bids, MechanismKind::SecondPrice, 1);
  auto const obs = build_observation(world, 0);
  EXPECT_EQ(obs[4], world.last_price() / world.price_scale());
  EXPECT_GE(world.price_scale(), 1.0);
}

TEST(ActionToBid, Examples)
{
  EXPECT_EQ(action_to_bid(0.0, 0.7), 0.7);
  EXPECT_NEAR(action_to_bid(50.0, 0.7), 1.4, 1e-12);
  EXPECT_EQ(action_to_bid(3.0, 0.0), 0.0);
  EXPECT_GE(action_to_bid(-50.0, 0.7), 0.0);
}

TEST(Reward, Examples)
{
  TrainConfig cfg;
  cfg.budget_coef = 0.1;
  EXPECT_NEAR(compute_reward(5.0, 2.0, 1.0, cfg), 3.6, 1e-12);
  EXPECT_EQ(compute_reward(0.0, 0.0, 0.0, cfg), 0.0);
  EXPECT_EQ(compute_reward(5.0, -2.0, 1.0, cfg), compute_reward(5.0, 2.0, 1.0, cfg));
}

TEST(Gae, OneStep)
{
  std::vector<double> const r = {1.0};
  std::vector<double> const v = {0.0};
  auto const                g = compute_gae(r, v, 0.0, 0.95, 0.95);
  EXPECT_EQ(g.advantages, (std::vector<double>{1.0}));
  EXPECT_EQ(g.returns, (std::vector<double>{1.0}));
}

TEST(Gae, MyopicLimit)
{
  std::vector<double> const r = {1.0, -2.0, 0.5};
  std::vector<double> const v = {0.3, 0.1, -0.4};
  auto const                g = compute_gae(r, v, 7.0, 0.0, 0.9);
  for (std::size_t t = 0; t < r.size(); ++t)
  {
    EXPECT_DOUBLE_EQ(g.advantages[t], r[t] - v[t]);
  }
}

TEST(Gae, DiscountedTargets)
{
  std::vector<double> const r = {1.0, 1.0, 1.0};
  std::vector<double> const v = {0.0, 0.0, 0.0};
  auto const                g = compute_gae(r, v, 0.0, 0.95, 1.0);
  EXPECT_NEAR(g.returns[0], 2.8525, 1e-12);
  EXPECT_NEAR(g.returns[1], 1.95, 1e-12);
  EXPECT_NEAR(g.returns[2], 1.0, 1e-12);
}

TEST(Gae, LambdaOneEqualsBruteForceReturns)
{
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial)
  {
    std::size_t const   n = 1 + rng.Index(30);
    std::vector<double> r(n);
    for (auto &x : r)
    {
      x = rng.Uniform(-5.0, 5.0);
    }
    std::vector<double> const v(n, 0.0);
    double const              gamma = rng.Uniform();
    auto const                g     = compute_gae(r, v, 0.0, gamma, 1.0);
    for (std::size_t t = 0; t < n; ++t)
    {
      double expected = 0.0;
      double discount = 1.0;
      for (std::size_t k = t; k < n; ++k)
      {
        expected += discount * r[k];
        discount *= gamma;
      }
      ASSERT_NEAR(g.advantages[t], expected, 1e-10);
      ASSERT_NEAR(g.returns[t], expected, 1e-10);
    }
  }
}

TEST(ClipLoss, Examples)
{
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(ppo_clip_loss(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, cfg).policy, -1.0);
  EXPECT_NEAR(ppo_clip_loss(std::log(1.5), 0.0, 1.0, 0.0, 0.0, 0.0, cfg).policy, -1.2, 1e-12);
  EXPECT_NEAR(ppo_clip_loss(std::log(0.5), 0.0, -1.0, 0.0, 0.0, 0.0, cfg).policy, 0.8, 1e-12);
}

TEST(ClipLoss, TotalCombinesTheTerms)
{
  TrainConfig cfg;
  auto const  loss = ppo_clip_loss(0.1, 0.0, 0.5, 2.0, 1.0, 1.3, cfg);
  EXPECT_NEAR(loss.value, 0.5 * 1.0, 1e-12);
  EXPECT_NEAR(loss.total, loss.policy + loss.value - 0.02 * 1.3, 1e-12);
  EXPECT_NEAR(loss.ratio, std::exp(0.1), 1e-12);
}

TEST(ClipLoss, GradientMatchesFiniteDifferences)
{
  TrainConfig  cfg;
  Rng          rng(31);
  double const h = 1e-6;
  for (int trial = 0; trial < 500; ++trial)
  {
    double const old_lp = rng.Uniform(-2.0, 0.0);
    double const new_lp = old_lp + rng.Uniform(-0.5, 0.5);
    double const ratio  = std::exp(new_lp - old_lp);
    if (std::abs(ratio - 1.2) < 1e-4 || std::abs(ratio - 0.8) < 1e-4)
    {
      continue;
    }
    double const adv    = rng.Uniform(-2.0, 2.0);
    double const value  = rng.Uniform(-1.0, 1.0);
    double const target = rng.Uniform(-1.0, 1.0);
    double const ent    = rng.Uniform(0.0, 2.0);
    auto const   loss   = ppo_clip_loss(new_lp, old_lp, adv, value, target, ent, cfg);
    auto total = [&](double lp, double v, double e) {
      return ppo_clip_loss(lp, old_lp, adv, v, target, e, cfg).total;
    };
    EXPECT_NEAR(loss.d_log_prob, (total(new_lp + h, value, ent) - total(new_lp - h, value, ent)) / (2 * h), 1e-6);
    EXPECT_NEAR(loss.d_value, (total(new_lp, value + h, ent) - total(new_lp, value - h, ent)) / (2 * h), 1e-6);
    EXPECT_NEAR(loss.d_entropy, (total(new_lp, value, ent + h) - total(new_lp, value, ent - h)) / (2 * h), 1e-6);
  }
}

TEST(Baseline, TruthfulAndRandom)
{
  Rng rng(1);
  EXPECT_EQ(baseline_policy(BidderKind::Truthful, 0.7, rng), 0.7);
  EXPECT_EQ(baseline_policy(BidderKind::RandomBid, 0.0, rng), 0.0);
  Rng a(9);
  Rng b(9);
  for (int i = 0; i < 100; ++i)
  {
    double const bid = baseline_policy(BidderKind::RandomBid, 0.7, a);
    EXPECT_EQ(bid, baseline_policy(BidderKind::RandomBid, 0.7, b));
    EXPECT_GE(bid, 0.0);
    EXPECT_LE(bid, 1.4);
  }
}

TEST(Bidder, NamesRoundTrip)
{
  for (auto kind : {BidderKind::Learned, BidderKind::Truthful, BidderKind::RandomBid})
  {
    EXPECT_EQ(parse_bidder(to_string(kind)), kind);
  }
  EXPECT_THROW(parse_bidder("greedy"), std::invalid_argument);
}

TEST(AgentPool, PerAgentAndSharedShapes)
{
  TrainConfig cfg = small_train();
  Rng         rng(2);
  auto const  separate = make_agent_pool(5, 6, 12, cfg, rng);
  EXPECT_EQ(separate.actors.size(), 5u);
  EXPECT_EQ(separate.critics.size(), 5u);
  EXPECT_EQ(separate.actors[0].mean_net.input_size(), 6u);
  EXPECT_EQ(separate.critics[0].net.input_size(), 12u);
  EXPECT_EQ(separate.actors[0].log_std, 0.0);

  cfg.share_policy_params = true;
  auto const shared       = make_agent_pool(5, 6, 12, cfg, rng);
  EXPECT_EQ(shared.actors.size(), 1u);
  EXPECT_EQ(shared.actors[0].mean_net.input_size(), 11u);
  std::vector<double> const obs   = {1, 2, 3, 4, 5, 6};
  auto const                input = shared.PolicyInput(obs, 3);
  EXPECT_EQ(input, (std::vector<double>{1, 2, 3, 4, 5, 6, 0, 0, 0, 1, 0}));
}

TEST(Rollout, SinglePairSecondPriceReward)
{
  auto const    world_cfg = single_pair_world();
  simenv::World world(world_cfg);
  auto const    vehicle = world.vehicles()[0];
  auto const    seller  = world.sellers()[0];
  ASSERT_TRUE(vehicle.participates);
  ASSERT_GE(vehicle.valuation, seller.valuation);

  TrainConfig const  cfg;
  PolicySource const truthful{BidderKind::Truthful};
  auto const buffer = collect_rollout(world, truthful, MechanismKind::SecondPrice, cfg, 3);
  ASSERT_EQ(buffer.agents.size(), 1u);
  ASSERT_EQ(buffer.agents[0].size(), 1u);
  double const latency =
      seller.content_size / simenv::transmission_rate(seller, vehicle, world_cfg.channel);
  EXPECT_NEAR(buffer.agents[0][0].shared_reward, vehicle.valuation + seller.valuation - latency,
              1e-12);
  EXPECT_TRUE(buffer.agents[0][0].done);
}

TEST(Rollout, SinglePairMcAfeeDropsTheTrade)
{
  simenv::World      world(single_pair_world());
  TrainConfig const  cfg;
  PolicySource const truthful{BidderKind::Truthful};
  auto const buffer = collect_rollout(world, truthful, MechanismKind::McAfeeDouble, cfg, 3);
  EXPECT_EQ(buffer.slot_metrics[0].matches_count, 0u);
  EXPECT_EQ(buffer.agents[0][0].shared_reward, 0.0);
}

TEST(Rollout, NoParticipantsMeansZeroReward)
{
  auto world_cfg         = tiny_world();
  world_cfg.request_prob = 0.0;
  simenv::World      world(world_cfg);
  PolicySource const truthful{BidderKind::Truthful};
  auto const buffer = collect_rollout(world, truthful, MechanismKind::McAfeeDouble, TrainConfig{}, 1);
  EXPECT_EQ(buffer.ActiveTransitions(), 0u);
  for (double r : buffer.slot_rewards)
  {
    EXPECT_EQ(r, 0.0);
  }
}

TEST(Rollout, SharedRewardBidRangeAndDeterminism)
{
  auto const  world_cfg = simenv::WorldConfig{};
  TrainConfig cfg       = small_train();
  Rng         rng(5);
  auto        agents = make_agent_pool(20, 6, 12, cfg, rng);
  for (auto &actor : agents.actors)
  {
    actor.mean_net.values.back() = 0.3;  // shade away from truthful
  }
  PolicySource const source{BidderKind::Learned, &agents, true};

  simenv::World a(world_cfg);
  simenv::World b(world_cfg);
  auto const    first  = collect_rollout(a, source, MechanismKind::McAfeeDouble, cfg, 77);
  auto const    second = collect_rollout(b, source, MechanismKind::McAfeeDouble, cfg, 77);
  EXPECT_EQ(first, second);

  for (std::size_t t = 0; t < world_cfg.slots_per_episode; ++t)
  {
    for (std::size_t v = 0; v < 20; ++v)
    {
      auto const &step = first.agents[v][t];
      EXPECT_EQ(step.shared_reward, first.agents[0][t].shared_reward);
      EXPECT_EQ(step.shared_reward, first.slot_rewards[t]);
      if (step.active)
      {
        EXPECT_GE(step.bid, 0.0);
        EXPECT_LE(step.bid, 2.0 * step.valuation);
        EXPECT_TRUE(std::isfinite(step.log_prob));
      }
    }
  }
}

TEST(Rollout, FirstUpdateRatioIsOne)
{
  TrainConfig cfg = small_train();
  Rng         rng(6);
  auto        agents = make_agent_pool(20, 6, 12, cfg, rng);
  simenv::World      world(simenv::WorldConfig{});
  PolicySource const source{BidderKind::Learned, &agents, true};
  auto const buffer = collect_rollout(world, source, MechanismKind::McAfeeDouble, cfg, 8);
  for (std::size_t v = 0; v < 20; ++v)
  {
    for (auto const &step : buffer.agents[v])
    {
      if (!step.active)
      {
        continue;
      }
      auto const  &actor = agents.actors[agents.network_index(v)];
      double const lp    = policy_log_prob(actor, agents.PolicyInput(step.observation, v), step.raw_action);
      EXPECT_EQ(lp, step.log_prob);
      EXPECT_EQ(ppo_clip_loss(lp, step.log_prob, 1.0, 0.0, 0.0, 0.0, cfg).ratio, 1.0);
    }
  }
}

TEST(Finalize, AdvantagesAreNormalisedPerAgent)
{
  TrainConfig cfg = small_train();
  Rng         rng(7);
  auto        agents = make_agent_pool(20, 6, 12, cfg, rng);
  simenv::World      world(simenv::WorldConfig{});
  PolicySource const source{BidderKind::Learned, &agents, true};
  auto buffer = collect_rollout(world, source, MechanismKind::McAfeeDouble, cfg, 9);
  finalize_buffer(buffer, agents, cfg);
  for (std::size_t v = 0; v < 20; ++v)
  {
    double      sum   = 0.0;
    double      sq    = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < buffer.agents[v].size(); ++t)
    {
      if (buffer.agents[v][t].active)
      {
        sum += buffer.advantages[v][t];
        sq += buffer.advantages[v][t] * buffer.advantages[v][t];
        ++count;
      }
    }
    if (count > 1)
    {
      EXPECT_NEAR(sum / count, 0.0, 1e-9);
      EXPECT_NEAR(sq / count, 1.0, 1e-6);
    }
  }
}

TEST(Update, ZeroAdvantageLeavesThePolicyUnchanged)
{
  TrainConfig cfg  = small_train();
  cfg.entropy_coef = 0.0;
  Rng  rng(10);
  auto agents = make_agent_pool(20, 6, 12, cfg, rng);
  simenv::World      world(simenv::WorldConfig{});
  PolicySource const source{BidderKind::Learned, &agents, true};
  auto buffer = collect_rollout(world, source, MechanismKind::McAfeeDouble, cfg, 11);
  finalize_buffer(buffer, agents, cfg);
  for (auto &row : buffer.advantages)
  {
    std::fill(row.begin(), row.end(), 0.0);
  }
  auto const before = agents;
  ppo_update(agents, buffer, cfg, rng);
  for (std::size_t i = 0; i < agents.actors.size(); ++i)
  {
    EXPECT_EQ(agents.actors[i].mean_net, before.actors[i].mean_net);
    EXPECT_EQ(agents.actors[i].log_std, before.actors[i].log_std);
    EXPECT_NE(agents.critics[i].net, before.critics[i].net);
  }
}

TEST(Update, MinibatchGradientMatchesFiniteDifferences)
{
  TrainConfig cfg = small_train();
  Rng         rng(12);
  double const h = 1e-6;
  for (int trial = 0; trial < 5; ++trial)
  {
    Actor actor;
    actor.mean_net = neural::init_mlp({6, 8, 8, 1}, rng, 1.0, 1.0);
    actor.log_std  = rng.Uniform(-0.5, 0.5);
    Critic critic;
    critic.net = neural::init_mlp({12, 8, 8, 1}, rng);

    std::vector<TrainingSample> samples(16);
    for (auto &s : samples)
    {
      s.policy_input.resize(6);
      s.critic_input.resize(12);
      for (auto &x : s.policy_input)
      {
        x = rng.Uniform(-1.0, 1.0);
      }
      for (auto &x : s.critic_input)
      {
        x = rng.Uniform(-1.0, 1.0);
      }
      s.raw_action    = rng.Uniform(-1.0, 1.0);
      s.log_prob_old  = policy_log_prob(actor, s.policy_input, s.raw_action) + rng.Uniform(-0.3, 0.3);
      s.advantage     = rng.Uniform(-1.0, 1.0);
      s.return_target = rng.Uniform(-1.0, 1.0);
      s.active        = rng.Uniform() < 0.8;
    }

    auto const loss = minibatch_loss(actor, critic, samples, cfg);
    auto check = [&](double analytic, auto &&perturb) {
      Actor  a_plus = actor, a_minus = actor;
      Critic c_plus = critic, c_minus = critic;
      perturb(a_plus, c_plus, h);
      perturb(a_minus, c_minus, -h);
      double const numeric = (minibatch_loss(a_plus, c_plus, samples, cfg).total -
                              minibatch_loss(a_minus, c_minus, samples, cfg).total) /
                             (2 * h);
      double const scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      EXPECT_LT(std::abs(analytic - numeric) / scale, 1e-3) << analytic << " vs " << numeric;
    };
    for (std::size_t i = 0; i < actor.mean_net.values.size(); ++i)
    {
      check(loss.actor_grad[i], [i](Actor &a, Critic &, double d) { a.mean_net.values[i] += d; });
    }
    for (std::size_t i = 0; i < critic.net.values.size(); ++i)
    {
      check(loss.critic_grad[i], [i](Actor &, Critic &c, double d) { c.net.values[i] += d; });
    }
    check(loss.log_std_grad, [](Actor &a, Critic &, double d) { a.log_std += d; });
  }
}

TEST(Evaluate, ZeroEpisodesIsEmpty)
{
  PolicySource const truthful{BidderKind::Truthful};
  auto const agg = evaluate(truthful, simenv::WorldConfig{}, MechanismKind::McAfeeDouble,
                            TrainConfig{}, 0, 1);
  EXPECT_TRUE(agg.empty());
}

TEST(Evaluate, IsDeterministic)
{
  PolicySource const truthful{BidderKind::Truthful};
  auto const a = evaluate(truthful, tiny_world(), MechanismKind::McAfeeDouble, TrainConfig{}, 3, 4);
  auto const b = evaluate(truthful, tiny_world(), MechanismKind::McAfeeDouble, TrainConfig{}, 3, 4);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.episodes, 3u);
  EXPECT_GE(a.reward_std, 0.0);
}

TEST(Train, ZeroEpochsWritesOnlyTheInitialRow)
{
  TrainConfig cfg = small_train();
  cfg.epochs      = 0;
  auto const result = train(cfg, tiny_world(), MechanismKind::McAfeeDouble, 1);
  ASSERT_EQ(result.log.size(), 1u);
  EXPECT_EQ(result.log[0].epoch, 0u);
}

TEST(Train, SameSeedSameLog)
{
  TrainConfig cfg = small_train();
  cfg.epochs      = 3;
  auto const a    = train(cfg, tiny_world(), MechanismKind::McAfeeDouble, 5);
  auto const b    = train(cfg, tiny_world(), MechanismKind::McAfeeDouble, 5);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.agents, b.agents);
}

TEST(Train, TinyWorldDoesNotRegress)
{
  TrainConfig cfg      = TrainConfig{};
  cfg.checkpoint_every = 0;
  auto const result    = train(cfg, tiny_world(), MechanismKind::McAfeeDouble, 2);
  ASSERT_EQ(result.log.size(), 51u);
  double initial = 0.0;
  double final   = 0.0;
  for (std::size_t i = 0; i < 10; ++i)
  {
    initial += result.log[i].sampled_reward / 10.0;
    final += result.log[result.log.size() - 10 + i].sampled_reward / 10.0;
  }
  EXPECT_GE(final, initial);
}

TEST(Train, LogHeader)
{
  std::ostringstream          out;
  std::vector<TrainingLogRow> rows = {{0, 1.5, 1.25, 2.0, 0.25, 0.01, 0.0, 0.0, 0.0}};
  write_training_log(out, rows);
  EXPECT_EQ(out.str(),
            "epoch,mean_reward,sampled_reward,mean_sw,mean_budget,mean_latency,policy_loss,"
            "value_loss,entropy\n"
            "0,1.5,1.25,2,0.25,0.01,0,0,0\n");
}

}  // namespace
