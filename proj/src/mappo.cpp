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

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vecmarket {
namespace mappo {
namespace {

constexpr std::uint64_t kBidStream       = 0xB1D;
constexpr std::uint64_t kMechanismStream = 0x10000;

void require_unit_interval(double value, char const *field)
{
  if (!(value >= 0.0 && value <= 1.0))
  {
    throw simenv::InvalidConfig(field, fmt::format("must lie in [0, 1], got {}", value));
  }
}

void require_nonnegative(double value, char const *field)
{
  if (!(value >= 0.0) || !std::isfinite(value))
  {
    throw simenv::InvalidConfig(field, fmt::format("must be finite and >= 0, got {}", value));
  }
}

}  // namespace

void validate(TrainConfig const &config)
{
  require_unit_interval(config.gamma, "gamma");
  require_unit_interval(config.gae_lambda, "gae_lambda");
  if (!(config.clip > 0.0) || !std::isfinite(config.clip))
  {
    throw simenv::InvalidConfig("clip", "must be positive");
  }
  require_nonnegative(config.entropy_coef, "entropy_coef");
  require_nonnegative(config.value_coef, "value_coef");
  require_nonnegative(config.budget_coef, "budget_coef");
  require_nonnegative(config.latency_weight, "latency_weight");
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate))
  {
    throw simenv::InvalidConfig("learning_rate", "must be positive");
  }
  if (config.minibatch_size == 0)
  {
    throw simenv::InvalidConfig("minibatch_size", "must be positive");
  }
  if (config.episodes_per_batch == 0)
  {
    throw simenv::InvalidConfig("episodes_per_batch", "must be positive");
  }
  if (config.eval_episodes == 0)
  {
    throw simenv::InvalidConfig("eval_episodes", "must be positive");
  }
  if (std::any_of(config.hidden_sizes.begin(), config.hidden_sizes.end(),
                  [](std::size_t width) { return width == 0; }))
  {
    throw simenv::InvalidConfig("hidden_sizes", "layer widths must be positive");
  }
}

std::vector<double> build_observation(World const &world, std::size_t agent)
{
  auto const  &config = world.config();
  auto const   counts = world.MarketCounts();
  double const vehicles = static_cast<double>(config.vehicle_count);

  std::vector<double> observation;
  observation.reserve(counts.size() + 2);
  for (auto const count : counts)
  {
    observation.push_back(static_cast<double>(count) / vehicles);
  }
  observation.push_back(world.last_price() / world.price_scale());
  observation.push_back(world.CandidateRate(agent) / config.rate_max);
  return observation;
}

std::vector<double> build_global_state(World const &world)
{
  auto const  &config   = world.config();
  double const vehicles = static_cast<double>(config.vehicle_count);

  std::vector<double> state;
  state.reserve(3 * config.rsu_count);
  for (auto const count : world.MarketCounts())
  {
    state.push_back(static_cast<double>(count) / vehicles);
  }
  for (auto const price : world.market_last_prices())
  {
    state.push_back(price / world.price_scale());
  }
  for (auto const rate : world.MeanMarketRates())
  {
    state.push_back(rate / config.rate_max);
  }
  return state;
}

double action_to_bid(double raw_action, double valuation)
{
  return valuation * (1.0 + std::tanh(raw_action));
}

double compute_reward(double social_welfare, double budget, double latency,
                      TrainConfig const &config)
{
  return social_welfare - config.budget_coef * budget * budget - config.latency_weight * latency;
}

GaeResult compute_gae(std::span<double const> rewards, std::span<double const> values,
                      double bootstrap_value, double gamma, double lambda)
{
  if (rewards.size() != values.size())
  {
    throw std::invalid_argument("compute_gae: rewards and values differ in length");
  }
  GaeResult result;
  result.advantages.resize(rewards.size());
  result.returns.resize(rewards.size());

  double running    = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t t = rewards.size(); t-- > 0;)
  {
    double const delta   = rewards[t] + gamma * next_value - values[t];
    running              = delta + gamma * lambda * running;
    result.advantages[t] = running;
    result.returns[t]    = running + values[t];
    next_value           = values[t];
  }
  return result;
}

ClipLoss ppo_clip_loss(double log_prob_new, double log_prob_old, double advantage,
                       double value_new, double return_target, double entropy,
                       TrainConfig const &config)
{
  ClipLoss loss;
  loss.ratio               = std::exp(log_prob_new - log_prob_old);
  double const unclipped   = loss.ratio * advantage;
  double const clipped     = std::clamp(loss.ratio, 1.0 - config.clip, 1.0 + config.clip) * advantage;
  bool const   take_raw    = unclipped <= clipped;
  loss.policy              = -(take_raw ? unclipped : clipped);
  loss.d_log_prob          = take_raw ? -advantage * loss.ratio : 0.0;

  double const error = value_new - return_target;
  loss.value         = config.value_coef * error * error;
  loss.d_value       = 2.0 * config.value_coef * error;

  loss.entropy   = entropy;
  loss.d_entropy = -config.entropy_coef;
  loss.total     = loss.policy + loss.value - config.entropy_coef * entropy;
  return loss;
}

std::string_view to_string(BidderKind kind)
{
  switch (kind)
  {
  case BidderKind::Learned:
    return "learned";
  case BidderKind::Truthful:
    return "truthful";
  case BidderKind::RandomBid:
    return "random";
  }
  return "unknown";
}

BidderKind parse_bidder(std::string_view name)
{
  if (name == "learned")
  {
    return BidderKind::Learned;
  }
  if (name == "truthful")
  {
    return BidderKind::Truthful;
  }
  if (name == "random")
  {
    return BidderKind::RandomBid;
  }
  throw std::invalid_argument(fmt::format("unknown bidder '{}'", name));
}

double baseline_policy(BidderKind kind, double valuation, Rng &rng)
{
  switch (kind)
  {
  case BidderKind::Truthful:
    return valuation;
  case BidderKind::RandomBid:
    return rng.Uniform(0.0, 2.0 * valuation);
  case BidderKind::Learned:
    break;
  }
  throw std::invalid_argument("baseline_policy: learned bidders need a policy network");
}

// --- agents ----------------------------------------------------------------

std::vector<double> AgentPool::PolicyInput(std::span<double const> observation,
                                           std::size_t agent) const
{
  std::vector<double> input(observation.begin(), observation.end());
  if (shared)
  {
    input.resize(observation.size() + agent_count, 0.0);
    input[observation.size() + agent] = 1.0;
  }
  return input;
}

double AgentPool::ActionMean(std::size_t agent, std::span<double const> observation) const
{
  auto const input = PolicyInput(observation, agent);
  return neural::forward(actors[network_index(agent)].mean_net, input)[0];
}

double AgentPool::Value(std::size_t agent, std::span<double const> global_state) const
{
  return neural::forward(critics[network_index(agent)].net, global_state)[0];
}

AgentPool make_agent_pool(std::size_t agent_count, std::size_t observation_size,
                          std::size_t state_size, TrainConfig const &config, Rng &rng)
{
  AgentPool pool;
  pool.agent_count = agent_count;
  pool.shared      = config.share_policy_params;

  std::size_t const networks   = pool.shared ? 1 : agent_count;
  std::size_t const input_size = observation_size + (pool.shared ? agent_count : 0);

  auto layers = [&](std::size_t input) {
    std::vector<std::size_t> sizes{input};
    sizes.insert(sizes.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
    sizes.push_back(1);
    return sizes;
  };

  for (std::size_t i = 0; i < networks; ++i)
  {
    Actor actor;
    actor.mean_net     = neural::init_mlp(layers(input_size), rng, 1.0, 0.01);
    actor.log_std      = 0.0;
    actor.net_adam     = neural::make_adam(actor.mean_net.values.size(), config.learning_rate);
    actor.log_std_adam = neural::make_adam(1, config.learning_rate);
    pool.actors.push_back(std::move(actor));

    Critic critic;
    critic.net  = neural::init_mlp(layers(state_size), rng, 1.0, 1.0);
    critic.adam = neural::make_adam(critic.net.values.size(), config.learning_rate);
    pool.critics.push_back(std::move(critic));
  }
  return pool;
}

// --- rollouts ----------------------------------------------------------------

void RolloutBuffer::Append(RolloutBuffer &&other)
{
  if (agents.empty())
  {
    *this = std::move(other);
    return;
  }
  if (other.agents.size() != agents.size())
  {
    throw std::invalid_argument("RolloutBuffer::Append: agent counts differ");
  }
  for (std::size_t v = 0; v < agents.size(); ++v)
  {
    agents[v].insert(agents[v].end(), std::make_move_iterator(other.agents[v].begin()),
                     std::make_move_iterator(other.agents[v].end()));
  }
  slot_metrics.insert(slot_metrics.end(), other.slot_metrics.begin(), other.slot_metrics.end());
  slot_rewards.insert(slot_rewards.end(), other.slot_rewards.begin(), other.slot_rewards.end());
  episodes += other.episodes;
  advantages.clear();
  returns.clear();
}

std::size_t RolloutBuffer::ActiveTransitions() const
{
  std::size_t count = 0;
  for (auto const &trajectory : agents)
  {
    count += static_cast<std::size_t>(std::count_if(
        trajectory.begin(), trajectory.end(), [](Transition const &t) { return t.active; }));
  }
  return count;
}

RolloutBuffer collect_rollout(World &world, PolicySource const &source, MechanismKind mechanism,
                              TrainConfig const &config, std::uint64_t seed,
                              TradeObserver const &observer)
{
  bool const learned = source.kind == BidderKind::Learned;
  if (learned && source.agents == nullptr)
  {
    throw std::invalid_argument("collect_rollout: learned bidders need an agent pool");
  }
  std::size_t const agent_count = world.vehicles().size();
  if (learned && source.agents->agent_count != agent_count)
  {
    throw std::invalid_argument(fmt::format("collect_rollout: pool has {} agents, world has {}",
                                            source.agents->agent_count, agent_count));
  }

  RolloutBuffer buffer;
  buffer.agents.resize(agent_count);
  buffer.episodes = 1;

  Rng                 bid_rng(mix_seed(seed, kBidStream));
  std::vector<double> bids(agent_count, 0.0);

  while (!world.done())
  {
    std::size_t const slot  = world.slot();
    auto const        state = build_global_state(world);

    for (std::size_t v = 0; v < agent_count; ++v)
    {
      auto const &vehicle = world.vehicles()[v];
      Transition  step;
      step.agent_id     = v;
      step.observation  = build_observation(world, v);
      step.global_state = state;
      step.active       = vehicle.participates;
      step.valuation    = vehicle.participates ? vehicle.valuation : 0.0;

      if (learned)
      {
        auto const &pool  = *source.agents;
        auto const  input = pool.PolicyInput(step.observation, v);
        auto const &actor = pool.actors[pool.network_index(v)];
        double const mean = neural::forward(actor.mean_net, input)[0];
        step.value_estimate = pool.Value(v, state);
        if (step.active)
        {
          double const std_dev = std::exp(neural::clamp_log_std(actor.log_std));
          step.raw_action      = source.stochastic ? mean + std_dev * bid_rng.Normal() : mean;
          double const ls      = actor.log_std;
          step.log_prob =
              neural::gaussian_logprob_entropy({&mean, 1}, {&ls, 1}, {&step.raw_action, 1})
                  .log_prob;
          step.bid = action_to_bid(step.raw_action, step.valuation);
        }
      }
      else if (step.active)
      {
        step.bid = baseline_policy(source.kind, step.valuation, bid_rng);
      }

      bids[v] = step.active ? step.bid : 0.0;
      buffer.agents[v].push_back(std::move(step));
    }

    auto const   result = world.ClearSlot(bids, mechanism, mix_seed(seed, kMechanismStream + slot));
    double const reward = compute_reward(result.metrics.social_welfare,
                                         result.metrics.global_budget,
                                         result.metrics.total_latency, config);
    bool const   done   = world.done();
    for (auto &trajectory : buffer.agents)
    {
      trajectory.back().shared_reward = reward;
      trajectory.back().done          = done;
    }
    buffer.slot_metrics.push_back(result.metrics);
    buffer.slot_rewards.push_back(reward);
    if (observer)
    {
      observer(slot, result.outcomes);
    }
  }
  return buffer;
}

void finalize_buffer(RolloutBuffer &buffer, AgentPool const &agents, TrainConfig const &config)
{
  buffer.advantages.assign(buffer.agents.size(), {});
  buffer.returns.assign(buffer.agents.size(), {});

  for (std::size_t v = 0; v < buffer.agents.size(); ++v)
  {
    auto const &trajectory = buffer.agents[v];
    auto       &advantages = buffer.advantages[v];
    auto       &returns    = buffer.returns[v];

    std::size_t start = 0;
    while (start < trajectory.size())
    {
      std::size_t end = start;
      while (end < trajectory.size() && !trajectory[end].done)
      {
        ++end;
      }
      end = std::min(end + 1, trajectory.size());

      std::vector<double> rewards;
      std::vector<double> values;
      for (std::size_t t = start; t < end; ++t)
      {
        rewards.push_back(trajectory[t].shared_reward);
        values.push_back(trajectory[t].value_estimate);
      }
      // an episode cut short of done would need the next state's value; rollouts always finish
      auto gae = compute_gae(rewards, values, 0.0, config.gamma, config.gae_lambda);
      advantages.insert(advantages.end(), gae.advantages.begin(), gae.advantages.end());
      returns.insert(returns.end(), gae.returns.begin(), gae.returns.end());
      start = end;
    }
  }

  // normalise over the active steps of each network's batch
  std::size_t const groups = agents.shared ? 1 : buffer.agents.size();
  for (std::size_t g = 0; g < groups; ++g)
  {
    std::vector<std::size_t> members;
    if (agents.shared)
    {
      members.resize(buffer.agents.size());
      std::iota(members.begin(), members.end(), std::size_t{0});
    }
    else
    {
      members.push_back(g);
    }

    double      sum   = 0.0;
    std::size_t count = 0;
    for (auto const v : members)
    {
      for (std::size_t t = 0; t < buffer.agents[v].size(); ++t)
      {
        if (buffer.agents[v][t].active)
        {
          sum += buffer.advantages[v][t];
          ++count;
        }
      }
    }
    if (count == 0)
    {
      continue;
    }
    double const mean = sum / static_cast<double>(count);
    double       sq   = 0.0;
    for (auto const v : members)
    {
      for (std::size_t t = 0; t < buffer.agents[v].size(); ++t)
      {
        if (buffer.agents[v][t].active)
        {
          double const d = buffer.advantages[v][t] - mean;
          sq += d * d;
        }
      }
    }
    double const std_dev = std::sqrt(sq / static_cast<double>(count));
    for (auto const v : members)
    {
      for (auto &a : buffer.advantages[v])
      {
        a = (a - mean) / (std_dev + 1e-8);
      }
    }
  }
}

// --- optimisation ------------------------------------------------------------

double policy_log_prob(Actor const &actor, std::span<double const> policy_input, double raw_action)
{
  double const mean = neural::forward(actor.mean_net, policy_input)[0];
  return neural::gaussian_logprob_entropy({&mean, 1}, {&actor.log_std, 1}, {&raw_action, 1})
      .log_prob;
}

MinibatchLoss minibatch_loss(Actor const &actor, Critic const &critic,
                             std::span<TrainingSample const> samples, TrainConfig const &config)
{
  MinibatchLoss loss;
  loss.actor_grad.assign(actor.mean_net.values.size(), 0.0);
  loss.critic_grad.assign(critic.net.values.size(), 0.0);
  if (samples.empty())
  {
    return loss;
  }

  auto const active = static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [](TrainingSample const &s) { return s.active; }));
  double const policy_scale = active == 0 ? 0.0 : 1.0 / static_cast<double>(active);
  double const value_scale  = 1.0 / static_cast<double>(samples.size());
  bool const   std_clamped  = actor.log_std < neural::kLogStdMin || actor.log_std > neural::kLogStdMax;

  for (auto const &sample : samples)
  {
    double const value = neural::forward(critic.net, sample.critic_input)[0];
    auto const   terms = ppo_clip_loss(0.0, 0.0, 0.0, value, sample.return_target, 0.0, config);
    loss.value += terms.value * value_scale;
    double const d_value = terms.d_value * value_scale;
    neural::accumulate_backward(critic.net, sample.critic_input, {&d_value, 1}, loss.critic_grad);

    if (!sample.active)
    {
      continue;
    }
    double const mean  = neural::forward(actor.mean_net, sample.policy_input)[0];
    auto const   stats = neural::gaussian_logprob_entropy({&mean, 1}, {&actor.log_std, 1},
                                                          {&sample.raw_action, 1});
    auto const   clip  = ppo_clip_loss(stats.log_prob, sample.log_prob_old, sample.advantage, 0.0,
                                       0.0, stats.entropy, config);
    loss.policy += clip.policy * policy_scale;
    loss.entropy += stats.entropy * policy_scale;

    double d_mean    = 0.0;
    double d_log_std = 0.0;
    neural::gaussian_logprob_grad({&mean, 1}, {&actor.log_std, 1}, {&sample.raw_action, 1},
                                  {&d_mean, 1}, {&d_log_std, 1});
    double const upstream = clip.d_log_prob * d_mean * policy_scale;
    neural::accumulate_backward(actor.mean_net, sample.policy_input, {&upstream, 1},
                                loss.actor_grad);
    loss.log_std_grad += clip.d_log_prob * d_log_std * policy_scale;
    if (!std_clamped)
    {
      loss.log_std_grad += clip.d_entropy * policy_scale;
    }
  }

  loss.total = loss.policy + loss.value - config.entropy_coef * loss.entropy;
  return loss;
}

UpdateStats ppo_update(AgentPool &agents, RolloutBuffer const &buffer, TrainConfig const &config,
                       Rng &rng)
{
  if (buffer.advantages.size() != buffer.agents.size())
  {
    throw std::invalid_argument("ppo_update: buffer has not been finalized");
  }

  UpdateStats stats;
  std::size_t minibatches = 0;

  std::size_t const groups = agents.shared ? 1 : agents.agent_count;
  for (std::size_t g = 0; g < groups; ++g)
  {
    std::vector<TrainingSample> samples;
    for (std::size_t v = 0; v < buffer.agents.size(); ++v)
    {
      if (agents.network_index(v) != g)
      {
        continue;
      }
      for (std::size_t t = 0; t < buffer.agents[v].size(); ++t)
      {
        auto const    &step = buffer.agents[v][t];
        TrainingSample sample;
        sample.policy_input  = agents.PolicyInput(step.observation, v);
        sample.critic_input  = step.global_state;
        sample.raw_action    = step.raw_action;
        sample.log_prob_old  = step.log_prob;
        sample.advantage     = buffer.advantages[v][t];
        sample.return_target = buffer.returns[v][t];
        sample.active        = step.active;
        samples.push_back(std::move(sample));
      }
    }

    auto &actor  = agents.actors[g];
    auto &critic = agents.critics[g];

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<TrainingSample> batch;
    for (std::size_t pass = 0; pass < config.ppo_updates_per_batch; ++pass)
    {
      for (std::size_t i = order.size(); i > 1; --i)
      {
        std::swap(order[i - 1], order[rng.Index(i)]);
      }
      for (std::size_t first = 0; first < order.size(); first += config.minibatch_size)
      {
        std::size_t const last = std::min(first + config.minibatch_size, order.size());
        batch.clear();
        for (std::size_t i = first; i < last; ++i)
        {
          batch.push_back(samples[order[i]]);
        }
        auto const loss = minibatch_loss(actor, critic, batch, config);
        if (!std::isfinite(loss.total))
        {
          throw TrainingAborted(fmt::format(
              "non-finite loss (policy {}, value {}, entropy {}) for network {}", loss.policy,
              loss.value, loss.entropy, g));
        }
        neural::adam_update(actor.mean_net.values, loss.actor_grad, actor.net_adam);
        neural::adam_update({&actor.log_std, 1}, {&loss.log_std_grad, 1}, actor.log_std_adam);
        neural::adam_update(critic.net.values, loss.critic_grad, critic.adam);

        stats.policy_loss += loss.policy;
        stats.value_loss += loss.value;
        stats.entropy += loss.entropy;
        ++minibatches;
      }
    }
  }

  if (minibatches > 0)
  {
    auto const n = static_cast<double>(minibatches);
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
  }
  return stats;
}

}  // namespace mappo
}  // namespace vecmarket
