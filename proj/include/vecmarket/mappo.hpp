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

#include "vecmarket/market.hpp"
#include "vecmarket/neural.hpp"
#include "vecmarket/rng.hpp"
#include "vecmarket/simenv.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vecmarket {
namespace mappo {

using market::MechanismKind;
using simenv::World;

struct TrainConfig
{
  double gamma          = 0.95;
  double gae_lambda     = 0.95;
  double clip           = 0.2;
  double entropy_coef   = 0.02;
  double value_coef     = 0.5;
  double budget_coef    = 0.01;
  double latency_weight = 1.0;
  double learning_rate  = 3e-4;

  std::size_t epochs                = 50;
  std::size_t minibatch_size        = 512;
  std::size_t ppo_updates_per_batch = 5;
  std::size_t episodes_per_batch    = 16;
  std::size_t eval_episodes         = 2;
  std::size_t checkpoint_every      = 10;  // 0 disables periodic checkpoints

  bool                     share_policy_params = false;
  std::vector<std::size_t> hidden_sizes        = {64, 64};

  bool operator==(TrainConfig const &) const = default;
};

/// Throws simenv::InvalidConfig naming the first offending field.
void validate(TrainConfig const &config);

// --- POMDP view ------------------------------------------------------------

/// Per-market participant counts / V, last price / price scale, candidate
/// rate / rate_max. Length rsu_count + 2.
std::vector<double> build_observation(World const &world, std::size_t agent);

/// Critic input: counts / V, per-market last prices / price scale, mean
/// candidate rate per market / rate_max. Length 3 * rsu_count.
std::vector<double> build_global_state(World const &world);

/// bid = valuation * (1 + tanh(z)), so z = 0 bids truthfully.
double action_to_bid(double raw_action, double valuation);

/// Shared team reward SW - alpha * beta^2 - w_L * L.
double compute_reward(double social_welfare, double budget, double latency,
                      TrainConfig const &config);

struct GaeResult
{
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalised advantage estimation over one trajectory that ends in a
/// state valued at bootstrap_value (0 for a terminal state).
GaeResult compute_gae(std::span<double const> rewards, std::span<double const> values,
                      double bootstrap_value, double gamma, double lambda);

struct ClipLoss
{
  double total        = 0.0;
  double policy       = 0.0;  // -min(r A, clip(r) A)
  double value        = 0.0;  // value_coef (V - target)^2
  double entropy      = 0.0;
  double ratio        = 1.0;
  double d_log_prob   = 0.0;  // d total / d log_prob_new
  double d_value      = 0.0;  // d total / d value_new
  double d_entropy    = 0.0;  // d total / d entropy
};

ClipLoss ppo_clip_loss(double log_prob_new, double log_prob_old, double advantage,
                       double value_new, double return_target, double entropy,
                       TrainConfig const &config);

// --- agents ----------------------------------------------------------------

enum class BidderKind
{
  Learned,
  Truthful,
  RandomBid,
};

/// CLI spelling: "learned", "truthful", "random".
std::string_view to_string(BidderKind kind);
BidderKind       parse_bidder(std::string_view name);

/// Non-learning bidders: truthful or uniform on [0, 2 valuation].
double baseline_policy(BidderKind kind, double valuation, Rng &rng);

/// Gaussian policy over the raw action: an MLP for the mean plus a
/// state-independent log standard deviation.
struct Actor
{
  neural::MlpParams mean_net;
  double            log_std = 0.0;
  neural::AdamState net_adam;
  neural::AdamState log_std_adam;

  bool operator==(Actor const &) const = default;
};

struct Critic
{
  neural::MlpParams net;
  neural::AdamState adam;

  bool operator==(Critic const &) const = default;
};

/// Buyer agents' networks. Without sharing, agent v owns actors[v] and
/// critics[v]; with sharing there is one of each and the policy input carries
/// a one-hot agent id.
struct AgentPool
{
  std::size_t         agent_count = 0;
  bool                shared      = false;
  std::vector<Actor>  actors;
  std::vector<Critic> critics;

  bool operator==(AgentPool const &) const = default;

  std::size_t network_index(std::size_t agent) const
  {
    return shared ? 0 : agent;
  }
  std::vector<double> PolicyInput(std::span<double const> observation, std::size_t agent) const;
  double              ActionMean(std::size_t agent, std::span<double const> observation) const;
  double              Value(std::size_t agent, std::span<double const> global_state) const;
};

AgentPool make_agent_pool(std::size_t agent_count, std::size_t observation_size,
                          std::size_t state_size, TrainConfig const &config, Rng &rng);

/// Where bids come from during a rollout.
struct PolicySource
{
  BidderKind       kind       = BidderKind::Truthful;
  AgentPool const *agents     = nullptr;  // required for Learned
  bool             stochastic = true;     // Learned only: sample, or act on the mean
};

struct Transition
{
  std::size_t         agent_id = 0;
  std::vector<double> observation;
  std::vector<double> global_state;
  double              raw_action     = 0.0;
  double              bid            = 0.0;
  double              valuation      = 0.0;
  double              log_prob       = 0.0;
  double              shared_reward  = 0.0;
  double              value_estimate = 0.0;
  bool                done           = false;
  bool                active         = false;  // buyer was in a market pool this slot

  bool operator==(Transition const &) const = default;
};

struct RolloutBuffer
{
  std::vector<std::vector<Transition>> agents;  // agents[v][step]
  std::vector<std::vector<double>>     advantages;
  std::vector<std::vector<double>>     returns;
  std::vector<simenv::SlotMetrics>     slot_metrics;
  std::vector<double>                  slot_rewards;
  std::size_t                          episodes = 0;

  void Append(RolloutBuffer &&other);
  std::size_t ActiveTransitions() const;

  bool operator==(RolloutBuffer const &) const = default;
};

using TradeObserver =
    std::function<void(std::size_t slot, std::span<market::ClearingOutcome const> outcomes)>;

/// Runs one episode from the world's current (freshly reset) state. Sellers
/// ask truthfully; buyers bid through the policy source.
RolloutBuffer collect_rollout(World &world, PolicySource const &source, MechanismKind mechanism,
                              TrainConfig const &config, std::uint64_t seed,
                              TradeObserver const &observer = {});

/// Fills advantages (normalised per network over active steps) and return targets.
void finalize_buffer(RolloutBuffer &buffer, AgentPool const &agents, TrainConfig const &config);

/// One optimisation sample; active == false contributes to the value loss only.
struct TrainingSample
{
  std::vector<double> policy_input;
  std::vector<double> critic_input;
  double              raw_action    = 0.0;
  double              log_prob_old  = 0.0;
  double              advantage     = 0.0;
  double              return_target = 0.0;
  bool                active        = true;
};

struct MinibatchLoss
{
  double              total   = 0.0;
  double              policy  = 0.0;
  double              value   = 0.0;
  double              entropy = 0.0;
  std::vector<double> actor_grad;
  double              log_std_grad = 0.0;
  std::vector<double> critic_grad;
};

/// Mean clip loss over a minibatch and its exact gradients.
MinibatchLoss minibatch_loss(Actor const &actor, Critic const &critic,
                             std::span<TrainingSample const> samples, TrainConfig const &config);

double policy_log_prob(Actor const &actor, std::span<double const> policy_input, double raw_action);

struct UpdateStats
{
  double policy_loss = 0.0;
  double value_loss  = 0.0;
  double entropy     = 0.0;
};

UpdateStats ppo_update(AgentPool &agents, RolloutBuffer const &buffer, TrainConfig const &config,
                       Rng &rng);

// --- evaluation & training --------------------------------------------------

struct Aggregate
{
  std::size_t episodes     = 0;
  double      reward_mean  = 0.0;
  double      reward_std   = 0.0;
  double      sw_mean      = 0.0;
  double      sw_std       = 0.0;
  double      budget_mean  = 0.0;
  double      budget_std   = 0.0;
  double      latency_mean = 0.0;
  double      latency_std  = 0.0;

  bool empty() const
  {
    return episodes == 0;
  }
  bool operator==(Aggregate const &) const = default;
};

/// Runs frozen policies (Learned acts on its mean) for the given episodes.
/// Episode metrics are per-slot averages; mean and population std are taken
/// across episodes.
Aggregate evaluate(PolicySource const &source, simenv::WorldConfig const &world_config,
                   MechanismKind mechanism, TrainConfig const &config, std::size_t episodes,
                   std::uint64_t seed, TradeObserver const &observer = {});

/// evaluate() with Learned bidders sampling their actions as during training.
Aggregate evaluate_sampled(PolicySource const &source, simenv::WorldConfig const &world_config,
                           MechanismKind mechanism, TrainConfig const &config,
                           std::size_t episodes, std::uint64_t seed);

struct TrainingLogRow
{
  std::size_t epoch          = 0;
  double      mean_reward    = 0.0;  // frozen policy acting on its mean
  double      sampled_reward = 0.0;  // same episodes, actions sampled from the policy
  double      mean_sw        = 0.0;
  double      mean_budget    = 0.0;
  double      mean_latency   = 0.0;
  double      policy_loss    = 0.0;
  double      value_loss     = 0.0;
  double      entropy        = 0.0;

  bool operator==(TrainingLogRow const &) const = default;
};

struct TrainingResult
{
  std::vector<TrainingLogRow> log;
  AgentPool                   agents;
};

class TrainingAborted : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Seed of the fixed evaluation episodes scored in each training log row.
std::uint64_t training_eval_seed(std::uint64_t seed);

/// Alternates rollout collection and PPO updates. Row 0 scores the initial
/// policy, row e the policy after e updates; scores come from evaluate() and
/// evaluate_sampled() on training_eval_seed(seed). With a non-empty out_dir,
/// writes training_log.csv and checkpoints there.
TrainingResult train(TrainConfig const &config, simenv::WorldConfig const &world_config,
                     MechanismKind mechanism, std::uint64_t seed,
                     std::filesystem::path const &out_dir = {});

void write_training_log(std::ostream &out, std::span<TrainingLogRow const> rows);

}  // namespace mappo
}  // namespace vecmarket
