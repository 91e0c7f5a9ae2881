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
#include "vecmarket/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vecmarket {
namespace simenv {

using market::ClearingOutcome;
using market::Match;
using market::MechanismKind;

struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  bool operator==(Vec2 const &) const = default;
};

double distance(Vec2 a, Vec2 b);

class UncoveredPosition : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class ZeroRate : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class MalformedFile : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a slot violates one-market-per-vehicle or one-trade-per-participant.
class ConstraintViolation : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

class InvalidConfig : public std::invalid_argument
{
public:
  InvalidConfig(std::string field, std::string const &message)
    : std::invalid_argument(field + ": " + message)
    , field_(std::move(field))
  {}

  std::string const &field() const
  {
    return field_;
  }

private:
  std::string field_;
};

enum class WelfareMode
{
  Sum,    // sum of matched buyer and seller valuations
  Gains,  // sum of (buyer valuation - seller valuation)
};

enum class ValuationLog
{
  Natural,
  Log10,
};

struct ChannelParams
{
  double bandwidth          = 1e6;  // Hz
  double reference_distance = 1.0;  // m
  double path_loss_exponent = 2.5;
  double noise_power        = 1e-9;  // W

  bool operator==(ChannelParams const &) const = default;
};

struct ContentProfile
{
  enum class Kind
  {
    Synthetic,
    FileBacked,
  };

  Kind        kind   = Kind::Synthetic;
  double      median = 4000.0;  // bits
  double      sigma  = 0.5;     // log-space standard deviation
  std::string path;

  bool operator==(ContentProfile const &) const = default;
};

struct WorldConfig
{
  double        area_side         = 1000.0;
  std::size_t   rsu_count         = 4;
  double        rsu_coverage      = 500.0;
  std::size_t   vehicle_count     = 20;
  double        mean_speed        = 25.0;
  double        slot_duration     = 1.0;
  std::size_t   slots_per_episode = 100;
  std::uint64_t rng_seed          = 1;

  std::size_t    vms_per_rsu     = 5;
  double         request_prob    = 0.5;
  double         rate_max        = 4e7;  // bits/s, observation normaliser
  ChannelParams  channel;
  ContentProfile content;
  WelfareMode    welfare       = WelfareMode::Sum;
  ValuationLog   valuation_log = ValuationLog::Natural;

  bool operator==(WorldConfig const &) const = default;
};

/// Throws InvalidConfig naming the first offending field.
void validate(WorldConfig const &config);

struct SellerState
{
  market::ParticipantId seller_id         = 0;
  std::size_t           rsu_id            = 0;
  std::size_t           model_id          = 0;
  Vec2                  position;           // host RSU location
  double                tx_power          = 0.0;  // W
  double                compute_cost      = 0.0;
  double                content_size      = 0.0;  // bits
  double                storage_cost      = 0.0;
  double                valuation         = 0.0;
  std::size_t           capacity_per_slot = 1;
};

struct VehicleState
{
  market::ParticipantId vehicle_id = 0;
  Vec2                  position;
  Vec2                  velocity;
  std::size_t           home_market    = 0;
  bool                  participates   = false;
  double                requested_size = 0.0;  // bits
  double                valuation      = 0.0;
};

struct SlotMetrics
{
  double      social_welfare = 0.0;
  double      total_latency  = 0.0;
  double      global_budget  = 0.0;
  std::size_t matches_count  = 0;

  bool operator==(SlotMetrics const &) const = default;
};

/// RSU centres laid out on a near-square grid of equal cells.
std::vector<Vec2> rsu_layout(WorldConfig const &config);

void step_mobility(std::span<VehicleState> vehicles, WorldConfig const &config, Rng &rng);

/// Nearest RSU within coverage, lowest id on ties.
std::size_t assign_market(Vec2 position, std::span<Vec2 const> rsus, double coverage);

double transmission_rate(double tx_power, double distance_m, ChannelParams const &channel);
double transmission_rate(SellerState const &seller, VehicleState const &vehicle,
                         ChannelParams const &channel);

double buyer_valuation(double requested_size, ValuationLog base = ValuationLog::Natural);
double seller_valuation(double tx_power);

/// Draws content sizes from a synthetic log-normal or from a one-column CSV.
class ContentSampler
{
public:
  explicit ContentSampler(ContentProfile profile);

  double Sample(Rng &rng) const;

  ContentProfile const &profile() const
  {
    return profile_;
  }

private:
  ContentProfile      profile_;
  std::vector<double> samples_;
};

double sample_content_size(ContentSampler const &sampler, Rng &rng);

/// buyer_valuations and seller_valuations are indexed by participant id.
double social_welfare(std::span<Match const> matches, std::span<double const> buyer_valuations,
                      std::span<double const> seller_valuations,
                      WelfareMode mode = WelfareMode::Sum);

/// Sum of content_size / rate over matched in-market pairs; sellers and
/// vehicles are indexed by id. Throws ZeroRate on a matched pair with R = 0.
double total_latency(std::span<Match const> matches, std::span<SellerState const> sellers,
                     std::span<VehicleState const> vehicles, ChannelParams const &channel);

struct SlotResult
{
  std::vector<ClearingOutcome> outcomes;  // one per RSU
  SlotMetrics                  metrics;
};

/// The simulated road network: RSUs, their VM sellers, and the vehicles.
///
/// A slot runs in two halves. After Reset() or ClearSlot() the world exposes
/// the current slot's participants so agents can observe and bid; ClearSlot()
/// then runs every RSU market, records metrics, settles served requests and
/// advances mobility and demand into the next slot.
class World
{
public:
  explicit World(WorldConfig config);

  void Reset(std::uint64_t seed);

  /// bids[v] is vehicle v's bid; entries of non-participating vehicles are ignored.
  SlotResult ClearSlot(std::span<double const> bids, MechanismKind mechanism,
                       std::uint64_t mechanism_seed);

  bool done() const
  {
    return slot_ >= config_.slots_per_episode;
  }

  std::size_t slot() const
  {
    return slot_;
  }

  WorldConfig const &config() const
  {
    return config_;
  }
  std::vector<Vec2> const &rsus() const
  {
    return rsus_;
  }
  std::vector<SellerState> const &sellers() const
  {
    return sellers_;
  }
  std::vector<VehicleState> const &vehicles() const
  {
    return vehicles_;
  }

  /// |V_n ∪ M_n| per market: participating buyers plus sellers.
  std::vector<std::size_t> MarketCounts() const;

  /// Mean buyer payment of the previous slot with trades (0 before any trade).
  double last_price() const
  {
    return last_price_;
  }
  std::vector<double> const &market_last_prices() const
  {
    return market_last_prices_;
  }
  /// Running maximum transaction price, floored at 1.
  double price_scale() const
  {
    return price_scale_;
  }

  /// Rate from the cheapest-ask seller of the vehicle's home market (0 if none).
  double CandidateRate(std::size_t vehicle) const;

  /// Mean CandidateRate over participating buyers, per market.
  std::vector<double> MeanMarketRates() const;

  std::size_t constraint_checks() const
  {
    return constraint_checks_;
  }

private:
  void DrawRequests();
  void RefreshSellers();
  void AssignMarkets();
  void CheckConstraints(std::span<ClearingOutcome const> outcomes) const;

  WorldConfig               config_;
  ContentSampler            content_;
  std::vector<Vec2>         rsus_;
  std::vector<SellerState>  sellers_;
  std::vector<VehicleState> vehicles_;
  Rng                       rng_;
  std::size_t               slot_        = 0;
  double                    last_price_  = 0.0;
  double                    price_scale_ = 1.0;
  std::vector<double>       market_last_prices_;
  mutable std::size_t       constraint_checks_ = 0;
};

/// Constraint checks run so far by every World in this process.
std::size_t total_constraint_checks();

}  // namespace simenv
}  // namespace vecmarket
