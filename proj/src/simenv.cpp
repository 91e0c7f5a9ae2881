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

#include "vecmarket/simenv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

namespace vecmarket {
namespace simenv {
namespace {

void require_positive(double value, char const *field)
{
  if (!(value > 0.0) || !std::isfinite(value))
  {
    throw InvalidConfig(field, fmt::format("must be positive and finite, got {}", value));
  }
}

double wrap(double coordinate, double side)
{
  double wrapped = std::fmod(coordinate, side);
  if (wrapped < 0.0)
  {
    wrapped += side;
  }
  // fmod of a tiny negative value can round up to exactly side
  if (wrapped >= side)
  {
    wrapped = 0.0;
  }
  return wrapped;
}

std::string_view trim(std::string_view text)
{
  auto const first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos)
  {
    return {};
  }
  auto const last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

}  // namespace

double distance(Vec2 a, Vec2 b)
{
  return std::hypot(a.x - b.x, a.y - b.y);
}

std::vector<Vec2> rsu_layout(WorldConfig const &config)
{
  auto const cols = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(config.rsu_count))));
  std::size_t const rows   = (config.rsu_count + cols - 1) / cols;
  double const      cell_w = config.area_side / static_cast<double>(cols);
  double const      cell_h = config.area_side / static_cast<double>(rows);

  std::vector<Vec2> centres;
  centres.reserve(config.rsu_count);
  for (std::size_t i = 0; i < config.rsu_count; ++i)
  {
    double const col = static_cast<double>(i % cols);
    double const row = static_cast<double>(i / cols);
    centres.push_back({(col + 0.5) * cell_w, (row + 0.5) * cell_h});
  }
  return centres;
}

void validate(WorldConfig const &config)
{
  require_positive(config.area_side, "area_side");
  if (config.rsu_count == 0)
  {
    throw InvalidConfig("rsu_count", "must be positive");
  }
  require_positive(config.rsu_coverage, "rsu_coverage");
  if (config.vehicle_count == 0)
  {
    throw InvalidConfig("vehicle_count", "must be positive");
  }
  require_positive(config.mean_speed, "mean_speed");
  require_positive(config.slot_duration, "slot_duration");
  if (config.slots_per_episode == 0)
  {
    throw InvalidConfig("slots_per_episode", "must be positive");
  }
  if (config.vms_per_rsu == 0)
  {
    throw InvalidConfig("vms_per_rsu", "must be positive");
  }
  if (!(config.request_prob >= 0.0 && config.request_prob <= 1.0))
  {
    throw InvalidConfig("request_prob", "must lie in [0, 1]");
  }
  require_positive(config.rate_max, "rate_max");
  require_positive(config.channel.bandwidth, "channel.bandwidth");
  require_positive(config.channel.reference_distance, "channel.reference_distance");
  require_positive(config.channel.path_loss_exponent, "channel.path_loss_exponent");
  require_positive(config.channel.noise_power, "channel.noise_power");
  if (config.content.kind == ContentProfile::Kind::Synthetic)
  {
    require_positive(config.content.median, "content.median");
    if (!(config.content.sigma >= 0.0) || !std::isfinite(config.content.sigma))
    {
      throw InvalidConfig("content.sigma", "must be finite and >= 0");
    }
  }
  else if (config.content.path.empty())
  {
    throw InvalidConfig("content.path", "required for a file-backed profile");
  }

  // every point of the square must see at least one RSU
  auto const   rsus  = rsu_layout(config);
  int const    steps = 64;
  double const step  = config.area_side / steps;
  for (int i = 0; i <= steps; ++i)
  {
    for (int j = 0; j <= steps; ++j)
    {
      Vec2 const probe{i * step, j * step};
      double     nearest = std::numeric_limits<double>::infinity();
      for (auto const &rsu : rsus)
      {
        nearest = std::min(nearest, distance(probe, rsu));
      }
      if (nearest > config.rsu_coverage)
      {
        throw InvalidConfig("rsu_coverage",
                            fmt::format("point ({}, {}) is {} m from the nearest RSU", probe.x,
                                        probe.y, nearest));
      }
    }
  }
}

void step_mobility(std::span<VehicleState> vehicles, WorldConfig const &config, Rng &rng)
{
  for (auto &vehicle : vehicles)
  {
    vehicle.position.x = wrap(vehicle.position.x + vehicle.velocity.x * config.slot_duration,
                              config.area_side);
    vehicle.position.y = wrap(vehicle.position.y + vehicle.velocity.y * config.slot_duration,
                              config.area_side);

    double const speed = std::hypot(vehicle.velocity.x, vehicle.velocity.y);
    if (speed > 0.0)
    {
      double const resampled = config.mean_speed * rng.Uniform(0.8, 1.2);
      vehicle.velocity.x *= resampled / speed;
      vehicle.velocity.y *= resampled / speed;
    }
  }
}

std::size_t assign_market(Vec2 position, std::span<Vec2 const> rsus, double coverage)
{
  std::size_t best      = rsus.size();
  double      best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < rsus.size(); ++n)
  {
    double const d = distance(position, rsus[n]);
    if (d < best_dist)
    {
      best      = n;
      best_dist = d;
    }
  }
  if (best == rsus.size() || best_dist > coverage)
  {
    throw UncoveredPosition(
        fmt::format("position ({}, {}) is outside every RSU's coverage", position.x, position.y));
  }
  return best;
}

double transmission_rate(double tx_power, double distance_m, ChannelParams const &channel)
{
  double const d   = std::max(distance_m, 1.0);
  double const snr = tx_power * std::pow(channel.reference_distance / d,
                                         channel.path_loss_exponent) /
                     channel.noise_power;
  return channel.bandwidth * std::log2(1.0 + snr);
}

double transmission_rate(SellerState const &seller, VehicleState const &vehicle,
                         ChannelParams const &channel)
{
  return transmission_rate(seller.tx_power, distance(seller.position, vehicle.position), channel);
}

double buyer_valuation(double requested_size, ValuationLog base)
{
  double const ratio = requested_size / 1000.0;
  return base == ValuationLog::Natural ? std::log1p(ratio) : std::log10(1.0 + ratio);
}

double seller_valuation(double tx_power)
{
  return tx_power / 10.0;
}

ContentSampler::ContentSampler(ContentProfile profile)
  : profile_(std::move(profile))
{
  if (profile_.kind != ContentProfile::Kind::FileBacked)
  {
    return;
  }

  std::ifstream in(profile_.path);
  if (!in)
  {
    throw MalformedFile(fmt::format("cannot open content-size file '{}'", profile_.path));
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line))
  {
    ++line_no;
    auto const field = trim(line);
    if (field.empty())
    {
      continue;
    }
    double     value = 0.0;
    auto const res   = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || !std::isfinite(value) ||
        value < 0.0)
    {
      throw MalformedFile(
          fmt::format("{}:{}: expected a non-negative size, got '{}'", profile_.path, line_no, field));
    }
    samples_.push_back(value);
  }
  if (samples_.empty())
  {
    throw MalformedFile(fmt::format("content-size file '{}' has no rows", profile_.path));
  }
}

double ContentSampler::Sample(Rng &rng) const
{
  if (profile_.kind == ContentProfile::Kind::FileBacked)
  {
    return samples_[rng.Index(samples_.size())];
  }
  return profile_.median * std::exp(profile_.sigma * rng.Normal());
}

double sample_content_size(ContentSampler const &sampler, Rng &rng)
{
  return sampler.Sample(rng);
}

double social_welfare(std::span<Match const> matches, std::span<double const> buyer_valuations,
                      std::span<double const> seller_valuations, WelfareMode mode)
{
  double total = 0.0;
  for (auto const &match : matches)
  {
    if (match.buyer_id >= buyer_valuations.size() || match.seller_id >= seller_valuations.size())
    {
      throw std::out_of_range("social_welfare: match refers to an unknown participant");
    }
    double const buyer  = buyer_valuations[match.buyer_id];
    double const seller = seller_valuations[match.seller_id];
    total += mode == WelfareMode::Sum ? buyer + seller : buyer - seller;
  }
  return total;
}

double total_latency(std::span<Match const> matches, std::span<SellerState const> sellers,
                     std::span<VehicleState const> vehicles, ChannelParams const &channel)
{
  double total = 0.0;
  for (auto const &match : matches)
  {
    if (match.buyer_id >= vehicles.size() || match.seller_id >= sellers.size())
    {
      throw std::out_of_range("total_latency: match refers to an unknown participant");
    }
    auto const &vehicle = vehicles[match.buyer_id];
    auto const &seller  = sellers[match.seller_id];
    if (vehicle.home_market != seller.rsu_id)
    {
      continue;
    }
    double const rate = transmission_rate(seller, vehicle, channel);
    if (!(rate > 0.0))
    {
      throw ZeroRate(fmt::format("seller {} -> vehicle {} has zero transmission rate",
                                 match.seller_id, match.buyer_id));
    }
    total += seller.content_size / rate;
  }
  return total;
}

// ---------------------------------------------------------------------------

World::World(WorldConfig config)
  : config_((validate(config), std::move(config)))
  , content_(config_.content)
  , rsus_(rsu_layout(config_))
{
  Reset(config_.rng_seed);
}

void World::Reset(std::uint64_t seed)
{
  rng_         = Rng(seed);
  slot_        = 0;
  last_price_  = 0.0;
  price_scale_ = 1.0;
  market_last_prices_.assign(config_.rsu_count, 0.0);

  vehicles_.assign(config_.vehicle_count, VehicleState{});
  for (std::size_t v = 0; v < vehicles_.size(); ++v)
  {
    auto &vehicle      = vehicles_[v];
    vehicle.vehicle_id = static_cast<market::ParticipantId>(v);
    vehicle.position   = {rng_.Uniform(0.0, config_.area_side),
                        rng_.Uniform(0.0, config_.area_side)};
    double const heading = rng_.Uniform(0.0, 2.0 * std::numbers::pi);
    double const speed   = config_.mean_speed * rng_.Uniform(0.8, 1.2);
    vehicle.velocity     = {speed * std::cos(heading), speed * std::sin(heading)};
  }

  sellers_.assign(config_.rsu_count * config_.vms_per_rsu, SellerState{});
  for (std::size_t m = 0; m < sellers_.size(); ++m)
  {
    auto &seller     = sellers_[m];
    seller.seller_id = static_cast<market::ParticipantId>(m);
    seller.rsu_id    = m / config_.vms_per_rsu;
    seller.model_id  = m % config_.vms_per_rsu;
    seller.position  = rsus_[seller.rsu_id];
  }

  AssignMarkets();
  DrawRequests();
  RefreshSellers();
}

void World::AssignMarkets()
{
  for (auto &vehicle : vehicles_)
  {
    vehicle.home_market = assign_market(vehicle.position, rsus_, config_.rsu_coverage);
  }
}

void World::DrawRequests()
{
  for (auto &vehicle : vehicles_)
  {
    if (vehicle.participates)
    {
      continue;  // unserved requests persist with their valuation
    }
    if (rng_.Uniform() < config_.request_prob)
    {
      vehicle.participates   = true;
      vehicle.requested_size = content_.Sample(rng_);
      vehicle.valuation      = buyer_valuation(vehicle.requested_size, config_.valuation_log);
    }
  }
}

void World::RefreshSellers()
{
  for (auto &seller : sellers_)
  {
    seller.tx_power     = rng_.Uniform(0.0, 10.0);
    seller.valuation    = seller_valuation(seller.tx_power);
    seller.content_size = content_.Sample(rng_);
  }
}

std::vector<std::size_t> World::MarketCounts() const
{
  std::vector<std::size_t> counts(config_.rsu_count, config_.vms_per_rsu);
  for (auto const &vehicle : vehicles_)
  {
    if (vehicle.participates)
    {
      ++counts[vehicle.home_market];
    }
  }
  return counts;
}

double World::CandidateRate(std::size_t vehicle) const
{
  auto const         &buyer    = vehicles_.at(vehicle);
  SellerState const  *cheapest = nullptr;
  for (auto const &seller : sellers_)
  {
    if (seller.rsu_id == buyer.home_market &&
        (cheapest == nullptr || seller.valuation < cheapest->valuation))
    {
      cheapest = &seller;
    }
  }
  return cheapest == nullptr ? 0.0 : transmission_rate(*cheapest, buyer, config_.channel);
}

std::vector<double> World::MeanMarketRates() const
{
  std::vector<double>      sums(config_.rsu_count, 0.0);
  std::vector<std::size_t> counts(config_.rsu_count, 0);
  for (std::size_t v = 0; v < vehicles_.size(); ++v)
  {
    if (vehicles_[v].participates)
    {
      sums[vehicles_[v].home_market] += CandidateRate(v);
      ++counts[vehicles_[v].home_market];
    }
  }
  for (std::size_t n = 0; n < sums.size(); ++n)
  {
    sums[n] = counts[n] == 0 ? 0.0 : sums[n] / static_cast<double>(counts[n]);
  }
  return sums;
}

namespace {

std::atomic<std::size_t> process_constraint_checks{0};

}  // namespace

std::size_t total_constraint_checks()
{
  return process_constraint_checks.load();
}

void World::CheckConstraints(std::span<ClearingOutcome const> outcomes) const
{
  ++constraint_checks_;
  ++process_constraint_checks;

  for (auto const &vehicle : vehicles_)
  {
    std::size_t memberships = 0;
    for (std::size_t n = 0; n < config_.rsu_count; ++n)
    {
      memberships += vehicle.home_market == n ? 1 : 0;
    }
    if (memberships != 1)
    {
      throw ConstraintViolation(fmt::format("slot {}: vehicle {} belongs to {} markets", slot_,
                                            vehicle.vehicle_id, memberships));
    }
  }

  std::vector<int> buyer_trades(vehicles_.size(), 0);
  std::vector<int> seller_trades(sellers_.size(), 0);
  for (auto const &outcome : outcomes)
  {
    for (auto const &match : outcome.matches)
    {
      if (match.buyer_id >= vehicles_.size() || match.seller_id >= sellers_.size())
      {
        throw ConstraintViolation(fmt::format("slot {}: match names an unknown participant", slot_));
      }
      auto const &buyer = vehicles_[match.buyer_id];
      if (!buyer.participates || buyer.home_market != outcome.market_id ||
          sellers_[match.seller_id].rsu_id != outcome.market_id)
      {
        throw ConstraintViolation(fmt::format("slot {}: match ({}, {}) crosses market {}", slot_,
                                              match.buyer_id, match.seller_id, outcome.market_id));
      }
      if (++buyer_trades[match.buyer_id] > 1 || ++seller_trades[match.seller_id] > 1)
      {
        throw ConstraintViolation(fmt::format("slot {}: participant in match ({}, {}) traded twice",
                                              slot_, match.buyer_id, match.seller_id));
      }
    }
  }
}

SlotResult World::ClearSlot(std::span<double const> bids, MechanismKind mechanism,
                            std::uint64_t mechanism_seed)
{
  if (bids.size() != vehicles_.size())
  {
    throw std::invalid_argument(fmt::format("ClearSlot: expected {} bids, got {}",
                                            vehicles_.size(), bids.size()));
  }

  SlotResult result;
  result.outcomes.reserve(config_.rsu_count);
  for (std::size_t n = 0; n < config_.rsu_count; ++n)
  {
    std::vector<market::Ask> asks;
    for (auto const &seller : sellers_)
    {
      if (seller.rsu_id == n)
      {
        asks.push_back({seller.seller_id, seller.valuation});
      }
    }
    std::vector<market::Bid> market_bids;
    for (auto const &vehicle : vehicles_)
    {
      if (vehicle.participates && vehicle.home_market == n)
      {
        market_bids.push_back({vehicle.vehicle_id, bids[vehicle.vehicle_id]});
      }
    }
    auto const pools = market::build_pools(static_cast<market::MarketId>(n), std::move(asks),
                                           std::move(market_bids));
    result.outcomes.push_back(market::clear(pools, mechanism, mix_seed(mechanism_seed, n)));
  }

  CheckConstraints(result.outcomes);

  std::vector<Match> matches;
  for (auto const &outcome : result.outcomes)
  {
    matches.insert(matches.end(), outcome.matches.begin(), outcome.matches.end());
  }
  std::vector<double> buyer_values(vehicles_.size());
  for (std::size_t v = 0; v < vehicles_.size(); ++v)
  {
    buyer_values[v] = vehicles_[v].valuation;
  }
  std::vector<double> seller_values(sellers_.size());
  for (std::size_t m = 0; m < sellers_.size(); ++m)
  {
    seller_values[m] = sellers_[m].valuation;
  }

  result.metrics.social_welfare = social_welfare(matches, buyer_values, seller_values, config_.welfare);
  result.metrics.total_latency  = total_latency(matches, sellers_, vehicles_, config_.channel);
  result.metrics.global_budget  = market::global_budget(result.outcomes);
  result.metrics.matches_count  = matches.size();

  // settle: served buyers leave the pool, prices feed the next observation
  double      paid_total = 0.0;
  std::size_t paid_count = 0;
  for (auto const &outcome : result.outcomes)
  {
    if (outcome.buyer_payments.empty())
    {
      continue;
    }
    double market_total = 0.0;
    for (auto const &[buyer, payment] : outcome.buyer_payments)
    {
      market_total += payment;
      price_scale_ = std::max(price_scale_, payment);
    }
    market_last_prices_[outcome.market_id] =
        market_total / static_cast<double>(outcome.buyer_payments.size());
    paid_total += market_total;
    paid_count += outcome.buyer_payments.size();
  }
  if (paid_count > 0)
  {
    last_price_ = paid_total / static_cast<double>(paid_count);
  }
  for (auto const &match : matches)
  {
    auto &buyer          = vehicles_[match.buyer_id];
    buyer.participates   = false;
    buyer.requested_size = 0.0;
    buyer.valuation      = 0.0;
  }

  ++slot_;
  step_mobility(vehicles_, config_, rng_);
  AssignMarkets();
  DrawRequests();
  RefreshSellers();

  return result;
}

}  // namespace simenv
}  // namespace vecmarket
