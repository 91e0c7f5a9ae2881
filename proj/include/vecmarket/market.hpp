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

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vecmarket {
namespace market {

using ParticipantId = std::uint32_t;
using MarketId      = std::uint32_t;

struct Ask
{
  ParticipantId seller_id = 0;
  double        price     = 0.0;
};

struct Bid
{
  ParticipantId buyer_id = 0;
  double        price    = 0.0;
};

/// One RSU's order book for a slot. Asks ascend and bids descend by price,
/// ties broken by ascending participant id.
struct MarketPools
{
  MarketId         market_id = 0;
  std::vector<Ask> asks;
  std::vector<Bid> bids;
};

struct Match
{
  ParticipantId buyer_id  = 0;
  ParticipantId seller_id = 0;

  bool operator==(Match const &) const = default;
};

struct ClearingOutcome
{
  MarketId                        market_id = 0;
  std::vector<Match>              matches;  // in rank order
  std::map<ParticipantId, double> buyer_payments;
  std::map<ParticipantId, double> seller_revenues;
  std::size_t                     breakeven_index      = 0;
  bool                            used_trade_reduction = false;
  /// Sum of buyer payments minus sum of seller revenues.
  double local_budget = 0.0;

  bool operator==(ClearingOutcome const &) const = default;
};

enum class MechanismKind
{
  McAfeeDouble,
  SecondPrice,
  RandomMatch,
};

/// CLI spelling: "mcafee", "second-price", "random".
std::string_view to_string(MechanismKind kind);
MechanismKind    parse_mechanism(std::string_view name);

class PoolTooLarge : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

MarketPools build_pools(MarketId market_id, std::vector<Ask> raw_asks, std::vector<Bid> raw_bids);

/// Largest k with the k-th highest bid >= the k-th lowest ask (0 if none).
std::size_t breakeven_index(MarketPools const &pools);

/// McAfee double auction: all K breakeven pairs trade at the midpoint of the
/// (K+1)-th bid and ask when that price separates the pools, otherwise K-1
/// pairs trade with buyers paying the K-th bid and sellers receiving the K-th
/// ask. A missing (K+1)-th entry always takes the trade-reduction branch.
ClearingOutcome mcafee_clear(MarketPools const &pools);

/// Baseline: every breakeven pair trades, each buyer pays the next-lower bid
/// (the last matched buyer pays max(K-th ask, (K+1)-th bid)), sellers receive
/// their own ask.
ClearingOutcome second_price_clear(MarketPools const &pools);

/// Baseline: random greedy maximal matching over feasible pairs, each pair
/// trading at a uniform price in [ask, bid].
ClearingOutcome random_clear(MarketPools const &pools, std::uint64_t rng_seed);

ClearingOutcome clear(MarketPools const &pools, MechanismKind kind, std::uint64_t rng_seed);

double global_budget(std::span<ClearingOutcome const> outcomes);

/// Number of trades in the efficient allocation: among sets of disjoint
/// (buyer, seller) pairs with bid >= ask, those maximising total gains
/// sum(bid - ask), the largest one (so zero-gain pairs count). Found by
/// exhaustive search over matchings; throws PoolTooLarge above kOracleLimit
/// per side.
std::size_t efficient_match_oracle(MarketPools const &pools);

constexpr std::size_t kOracleLimit = 12;

/// CSV trade log: one row per match.
void write_trades_header(std::ostream &out);
void write_trades(std::ostream &out, std::size_t slot, ClearingOutcome const &outcome,
                  MechanismKind mechanism);

}  // namespace market
}  // namespace vecmarket
