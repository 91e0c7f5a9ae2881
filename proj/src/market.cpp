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

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vecmarket {
namespace market {
namespace {

void require_price(double price)
{
  if (!std::isfinite(price) || price < 0.0)
  {
    throw std::invalid_argument(fmt::format("market price must be finite and >= 0, got {}", price));
  }
}

void settle_budget(ClearingOutcome &outcome)
{
  // pairwise in match order, so equal-price trades cancel exactly
  double budget = 0.0;
  for (auto const &match : outcome.matches)
  {
    budget += outcome.buyer_payments.at(match.buyer_id) - outcome.seller_revenues.at(match.seller_id);
  }
  outcome.local_budget = budget;
}

}  // namespace

std::string_view to_string(MechanismKind kind)
{
  switch (kind)
  {
  case MechanismKind::McAfeeDouble:
    return "mcafee";
  case MechanismKind::SecondPrice:
    return "second-price";
  case MechanismKind::RandomMatch:
    return "random";
  }
  return "unknown";
}

MechanismKind parse_mechanism(std::string_view name)
{
  if (name == "mcafee")
  {
    return MechanismKind::McAfeeDouble;
  }
  if (name == "second-price")
  {
    return MechanismKind::SecondPrice;
  }
  if (name == "random")
  {
    return MechanismKind::RandomMatch;
  }
  throw std::invalid_argument(fmt::format("unknown mechanism '{}'", name));
}

MarketPools build_pools(MarketId market_id, std::vector<Ask> raw_asks, std::vector<Bid> raw_bids)
{
  for (auto const &ask : raw_asks)
  {
    require_price(ask.price);
  }
  for (auto const &bid : raw_bids)
  {
    require_price(bid.price);
  }

  std::sort(raw_asks.begin(), raw_asks.end(), [](Ask const &a, Ask const &b) {
    return a.price != b.price ? a.price < b.price : a.seller_id < b.seller_id;
  });
  std::sort(raw_bids.begin(), raw_bids.end(), [](Bid const &a, Bid const &b) {
    return a.price != b.price ? a.price > b.price : a.buyer_id < b.buyer_id;
  });

  return MarketPools{market_id, std::move(raw_asks), std::move(raw_bids)};
}

std::size_t breakeven_index(MarketPools const &pools)
{
  // b_k - a_k is nonincreasing in k on sorted pools, so the feasible prefix is contiguous
  std::size_t const limit = std::min(pools.asks.size(), pools.bids.size());
  std::size_t       k     = 0;
  while (k < limit && pools.bids[k].price >= pools.asks[k].price)
  {
    ++k;
  }
  return k;
}

ClearingOutcome mcafee_clear(MarketPools const &pools)
{
  ClearingOutcome outcome;
  outcome.market_id       = pools.market_id;
  std::size_t const K     = breakeven_index(pools);
  outcome.breakeven_index = K;
  if (K == 0)
  {
    return outcome;
  }

  bool full_trade = false;
  if (K < pools.bids.size() && K < pools.asks.size())
  {
    double const price = (pools.bids[K].price + pools.asks[K].price) / 2.0;

    auto const bids_at_or_above = std::count_if(
        pools.bids.begin(), pools.bids.end(), [price](Bid const &b) { return b.price >= price; });
    auto const asks_at_or_below = std::count_if(
        pools.asks.begin(), pools.asks.end(), [price](Ask const &a) { return a.price <= price; });

    if (static_cast<std::size_t>(bids_at_or_above) == K &&
        static_cast<std::size_t>(asks_at_or_below) == K)
    {
      full_trade = true;
      for (std::size_t i = 0; i < K; ++i)
      {
        outcome.matches.push_back({pools.bids[i].buyer_id, pools.asks[i].seller_id});
        outcome.buyer_payments[pools.bids[i].buyer_id]  = price;
        outcome.seller_revenues[pools.asks[i].seller_id] = price;
      }
    }
  }

  if (!full_trade)
  {
    outcome.used_trade_reduction = true;
    double const buyer_price     = pools.bids[K - 1].price;
    double const seller_price    = pools.asks[K - 1].price;
    for (std::size_t i = 0; i + 1 < K; ++i)
    {
      outcome.matches.push_back({pools.bids[i].buyer_id, pools.asks[i].seller_id});
      outcome.buyer_payments[pools.bids[i].buyer_id]  = buyer_price;
      outcome.seller_revenues[pools.asks[i].seller_id] = seller_price;
    }
  }

  settle_budget(outcome);
  return outcome;
}

ClearingOutcome second_price_clear(MarketPools const &pools)
{
  ClearingOutcome outcome;
  outcome.market_id       = pools.market_id;
  std::size_t const K     = breakeven_index(pools);
  outcome.breakeven_index = K;

  for (std::size_t i = 0; i < K; ++i)
  {
    double payment = 0.0;
    if (i + 1 < K)
    {
      payment = pools.bids[i + 1].price;
    }
    else
    {
      payment = pools.asks[i].price;
      if (K < pools.bids.size())
      {
        payment = std::max(payment, pools.bids[K].price);
      }
    }
    outcome.matches.push_back({pools.bids[i].buyer_id, pools.asks[i].seller_id});
    outcome.buyer_payments[pools.bids[i].buyer_id]  = payment;
    outcome.seller_revenues[pools.asks[i].seller_id] = pools.asks[i].price;
  }

  settle_budget(outcome);
  return outcome;
}

ClearingOutcome random_clear(MarketPools const &pools, std::uint64_t rng_seed)
{
  ClearingOutcome outcome;
  outcome.market_id       = pools.market_id;
  outcome.breakeven_index = breakeven_index(pools);

  Rng rng(rng_seed);

  std::vector<std::size_t> buyer_order(pools.bids.size());
  std::iota(buyer_order.begin(), buyer_order.end(), std::size_t{0});
  for (std::size_t i = buyer_order.size(); i > 1; --i)
  {
    std::swap(buyer_order[i - 1], buyer_order[rng.Index(i)]);
  }

  std::vector<bool>        seller_taken(pools.asks.size(), false);
  std::vector<std::size_t> feasible;
  for (std::size_t const b : buyer_order)
  {
    feasible.clear();
    for (std::size_t s = 0; s < pools.asks.size(); ++s)
    {
      if (!seller_taken[s] && pools.asks[s].price <= pools.bids[b].price)
      {
        feasible.push_back(s);
      }
    }
    if (feasible.empty())
    {
      continue;
    }
    std::size_t const s = feasible[rng.Index(feasible.size())];
    seller_taken[s]     = true;

    // clamp guards the rounding of lo + (hi - lo) * u
    double const price = std::clamp(rng.Uniform(pools.asks[s].price, pools.bids[b].price),
                                    pools.asks[s].price, pools.bids[b].price);
    outcome.matches.push_back({pools.bids[b].buyer_id, pools.asks[s].seller_id});
    outcome.buyer_payments[pools.bids[b].buyer_id]  = price;
    outcome.seller_revenues[pools.asks[s].seller_id] = price;
  }

  settle_budget(outcome);
  return outcome;
}

ClearingOutcome clear(MarketPools const &pools, MechanismKind kind, std::uint64_t rng_seed)
{
  switch (kind)
  {
  case MechanismKind::McAfeeDouble:
    return mcafee_clear(pools);
  case MechanismKind::SecondPrice:
    return second_price_clear(pools);
  case MechanismKind::RandomMatch:
    return random_clear(pools, rng_seed);
  }
  throw std::invalid_argument("clear: unknown mechanism");
}

double global_budget(std::span<ClearingOutcome const> outcomes)
{
  double total = 0.0;
  for (auto const &outcome : outcomes)
  {
    total += outcome.local_budget;
  }
  return total;
}

std::size_t efficient_match_oracle(MarketPools const &pools)
{
  std::size_t const buyers  = pools.bids.size();
  std::size_t const sellers = pools.asks.size();
  if (buyers > kOracleLimit || sellers > kOracleLimit)
  {
    throw PoolTooLarge(fmt::format("efficient_match_oracle: pools of {} bids / {} asks exceed {}",
                                   buyers, sellers, kOracleLimit));
  }

  // exhaustive search over (next buyer, used-seller set), memoised; the value
  // is (gains, trades) compared lexicographically with a rounding tolerance
  struct Best
  {
    double gains  = 0.0;
    int    trades = 0;
  };
  constexpr double kTolerance = 1e-9;
  auto better = [](Best const &a, Best const &b) {
    if (a.gains > b.gains + kTolerance)
    {
      return true;
    }
    return a.gains >= b.gains - kTolerance && a.trades > b.trades;
  };

  std::size_t const              states = std::size_t{1} << sellers;
  std::vector<std::vector<Best>> memo(buyers + 1, std::vector<Best>(states));
  std::vector<std::vector<bool>> known(buyers + 1, std::vector<bool>(states, false));

  auto search = [&](auto &&self, std::size_t buyer, std::size_t used) -> Best {
    if (buyer == buyers)
    {
      return {};
    }
    if (known[buyer][used])
    {
      return memo[buyer][used];
    }
    Best best = self(self, buyer + 1, used);
    for (std::size_t s = 0; s < sellers; ++s)
    {
      double const gain = pools.bids[buyer].price - pools.asks[s].price;
      if ((used & (std::size_t{1} << s)) == 0 && gain >= 0.0)
      {
        Best candidate = self(self, buyer + 1, used | (std::size_t{1} << s));
        candidate.gains += gain;
        candidate.trades += 1;
        if (better(candidate, best))
        {
          best = candidate;
        }
      }
    }
    known[buyer][used] = true;
    memo[buyer][used]  = best;
    return best;
  };

  return static_cast<std::size_t>(search(search, 0, 0).trades);
}

void write_trades_header(std::ostream &out)
{
  out << "slot,market_id,buyer_id,seller_id,payment,revenue,mechanism,trade_reduction\n";
}

void write_trades(std::ostream &out, std::size_t slot, ClearingOutcome const &outcome,
                  MechanismKind mechanism)
{
  for (auto const &match : outcome.matches)
  {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", slot, outcome.market_id, match.buyer_id,
                       match.seller_id, outcome.buyer_payments.at(match.buyer_id),
                       outcome.seller_revenues.at(match.seller_id), to_string(mechanism),
                       outcome.used_trade_reduction ? 1 : 0);
  }
}

}  // namespace market
}  // namespace vecmarket
