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

#include "vecmarket/properties.hpp"

#include "vecmarket/rng.hpp"

#include <fmt/format.h>

#include <set>

namespace vecmarket {
namespace market {
namespace {

struct Instance
{
  std::vector<double> buyer_values;
  std::vector<double> seller_values;
};

MarketPools pools_for(std::vector<double> const &buyer_bids, std::vector<double> const &seller_asks)
{
  std::vector<Ask> asks;
  for (std::size_t m = 0; m < seller_asks.size(); ++m)
  {
    asks.push_back({static_cast<ParticipantId>(m), seller_asks[m]});
  }
  std::vector<Bid> bids;
  for (std::size_t v = 0; v < buyer_bids.size(); ++v)
  {
    bids.push_back({static_cast<ParticipantId>(v), buyer_bids[v]});
  }
  return build_pools(0, std::move(asks), std::move(bids));
}

double buyer_utility(ClearingOutcome const &outcome, ParticipantId buyer, double value)
{
  auto const it = outcome.buyer_payments.find(buyer);
  return it == outcome.buyer_payments.end() ? 0.0 : value - it->second;
}

double seller_utility(ClearingOutcome const &outcome, ParticipantId seller, double value)
{
  auto const it = outcome.seller_revenues.find(seller);
  return it == outcome.seller_revenues.end() ? 0.0 : it->second - value;
}

void note(PropertyReport &report, std::string message)
{
  if (report.first_failure.empty())
  {
    report.first_failure = std::move(message);
  }
}

void check_ir_and_feasibility(PropertyReport &report, MarketPools const &pools,
                              ClearingOutcome const &outcome, MechanismKind kind)
{
  std::set<ParticipantId> buyers;
  std::set<ParticipantId> sellers;
  for (auto const &match : outcome.matches)
  {
    if (!buyers.insert(match.buyer_id).second || !sellers.insert(match.seller_id).second)
    {
      ++report.feasibility_violations;
      note(report, fmt::format("{}: participant matched twice", to_string(kind)));
    }
  }

  for (auto const &bid : pools.bids)
  {
    auto const it = outcome.buyer_payments.find(bid.buyer_id);
    if (it == outcome.buyer_payments.end())
    {
      continue;
    }
    ++report.matches_checked;
    if (it->second > bid.price)
    {
      ++report.ir_violations;
      note(report, fmt::format("{}: buyer {} pays {} above bid {}", to_string(kind), bid.buyer_id,
                               it->second, bid.price));
    }
  }
  for (auto const &ask : pools.asks)
  {
    auto const it = outcome.seller_revenues.find(ask.seller_id);
    if (it != outcome.seller_revenues.end() && it->second < ask.price)
    {
      ++report.ir_violations;
      note(report, fmt::format("{}: seller {} receives {} below ask {}", to_string(kind),
                               ask.seller_id, it->second, ask.price));
    }
  }
}

}  // namespace

PropertyReport check_mechanism_properties(PropertySuiteOptions const &options)
{
  PropertyReport report;
  Rng            rng(options.seed);

  std::vector<double> grid;
  for (std::size_t i = 0; i < options.deviation_grid; ++i)
  {
    grid.push_back(options.deviation_grid == 1
                       ? 0.0
                       : static_cast<double>(i) / static_cast<double>(options.deviation_grid - 1));
  }

  for (std::size_t n = 0; n < options.instances; ++n)
  {
    Instance instance;
    std::size_t const buyers  = 1 + rng.Index(options.max_pool);
    std::size_t const sellers = 1 + rng.Index(options.max_pool);
    for (std::size_t v = 0; v < buyers; ++v)
    {
      instance.buyer_values.push_back(rng.Uniform());
    }
    for (std::size_t m = 0; m < sellers; ++m)
    {
      instance.seller_values.push_back(rng.Uniform());
    }
    ++report.instances;

    auto const pools = pools_for(instance.buyer_values, instance.seller_values);

    for (auto const kind :
         {MechanismKind::McAfeeDouble, MechanismKind::SecondPrice, MechanismKind::RandomMatch})
    {
      auto const outcome = clear(pools, kind, mix_seed(options.seed, n));
      check_ir_and_feasibility(report, pools, outcome, kind);
    }

    auto const truthful = mcafee_clear(pools);

    if (truthful.local_budget < 0.0 || (!truthful.used_trade_reduction && truthful.local_budget != 0.0))
    {
      ++report.budget_violations;
      note(report, fmt::format("instance {}: McAfee budget {} (trade reduction {})", n,
                               truthful.local_budget, truthful.used_trade_reduction));
    }

    std::size_t const oracle  = efficient_match_oracle(pools);
    std::size_t const matched = truthful.matches.size();
    if (matched != oracle && matched + 1 != oracle)
    {
      ++report.efficiency_violations;
      note(report, fmt::format("instance {}: {} McAfee trades vs efficient {}", n, matched, oracle));
    }
    if (truthful.breakeven_index != oracle)
    {
      ++report.breakeven_mismatches;
      note(report, fmt::format("instance {}: breakeven index {} vs efficient {}", n,
                               truthful.breakeven_index, oracle));
    }

    // unilateral deviations from truthful reporting
    for (std::size_t v = 0; v < buyers; ++v)
    {
      auto const   id     = static_cast<ParticipantId>(v);
      double const honest = buyer_utility(truthful, id, instance.buyer_values[v]);
      for (double const report_value : grid)
      {
        auto bids = instance.buyer_values;
        bids[v]   = report_value;
        auto const deviated = mcafee_clear(pools_for(bids, instance.seller_values));
        ++report.deviations_checked;
        double const gain = buyer_utility(deviated, id, instance.buyer_values[v]);
        if (gain > honest)
        {
          ++report.truthfulness_violations;
          note(report, fmt::format("instance {}: buyer {} gains {} > {} by bidding {}", n, v, gain,
                                   honest, report_value));
        }
      }
    }
    for (std::size_t m = 0; m < sellers; ++m)
    {
      auto const   id     = static_cast<ParticipantId>(m);
      double const honest = seller_utility(truthful, id, instance.seller_values[m]);
      for (double const report_value : grid)
      {
        auto asks = instance.seller_values;
        asks[m]   = report_value;
        auto const deviated = mcafee_clear(pools_for(instance.buyer_values, asks));
        ++report.deviations_checked;
        double const gain = seller_utility(deviated, id, instance.seller_values[m]);
        if (gain > honest)
        {
          ++report.truthfulness_violations;
          note(report, fmt::format("instance {}: seller {} gains {} > {} by asking {}", n, m, gain,
                                   honest, report_value));
        }
      }
    }
  }
  return report;
}

}  // namespace market
}  // namespace vecmarket
