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

#include <cstddef>
#include <cstdint>
#include <string>

namespace vecmarket {
namespace market {

/// Randomised economic property check of the clearing rules.
///
/// Each instance draws 1..max_pool buyers and sellers with valuations on
/// U[0, 1] and clears them truthfully under every mechanism. Checked:
///  - individual rationality in bids (all mechanisms),
///  - weak budget balance, zero budget without trade reduction (McAfee),
///  - match count within one of the efficient maximum and breakeven index
///    equal to it (McAfee),
///  - no unilateral deviation on a deviation_grid-point grid over [0, 1]
///    beats truthful reporting, for every buyer and seller (McAfee).
struct PropertySuiteOptions
{
  std::size_t   instances      = 10000;
  std::uint64_t seed           = 1;
  std::size_t   max_pool       = 8;
  std::size_t   deviation_grid = 21;
};

struct PropertyReport
{
  std::size_t instances                = 0;
  std::size_t matches_checked          = 0;
  std::size_t ir_violations            = 0;
  std::size_t budget_violations        = 0;
  std::size_t efficiency_violations    = 0;
  std::size_t breakeven_mismatches     = 0;
  std::size_t deviations_checked       = 0;
  std::size_t truthfulness_violations  = 0;
  std::size_t feasibility_violations   = 0;
  std::string first_failure;

  bool ok() const
  {
    return ir_violations == 0 && budget_violations == 0 && efficiency_violations == 0 &&
           breakeven_mismatches == 0 && truthfulness_violations == 0 &&
           feasibility_violations == 0;
  }
};

PropertyReport check_mechanism_properties(PropertySuiteOptions const &options);

}  // namespace market
}  // namespace vecmarket
