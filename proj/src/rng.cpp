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

#include "vecmarket/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace vecmarket {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z               = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z               = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::Uniform()
{
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::Uniform(double lo, double hi)
{
  return lo + (hi - lo) * Uniform();
}

double Rng::Normal()
{
  // 1 - U lies in (0, 1], so the log is finite
  double const u1 = 1.0 - Uniform();
  double const u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::Index(std::size_t n)
{
  if (n == 0)
  {
    throw std::invalid_argument("Rng::Index: empty range");
  }
  auto const          range = static_cast<std::uint64_t>(n);
  std::uint64_t const limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = engine_();
  while (draw >= limit)
  {
    draw = engine_();
  }
  return static_cast<std::size_t>(draw % range);
}

std::string Rng::SaveState() const
{
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::RestoreState(std::string const &state)
{
  std::istringstream in(state);
  in >> engine_;
  if (in.fail())
  {
    throw std::invalid_argument("Rng::RestoreState: malformed engine state");
  }
}

}  // namespace vecmarket
