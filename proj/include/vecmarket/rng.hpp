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
#include <random>
#include <string>

namespace vecmarket {

/// Derives an independent 64-bit seed for a named sub-stream (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded random source with portable draws.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The std:: distributions are not (their algorithms differ between
/// standard libraries), so the draws below are built directly on the engine
/// output to keep results identical across hosts.
class Rng
{
public:
  explicit Rng(std::uint64_t seed = 0)
    : engine_(seed)
  {}

  /// Uniform on [0, 1) with 53 bits of resolution.
  double Uniform();
  double Uniform(double lo, double hi);
  /// Standard normal via Box-Muller (no cached second variate).
  double Normal();
  /// Uniform integer in [0, n). n must be positive.
  std::size_t Index(std::size_t n);

  std::uint64_t NextU64()
  {
    return engine_();
  }

  std::string SaveState() const;
  void        RestoreState(std::string const &state);

private:
  std::mt19937_64 engine_;
};

}  // namespace vecmarket
