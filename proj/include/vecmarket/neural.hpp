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

#include "vecmarket/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace vecmarket {
namespace neural {

class ShapeMismatch : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Dense multilayer perceptron: tanh on hidden layers, identity output.
///
/// All parameters live in one flat vector. Layer l (mapping layer_sizes[l] to
/// layer_sizes[l+1]) stores its weight matrix row-major (out x in) followed by
/// its bias vector, so gradients and optimizer moments share the same layout.
struct MlpParams
{
  std::vector<std::size_t> layer_sizes;
  std::vector<double>      values;

  std::size_t layer_count() const
  {
    return layer_sizes.empty() ? 0 : layer_sizes.size() - 1;
  }
  std::size_t input_size() const
  {
    return layer_sizes.front();
  }
  std::size_t output_size() const
  {
    return layer_sizes.back();
  }
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  bool operator==(MlpParams const &) const = default;
};

std::size_t parameter_count(std::span<std::size_t const> layer_sizes);

/// All-zero parameters of the given shape.
MlpParams zero_mlp(std::vector<std::size_t> layer_sizes);

/// Scaled-uniform init with weight variance gain^2 / fan_in; biases zero.
MlpParams init_mlp(std::vector<std::size_t> layer_sizes, Rng &rng, double hidden_gain = 1.0,
                   double output_gain = 1.0);

std::vector<double> forward(MlpParams const &params, std::span<double const> input);

struct GradientBundle
{
  std::vector<double> params;  // same layout as MlpParams::values
  std::vector<double> input;
};

/// Gradients of dot(forward(params, input), upstream) w.r.t. every parameter and the input.
GradientBundle backward(MlpParams const &params, std::span<double const> input,
                        std::span<double const> upstream);

/// Same as backward() but adds the parameter gradient into param_grads.
void accumulate_backward(MlpParams const &params, std::span<double const> input,
                         std::span<double const> upstream, std::span<double> param_grads);

struct AdamState
{
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t       step          = 0;
  double              learning_rate = 1e-3;
  double              beta1         = 0.9;
  double              beta2         = 0.999;
  double              epsilon       = 1e-8;

  bool operator==(AdamState const &) const = default;
};

AdamState make_adam(std::size_t parameter_count, double learning_rate = 1e-3);

enum class UpdateStatus
{
  Applied,
  SkippedNonFinite,
};

/// Bias-corrected Adam step. A non-finite gradient leaves params and state untouched.
UpdateStatus adam_update(std::span<double> params, std::span<double const> grads,
                         AdamState &state);

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;

double clamp_log_std(double log_std);

struct GaussianStats
{
  double log_prob = 0.0;
  double entropy  = 0.0;
};

/// Diagonal Gaussian log-density of sample and differential entropy. log_std
/// is clamped to [kLogStdMin, kLogStdMax].
GaussianStats gaussian_logprob_entropy(std::span<double const> mean, std::span<double const> log_std,
                                       std::span<double const> sample);

/// d log_prob / d mean and d log_prob / d log_std (zero where the clamp binds).
void gaussian_logprob_grad(std::span<double const> mean, std::span<double const> log_std,
                           std::span<double const> sample, std::span<double> d_mean,
                           std::span<double> d_log_std);

}  // namespace neural
}  // namespace vecmarket
