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

#include "vecmarket/neural.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vecmarket {
namespace neural {
namespace {

void check_shape(MlpParams const &params)
{
  if (params.layer_sizes.size() < 2)
  {
    throw ShapeMismatch("MLP needs at least an input and an output layer");
  }
  if (params.values.size() != parameter_count(params.layer_sizes))
  {
    throw ShapeMismatch(fmt::format("MLP holds {} values, layer sizes imply {}",
                                    params.values.size(), parameter_count(params.layer_sizes)));
  }
}

// activations[0] is the input, activations[l + 1] the output of layer l
std::vector<std::vector<double>> run_layers(MlpParams const &params, std::span<double const> input)
{
  check_shape(params);
  if (input.size() != params.input_size())
  {
    throw ShapeMismatch(
        fmt::format("MLP input has {} values, expected {}", input.size(), params.input_size()));
  }

  std::vector<std::vector<double>> activations;
  activations.reserve(params.layer_sizes.size());
  activations.emplace_back(input.begin(), input.end());

  std::size_t const layers = params.layer_count();
  for (std::size_t l = 0; l < layers; ++l)
  {
    std::size_t const in  = params.layer_sizes[l];
    std::size_t const out = params.layer_sizes[l + 1];
    double const     *w   = params.values.data() + params.weight_offset(l);
    double const     *b   = params.values.data() + params.bias_offset(l);
    auto const       &x   = activations.back();

    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o)
    {
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i)
      {
        acc += w[o * in + i] * x[i];
      }
      y[o] = l + 1 < layers ? std::tanh(acc) : acc;
    }
    activations.push_back(std::move(y));
  }
  return activations;
}

// returns the gradient w.r.t. the input
std::vector<double> backprop(MlpParams const &params, std::span<double const> input,
                             std::span<double const> upstream, std::span<double> param_grads)
{
  auto const activations = run_layers(params, input);
  if (upstream.size() != params.output_size())
  {
    throw ShapeMismatch(fmt::format("upstream gradient has {} values, expected {}",
                                    upstream.size(), params.output_size()));
  }
  if (param_grads.size() != params.values.size())
  {
    throw ShapeMismatch("gradient buffer does not match the parameter count");
  }

  std::vector<double> delta(upstream.begin(), upstream.end());
  for (std::size_t l = params.layer_count(); l-- > 0;)
  {
    std::size_t const in = params.layer_sizes[l];
    std::size_t const out = params.layer_sizes[l + 1];
    double const     *w   = params.values.data() + params.weight_offset(l);
    double           *gw  = param_grads.data() + params.weight_offset(l);
    double           *gb  = param_grads.data() + params.bias_offset(l);
    auto const       &x   = activations[l];

    std::vector<double> d_input(in, 0.0);
    for (std::size_t o = 0; o < out; ++o)
    {
      gb[o] += delta[o];
      for (std::size_t i = 0; i < in; ++i)
      {
        gw[o * in + i] += delta[o] * x[i];
        d_input[i] += w[o * in + i] * delta[o];
      }
    }
    if (l > 0)
    {
      // x is a tanh output: d tanh = 1 - tanh^2
      for (std::size_t i = 0; i < in; ++i)
      {
        d_input[i] *= 1.0 - x[i] * x[i];
      }
    }
    delta = std::move(d_input);
  }
  return delta;
}

}  // namespace

std::size_t parameter_count(std::span<std::size_t const> layer_sizes)
{
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
  {
    count += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return count;
}

std::size_t MlpParams::weight_offset(std::size_t layer) const
{
  return parameter_count(std::span<std::size_t const>(layer_sizes).first(layer + 1));
}

std::size_t MlpParams::bias_offset(std::size_t layer) const
{
  return weight_offset(layer) + layer_sizes[layer] * layer_sizes[layer + 1];
}

MlpParams zero_mlp(std::vector<std::size_t> layer_sizes)
{
  MlpParams params;
  params.values.assign(parameter_count(layer_sizes), 0.0);
  params.layer_sizes = std::move(layer_sizes);
  check_shape(params);
  return params;
}

MlpParams init_mlp(std::vector<std::size_t> layer_sizes, Rng &rng, double hidden_gain,
                   double output_gain)
{
  MlpParams params = zero_mlp(std::move(layer_sizes));
  for (std::size_t l = 0; l < params.layer_count(); ++l)
  {
    std::size_t const fan_in = params.layer_sizes[l];
    double const      gain   = l + 1 == params.layer_count() ? output_gain : hidden_gain;
    double const      bound  = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
    auto const        first  = params.weight_offset(l);
    auto const        last   = params.bias_offset(l);
    for (std::size_t i = first; i < last; ++i)
    {
      params.values[i] = rng.Uniform(-bound, bound);
    }
  }
  return params;
}

std::vector<double> forward(MlpParams const &params, std::span<double const> input)
{
  return std::move(run_layers(params, input).back());
}

GradientBundle backward(MlpParams const &params, std::span<double const> input,
                        std::span<double const> upstream)
{
  GradientBundle grads;
  grads.params.assign(params.values.size(), 0.0);
  grads.input = backprop(params, input, upstream, grads.params);
  return grads;
}

void accumulate_backward(MlpParams const &params, std::span<double const> input,
                         std::span<double const> upstream, std::span<double> param_grads)
{
  backprop(params, input, upstream, param_grads);
}

AdamState make_adam(std::size_t parameter_count, double learning_rate)
{
  AdamState state;
  state.first_moment.assign(parameter_count, 0.0);
  state.second_moment.assign(parameter_count, 0.0);
  state.learning_rate = learning_rate;
  return state;
}

UpdateStatus adam_update(std::span<double> params, std::span<double const> grads, AdamState &state)
{
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size())
  {
    throw ShapeMismatch("adam_update: parameter, gradient and moment sizes differ");
  }
  if (!std::all_of(grads.begin(), grads.end(), [](double g) { return std::isfinite(g); }))
  {
    return UpdateStatus::SkippedNonFinite;
  }

  ++state.step;
  auto const   t           = static_cast<double>(state.step);
  double const correction1 = 1.0 - std::pow(state.beta1, t);
  double const correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i)
  {
    double &m = state.first_moment[i];
    double &v = state.second_moment[i];
    m         = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v         = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
    double const m_hat = m / correction1;
    double const v_hat = v / correction2;
    params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
  return UpdateStatus::Applied;
}

double clamp_log_std(double log_std)
{
  return std::clamp(log_std, kLogStdMin, kLogStdMax);
}

GaussianStats gaussian_logprob_entropy(std::span<double const> mean, std::span<double const> log_std,
                                       std::span<double const> sample)
{
  if (mean.size() != log_std.size() || mean.size() != sample.size())
  {
    throw ShapeMismatch("gaussian_logprob_entropy: dimension mismatch");
  }
  double const  half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  GaussianStats stats;
  for (std::size_t i = 0; i < mean.size(); ++i)
  {
    double const ls = clamp_log_std(log_std[i]);
    double const z  = (sample[i] - mean[i]) * std::exp(-ls);
    stats.log_prob += -0.5 * z * z - ls - half_log_2pi;
    stats.entropy += 0.5 + half_log_2pi + ls;
  }
  return stats;
}

void gaussian_logprob_grad(std::span<double const> mean, std::span<double const> log_std,
                           std::span<double const> sample, std::span<double> d_mean,
                           std::span<double> d_log_std)
{
  if (mean.size() != log_std.size() || mean.size() != sample.size() ||
      mean.size() != d_mean.size() || mean.size() != d_log_std.size())
  {
    throw ShapeMismatch("gaussian_logprob_grad: dimension mismatch");
  }
  for (std::size_t i = 0; i < mean.size(); ++i)
  {
    double const ls       = clamp_log_std(log_std[i]);
    double const inv_var  = std::exp(-2.0 * ls);
    double const diff     = sample[i] - mean[i];
    d_mean[i]             = diff * inv_var;
    bool const   clamped  = log_std[i] < kLogStdMin || log_std[i] > kLogStdMax;
    d_log_std[i]          = clamped ? 0.0 : diff * diff * inv_var - 1.0;
  }
}

}  // namespace neural
}  // namespace vecmarket
