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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

namespace {

using namespace vecmarket;
using namespace vecmarket::neural;

double dot(std::vector<double> const &a, std::vector<double> const &b)
{
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    total += a[i] * b[i];
  }
  return total;
}

double relative_error(double analytic, double numeric)
{
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

TEST(Mlp, ParameterLayout)
{
  auto const params = zero_mlp({3, 4, 2});
  EXPECT_EQ(params.values.size(), parameter_count(params.layer_sizes));
  EXPECT_EQ(params.values.size(), 3u * 4 + 4 + 4 * 2 + 2);
  EXPECT_EQ(params.weight_offset(0), 0u);
  EXPECT_EQ(params.bias_offset(0), 12u);
  EXPECT_EQ(params.weight_offset(1), 16u);
  EXPECT_EQ(params.bias_offset(1), 24u);
}

TEST(Mlp, ZeroWeightsOutputTheBias)
{
  auto params = zero_mlp({3, 5, 2});
  params.values[params.bias_offset(1)]     = 0.25;
  params.values[params.bias_offset(1) + 1] = -1.5;
  std::vector<double> const input          = {1.0, -2.0, 3.0};
  EXPECT_EQ(forward(params, input), (std::vector<double>{0.25, -1.5}));
}

TEST(Mlp, SingleLinearLayer)
{
  MlpParams params{{1, 1}, {2.0, 1.0}};
  std::vector<double> const input = {3.0};
  EXPECT_EQ(forward(params, input), (std::vector<double>{7.0}));
}

TEST(Mlp, TanhSaturates)
{
  MlpParams params{{1, 1, 1}, {1000.0, 0.0, 1.0, 0.0}};
  std::vector<double> const input = {5.0};
  EXPECT_NEAR(forward(params, input)[0], 1.0, 1e-12);
}

TEST(Mlp, ShapeMismatchThrows)
{
  auto const                params = zero_mlp({3, 2});
  std::vector<double> const input  = {1.0, 2.0};
  EXPECT_THROW(forward(params, input), ShapeMismatch);
  std::vector<double> const good     = {1.0, 2.0, 3.0};
  std::vector<double> const upstream = {1.0};
  EXPECT_THROW(backward(params, good, upstream), ShapeMismatch);
}

TEST(Mlp, InitScale)
{
  Rng        rng(3);
  auto const params = init_mlp({64, 64, 1}, rng, 1.0, 0.01);
  double     sum_sq = 0.0;
  for (std::size_t i = 0; i < 64 * 64; ++i)
  {
    sum_sq += params.values[i] * params.values[i];
  }
  EXPECT_NEAR(sum_sq / (64.0 * 64.0), 1.0 / 64.0, 0.2 / 64.0);
  for (std::size_t i = params.weight_offset(1); i < params.bias_offset(1); ++i)
  {
    EXPECT_LE(std::abs(params.values[i]), 0.01 * std::sqrt(3.0 / 64.0) + 1e-15);
  }
  for (std::size_t i = params.bias_offset(0); i < params.weight_offset(1); ++i)
  {
    EXPECT_EQ(params.values[i], 0.0);
  }
}

TEST(Backward, LinearLayerClosedForm)
{
  MlpParams params{{2, 1}, {0.5, -0.25, 0.1}};
  std::vector<double> const input    = {3.0, 4.0};
  std::vector<double> const upstream = {2.0};
  auto const                grads    = backward(params, input, upstream);
  EXPECT_EQ(grads.params, (std::vector<double>{6.0, 8.0, 2.0}));
  EXPECT_EQ(grads.input, (std::vector<double>{1.0, -0.5}));
}

TEST(Backward, ZeroUpstreamGivesZeroGradients)
{
  Rng                       rng(1);
  auto const                params   = init_mlp({3, 8, 2}, rng);
  std::vector<double> const input    = {0.1, 0.2, 0.3};
  std::vector<double> const upstream = {0.0, 0.0};
  auto const                grads    = backward(params, input, upstream);
  for (double g : grads.params)
  {
    EXPECT_EQ(g, 0.0);
  }
  for (double g : grads.input)
  {
    EXPECT_EQ(g, 0.0);
  }
}

TEST(Backward, MatchesCentralFiniteDifferences)
{
  Rng          rng(2024);
  double const h = 1e-5;
  for (int trial = 0; trial < 20; ++trial)
  {
    std::vector<std::size_t> sizes = {1 + rng.Index(5), 1 + rng.Index(8), 1 + rng.Index(8),
                                      1 + rng.Index(3)};
    auto                     params = init_mlp(sizes, rng);
    for (auto &v : params.values)
    {
      v += rng.Uniform(-0.1, 0.1);  // nonzero biases too
    }
    std::vector<double> input(sizes.front());
    for (auto &x : input)
    {
      x = rng.Uniform(-1.0, 1.0);
    }
    std::vector<double> upstream(sizes.back());
    for (auto &u : upstream)
    {
      u = rng.Uniform(-1.0, 1.0);
    }

    auto const grads = backward(params, input, upstream);
    for (std::size_t i = 0; i < params.values.size(); ++i)
    {
      auto plus  = params;
      auto minus = params;
      plus.values[i] += h;
      minus.values[i] -= h;
      double const numeric =
          (dot(forward(plus, input), upstream) - dot(forward(minus, input), upstream)) / (2 * h);
      ASSERT_LT(relative_error(grads.params[i], numeric), 1e-4) << "parameter " << i;
    }
    for (std::size_t i = 0; i < input.size(); ++i)
    {
      auto plus  = input;
      auto minus = input;
      plus[i] += h;
      minus[i] -= h;
      double const numeric =
          (dot(forward(params, plus), upstream) - dot(forward(params, minus), upstream)) / (2 * h);
      ASSERT_LT(relative_error(grads.input[i], numeric), 1e-4) << "input " << i;
    }
  }
}

TEST(Backward, AccumulateAddsIntoExistingGradients)
{
  Rng                       rng(4);
  auto const                params   = init_mlp({2, 3, 1}, rng);
  std::vector<double> const input    = {0.3, -0.7};
  std::vector<double> const upstream = {1.5};
  std::vector<double>       acc(params.values.size(), 1.0);
  accumulate_backward(params, input, upstream, acc);
  auto const fresh = backward(params, input, upstream);
  for (std::size_t i = 0; i < acc.size(); ++i)
  {
    EXPECT_DOUBLE_EQ(acc[i], 1.0 + fresh.params[i]);
  }
}

TEST(Backward, IsDeterministic)
{
  Rng                       rng(6);
  auto const                params   = init_mlp({4, 16, 16, 1}, rng);
  std::vector<double> const input    = {0.1, 0.5, -0.3, 0.9};
  std::vector<double> const upstream = {0.7};
  EXPECT_EQ(forward(params, input), forward(params, input));
  EXPECT_EQ(backward(params, input, upstream).params, backward(params, input, upstream).params);
}

TEST(Adam, ZeroGradientLeavesParameters)
{
  std::vector<double>       params = {1.0, -2.0};
  std::vector<double> const grads  = {0.0, 0.0};
  auto                      state  = make_adam(2);
  EXPECT_EQ(adam_update(params, grads, state), UpdateStatus::Applied);
  EXPECT_EQ(params, (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate)
{
  std::vector<double>       params = {1.0, 1.0};
  std::vector<double> const grads  = {0.5, -3.0};
  auto                      state  = make_adam(2, 0.01);
  adam_update(params, grads, state);
  // bias-corrected first step is lr * g / (|g| + eps')
  EXPECT_NEAR(params[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(params[1], 1.0 + 0.01, 1e-9);
}

TEST(Adam, ConvergesOnQuadratic)
{
  std::vector<double> x     = {3.0};
  auto                state = make_adam(1, 0.05);
  double const        start = std::abs(x[0]);
  for (int i = 0; i < 1000; ++i)
  {
    std::vector<double> const grad = {2.0 * x[0]};
    adam_update(x, grad, state);
  }
  EXPECT_LT(std::abs(x[0]), 0.05 * start);
}

TEST(Adam, NonFiniteGradientIsSkipped)
{
  std::vector<double>       params = {1.0, 2.0};
  std::vector<double> const grads  = {0.1, std::numeric_limits<double>::quiet_NaN()};
  auto                      state  = make_adam(2);
  auto const                before = state;
  EXPECT_EQ(adam_update(params, grads, state), UpdateStatus::SkippedNonFinite);
  EXPECT_EQ(params, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(state, before);
}

TEST(Gaussian, DensityAtTheMode)
{
  std::vector<double> const mean    = {0.3};
  std::vector<double> const log_std = {0.0};
  auto const                stats   = gaussian_logprob_entropy(mean, log_std, mean);
  EXPECT_NEAR(stats.log_prob, -0.5 * std::log(2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(stats.log_prob, -0.9189, 1e-4);
  EXPECT_NEAR(stats.entropy, 1.4189, 1e-4);
}

TEST(Gaussian, LogStdIsClamped)
{
  std::vector<double> const mean    = {0.0};
  std::vector<double> const huge    = {50.0};
  std::vector<double> const at_max  = {kLogStdMax};
  std::vector<double> const sample  = {0.4};
  EXPECT_EQ(gaussian_logprob_entropy(mean, huge, sample).entropy,
            gaussian_logprob_entropy(mean, at_max, sample).entropy);
  std::vector<double> d_mean(1);
  std::vector<double> d_log_std(1);
  gaussian_logprob_grad(mean, huge, sample, d_mean, d_log_std);
  EXPECT_EQ(d_log_std[0], 0.0);
  EXPECT_EQ(clamp_log_std(-9.0), kLogStdMin);
}

TEST(Gaussian, GradientsMatchFiniteDifferences)
{
  Rng          rng(12);
  double const h = 1e-6;
  for (int trial = 0; trial < 100; ++trial)
  {
    std::vector<double> mean    = {rng.Uniform(-2.0, 2.0), rng.Uniform(-2.0, 2.0)};
    std::vector<double> log_std = {rng.Uniform(-1.5, 1.5), rng.Uniform(-1.5, 1.5)};
    std::vector<double> sample  = {rng.Uniform(-3.0, 3.0), rng.Uniform(-3.0, 3.0)};
    std::vector<double> d_mean(2);
    std::vector<double> d_log_std(2);
    gaussian_logprob_grad(mean, log_std, sample, d_mean, d_log_std);
    for (std::size_t i = 0; i < 2; ++i)
    {
      auto up = mean;
      auto dn = mean;
      up[i] += h;
      dn[i] -= h;
      double const numeric_mean = (gaussian_logprob_entropy(up, log_std, sample).log_prob -
                                   gaussian_logprob_entropy(dn, log_std, sample).log_prob) /
                                  (2 * h);
      EXPECT_LT(relative_error(d_mean[i], numeric_mean), 1e-6);

      auto su = log_std;
      auto sd = log_std;
      su[i] += h;
      sd[i] -= h;
      double const numeric_std = (gaussian_logprob_entropy(mean, su, sample).log_prob -
                                  gaussian_logprob_entropy(mean, sd, sample).log_prob) /
                                 (2 * h);
      EXPECT_LT(relative_error(d_log_std[i], numeric_std), 1e-6);
    }
  }
}

}  // namespace
