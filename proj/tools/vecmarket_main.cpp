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

#include "vecmarket/checkpoint.hpp"
#include "vecmarket/config.hpp"
#include "vecmarket/experiment.hpp"
#include "vecmarket/properties.hpp"

#include "CLI11.hpp"

#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace vecmarket;

struct CommonOptions
{
  std::string                config_path;
  std::optional<std::uint64_t> seed;
  std::string                out_dir;
  std::vector<std::string>   mechanisms;
  std::vector<std::string>   bidders;
  std::vector<std::size_t>   iovs;
};

struct UsageError : std::invalid_argument
{
  using std::invalid_argument::invalid_argument;
};

void add_common(CLI::App &command, CommonOptions &options)
{
  command.add_option("--config", options.config_path, "JSON experiment config")
      ->check(CLI::ExistingFile);
  command.add_option("--seed", options.seed, "Master seed (overrides the config)");
  command.add_option("--out", options.out_dir, "Output directory (overrides the config)");
  command.add_option("--mechanism", options.mechanisms, "mcafee, second-price or random")
      ->delimiter(',');
  command.add_option("--bidder", options.bidders, "learned, truthful or random")->delimiter(',');
  command.add_option("--iovs", options.iovs, "Comma-separated IoV counts")->delimiter(',');
}

experiment::ExperimentConfig resolve(CommonOptions const &options)
{
  experiment::ExperimentConfig config;
  if (!options.config_path.empty())
  {
    config = experiment::parse_config(options.config_path);
  }
  if (options.seed)
  {
    config.seed = *options.seed;
  }
  if (!options.out_dir.empty())
  {
    config.out_dir = options.out_dir;
  }
  try
  {
    if (!options.mechanisms.empty())
    {
      config.mechanisms.clear();
      for (auto const &name : options.mechanisms)
      {
        config.mechanisms.push_back(market::parse_mechanism(name));
      }
    }
    if (!options.bidders.empty())
    {
      config.bidders.clear();
      for (auto const &name : options.bidders)
      {
        config.bidders.push_back(mappo::parse_bidder(name));
      }
    }
  }
  catch (std::invalid_argument const &error)
  {
    throw UsageError(error.what());
  }
  if (!options.iovs.empty())
  {
    config.iov_counts = options.iovs;
  }
  experiment::validate(config);
  return config;
}

void print_aggregate(experiment::MetricsRecord const &record)
{
  auto const &m = record.metrics;
  fmt::print("iov={} mechanism={} bidder={} reward={:.6g}±{:.3g} sw={:.6g}±{:.3g} "
             "budget={:.6g}±{:.3g} latency={:.6g}±{:.3g}\n",
             record.iov_count, market::to_string(record.mechanism),
             mappo::to_string(record.bidder), m.reward_mean, m.reward_std, m.sw_mean, m.sw_std,
             m.budget_mean, m.budget_std, m.latency_mean, m.latency_std);
}

int run_train(CommonOptions const &options)
{
  auto const config = resolve(options);
  if (options.mechanisms.size() > 1 || options.iovs.size() > 1)
  {
    throw UsageError("train takes a single --mechanism and a single --iovs value");
  }
  std::size_t const iov = options.iovs.empty() ? config.world.vehicle_count : options.iovs.front();
  auto const mechanism  = config.mechanisms.front();
  auto const        seed      = experiment::cell_train_seed(config, iov, mechanism);
  auto const        result =
      mappo::train(config.train, experiment::cell_world(config, iov), mechanism, seed, config.out_dir);

  auto const &last = result.log.back();
  fmt::print("trained {} agents for {} epochs: reward {:.6g} (initial {:.6g})\n", iov, last.epoch,
             last.mean_reward, result.log.front().mean_reward);
  fmt::print("wrote {}/training_log.csv and {}/checkpoint_final.json\n", config.out_dir,
             config.out_dir);
  return 0;
}

int run_evaluate(CommonOptions const &options, std::string const &checkpoint_path)
{
  auto const config = resolve(options);

  std::optional<io::Checkpoint> checkpoint;
  if (!checkpoint_path.empty())
  {
    checkpoint = io::load_checkpoint(checkpoint_path);
  }

  std::filesystem::create_directories(config.out_dir);
  auto const    path = std::filesystem::path(config.out_dir) / "metrics.csv";
  std::ofstream csv(path, std::ios::binary | std::ios::trunc);
  if (!csv)
  {
    throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  }
  experiment::write_metrics_header(csv);

  for (std::size_t const iov : config.iov_counts)
  {
    for (auto const mechanism : config.mechanisms)
    {
      for (auto const bidder : config.bidders)
      {
        mappo::AgentPool const *agents = nullptr;
        if (bidder == mappo::BidderKind::Learned)
        {
          if (!checkpoint)
          {
            throw UsageError("evaluating a learned bidder needs --checkpoint");
          }
          if (checkpoint->agents.agent_count != iov)
          {
            throw UsageError(fmt::format("checkpoint holds {} agents but the IoV count is {}",
                                         checkpoint->agents.agent_count, iov));
          }
          agents = &checkpoint->agents;
        }
        auto const record = experiment::evaluate_cell(config, iov, mechanism, bidder, agents);
        experiment::write_metrics_row(csv, record);
        csv.flush();
        print_aggregate(record);
      }
    }
  }
  fmt::print("wrote {}\n", path.string());
  return 0;
}

int run_sweep(CommonOptions const &options)
{
  auto const config = resolve(options);
  auto const result = experiment::run_sweep(config);
  for (auto const &record : result.records)
  {
    print_aggregate(record);
  }
  fmt::print("wrote {}", result.metrics_csv.string());
  for (auto const &plot : result.plots)
  {
    fmt::print(" {}", plot.string());
  }
  fmt::print("\n");
  return 0;
}

int run_properties(market::PropertySuiteOptions const &options)
{
  auto const report = market::check_mechanism_properties(options);
  fmt::print("instances={} matches={} deviations={} ir_violations={} budget_violations={} "
             "efficiency_violations={} breakeven_mismatches={} truthfulness_violations={} "
             "feasibility_violations={}\n",
             report.instances, report.matches_checked, report.deviations_checked,
             report.ir_violations, report.budget_violations, report.efficiency_violations,
             report.breakeven_mismatches, report.truthfulness_violations,
             report.feasibility_violations);
  if (!report.ok())
  {
    fmt::print(stderr, "error: kind=property_violation message=\"{}\"\n", report.first_failure);
    return 1;
  }
  fmt::print("all properties hold\n");
  return 0;
}

std::string quote(std::string text)
{
  std::string out;
  for (char const c : text)
  {
    if (c == '"' || c == '\\')
    {
      out += '\\';
    }
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

int fail(std::string const &kind, std::string const &message, std::string const &extra = {})
{
  fmt::print(stderr, "error: kind={}{} message=\"{}\"\n", kind, extra, quote(message));
  return kind == "usage" || kind == "invalid_config" || kind == "parse_error" ? 2 : 1;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"vecmarket: decentralized double-auction market for vehicular AIGC services"};
  app.require_subcommand(1);

  CommonOptions train_options;
  auto         *train = app.add_subcommand("train", "Train learned bidders with MAPPO");
  add_common(*train, train_options);

  CommonOptions evaluate_options;
  std::string   checkpoint_path;
  auto         *evaluate = app.add_subcommand("evaluate", "Evaluate frozen bidders");
  add_common(*evaluate, evaluate_options);
  evaluate->add_option("--checkpoint", checkpoint_path, "Checkpoint of learned bidders")
      ->check(CLI::ExistingFile);

  CommonOptions sweep_options;
  auto         *sweep = app.add_subcommand("sweep", "Sweep IoV counts, mechanisms and bidders");
  add_common(*sweep, sweep_options);

  market::PropertySuiteOptions property_options;
  auto *props = app.add_subcommand("mechanism-props", "Check the market's economic properties");
  props->add_option("--instances", property_options.instances, "Random markets to draw");
  props->add_option("--seed", property_options.seed, "Seed of the instance generator");
  props->add_option("--max-pool", property_options.max_pool, "Largest pool per side")
      ->check(CLI::Range(1, 12));
  props->add_option("--grid", property_options.deviation_grid, "Deviation grid points")
      ->check(CLI::Range(2, 1001));

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::CallForHelp const &error)
  {
    return app.exit(error);
  }
  catch (CLI::ParseError const &error)
  {
    return fail("usage", error.what());
  }

  try
  {
    if (train->parsed())
    {
      return run_train(train_options);
    }
    if (evaluate->parsed())
    {
      return run_evaluate(evaluate_options, checkpoint_path);
    }
    if (sweep->parsed())
    {
      return run_sweep(sweep_options);
    }
    return run_properties(property_options);
  }
  catch (experiment::ConfigParseError const &error)
  {
    return fail("parse_error", error.what(),
                fmt::format(" line={} column={}", error.line(), error.column()));
  }
  catch (simenv::InvalidConfig const &error)
  {
    return fail("invalid_config", error.what(), fmt::format(" field={}", error.field()));
  }
  catch (UsageError const &error)
  {
    return fail("usage", error.what());
  }
  catch (io::VersionMismatch const &error)
  {
    return fail("version_mismatch", error.what());
  }
  catch (io::CorruptCheckpoint const &error)
  {
    return fail("corrupt_checkpoint", error.what());
  }
  catch (mappo::TrainingAborted const &error)
  {
    return fail("training_aborted", error.what());
  }
  catch (std::exception const &error)
  {
    return fail("runtime", error.what());
  }
}
