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

#include "vecmarket/config.hpp"
#include "vecmarket/mappo.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vecmarket {
namespace experiment {

/// One evaluated (iov_count, mechanism, bidder) cell.
struct MetricsRecord
{
  std::string      experiment_id;
  std::size_t      iov_count = 0;
  MechanismKind    mechanism = MechanismKind::McAfeeDouble;
  BidderKind       bidder    = BidderKind::Truthful;
  mappo::Aggregate metrics;

  bool operator==(MetricsRecord const &) const = default;
};

class EmptyRecords : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a sweep finishes without exactly one record per cell.
class MissingCell : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

/// Short stable digest of the serialized config (out_dir excluded), shared by
/// every record of a run.
std::string experiment_id(ExperimentConfig const &config);

/// Plot metrics: "reward", "sw", "budget", "latency".
std::vector<std::string_view> const &metric_names();

/// Mean and std of the named metric; throws EmptyRecords for an unknown name.
std::pair<double, double> metric_value(mappo::Aggregate const &aggregate, std::string_view metric);

void write_metrics_header(std::ostream &out);
void write_metrics_row(std::ostream &out, MetricsRecord const &record);

/// The world of one sweep cell: the configured world with vehicle_count = iov_count.
simenv::WorldConfig cell_world(ExperimentConfig const &config, std::size_t iov_count);

/// Seed of the evaluation episodes for an IoV count, shared by every
/// (mechanism, bidder) at that count so cells are compared on the same episodes.
std::uint64_t cell_eval_seed(ExperimentConfig const &config, std::size_t iov_count);

/// Seed of the training run of a Learned cell.
std::uint64_t cell_train_seed(ExperimentConfig const &config, std::size_t iov_count,
                              MechanismKind mechanism);

/// Evaluates one cell. Learned bidders need `agents`.
MetricsRecord evaluate_cell(ExperimentConfig const &config, std::size_t iov_count,
                            MechanismKind mechanism, BidderKind bidder,
                            mappo::AgentPool const *agents = nullptr);

struct SweepResult
{
  std::vector<MetricsRecord>         records;
  std::filesystem::path              metrics_csv;
  std::vector<std::filesystem::path> plots;
};

/// Runs every iov_count x mechanism x bidder cell in config order, training
/// Learned cells first, and writes metrics.csv plus one SVG per metric under
/// config.out_dir. The CSV is flushed after every cell, so a training abort
/// leaves the finished cells on disk.
SweepResult run_sweep(ExperimentConfig const &config);

/// Standalone SVG line chart of one metric against IoV count, one series per
/// (mechanism, bidder). Throws EmptyRecords on no records or an unknown metric.
void        emit_plot(std::span<MetricsRecord const> records, std::string_view metric,
                      std::filesystem::path const &path);
std::string render_plot(std::span<MetricsRecord const> records, std::string_view metric);

}  // namespace experiment
}  // namespace vecmarket
