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

#include "vecmarket/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <limits>
#include <set>
#include <tuple>

namespace vecmarket {
namespace experiment {
namespace {

constexpr std::uint64_t kEvalStream  = 0xE0000;
constexpr std::uint64_t kTrainStream = 0x70000;

constexpr double kWidth        = 720.0;
constexpr double kHeight       = 440.0;
constexpr double kLeft         = 80.0;
constexpr double kRight        = 200.0;
constexpr double kTop          = 40.0;
constexpr double kBottom       = 60.0;
constexpr std::size_t kYTicks  = 5;

constexpr std::array<char const *, 9> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                                  "#ff7f0e", "#9467bd", "#8c564b",
                                                  "#e377c2", "#7f7f7f", "#17becf"};

std::string metric_title(std::string_view metric)
{
  if (metric == "reward")
  {
    return "Mean reward";
  }
  if (metric == "sw")
  {
    return "Mean social welfare";
  }
  if (metric == "budget")
  {
    return "Mean budget cost";
  }
  return "Mean latency (s)";
}

std::string series_label(MetricsRecord const &record)
{
  return fmt::format("{} / {}", market::to_string(record.mechanism),
                     mappo::to_string(record.bidder));
}

// fixed-precision coordinates keep the SVG text stable
std::string coord(double value)
{
  return fmt::format("{:.2f}", value);
}

}  // namespace

std::string experiment_id(ExperimentConfig const &config)
{
  // FNV-1a over the canonical serialization, minus where the outputs go
  ExperimentConfig content = config;
  content.out_dir.clear();
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char const c : serialize_config(content))
  {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", hash);
}

std::vector<std::string_view> const &metric_names()
{
  static std::vector<std::string_view> const names = {"reward", "sw", "budget", "latency"};
  return names;
}

std::pair<double, double> metric_value(mappo::Aggregate const &aggregate, std::string_view metric)
{
  if (metric == "reward")
  {
    return {aggregate.reward_mean, aggregate.reward_std};
  }
  if (metric == "sw")
  {
    return {aggregate.sw_mean, aggregate.sw_std};
  }
  if (metric == "budget")
  {
    return {aggregate.budget_mean, aggregate.budget_std};
  }
  if (metric == "latency")
  {
    return {aggregate.latency_mean, aggregate.latency_std};
  }
  throw EmptyRecords(fmt::format("no records carry metric '{}'", metric));
}

void write_metrics_header(std::ostream &out)
{
  out << "experiment_id,iov_count,mechanism,bidder,episodes,reward_mean,reward_std,sw_mean,"
         "sw_std,budget_mean,budget_std,latency_mean,latency_std\n";
}

void write_metrics_row(std::ostream &out, MetricsRecord const &record)
{
  auto const &m = record.metrics;
  out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", record.experiment_id,
                     record.iov_count, market::to_string(record.mechanism),
                     mappo::to_string(record.bidder), m.episodes, m.reward_mean, m.reward_std,
                     m.sw_mean, m.sw_std, m.budget_mean, m.budget_std, m.latency_mean,
                     m.latency_std);
}

simenv::WorldConfig cell_world(ExperimentConfig const &config, std::size_t iov_count)
{
  simenv::WorldConfig world = config.world;
  world.vehicle_count       = iov_count;
  return world;
}

std::uint64_t cell_eval_seed(ExperimentConfig const &config, std::size_t iov_count)
{
  return mix_seed(config.seed, kEvalStream + iov_count);
}

std::uint64_t cell_train_seed(ExperimentConfig const &config, std::size_t iov_count,
                              MechanismKind mechanism)
{
  return mix_seed(mix_seed(config.seed, kTrainStream + iov_count),
                  static_cast<std::uint64_t>(mechanism));
}

MetricsRecord evaluate_cell(ExperimentConfig const &config, std::size_t iov_count,
                            MechanismKind mechanism, BidderKind bidder,
                            mappo::AgentPool const *agents)
{
  if (bidder == BidderKind::Learned && agents == nullptr)
  {
    throw std::invalid_argument("evaluate_cell: a learned bidder needs trained agents");
  }
  mappo::PolicySource const source{bidder, agents, false};

  MetricsRecord record;
  record.experiment_id = experiment_id(config);
  record.iov_count     = iov_count;
  record.mechanism     = mechanism;
  record.bidder        = bidder;
  record.metrics       = mappo::evaluate(source, cell_world(config, iov_count), mechanism,
                                         config.train, config.episodes_per_eval,
                                         cell_eval_seed(config, iov_count));
  return record;
}

SweepResult run_sweep(ExperimentConfig const &config)
{
  validate(config);
  std::filesystem::path const out_dir(config.out_dir);
  std::filesystem::create_directories(out_dir);

  SweepResult result;
  result.metrics_csv = out_dir / "metrics.csv";
  std::ofstream csv(result.metrics_csv, std::ios::binary | std::ios::trunc);
  if (!csv)
  {
    throw std::runtime_error(fmt::format("cannot write '{}'", result.metrics_csv.string()));
  }
  write_metrics_header(csv);
  csv.flush();

  for (std::size_t const iov : config.iov_counts)
  {
    for (MechanismKind const mechanism : config.mechanisms)
    {
      for (BidderKind const bidder : config.bidders)
      {
        MetricsRecord record;
        if (bidder == BidderKind::Learned)
        {
          auto const train_dir =
              out_dir / fmt::format("train_{}_iov{}", market::to_string(mechanism), iov);
          auto const trained = mappo::train(config.train, cell_world(config, iov), mechanism,
                                            cell_train_seed(config, iov, mechanism), train_dir);
          record = evaluate_cell(config, iov, mechanism, bidder, &trained.agents);
        }
        else
        {
          record = evaluate_cell(config, iov, mechanism, bidder);
        }
        write_metrics_row(csv, record);
        csv.flush();
        result.records.push_back(std::move(record));
      }
    }
  }

  std::set<std::tuple<std::size_t, MechanismKind, BidderKind>> seen;
  for (auto const &record : result.records)
  {
    if (record.metrics.empty() || !seen.emplace(record.iov_count, record.mechanism, record.bidder).second)
    {
      throw MissingCell(fmt::format("sweep cell (iov {}, {}, {}) is empty or duplicated",
                                    record.iov_count, market::to_string(record.mechanism),
                                    mappo::to_string(record.bidder)));
    }
  }
  std::set<std::size_t> const distinct_iovs(config.iov_counts.begin(), config.iov_counts.end());
  std::set<MechanismKind> const distinct_mechs(config.mechanisms.begin(), config.mechanisms.end());
  std::set<BidderKind> const distinct_bidders(config.bidders.begin(), config.bidders.end());
  std::size_t const expected = distinct_iovs.size() * distinct_mechs.size() * distinct_bidders.size();
  if (seen.size() != expected || result.records.size() != expected)
  {
    throw MissingCell(fmt::format("sweep produced {} records for {} cells", result.records.size(),
                                  expected));
  }

  for (auto const metric : metric_names())
  {
    auto const path = out_dir / fmt::format("{}.svg", metric);
    emit_plot(result.records, metric, path);
    result.plots.push_back(path);
  }
  return result;
}

std::string render_plot(std::span<MetricsRecord const> records, std::string_view metric)
{
  if (records.empty())
  {
    throw EmptyRecords("emit_plot: no records to plot");
  }
  auto const &names = metric_names();
  if (std::find(names.begin(), names.end(), metric) == names.end())
  {
    throw EmptyRecords(fmt::format("emit_plot: no records carry metric '{}'", metric));
  }

  // series in order of first appearance, points sorted by IoV count
  std::vector<std::string>                                        order;
  std::map<std::string, std::vector<std::pair<std::size_t, double>>> series;
  std::set<std::size_t>                                           xs;
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -std::numeric_limits<double>::infinity();
  for (auto const &record : records)
  {
    std::string const label = series_label(record);
    if (series.find(label) == series.end())
    {
      order.push_back(label);
    }
    double const y = metric_value(record.metrics, metric).first;
    series[label].emplace_back(record.iov_count, y);
    xs.insert(record.iov_count);
    y_min = std::min(y_min, y);
    y_max = std::max(y_max, y);
  }
  for (auto &[label, points] : series)
  {
    std::stable_sort(points.begin(), points.end(),
                     [](auto const &a, auto const &b) { return a.first < b.first; });
  }

  if (!std::isfinite(y_min) || !std::isfinite(y_max))
  {
    y_min = 0.0;
    y_max = 1.0;
  }
  if (y_max - y_min < 1e-12 * std::max(1.0, std::abs(y_max)))
  {
    double const pad = std::max(1.0, std::abs(y_max)) * 0.05;
    y_min -= pad;
    y_max += pad;
  }
  else
  {
    double const pad = (y_max - y_min) * 0.05;
    y_min -= pad;
    y_max += pad;
  }

  double const x_lo   = static_cast<double>(*xs.begin());
  double const x_hi   = static_cast<double>(*xs.rbegin());
  double const plot_w = kWidth - kLeft - kRight;
  double const plot_h = kHeight - kTop - kBottom;

  auto px = [&](std::size_t x) {
    if (x_hi == x_lo)
    {
      return kLeft + plot_w / 2.0;
    }
    return kLeft + (static_cast<double>(x) - x_lo) / (x_hi - x_lo) * plot_w;
  };
  auto py = [&](double y) { return kTop + (y_max - y) / (y_max - y_min) * plot_h; };

  std::string svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth,
                     kHeight);
  svg += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{} versus "
                     "number of IoVs</text>\n",
                     coord(kLeft + plot_w / 2.0), metric_title(metric));

  // axes
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n",
                     coord(kLeft), coord(kTop + plot_h), coord(kLeft + plot_w));
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
                     coord(kLeft), coord(kTop), coord(kTop + plot_h));
  for (std::size_t const x : xs)
  {
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
                       coord(px(x)), coord(kTop + plot_h), coord(kTop + plot_h + 5.0));
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", coord(px(x)),
                       coord(kTop + plot_h + 20.0), x);
  }
  for (std::size_t i = 0; i < kYTicks; ++i)
  {
    double const y = y_min + (y_max - y_min) * static_cast<double>(i) / (kYTicks - 1);
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#dddddd\"/>\n",
                       coord(kLeft), coord(py(y)), coord(kLeft + plot_w));
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4g}</text>\n",
                       coord(kLeft - 8.0), coord(py(y) + 4.0), y);
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">Number of IoVs</text>\n",
                     coord(kLeft + plot_w / 2.0), coord(kHeight - 15.0));
  svg += fmt::format("<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" "
                     "transform=\"rotate(-90 18 {0})\">{1}</text>\n",
                     coord(kTop + plot_h / 2.0), metric_title(metric));

  // series; circles mark data points only
  for (std::size_t s = 0; s < order.size(); ++s)
  {
    auto const &points = series.at(order[s]);
    char const *colour = kPalette[s % kPalette.size()];
    if (points.size() > 1)
    {
      std::string path;
      for (auto const &[x, y] : points)
      {
        path += fmt::format("{}{},{}", path.empty() ? "" : " ", coord(px(x)), coord(py(y)));
      }
      svg += fmt::format(
          "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", colour,
          path);
    }
    for (auto const &[x, y] : points)
    {
      svg += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>\n", coord(px(x)),
                         coord(py(y)), colour);
    }

    double const legend_y = kTop + 10.0 + 20.0 * static_cast<double>(s);
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"10\" fill=\"{}\"/>\n",
                       coord(kLeft + plot_w + 20.0), coord(legend_y - 9.0), colour);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", coord(kLeft + plot_w + 40.0),
                       coord(legend_y), order[s]);
  }
  svg += "</svg>\n";
  return svg;
}

void emit_plot(std::span<MetricsRecord const> records, std::string_view metric,
               std::filesystem::path const &path)
{
  std::string const svg = render_plot(records, metric);
  std::ofstream     out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw std::runtime_error(fmt::format("cannot write plot '{}'", path.string()));
  }
  out << svg;
}

}  // namespace experiment
}  // namespace vecmarket
