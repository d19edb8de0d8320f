#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pagnet/csv.hpp"
#include "pagnet/env.hpp"
#include "pagnet/learner.hpp"

namespace pagnet {

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 * population std / sqrt(k)
};

// Normal-approximation 95% interval. Values are summed in sorted order so the
// result does not depend on input order.
MeanCi mean_ci95(std::vector<double> values);

struct EpisodeRow {
  int episode = 0;
  double ret = 0.0;
  int length = 0;
  bool won = false;
};

struct EvalReport {
  int n_episodes = 0;
  MeanCi ret;
  double win_rate = 0.0;
  double mean_length = 0.0;
  double mean_w = 0.0;
  std::vector<EpisodeRow> rows;
};

// Greedy (epsilon = 0) episodes. Environment seeds and message noise come from
// one stream seeded by `seed`, so identical inputs give identical reports.
EvalReport evaluate(Learner& learner, Environment& env, int episodes, std::int64_t seed);
EvalReport evaluate_random(Environment& env, int episodes, std::int64_t seed);
void write_eval_report(const std::string& csv_path, const std::string& summary_path,
                       const EvalReport& report);

struct TraceDump {
  std::vector<double> mean_w;
  std::vector<double> mean_one_minus_w;
  std::vector<std::vector<double>> liveness;   // [t][agent]
  std::vector<std::vector<double>> state;      // [t][L]
  std::vector<std::vector<double>> generated;  // [t][L]
  int length() const { return static_cast<int>(mean_w.size()); }
};

TraceDump trace(Learner& learner, Environment& env, std::int64_t seed);
std::vector<std::string> trace_header(int n_agents, int state_len);
void write_trace_csv(const std::string& path, const TraceDump& dump, int n_agents);
TraceDump read_trace_csv(const std::string& path, int n_agents, int state_len);
// Weight-over-time plot with liveness bars, and generated-vs-true heatmaps.
void write_trace_figures(const std::string& weight_path, const std::string& completion_path,
                         const TraceDump& dump, const StateLayout& layout);

struct CompletionFidelity {
  double step_match = 0.0;   // fraction of steps where every one-hot segment's argmax matches
  double agent_match = 0.0;  // fraction of (step, segment) pairs that match
};
CompletionFidelity completion_fidelity(const TraceDump& dump, const StateLayout& layout);

extern const std::vector<std::string> kMetricsHeader;

struct CurvePoint {
  std::int64_t step = 0;
  MeanCi value;
  int runs = 0;
};

// Per-step mean and 95% CI of `metric` across runs; rows with an empty value
// are skipped. Throws InputError naming a missing column.
std::vector<CurvePoint> aggregate_curves(const std::vector<CsvTable>& runs, const std::string& metric);
void write_curves(const std::string& csv_path, const std::vector<std::string>& metrics,
                  const std::vector<std::vector<CurvePoint>>& curves);
void write_curve_figure(const std::string& path, const std::string& metric,
                        const std::vector<CurvePoint>& curve);

}  // namespace pagnet
