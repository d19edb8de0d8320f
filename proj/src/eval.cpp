#include "pagnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "pagnet/error.hpp"
#include "pagnet/envs.hpp"
#include "pagnet/figures.hpp"

namespace pagnet {

const std::vector<std::string> kMetricsHeader = {
    "step",     "episode",  "mode",         "seed",        "epsilon",       "td_loss", "d_loss",
    "g_loss",   "mse_loss", "train_return", "test_return", "test_win_rate", "mean_W"};

MeanCi mean_ci95(std::vector<double> values) {
  MeanCi out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  const double k = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / k;
  std::vector<double> sq;
  sq.reserve(values.size());
  for (double v : values) sq.push_back((v - out.mean) * (v - out.mean));
  std::sort(sq.begin(), sq.end());
  const double var = std::accumulate(sq.begin(), sq.end(), 0.0) / k;
  out.half_width = 1.96 * std::sqrt(var) / std::sqrt(k);
  return out;
}

namespace {

EvalReport summarize(std::vector<EpisodeRow> rows, double mean_w) {
  EvalReport r;
  r.n_episodes = static_cast<int>(rows.size());
  std::vector<double> returns;
  double wins = 0.0, length = 0.0;
  for (const auto& row : rows) {
    returns.push_back(row.ret);
    wins += row.won;
    length += row.length;
  }
  r.ret = mean_ci95(returns);
  if (!rows.empty()) {
    r.win_rate = wins / rows.size();
    r.mean_length = length / rows.size();
  }
  r.mean_w = mean_w;
  r.rows = std::move(rows);
  return r;
}

}  // namespace

EvalReport evaluate(Learner& learner, Environment& env, int episodes, std::int64_t seed) {
  if (env_hash(env) != env_hash(*make_environment(learner.config().env)))
    throw LoadError("env_hash mismatch between checkpoint and environment");
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::vector<EpisodeRow> rows;
  double w_sum = 0.0;
  std::int64_t w_count = 0;
  for (int e = 0; e < episodes; ++e) {
    const auto env_seed = static_cast<std::int64_t>(rng() >> 1);
    auto rec = learner.rollout(env, env_seed, 0.0, rng);
    rows.push_back({e, rec.episode_return(), rec.length, rec.won});
    for (float w : rec.mean_w) w_sum += w;
    w_count += static_cast<std::int64_t>(rec.mean_w.size());
  }
  return summarize(std::move(rows), w_count ? w_sum / w_count : 0.0);
}

EvalReport evaluate_random(Environment& env, int episodes, std::int64_t seed) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::vector<EpisodeRow> rows;
  for (int e = 0; e < episodes; ++e) {
    const auto env_seed = static_cast<std::int64_t>(rng() >> 1);
    auto rec = random_rollout(env, env_seed, rng);
    rows.push_back({e, rec.episode_return(), rec.length, rec.won});
  }
  return summarize(std::move(rows), 0.0);
}

void write_eval_report(const std::string& csv_path, const std::string& summary_path,
                       const EvalReport& report) {
  CsvTable t;
  t.header = {"episode", "return", "length", "won"};
  for (const auto& r : report.rows)
    t.rows.push_back({std::to_string(r.episode), format_number(r.ret), std::to_string(r.length),
                      r.won ? "1" : "0"});
  write_csv(csv_path, t);
  std::ofstream out(summary_path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + summary_path + "' for writing");
  out << "episodes " << report.n_episodes << "\n"
      << "mean_return " << format_number(report.ret.mean) << "\n"
      << "return_ci95_half_width " << format_number(report.ret.half_width) << "\n"
      << "win_rate " << format_number(report.win_rate) << "\n"
      << "mean_length " << format_number(report.mean_length) << "\n"
      << "mean_W " << format_number(report.mean_w) << "\n";
}

TraceDump trace(Learner& learner, Environment& env, std::int64_t seed) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::vector<StepView> views;
  const auto env_seed = static_cast<std::int64_t>(rng() >> 1);
  auto rec = learner.rollout(env, env_seed, 0.0, rng, &views);
  const int big_l = rec.state_len;
  TraceDump d;
  for (int t = 0; t < rec.length; ++t) {
    const auto& v = views[t];
    const double w = v.weights.mean().item<double>();
    d.mean_w.push_back(w);
    d.mean_one_minus_w.push_back((1 - v.weights).mean().item<double>());
    auto s = rec.state_at(t);
    d.liveness.push_back(env.liveness(s));
    d.state.push_back(s.values);
    std::vector<double> g(big_l, 0.0);
    if (v.generated.defined()) {
      auto gd = v.generated.to(torch::kDouble).contiguous();
      std::copy(gd.data_ptr<double>(), gd.data_ptr<double>() + big_l, g.begin());
    }
    d.generated.push_back(std::move(g));
  }
  return d;
}

std::vector<std::string> trace_header(int n_agents, int state_len) {
  std::vector<std::string> h = {"t", "mean_W", "mean_one_minus_W"};
  for (int i = 0; i < n_agents; ++i) h.push_back("liveness_" + std::to_string(i));
  for (int k = 0; k < state_len; ++k) h.push_back("state_" + std::to_string(k));
  for (int k = 0; k < state_len; ++k) h.push_back("generated_" + std::to_string(k));
  return h;
}

void write_trace_csv(const std::string& path, const TraceDump& d, int n_agents) {
  const int big_l = d.state.empty() ? 0 : static_cast<int>(d.state.front().size());
  CsvTable t;
  t.header = trace_header(n_agents, big_l);
  for (int s = 0; s < d.length(); ++s) {
    std::vector<std::string> row = {std::to_string(s), format_number(d.mean_w[s]),
                                    format_number(d.mean_one_minus_w[s])};
    for (double v : d.liveness[s]) row.push_back(format_number(v));
    for (double v : d.state[s]) row.push_back(format_number(v));
    for (double v : d.generated[s]) row.push_back(format_number(v));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

TraceDump read_trace_csv(const std::string& path, int n_agents, int state_len) {
  auto t = read_csv(path);
  const auto want = trace_header(n_agents, state_len);
  if (t.header != want) {
    for (const auto& col : want) t.column(col);
    throw InputError("'" + path + "' has unexpected trace columns");
  }
  TraceDump d;
  for (const auto& row : t.rows) {
    size_t k = 1;
    d.mean_w.push_back(std::stod(row[k++]));
    d.mean_one_minus_w.push_back(std::stod(row[k++]));
    std::vector<double> live, s, g;
    for (int i = 0; i < n_agents; ++i) live.push_back(std::stod(row[k++]));
    for (int i = 0; i < state_len; ++i) s.push_back(std::stod(row[k++]));
    for (int i = 0; i < state_len; ++i) g.push_back(std::stod(row[k++]));
    d.liveness.push_back(std::move(live));
    d.state.push_back(std::move(s));
    d.generated.push_back(std::move(g));
  }
  return d;
}

void write_trace_figures(const std::string& weight_path, const std::string& completion_path,
                         const TraceDump& d, const StateLayout& layout) {
  fig::LinePlot plot;
  plot.title = "Average communication weight";
  plot.x_label = "timestep";
  plot.y_label = "weight";
  for (int t = 0; t < d.length(); ++t) plot.x.push_back(t);
  plot.series.push_back({"mean W", d.mean_w, {}, {}});
  plot.series.push_back({"mean 1-W", d.mean_one_minus_w, {}, {}});
  const size_t n = d.liveness.empty() ? 0 : d.liveness.front().size();
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> bar;
    for (const auto& row : d.liveness) bar.push_back(row[i]);
    plot.bars.push_back(std::move(bar));
    plot.bar_names.push_back("agent " + std::to_string(i) + " liveness");
  }
  fig::write_line_plot(weight_path, plot);

  fig::HeatmapPair map;
  map.title = "Generated vs true state";
  map.left_label = "generated";
  map.right_label = "true";
  map.left = d.generated;
  map.right = d.state;
  for (const auto& seg : layout.segments) map.boundaries.push_back(seg.begin);
  fig::write_heatmap_pair(completion_path, map);
}

CompletionFidelity completion_fidelity(const TraceDump& d, const StateLayout& layout) {
  CompletionFidelity f;
  int steps = 0, step_hits = 0, pairs = 0, pair_hits = 0;
  for (int t = 0; t < d.length(); ++t) {
    bool all = true;
    bool any_segment = false;
    for (const auto& seg : layout.segments) {
      if (!seg.one_hot) continue;
      any_segment = true;
      const auto& s = d.state[t];
      const auto& g = d.generated[t];
      const auto ts = std::max_element(s.begin() + seg.begin, s.begin() + seg.end) - s.begin();
      const auto gs = std::max_element(g.begin() + seg.begin, g.begin() + seg.end) - g.begin();
      ++pairs;
      if (ts == gs) {
        ++pair_hits;
      } else {
        all = false;
      }
    }
    if (!any_segment) continue;
    ++steps;
    step_hits += all;
  }
  if (steps) f.step_match = static_cast<double>(step_hits) / steps;
  if (pairs) f.agent_match = static_cast<double>(pair_hits) / pairs;
  return f;
}

std::vector<CurvePoint> aggregate_curves(const std::vector<CsvTable>& runs, const std::string& metric) {
  std::map<std::int64_t, std::vector<double>> by_step;
  for (const auto& run : runs) {
    for (const auto& col : kMetricsHeader) run.column(col);
    const auto step_col = run.column("step");
    const auto value_col = run.column(metric);
    for (const auto& row : run.rows) {
      if (row[value_col].empty()) continue;
      by_step[std::stoll(row[step_col])].push_back(std::stod(row[value_col]));
    }
  }
  std::vector<CurvePoint> out;
  for (auto& [step, values] : by_step) {
    CurvePoint p;
    p.step = step;
    p.runs = static_cast<int>(values.size());
    p.value = mean_ci95(values);
    out.push_back(p);
  }
  return out;
}

void write_curves(const std::string& csv_path, const std::vector<std::string>& metrics,
                  const std::vector<std::vector<CurvePoint>>& curves) {
  CsvTable t;
  t.header = {"metric", "step", "mean", "ci95_half_width", "runs"};
  for (size_t m = 0; m < metrics.size(); ++m)
    for (const auto& p : curves[m])
      t.rows.push_back({metrics[m], std::to_string(p.step), format_number(p.value.mean),
                        format_number(p.value.half_width), std::to_string(p.runs)});
  write_csv(csv_path, t);
}

void write_curve_figure(const std::string& path, const std::string& metric,
                        const std::vector<CurvePoint>& curve) {
  fig::LinePlot plot;
  plot.title = metric + " (mean, 95% CI)";
  plot.x_label = "environment steps";
  plot.y_label = metric;
  fig::Series s;
  s.name = metric;
  for (const auto& p : curve) {
    plot.x.push_back(static_cast<double>(p.step));
    s.y.push_back(p.value.mean);
    s.lo.push_back(p.value.mean - p.value.half_width);
    s.hi.push_back(p.value.mean + p.value.half_width);
  }
  plot.series.push_back(std::move(s));
  fig::write_line_plot(path, plot);
}

}  // namespace pagnet
