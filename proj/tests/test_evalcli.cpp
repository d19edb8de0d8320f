#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>

#include <gtest/gtest.h>

#include "pagnet/csv.hpp"
#include "pagnet/envs.hpp"
#include "pagnet/eval.hpp"
#include "pagnet/figures.hpp"
#include "pagnet/trainer.hpp"
#include "test_support.hpp"

using namespace pagnet;
using pagnet::fixture::scratch_dir;
using pagnet::fixture::slurp;
using pagnet::fixture::small_config;

namespace fs = std::filesystem;

namespace {

CsvTable metrics_run(const std::vector<std::pair<std::int64_t, double>>& points) {
  CsvTable t;
  t.header = kMetricsHeader;
  for (const auto& [step, v] : points) {
    std::vector<std::string> row(kMetricsHeader.size());
    row[0] = std::to_string(step);
    row[2] = "pagnet";
    row[kMetricsHeader.size() - 2] = format_number(v);  // test_win_rate
    t.rows.push_back(row);
  }
  return t;
}

int run_cli(const std::string& args, const fs::path& err_file = {}) {
  std::string cmd = std::string(PAGNET_CLI) + " " + args;
  cmd += err_file.empty() ? " >/dev/null 2>&1" : " >/dev/null 2>" + err_file.string();
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST(MeanCi, ClosedFormCases) {
  const auto two = mean_ci95({0.0, 1.0});
  EXPECT_DOUBLE_EQ(two.mean, 0.5);
  EXPECT_NEAR(two.half_width, 1.96 * 0.5 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(two.half_width, 0.693, 1e-3);
  const auto flat = mean_ci95(std::vector<double>(5, 0.8));
  EXPECT_NEAR(flat.mean, 0.8, 1e-15);
  EXPECT_EQ(flat.half_width, 0.0);
  EXPECT_EQ(mean_ci95({3.0}).half_width, 0.0);
}

TEST(Curves, AggregationIsPermutationInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u;
  std::vector<CsvTable> runs;
  for (int r = 0; r < 5; ++r) {
    std::vector<std::pair<std::int64_t, double>> pts;
    for (int s = 0; s < 4; ++s) pts.emplace_back(s * 100, u(rng));
    runs.push_back(metrics_run(pts));
  }
  const auto base = aggregate_curves(runs, "test_win_rate");
  ASSERT_EQ(base.size(), 4u);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(runs.begin(), runs.end(), rng);
    const auto other = aggregate_curves(runs, "test_win_rate");
    for (size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(other[i].step, base[i].step);
      EXPECT_EQ(other[i].value.mean, base[i].value.mean);
      EXPECT_EQ(other[i].value.half_width, base[i].value.half_width);
      EXPECT_EQ(other[i].runs, 5);
    }
  }
}

TEST(Curves, SingleRunHasZeroWidthAndMissingColumnIsNamed) {
  const auto c = aggregate_curves({metrics_run({{0, 0.3}, {10, 0.4}})}, "test_win_rate");
  for (const auto& p : c) EXPECT_EQ(p.value.half_width, 0.0);
  CsvTable broken = metrics_run({{0, 0.3}});
  broken.header[11] = "win";
  try {
    aggregate_curves({broken}, "test_win_rate");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("test_win_rate"), std::string::npos);
  }
}

TEST(Curves, FilesRoundTrip) {
  const auto dir = scratch_dir("curves");
  const auto curve = aggregate_curves({metrics_run({{0, 0.0}, {5, 1.0}}), metrics_run({{0, 1.0}, {5, 1.0}})},
                                      "test_win_rate");
  write_curves((dir / "curves.csv").string(), {"test_win_rate"}, {curve});
  write_curve_figure((dir / "c.svg").string(), "test_win_rate", curve);
  const auto table = read_csv((dir / "curves.csv").string());
  EXPECT_EQ(table.header, (std::vector<std::string>{"metric", "step", "mean", "ci95_half_width", "runs"}));
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_NEAR(std::stod(table.rows[0][3]), 0.693, 1e-3);
  const auto svg = fig::read_svg((dir / "c.svg").string());
  EXPECT_GE(svg.polylines, 1);
  EXPECT_THROW(write_curve_figure((dir / "c.png").string(), "test_win_rate", curve), ConfigError);
}

TEST(Evaluate, StepCountMatchesEpisodeLengths) {
  const auto cfg = small_config();
  Hallway env({cfg.env.hallway});
  Learner learner(cfg, env);
  const auto before = env.steps_taken();
  const auto report = evaluate(learner, env, 7, 3);
  std::int64_t total = 0;
  for (const auto& r : report.rows) total += r.length;
  EXPECT_EQ(report.n_episodes, 7);
  EXPECT_EQ(env.steps_taken() - before, total);

  const auto again = evaluate(learner, env, 7, 3);
  EXPECT_EQ(again.ret.mean, report.ret.mean);
  EXPECT_EQ(again.win_rate, report.win_rate);

  Hallway other({{4, 6}});
  EXPECT_THROW(evaluate(learner, other, 1, 0), LoadError);
}

TEST(Evaluate, UntrainedPolicyRarelyWinsHallway) {
  TrainConfig cfg;
  Hallway env({cfg.env.hallway});
  Learner learner(cfg, env);
  EXPECT_LE(evaluate(learner, env, 100, 11).win_rate, 0.05);
  EXPECT_LE(evaluate_random(env, 1000, 11).win_rate, 0.05);
}

TEST(Trace, SchemaAndRoundTrip) {
  const auto cfg = small_config();
  Hallway env({cfg.env.hallway});
  Learner learner(cfg, env);
  const auto dump = trace(learner, env, 5);
  EXPECT_GT(dump.length(), 0);
  EXPECT_LE(dump.length(), env.spec().horizon);
  const auto dir = scratch_dir("trace");
  const auto csv = (dir / "trace.csv").string();
  write_trace_csv(csv, dump, 2);
  const auto table = read_csv(csv);
  const auto L = env.spec().state_len;
  ASSERT_EQ(table.header.size(), static_cast<size_t>(3 + 2 + 2 * L));
  EXPECT_EQ(table.header[0], "t");
  EXPECT_EQ(table.header[1], "mean_W");
  EXPECT_EQ(table.header[2], "mean_one_minus_W");
  EXPECT_EQ(table.header[3], "liveness_0");
  EXPECT_EQ(table.header[5], "state_0");
  EXPECT_EQ(table.header[5 + L], "generated_0");
  EXPECT_EQ(table.header, trace_header(2, L));
  EXPECT_EQ(static_cast<int>(table.rows.size()), dump.length());

  const auto back = read_trace_csv(csv, 2, L);
  ASSERT_EQ(back.length(), dump.length());
  for (int t = 0; t < dump.length(); ++t) {
    EXPECT_NEAR(back.mean_w[t], dump.mean_w[t], 1e-8);
    EXPECT_NEAR(back.mean_w[t] + back.mean_one_minus_w[t], 1.0, 1e-6);
    EXPECT_EQ(back.state[t], dump.state[t]);
  }
  write_trace_figures((dir / "w.svg").string(), (dir / "c.svg").string(), dump, env.state_layout());
  EXPECT_GE(fig::read_svg((dir / "w.svg").string()).polylines, 2);
  EXPECT_GE(fig::read_svg((dir / "c.svg").string()).rects, 2 * L);
  EXPECT_THROW(read_trace_csv(csv, 3, L), InputError);
}

TEST(Fidelity, ArgmaxMatchCounting) {
  Hallway env({{2, 3}});
  TraceDump d;
  // Step 0 fully matches; step 1 gets agent 1 wrong.
  d.state = {{1, 0, 0, 0, 1, 0, 0}, {0, 1, 0, 0, 0, 1, 0}};
  d.generated = {{0.9, 0.1, 0, 0, 0.8, 0.1, 0}, {0.1, 0.7, 0, 0.9, 0, 0.2, 0}};
  d.mean_w = {0, 0};
  const auto f = completion_fidelity(d, env.state_layout());
  EXPECT_DOUBLE_EQ(f.step_match, 0.5);
  EXPECT_DOUBLE_EQ(f.agent_match, 0.75);
}

TEST(Cli, VerbsRunAndErrorsAreCategorized) {
  const auto dir = scratch_dir("cli");
  const auto cfg_path = dir / "cfg.json";
  {
    auto doc = to_json(small_config());
    doc["train"]["total_env_steps"] = 40;
    doc["train"]["eval_interval"] = 20;
    std::ofstream(cfg_path) << doc.dump(2);
  }
  const auto run = dir / "run";
  EXPECT_EQ(run_cli("train --config " + cfg_path.string() + " --seed 2 --out-dir " + run.string()), 0);
  EXPECT_TRUE(fs::exists(run / "metrics.csv"));
  const auto ck = (run / "model.ckpt").string();
  EXPECT_EQ(run_cli("evaluate --config " + cfg_path.string() + " --checkpoint " + ck + " --episodes 3 --out-dir " +
                    (dir / "eval").string()),
            0);
  EXPECT_EQ(read_csv((dir / "eval" / "eval.csv").string()).rows.size(), 3u);
  EXPECT_EQ(run_cli("trace --config " + cfg_path.string() + " --checkpoint " + ck + " --out-dir " +
                    (dir / "trace").string()),
            0);
  EXPECT_NO_THROW(read_trace_csv((dir / "trace" / "trace.csv").string(), 2, 7));
  EXPECT_NO_THROW(fig::read_svg((dir / "trace" / "trace_weights.svg").string()));
  EXPECT_EQ(run_cli("curves --metrics " + (run / "metrics.csv").string() + " " + (run / "metrics.csv").string() +
                    " --out-dir " + (dir / "curves").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "curves" / "curve_test_win_rate.svg"));
  EXPECT_EQ(run_cli("collect --config " + cfg_path.string() + " --episodes 20 --out " + (dir / "d.bin").string()), 0);
  EXPECT_EQ(run_cli("pretrain --config " + cfg_path.string() + " --set train.pretrain_updates=3 --dataset " +
                    (dir / "d.bin").string() + " --out " + (dir / "pre.ckpt").string()),
            0);
  EXPECT_EQ(run_cli("train --config " + cfg_path.string() + " --mode pagnet_pt --set train.pretrained=" +
                    (dir / "pre.ckpt").string() + " --out-dir " + (dir / "pt").string()),
            0);

  // Failures: exit nonzero with one "error: <category>: ..." line.
  const auto err = dir / "err.txt";
  EXPECT_NE(run_cli("evaluate --checkpoint " + ck + " --set hallway.lengths=[4,6]", err), 0);
  EXPECT_EQ(slurp(err).rfind("error: load: ", 0), 0u) << slurp(err);
  EXPECT_NE(run_cli("train --mode nope", err), 0);
  EXPECT_EQ(slurp(err).rfind("error: config: ", 0), 0u) << slurp(err);
  EXPECT_NE(run_cli("evaluate --checkpoint " + (dir / "missing.ckpt").string(), err), 0);
  EXPECT_EQ(slurp(err).rfind("error: io: ", 0), 0u) << slurp(err);
  EXPECT_NE(run_cli("frobnicate", err), 0);
  EXPECT_EQ(slurp(err).rfind("error: usage: ", 0), 0u) << slurp(err);
  const auto text = slurp(err);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
}
