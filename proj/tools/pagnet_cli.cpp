#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pagnet/checkpoint.hpp"
#include "pagnet/config.hpp"
#include "pagnet/envs.hpp"
#include "pagnet/error.hpp"
#include "pagnet/eval.hpp"
#include "pagnet/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pagnet;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string mode;
  std::string out_dir;
  bool unfreeze_generator = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--set", o.overrides, "key=value override (repeatable)");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--mode", o.mode, "pagnet | pagnet_fc | pagnet_pt | qmix");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
}

TrainConfig resolve(const CommonOptions& o, json base = json::object()) {
  json doc = std::move(base);
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw IoError("cannot open config '" + o.config_path + "'");
    try {
      doc.merge_patch(json::parse(in));
    } catch (const json::parse_error& e) {
      throw ConfigError("config '" + o.config_path + "' is not valid JSON: " + e.what());
    }
  }
  for (const auto& s : o.overrides) apply_override(doc, s);
  if (o.seed >= 0) doc["train"]["seed"] = o.seed;
  if (!o.mode.empty()) doc["train"]["mode"] = o.mode;
  if (!o.out_dir.empty()) doc["train"]["out_dir"] = o.out_dir;
  if (o.unfreeze_generator) doc["train"]["unfreeze_generator"] = true;
  return config_from_json(doc);
}

// Model and training settings come from the checkpoint; the environment block
// comes from the command line so a mismatch can be detected.
TrainConfig config_for_checkpoint(const ParameterCheckpoint& ck, const CommonOptions& o) {
  const auto it = ck.metadata.find("config");
  if (it == ck.metadata.end()) throw LoadError("config missing from checkpoint metadata");
  json stored = json::parse(it->second);
  const auto cli = resolve(o, stored);
  auto cfg = config_from_json(stored);
  cfg.env = cli.env;
  cfg.seed = cli.seed;
  cfg.out_dir = cli.out_dir;
  if (cfg.mode == Mode::kPagnetPt) {
    cfg.mode = Mode::kPagnet;  // same inference path; weights come from the checkpoint
    cfg.pretrained.clear();
  }
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
}

int exit_code(const std::string& category) {
  if (category == "config") return 2;
  if (category == "usage") return 3;
  if (category == "input") return 4;
  if (category == "load") return 5;
  if (category == "io") return 6;
  if (category == "training") return 7;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAGNet multi-agent communication laboratory"};
  app.require_subcommand(1);

  CommonOptions train_o, pre_o, col_o, eval_o, trace_o;
  std::string dataset_path, pre_out = "pretrained.ckpt";
  int collect_episodes = 1000;
  std::string collect_out = "dataset.bin";
  std::string ckpt_path;
  int eval_episodes = 100;
  std::string figure_ext = ".svg";
  std::vector<std::string> metric_files;
  std::vector<std::string> metrics{"test_return", "test_win_rate"};
  std::string curves_out = "curves";

  auto* train_cmd = app.add_subcommand("train", "run the full training loop");
  add_common(train_cmd, train_o);
  train_cmd->add_flag("--unfreeze-generator", train_o.unfreeze_generator,
                      "keep the generator trainable in pagnet_pt mode");

  auto* pre_cmd = app.add_subcommand("pretrain", "pretrain the weight net and generator offline");
  add_common(pre_cmd, pre_o);
  pre_cmd->add_option("--dataset", dataset_path, "episode file written by collect")->required();
  pre_cmd->add_option("--out", pre_out, "checkpoint to write");

  auto* col_cmd = app.add_subcommand("collect", "record random-policy episodes");
  add_common(col_cmd, col_o);
  col_cmd->add_option("--episodes", collect_episodes, "number of episodes");
  col_cmd->add_option("--out", collect_out, "episode file to write");

  auto* eval_cmd = app.add_subcommand("evaluate", "greedy evaluation of a checkpoint");
  add_common(eval_cmd, eval_o);
  eval_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  eval_cmd->add_option("--episodes", eval_episodes, "number of greedy episodes");

  auto* trace_cmd = app.add_subcommand("trace", "dump one greedy episode with weights and completions");
  add_common(trace_cmd, trace_o);
  trace_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  trace_cmd->add_option("--figure-ext", figure_ext, "figure file extension");

  auto* curves_cmd = app.add_subcommand("curves", "aggregate metrics files into learning curves");
  curves_cmd->add_option("--metrics", metric_files, "metrics.csv files, one per run")->required();
  curves_cmd->add_option("--metric", metrics, "metric columns to aggregate");
  curves_cmd->add_option("--out-dir", curves_out, "output directory");
  curves_cmd->add_option("--figure-ext", figure_ext, "figure file extension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << "\n";
    return 3;
  }

  try {
    if (*train_cmd) {
      const auto cfg = resolve(train_o);
      const auto s = train(cfg);
      std::cout << "env_steps " << s.env_steps << "\nepisodes " << s.episodes << "\nupdates " << s.updates
                << "\nlast_test_return " << s.last_test_return << "\nlast_test_win_rate "
                << s.last_test_win_rate << "\nbest_test_win_rate " << s.best_test_win_rate
                << "\nmetrics " << s.metrics_path << "\ncheckpoint " << s.checkpoint_path << "\n";
    } else if (*pre_cmd) {
      const auto cfg = resolve(pre_o);
      const auto report = pretrain(load_episodes(dataset_path), cfg, 100);
      report.checkpoint.save(pre_out);
      std::cout << "heldout_mse_initial " << report.heldout_mse.front() << "\nheldout_mse_final "
                << report.heldout_mse.back() << "\ncheckpoint " << pre_out << "\n";
    } else if (*col_cmd) {
      const auto cfg = resolve(col_o);
      save_episodes(collect_out, collect(cfg.env, collect_episodes, cfg.seed));
      std::cout << "episodes " << collect_episodes << "\ndataset " << collect_out << "\n";
    } else if (*eval_cmd) {
      const auto ck = ParameterCheckpoint::load(ckpt_path);
      const auto cfg = config_for_checkpoint(ck, eval_o);
      auto env = make_environment(cfg.env);
      ck.require_env_hash(env_hash(*env));
      Learner learner(cfg, *env);
      learner.load(ck);
      const auto report = evaluate(learner, *env, eval_episodes, cfg.seed);
      ensure_dir(cfg.out_dir);
      write_eval_report((fs::path(cfg.out_dir) / "eval.csv").string(),
                        (fs::path(cfg.out_dir) / "eval_summary.txt").string(), report);
      std::cout << "episodes " << report.n_episodes << "\nmean_return " << report.ret.mean
                << "\nreturn_ci95_half_width " << report.ret.half_width << "\nwin_rate " << report.win_rate
                << "\n";
    } else if (*trace_cmd) {
      const auto ck = ParameterCheckpoint::load(ckpt_path);
      const auto cfg = config_for_checkpoint(ck, trace_o);
      auto env = make_environment(cfg.env);
      ck.require_env_hash(env_hash(*env));
      Learner learner(cfg, *env);
      learner.load(ck);
      const auto dump = trace(learner, *env, cfg.seed);
      ensure_dir(cfg.out_dir);
      const fs::path dir(cfg.out_dir);
      write_trace_csv((dir / "trace.csv").string(), dump, env->spec().n_agents);
      write_trace_figures((dir / ("trace_weights" + figure_ext)).string(),
                          (dir / ("trace_completion" + figure_ext)).string(), dump, env->state_layout());
      const auto fidelity = completion_fidelity(dump, env->state_layout());
      std::cout << "steps " << dump.length() << "\ncompletion_step_match " << fidelity.step_match
                << "\ncompletion_segment_match " << fidelity.agent_match << "\n";
    } else if (*curves_cmd) {
      std::vector<CsvTable> runs;
      for (const auto& f : metric_files) runs.push_back(read_csv(f));
      std::vector<std::vector<CurvePoint>> curves;
      for (const auto& m : metrics) curves.push_back(aggregate_curves(runs, m));
      ensure_dir(curves_out);
      const fs::path dir(curves_out);
      write_curves((dir / "curves.csv").string(), metrics, curves);
      for (size_t i = 0; i < metrics.size(); ++i)
        write_curve_figure((dir / ("curve_" + metrics[i] + figure_ext)).string(), metrics[i], curves[i]);
      std::cout << "runs " << runs.size() << "\ncurves " << (dir / "curves.csv").string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
