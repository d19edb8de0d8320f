#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pagnet/config.hpp"
#include "pagnet/eval.hpp"
#include "pagnet/learner.hpp"
#include "pagnet/replay.hpp"

namespace pagnet {

struct RunSummary {
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  std::int64_t updates = 0;
  double last_test_return = 0.0;
  double last_test_win_rate = 0.0;
  double best_test_return = 0.0;
  double best_test_win_rate = 0.0;
  std::string metrics_path;
  std::string checkpoint_path;
};

struct TrainHooks {
  std::function<void(std::string_view)> probe;          // forwarded to the learner
  std::function<void(const EvalReport&, std::int64_t)> on_eval;
  std::int64_t max_episodes = -1;                        // stop early (tests)
};

// Rollout -> store -> (once the buffer holds a batch) D, G+psi and TD updates,
// periodic target sync and weight-net saves, greedy evaluation every M steps.
// Writes <out_dir>/metrics.csv, <out_dir>/weight_net.ckpt and <out_dir>/model.ckpt.
RunSummary train(const TrainConfig& cfg, const TrainHooks& hooks = {});

// Random-policy episodes for offline pretraining datasets.
std::vector<EpisodeRecord> collect(const EnvConfig& env_cfg, int episodes, std::int64_t seed);

struct PretrainReport {
  std::vector<double> heldout_mse;  // before the first update, then after every update
  std::vector<UpdateStats> updates;
  ParameterCheckpoint checkpoint;
};

// GAN-only optimization of the weight net and generator on (obs, true state)
// pairs; the last tenth of the episodes is held out.
PretrainReport pretrain(const std::vector<EpisodeRecord>& dataset, const TrainConfig& cfg,
                        int eval_every = 1);

}  // namespace pagnet
