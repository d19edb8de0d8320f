#include "pagnet/trainer.hpp"

#include <filesystem>
#include <random>

#include "pagnet/csv.hpp"
#include "pagnet/envs.hpp"
#include "pagnet/error.hpp"

namespace pagnet {

namespace {

std::string num_or_empty(double v, bool present) { return present ? format_number(v) : std::string(); }

struct SamplePool {
  torch::Tensor obs;     // [N,n,l]
  torch::Tensor states;  // [N,L]
  std::vector<GlobalState> truth;
};

SamplePool pool_from(const std::vector<EpisodeRecord>& episodes, size_t begin, size_t end) {
  SamplePool pool;
  std::vector<float> obs, states;
  int n = 0, l = 0, big_l = 0;
  for (size_t e = begin; e < end; ++e) {
    const auto& ep = episodes[e];
    n = ep.n_agents;
    l = ep.obs_len;
    big_l = ep.state_len;
    obs.insert(obs.end(), ep.obs.begin(), ep.obs.end());
    states.insert(states.end(), ep.states.begin(), ep.states.end());
    for (int t = 0; t <= ep.length; ++t) pool.truth.push_back(ep.state_at(t));
  }
  const auto rows = static_cast<std::int64_t>(pool.truth.size());
  pool.obs = torch::from_blob(obs.data(), {rows, n, l}, torch::kFloat).clone();
  pool.states = torch::from_blob(states.data(), {rows, big_l}, torch::kFloat).clone();
  return pool;
}

}  // namespace

RunSummary train(const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());

  auto env = make_environment(cfg.env);
  auto eval_env = make_environment(cfg.env);
  Learner learner(cfg, *env);
  learner.probe = hooks.probe;
  ReplayBuffer buffer(cfg.buffer_capacity);
  std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.seed));
  const EpsilonSchedule schedule{cfg.epsilon_start, cfg.epsilon_end, cfg.epsilon_anneal_steps};
  const auto eval_every = cfg.effective_eval_interval();
  const auto ckpt_every = cfg.effective_checkpoint_interval();
  const std::int64_t eval_seed = cfg.seed * 7919 + 104729;

  RunSummary summary;
  summary.metrics_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
  summary.checkpoint_path = (fs::path(cfg.out_dir) / "model.ckpt").string();
  const auto psi_path = (fs::path(cfg.out_dir) / "weight_net.ckpt").string();
  CsvWriter metrics(summary.metrics_path, kMetricsHeader);
  const std::string mode(mode_name(cfg.mode));
  const std::string seed_text = std::to_string(cfg.seed);

  auto run_eval = [&](std::int64_t at_step, double epsilon) {
    if (cfg.eval_episodes == 0) return;
    auto report = evaluate(learner, *eval_env, cfg.eval_episodes, eval_seed);
    summary.last_test_return = report.ret.mean;
    summary.last_test_win_rate = report.win_rate;
    summary.best_test_return = std::max(summary.best_test_return, report.ret.mean);
    summary.best_test_win_rate = std::max(summary.best_test_win_rate, report.win_rate);
    metrics.row({std::to_string(at_step), std::to_string(summary.episodes), mode, seed_text,
                 format_number(epsilon), "", "", "", "", "", format_number(report.ret.mean),
                 format_number(report.win_rate), format_number(report.mean_w)});
    if (hooks.on_eval) hooks.on_eval(report, at_step);
  };

  std::int64_t next_eval = 0;
  while (summary.env_steps < cfg.total_env_steps) {
    if (hooks.max_episodes >= 0 && summary.episodes >= hooks.max_episodes) break;
    if (summary.env_steps >= next_eval) {
      run_eval(next_eval, epsilon_at(summary.env_steps, schedule));
      next_eval += eval_every;
    }
    const double epsilon = epsilon_at(summary.env_steps, schedule);
    const auto env_seed = static_cast<std::int64_t>(rng() >> 1);
    auto rec = learner.rollout(*env, env_seed, epsilon, rng);
    summary.env_steps += rec.length;
    ++summary.episodes;
    const double ret = rec.episode_return();
    double mean_w = 0.0;
    for (float w : rec.mean_w) mean_w += w;
    if (!rec.mean_w.empty()) mean_w /= rec.mean_w.size();
    buffer.insert(std::move(rec));

    UpdateStats stats;
    bool updated = false;
    if (buffer.size() >= cfg.batch_size) {
      stats = learner.update(buffer.sample(cfg.batch_size, rng));
      updated = true;
      if (learner.updates() % ckpt_every == 0 && learner.uses_generator())
        learner.checkpoint(summary.env_steps, true).save(psi_path);
    }
    metrics.row({std::to_string(summary.env_steps), std::to_string(summary.episodes), mode, seed_text,
                 format_number(epsilon), num_or_empty(stats.td_loss, updated),
                 num_or_empty(stats.d_loss, stats.gan_updated), num_or_empty(stats.g_loss, stats.gan_updated),
                 num_or_empty(stats.mse_loss, stats.gan_updated), format_number(ret), "", "",
                 format_number(mean_w)});
  }
  if (summary.env_steps >= next_eval && hooks.max_episodes < 0)
    run_eval(next_eval, epsilon_at(summary.env_steps, schedule));
  summary.updates = learner.updates();
  learner.checkpoint(summary.env_steps).save(summary.checkpoint_path);
  return summary;
}

std::vector<EpisodeRecord> collect(const EnvConfig& env_cfg, int episodes, std::int64_t seed) {
  if (episodes < 1) throw ConfigError("collect needs at least one episode");
  auto env = make_environment(env_cfg);
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::vector<EpisodeRecord> out;
  out.reserve(episodes);
  for (int e = 0; e < episodes; ++e) out.push_back(random_rollout(*env, static_cast<std::int64_t>(rng() >> 1), rng));
  return out;
}

PretrainReport pretrain(const std::vector<EpisodeRecord>& dataset, const TrainConfig& cfg_in,
                        int eval_every) {
  if (dataset.size() < 2) throw ConfigError("pretraining needs at least two episodes");
  TrainConfig cfg = cfg_in;
  cfg.mode = Mode::kPagnet;
  cfg.pretrained.clear();
  auto env = make_environment(cfg.env);
  const auto& spec = env->spec();
  for (const auto& e : dataset)
    if (e.n_agents != spec.n_agents || e.obs_len != spec.obs_len || e.state_len != spec.state_len ||
        e.n_actions != spec.n_actions)
      throw ConfigError("dataset episode shapes do not match the configured environment");

  Learner learner(cfg, *env);
  const size_t held = std::max<size_t>(1, dataset.size() / 10);
  const auto train_pool = pool_from(dataset, 0, dataset.size() - held);
  const auto test_pool = pool_from(dataset, dataset.size() - held, dataset.size());
  const auto rows = train_pool.obs.size(0);
  const auto take = std::min<std::int64_t>(cfg.gan_samples, rows);

  PretrainReport report;
  report.heldout_mse.push_back(learner.evaluate_mse(test_pool.obs, test_pool.truth));
  for (int u = 0; u < cfg.pretrain_updates; ++u) {
    auto pick = torch::randperm(rows, torch::kLong).narrow(0, 0, take);
    std::vector<GlobalState> truth;
    truth.reserve(take);
    auto acc = pick.accessor<std::int64_t, 1>();
    for (std::int64_t k = 0; k < take; ++k) truth.push_back(train_pool.truth[acc[k]]);
    report.updates.push_back(learner.gan_update(train_pool.obs.index_select(0, pick),
                                                train_pool.states.index_select(0, pick), truth));
    if (eval_every > 0 && (u + 1) % eval_every == 0)
      report.heldout_mse.push_back(learner.evaluate_mse(test_pool.obs, test_pool.truth));
  }
  report.checkpoint = learner.checkpoint(0, true);
  report.checkpoint.metadata["mode"] = "pretrain";
  return report;
}

}  // namespace pagnet
