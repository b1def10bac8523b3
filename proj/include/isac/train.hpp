#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "isac/config.hpp"
#include "isac/episode.hpp"
#include "isac/hash.hpp"
#include "isac/policy.hpp"

namespace isac {

struct UpdateRow {
  int update = 0;
  long long env_steps = 0;
  double mean_episode_reward = 0.0;
  PpoStats stats;
};

struct TrainResult {
  Checkpoint checkpoint;                // final parameters (last good on abort)
  std::vector<double> episode_rewards;  // one entry per collected episode
  std::vector<UpdateRow> curve;         // one row per completed update
  bool aborted = false;
};

/// Called after every completed update; gives the CLI a place to write
/// periodic checkpoints and progress output.
using TrainHook = std::function<void(const UpdateRow&, const GaussianPolicy&)>;

/// Train a learned method: alternate whole-episode rollout collection (at the
/// method's training latency) with PPO updates. A non-finite loss stops
/// training with the last good parameters intact.
inline TrainResult train_policy(const SimConfig& cfg, Method method, int train_seed_index,
                                const TrainHook& hook = {}) {
  if (!method_is_learned(method))
    throw ConfigError(std::string("train: method is not learned: ") + method_name(method));

  const int feature_dim = 5 * cfg.world.n_ue + 5 * cfg.world.n_targets + 1;
  const int action_dim = kActionDimsPerBs * cfg.world.n_bs;
  const std::string base = std::to_string(cfg.master_seed) + ":" + method_name(method) +
                           ":train:" + std::to_string(train_seed_index);

  Rng init_rng(hash_seed(base + ":init"));
  Rng update_rng(hash_seed(base + ":update"));
  std::array<double, kActionDimsPerBs> head_bias{cfg.ppo.head_bias_p_comm,
                                                 cfg.ppo.head_bias_p_sense,
                                                 cfg.ppo.head_bias_theta, cfg.ppo.head_bias_theta};
  GaussianPolicy policy = GaussianPolicy::create(feature_dim, action_dim, cfg.ppo.hidden,
                                                 cfg.ppo.log_std_init, init_rng, head_bias);
  PolicyOptimizer opt(policy);

  PpoConfig pcfg;
  pcfg.gamma = cfg.ppo.gamma;
  pcfg.gae_lambda = cfg.ppo.gae_lambda;
  pcfg.clip_eps = cfg.ppo.clip_eps;
  pcfg.lr = cfg.ppo.lr;
  pcfg.epochs = cfg.ppo.epochs;
  pcfg.minibatch = cfg.ppo.minibatch;
  pcfg.entropy_coef = cfg.ppo.entropy_coef;
  pcfg.vf_coef = cfg.ppo.vf_coef;
  pcfg.max_grad_norm = cfg.ppo.max_grad_norm;
  pcfg.normalize_advantages = cfg.ppo.normalize_advantages;
  pcfg.target_kl = cfg.ppo.target_kl;

  const double latency_ms = training_latency_ms(method, cfg);
  const int episodes_per_update =
      (cfg.ppo.rollout_steps + cfg.world.episode_steps - 1) / cfg.world.episode_steps;

  TrainResult out;
  long long env_steps = 0;
  long long episode_counter = 0;

  for (int u = 0; u < cfg.train.updates; ++u) {
    Trajectory batch;
    double reward_acc = 0.0;
    for (int e = 0; e < episodes_per_update; ++e) {
      std::uint64_t cell_seed = hash_seed(base + ":ep:" + std::to_string(episode_counter));
      EpisodeResult er = run_episode(cfg, method, latency_ms, episode_counter, cell_seed, &policy,
                                     /*train_mode=*/true);
      for (auto& s : er.traj.steps) batch.steps.push_back(std::move(s));
      out.episode_rewards.push_back(er.episode_reward);
      reward_acc += er.episode_reward;
      env_steps += cfg.world.episode_steps;
      ++episode_counter;
    }

    PpoStats stats = ppo_update(policy, opt, batch, pcfg, update_rng);
    if (stats.aborted) {
      out.aborted = true;
      break;
    }

    UpdateRow row;
    row.update = u + 1;
    row.env_steps = env_steps;
    row.mean_episode_reward = reward_acc / static_cast<double>(episodes_per_update);
    row.stats = stats;
    out.curve.push_back(row);
    if (hook) hook(row, policy);
  }

  out.checkpoint.policy = policy;
  out.checkpoint.config_hash = config_content_hash(cfg);
  out.checkpoint.method = method_name(method);
  out.checkpoint.train_steps = env_steps;
  return out;
}

}  // namespace isac
