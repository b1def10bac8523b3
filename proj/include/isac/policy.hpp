#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "isac/action.hpp"
#include "isac/common.hpp"
#include "isac/nn.hpp"
#include "isac/rng.hpp"
#include "isac/twin.hpp"
#include "isac/world.hpp"

namespace isac {

struct RewardWeights {
  double w1 = 1.0;
  double w2 = 0.5;
  double w3 = 0.2;
  double rate_norm_bps = 4.15e8;
  // The epsilon sets where the inverse-error term saturates: too small and
  // the optimal allocation starves the comm link to chase ever-finer sensing.
  double mse_eps_m2 = 0.7;
};

/// Scalar step reward: normalized throughput plus inverse sensing error minus
/// a total-power penalty.
inline double reward(const GroundTruthMetrics& metrics, const Action& action,
                     const RewardWeights& w, const PowerBudget& budget) {
  double n_bs = static_cast<double>(action.bs.size());
  double power_ratio = action.total_power_w() / (n_bs * budget.p_max_w);
  return w.w1 * (metrics.sum_rate_bps / w.rate_norm_bps) +
         w.w2 / (metrics.mse_m2 + w.mse_eps_m2) - w.w3 * power_ratio;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline constexpr int kActionDimsPerBs = 4;  // [p_comm, p_sense, theta_comm, theta_sense]

/// Map an unbounded raw vector onto the feasible action set: sigmoid powers
/// scaled to [0, p_max] with a proportional rescale when the per-BS sum
/// exceeds p_max, tanh angles onto (-pi, pi].
inline Action project_action(const Eigen::VectorXd& raw, const PowerBudget& budget) {
  if (raw.size() % kActionDimsPerBs != 0)
    throw std::invalid_argument("project_action: raw size must be a multiple of 4");
  int n_bs = static_cast<int>(raw.size()) / kActionDimsPerBs;
  Action a = zero_action(n_bs);
  for (int i = 0; i < n_bs; ++i) {
    const int o = i * kActionDimsPerBs;
    double pc = sigmoid(raw(o + 0)) * budget.p_max_w;
    double ps = sigmoid(raw(o + 1)) * budget.p_max_w;
    double sum = pc + ps;
    if (sum > budget.p_max_w) {
      double s = budget.p_max_w / sum;
      pc *= s;
      ps *= s;
    }
    auto& b = a.bs[static_cast<std::size_t>(i)];
    b.p_comm_w = pc;
    b.p_sense_w = ps;
    b.theta_comm = std::tanh(raw(o + 2)) * kPi;
    b.theta_sense = std::tanh(raw(o + 3)) * kPi;
  }
  return a;
}

/// Guided feasibility map for learned controllers: powers are mapped exactly
/// as in project_action, while each steering angle is a bounded correction
/// around an anchor action (the belief-driven baseline pointing), tanh-mapped
/// to +/- the given span. A zero raw vector reproduces the anchor's pointing
/// with an even power split, so a freshly initialized policy starts at the
/// baseline controller and learning refines it.
inline Action guided_action(const Eigen::VectorXd& raw, const Action& anchor,
                            const PowerBudget& budget, double span_comm_rad,
                            double span_sense_rad) {
  Action a = project_action(raw, budget);
  if (a.bs.size() != anchor.bs.size())
    throw std::invalid_argument("guided_action: anchor dimension mismatch");
  for (std::size_t i = 0; i < a.bs.size(); ++i) {
    const int o = static_cast<int>(i) * kActionDimsPerBs;
    a.bs[i].theta_comm = wrap_angle(anchor.bs[i].theta_comm + std::tanh(raw(o + 2)) * span_comm_rad);
    a.bs[i].theta_sense =
        wrap_angle(anchor.bs[i].theta_sense + std::tanh(raw(o + 3)) * span_sense_rad);
  }
  return a;
}

/// Fixed normalization constants for the feature vector.
struct FeatureScales {
  double pos_m = 250.0;
  double vel_mps = 10.0;
  double csi_log_shift = 2.0;
  double csi_log_scale = 3.0;
  double cov_trace = 50.0;
  double lag_s = 0.05;
};

/// Flatten a belief (or a raw-observation pseudo-belief) into the policy
/// input. Layout: per UE [rel_x, rel_y, vel_x, vel_y, log_csi], then per
/// target [rel_x, rel_y, vel_x, vel_y, cov_trace], then effective lag.
inline Eigen::VectorXd featurize(const BeliefState& belief, const std::vector<int>& serving,
                                 const std::vector<BSConfig>& bss, const FeatureScales& fs) {
  const int n_ue = static_cast<int>(belief.ue_tracks.size());
  const int n_tgt = static_cast<int>(belief.target_tracks.size());
  Eigen::VectorXd f(5 * n_ue + 5 * n_tgt + 1);
  int w = 0;
  for (int j = 0; j < n_ue; ++j) {
    const auto& tr = belief.ue_tracks[static_cast<std::size_t>(j)];
    const auto& bs = bss[static_cast<std::size_t>(serving[static_cast<std::size_t>(j)])];
    Vec2 rel = tr.pos() - bs.pos;
    f(w++) = rel.x / fs.pos_m;
    f(w++) = rel.y / fs.pos_m;
    f(w++) = tr.vel().x / fs.vel_mps;
    f(w++) = tr.vel().y / fs.vel_mps;
    double c = std::log(std::max(belief.csi_proxy[static_cast<std::size_t>(j)], 1e-12));
    f(w++) = (c - fs.csi_log_shift) / fs.csi_log_scale;
  }
  for (int k = 0; k < n_tgt; ++k) {
    const auto& tr = belief.target_tracks[static_cast<std::size_t>(k)];
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& bs : bss) {
      double d = dist(bs.pos, tr.pos());
      if (d < best) {
        best = d;
        nearest = bs.id;
      }
    }
    Vec2 rel = tr.pos() - bss[static_cast<std::size_t>(nearest)].pos;
    f(w++) = rel.x / fs.pos_m;
    f(w++) = rel.y / fs.pos_m;
    f(w++) = tr.vel().x / fs.vel_mps;
    f(w++) = tr.vel().y / fs.vel_mps;
    f(w++) = tr.cov.trace() / fs.cov_trace;
  }
  f(w++) = belief.effective_lag_s / fs.lag_s;
  return f;
}

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 1.0;

/// Diagonal-Gaussian actor plus critic, both 64x64 tanh MLPs. The log-std is
/// a state-independent parameter vector, clamped to [-5, 1] where used.
class GaussianPolicy {
 public:
  Mlp actor;
  Mlp critic;
  Eigen::VectorXd log_std;

  GaussianPolicy() = default;

  /// `head_bias` seeds the actor's output bias per station block in dimension
  /// order (p_comm, p_sense, theta_comm, theta_sense). A power tilt starts the
  /// fresh policy slightly off the anchor's even split; a nonzero angle bias
  /// starts the pointing deliberately off the anchor so the first updates face
  /// a strong, recoverable gradient instead of a plateau.
  static GaussianPolicy create(int feature_dim, int action_dim, int hidden, double log_std_init,
                               Rng& rng,
                               const std::array<double, kActionDimsPerBs>& head_bias = {}) {
    GaussianPolicy p;
    p.actor = Mlp::create(feature_dim, hidden, action_dim, rng, 0.01);
    p.critic = Mlp::create(feature_dim, hidden, 1, rng, 1.0);
    p.log_std = Eigen::VectorXd::Constant(action_dim, log_std_init);
    for (int k = 0; k + kActionDimsPerBs <= action_dim; k += kActionDimsPerBs)
      for (int d = 0; d < kActionDimsPerBs; ++d)
        p.actor.b3(k + d) = head_bias[static_cast<std::size_t>(d)];
    return p;
  }

  int feature_dim() const { return actor.in_dim(); }
  int action_dim() const { return actor.out_dim(); }

  Eigen::VectorXd std_dev() const {
    return log_std.array().min(kLogStdMax).max(kLogStdMin).exp();
  }

  struct ActResult {
    Eigen::VectorXd raw_action;
    double log_prob = 0.0;
  };

  /// Sample (or take the mean of) the unsquashed Gaussian; the log-prob is
  /// recorded before any feasibility projection.
  ActResult act(const Eigen::VectorXd& features, Rng& rng, bool deterministic) const {
    Eigen::VectorXd mean = actor.forward(features);
    Eigen::VectorXd sd = std_dev();
    Eigen::VectorXd a = mean;
    if (!deterministic)
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += sd(i) * rng.normal();
    return {a, log_prob(mean, sd, a)};
  }

  double value(const Eigen::VectorXd& features) const { return critic.forward(features)(0); }

  static double log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd,
                         const Eigen::VectorXd& a) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      double z = (a(i) - mean(i)) / sd(i);
      lp += -0.5 * z * z - std::log(sd(i)) - 0.5 * std::log(kTwoPi);
    }
    return lp;
  }

  double entropy() const {
    Eigen::VectorXd ls = log_std.array().min(kLogStdMax).max(kLogStdMin);
    return ls.sum() + 0.5 * static_cast<double>(ls.size()) * std::log(kTwoPi * std::exp(1.0));
  }

  int param_count() const {
    return actor.param_count() + static_cast<int>(log_std.size()) + critic.param_count();
  }

  /// Order: actor tensors, log_std, critic tensors.
  Eigen::VectorXd flatten_params() const {
    Eigen::VectorXd out(param_count());
    actor.flatten(out.data());
    int o = actor.param_count();
    for (Eigen::Index i = 0; i < log_std.size(); ++i) out(o + i) = log_std(i);
    critic.flatten(out.data() + o + log_std.size());
    return out;
  }

  void unflatten_params(const Eigen::VectorXd& in) {
    if (in.size() != param_count())
      throw std::invalid_argument("GaussianPolicy::unflatten_params: size mismatch");
    actor.unflatten(in.data());
    int o = actor.param_count();
    for (Eigen::Index i = 0; i < log_std.size(); ++i) log_std(i) = in(o + i);
    critic.unflatten(in.data() + o + log_std.size());
  }
};

// ---------------------------------------------------------------------------
// Rollout storage and generalized advantage estimation
// ---------------------------------------------------------------------------

struct TrajStep {
  Eigen::VectorXd features;
  Eigen::VectorXd raw_action;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;  // true on the final step of an episode
};

struct Trajectory {
  std::vector<TrajStep> steps;
  // Value bootstrap used after a non-terminal final step (0 when terminal).
  double bootstrap_value = 0.0;
};

struct GaeResult {
  Eigen::VectorXd advantages;  // normalized when requested
  Eigen::VectorXd returns;     // advantage + value, from raw advantages
};

inline GaeResult compute_gae(const Trajectory& traj, double gamma, double lambda,
                             bool normalize_advantages) {
  const int n = static_cast<int>(traj.steps.size());
  if (n == 0) throw std::invalid_argument("compute_gae: empty trajectory");
  Eigen::VectorXd adv(n), ret(n);
  double gae = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const auto& s = traj.steps[static_cast<std::size_t>(t)];
    double next_v;
    if (t == n - 1)
      next_v = s.done ? 0.0 : traj.bootstrap_value;
    else {
      const auto& nx = traj.steps[static_cast<std::size_t>(t) + 1];
      next_v = s.done ? 0.0 : nx.value;
    }
    if (s.done) gae = 0.0;  // advantages never leak across episode boundaries
    double delta = s.reward + gamma * next_v - s.value;
    gae = delta + gamma * lambda * (s.done ? 0.0 : gae);
    adv(t) = gae;
    ret(t) = adv(t) + s.value;
  }
  if (normalize_advantages) {
    double mean = adv.mean();
    double var = (adv.array() - mean).square().sum() / static_cast<double>(n);
    adv = (adv.array() - mean) / (std::sqrt(var) + 1e-8);
  }
  return {adv, ret};
}

// ---------------------------------------------------------------------------
// PPO update (clipped surrogate, exact analytic gradients)
// ---------------------------------------------------------------------------

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double lr = 3e-4;
  int epochs = 10;
  int minibatch = 64;
  double entropy_coef = 0.01;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  double target_kl = 0.0;  // stop the update when minibatch KL exceeds 1.5x this; <= 0 disables
};

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  bool aborted = false;  // set when a non-finite loss stopped the update
};

/// Optimizer state for one policy (actor + log_std + critic Adam moments).
struct PolicyOptimizer {
  MlpAdam actor;
  MlpAdam critic;
  AdamState log_std;
  long t = 0;

  explicit PolicyOptimizer(const GaussianPolicy& p)
      : actor(p.actor),
        critic(p.critic),
        log_std(AdamState::zero(p.log_std.size(), 1)) {}
};

/// One PPO update over a batch trajectory: `epochs` passes of shuffled
/// minibatches, per-minibatch Adam steps with a global gradient-norm clip.
/// Gradients are computed analytically (no autodiff); a non-finite loss
/// aborts the update before touching the parameters further.
inline PpoStats ppo_update(GaussianPolicy& policy, PolicyOptimizer& opt, const Trajectory& traj,
                           const PpoConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(traj.steps.size());
  GaeResult gae = compute_gae(traj, cfg.gamma, cfg.gae_lambda, cfg.normalize_advantages);

  PpoStats stats;
  long long samples = 0, clipped = 0;
  double sum_pl = 0.0, sum_vl = 0.0, sum_kl = 0.0;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  Mlp::Grads ga = Mlp::Grads::zero_like(policy.actor);
  Mlp::Grads gc = Mlp::Grads::zero_like(policy.critic);
  Eigen::VectorXd gls = Eigen::VectorXd::Zero(policy.log_std.size());

  const double ent_const = 0.5 * std::log(kTwoPi * std::exp(1.0));

  bool stop = false;
  int epoch_stop = cfg.epochs;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    epoch_stop = epoch;
    // Fisher-Yates shuffle driven by the shared deterministic stream.
    for (int i = n - 1; i > 0; --i) {
      int j = static_cast<int>(rng.uniform() * (i + 1));
      if (j > i) j = i;
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    for (int start = 0; start < n; start += cfg.minibatch) {
      int m = std::min(cfg.minibatch, n - start);
      ga = Mlp::Grads::zero_like(policy.actor);
      gc = Mlp::Grads::zero_like(policy.critic);
      gls.setZero();
      double mb_pl = 0.0, mb_vl = 0.0;

      Eigen::VectorXd sd = policy.std_dev();
      Eigen::VectorXd ls_eff = policy.log_std.array().min(kLogStdMax).max(kLogStdMin);

      double mb_kl = 0.0;
      for (int b = 0; b < m; ++b) {
        int idx = order[static_cast<std::size_t>(start + b)];
        const auto& s = traj.steps[static_cast<std::size_t>(idx)];
        double A = gae.advantages(idx);
        double R = gae.returns(idx);

        Mlp::Cache ca;
        Eigen::VectorXd mean = policy.actor.forward(s.features, &ca);
        double lp_new = GaussianPolicy::log_prob(mean, sd, s.raw_action);
        double ratio = std::exp(lp_new - s.log_prob);
        double surr1 = ratio * A;
        double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        double surr2 = clipped_ratio * A;
        double pl = -std::min(surr1, surr2);
        mb_pl += pl;
        // Low-variance non-negative KL estimate: (r - 1) - log r.
        double kl_est = (ratio - 1.0) - (lp_new - s.log_prob);
        sum_kl += kl_est;
        mb_kl += kl_est;
        if (clipped_ratio != ratio) ++clipped;
        ++samples;

        // d(policy loss)/d(lp_new): -A*ratio when the unclipped branch is
        // active (ties included), zero otherwise.
        double dlp = (surr1 <= surr2) ? -A * ratio : 0.0;
        if (dlp != 0.0) {
          Eigen::VectorXd dmean(mean.size());
          for (Eigen::Index k = 0; k < mean.size(); ++k) {
            double diff = s.raw_action(k) - mean(k);
            double var = sd(k) * sd(k);
            dmean(k) = dlp * diff / var;
            // d lp / d log_std_k = diff^2/var - 1, gated by the clamp.
            if (policy.log_std(k) > kLogStdMin && policy.log_std(k) < kLogStdMax)
              gls(k) += dlp * (diff * diff / var - 1.0);
          }
          policy.actor.backward(ca, dmean, ga);
        }

        Mlp::Cache cc;
        double v = policy.critic.forward(s.features, &cc)(0);
        double verr = v - R;
        mb_vl += 0.5 * verr * verr;
        Eigen::VectorXd dv(1);
        dv(0) = cfg.vf_coef * verr;
        policy.critic.backward(cc, dv, gc);
      }

      // Entropy bonus: dH/d(log_std_k) = 1 inside the clamp.
      for (Eigen::Index k = 0; k < gls.size(); ++k)
        if (policy.log_std(k) > kLogStdMin && policy.log_std(k) < kLogStdMax)
          gls(k) += static_cast<double>(m) * (-cfg.entropy_coef);

      double inv_m = 1.0 / static_cast<double>(m);
      ga.scale(inv_m);
      gc.scale(inv_m);
      gls *= inv_m;
      double ent = ls_eff.sum() + static_cast<double>(ls_eff.size()) * ent_const;
      double mb_loss = mb_pl * inv_m + cfg.vf_coef * mb_vl * inv_m - cfg.entropy_coef * ent;
      sum_pl += mb_pl;
      sum_vl += mb_vl;
      if (!std::isfinite(mb_loss)) {
        stats.aborted = true;
        stats.policy_loss = mb_loss;
        return stats;
      }

      // Early stop: once the sampled policy has moved too far from the one
      // that generated the batch, further epochs on it do more harm than good.
      if (cfg.target_kl > 0.0 && mb_kl / static_cast<double>(m) > 1.5 * cfg.target_kl) {
        stop = true;
        break;
      }

      double norm_sq = ga.squared_norm() + gc.squared_norm() + gls.squaredNorm();
      if (!std::isfinite(norm_sq)) {
        stats.aborted = true;
        return stats;
      }
      double norm = std::sqrt(norm_sq);
      if (norm > cfg.max_grad_norm && norm > 0.0) {
        double sc = cfg.max_grad_norm / norm;
        ga.scale(sc);
        gc.scale(sc);
        gls *= sc;
      }

      ++opt.t;
      opt.actor.step(policy.actor, ga, opt.t, cfg.lr);
      opt.critic.step(policy.critic, gc, opt.t, cfg.lr);
      detail::adam_apply(policy.log_std, gls, opt.log_std, opt.t, cfg.lr);
    }
  }

  // After an early policy stop the value function keeps fitting on the fixed
  // batch: regression to stored returns does not move the sampled policy.
  if (stop) {
    for (int epoch = epoch_stop; epoch < cfg.epochs; ++epoch) {
      for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.uniform() * (i + 1));
        if (j > i) j = i;
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
      for (int start = 0; start < n; start += cfg.minibatch) {
        int m = std::min(cfg.minibatch, n - start);
        gc = Mlp::Grads::zero_like(policy.critic);
        for (int b = 0; b < m; ++b) {
          int idx = order[static_cast<std::size_t>(start + b)];
          const auto& s = traj.steps[static_cast<std::size_t>(idx)];
          Mlp::Cache cc;
          double v = policy.critic.forward(s.features, &cc)(0);
          Eigen::VectorXd dv(1);
          dv(0) = cfg.vf_coef * (v - gae.returns(idx));
          policy.critic.backward(cc, dv, gc);
        }
        gc.scale(1.0 / static_cast<double>(m));
        double norm = std::sqrt(gc.squared_norm());
        if (!std::isfinite(norm)) {
          stats.aborted = true;
          return stats;
        }
        if (norm > cfg.max_grad_norm && norm > 0.0) gc.scale(cfg.max_grad_norm / norm);
        ++opt.t;
        opt.critic.step(policy.critic, gc, opt.t, cfg.lr);
      }
    }
  }

  double inv_s = samples > 0 ? 1.0 / static_cast<double>(samples) : 0.0;
  stats.policy_loss = sum_pl * inv_s;
  stats.value_loss = sum_vl * inv_s;
  stats.entropy = policy.entropy();
  stats.approx_kl = sum_kl * inv_s;
  stats.clip_fraction = static_cast<double>(clipped) * inv_s;
  return stats;
}

// ---------------------------------------------------------------------------
// Rule-based baseline controller
// ---------------------------------------------------------------------------

/// Greedy one-to-one pairing of stations to targets by believed distance:
/// repeatedly claim the closest unassigned (station, target) pair. Ties break
/// toward the lower station id, then the lower target id. Stations left over
/// when targets run out fall back to their nearest target (shared coverage).
/// Used by guidance_policy; the plain heuristic instead points each station
/// at its own nearest target independently.
inline std::vector<int> assign_targets(const BeliefState& belief,
                                       const std::vector<BSConfig>& bss) {
  const int n_bs = static_cast<int>(bss.size());
  const int n_tgt = static_cast<int>(belief.target_tracks.size());
  std::vector<int> pick(static_cast<std::size_t>(n_bs), -1);
  if (n_tgt == 0) return pick;

  struct Pair {
    double d;
    int bs, tgt;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(n_bs * n_tgt));
  for (int i = 0; i < n_bs; ++i)
    for (int k = 0; k < n_tgt; ++k)
      pairs.push_back({dist(bss[static_cast<std::size_t>(i)].pos,
                            belief.target_tracks[static_cast<std::size_t>(k)].pos()),
                       i, k});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.bs != b.bs) return a.bs < b.bs;
    return a.tgt < b.tgt;
  });

  std::vector<char> tgt_taken(static_cast<std::size_t>(n_tgt), 0);
  for (const Pair& p : pairs) {
    if (pick[static_cast<std::size_t>(p.bs)] >= 0 || tgt_taken[static_cast<std::size_t>(p.tgt)])
      continue;
    pick[static_cast<std::size_t>(p.bs)] = p.tgt;
    tgt_taken[static_cast<std::size_t>(p.tgt)] = 1;
  }
  for (const Pair& p : pairs)
    if (pick[static_cast<std::size_t>(p.bs)] < 0) pick[static_cast<std::size_t>(p.bs)] = p.tgt;
  return pick;
}

namespace detail {

/// Which UE a station's comm beam should serve: the associated UE with the
/// weakest CSI proxy, falling back to the nearest UE overall when the station
/// has no association. Returns -1 only when there are no UEs at all. Ties
/// break toward the lowest UE id.
inline int comm_pick(const BeliefState& belief, const std::vector<int>& serving,
                     const BSConfig& bs) {
  int pick = -1;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < belief.ue_tracks.size(); ++j) {
    if (serving[j] != bs.id) continue;
    if (belief.csi_proxy[j] < worst) {
      worst = belief.csi_proxy[j];
      pick = static_cast<int>(j);
    }
  }
  if (pick < 0) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < belief.ue_tracks.size(); ++j) {
      double d = dist(bs.pos, belief.ue_tracks[j].pos());
      if (d < best) {
        best = d;
        pick = static_cast<int>(j);
      }
    }
  }
  return pick;
}

}  // namespace detail

/// Deterministic heuristic: each BS points its comm beam at its weakest
/// associated UE (lowest CSI proxy), its sensing beam at its own nearest
/// target, and splits power evenly between the two roles. Ties break toward
/// the lowest id. Every station decides independently, so two stations that
/// share a nearest target both watch it and a farther target can go unwatched;
/// that blind spot is an intrinsic cost of the rule, not a bug.
inline Action heuristic_policy(const BeliefState& belief, const std::vector<int>& serving,
                               const std::vector<BSConfig>& bss, const PowerBudget& budget) {
  int n_bs = static_cast<int>(bss.size());
  Action a = zero_action(n_bs);
  for (int i = 0; i < n_bs; ++i) {
    const auto& bs = bss[static_cast<std::size_t>(i)];
    auto& out = a.bs[static_cast<std::size_t>(i)];

    int pick = detail::comm_pick(belief, serving, bs);
    out.theta_comm =
        pick >= 0 ? bearing(bs.pos, belief.ue_tracks[static_cast<std::size_t>(pick)].pos()) : 0.0;

    int tgt = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < belief.target_tracks.size(); ++k) {
      double d = dist(bs.pos, belief.target_tracks[k].pos());
      if (d < best) {
        best = d;
        tgt = static_cast<int>(k);
      }
    }
    out.theta_sense =
        tgt >= 0 ? bearing(bs.pos, belief.target_tracks[static_cast<std::size_t>(tgt)].pos()) : 0.0;

    out.p_comm_w = 0.5 * budget.p_max_w;
    out.p_sense_w = 0.5 * budget.p_max_w;
  }
  return a;
}

/// Coordinated variant of the heuristic used as the anchor that learned
/// controllers correct around: comm pointing and the even power split are
/// identical, but sensing beams are assigned one-to-one via assign_targets so
/// no target is left unwatched when stations share a nearest target. Keeping
/// the anchor coverage-complete means the learned residual spends its span on
/// refinement rather than on undoing a structural blind spot.
inline Action guidance_policy(const BeliefState& belief, const std::vector<int>& serving,
                              const std::vector<BSConfig>& bss, const PowerBudget& budget) {
  int n_bs = static_cast<int>(bss.size());
  Action a = zero_action(n_bs);
  std::vector<int> sense_pick = assign_targets(belief, bss);
  for (int i = 0; i < n_bs; ++i) {
    const auto& bs = bss[static_cast<std::size_t>(i)];
    auto& out = a.bs[static_cast<std::size_t>(i)];

    int pick = detail::comm_pick(belief, serving, bs);
    out.theta_comm =
        pick >= 0 ? bearing(bs.pos, belief.ue_tracks[static_cast<std::size_t>(pick)].pos()) : 0.0;

    int tgt = sense_pick[static_cast<std::size_t>(i)];
    out.theta_sense =
        tgt >= 0 ? bearing(bs.pos, belief.target_tracks[static_cast<std::size_t>(tgt)].pos()) : 0.0;

    out.p_comm_w = 0.5 * budget.p_max_w;
    out.p_sense_w = 0.5 * budget.p_max_w;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization (versioned JSON)
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = data;
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* name) {
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ConfigError(std::string("checkpoint: tensor size mismatch for ") + name);
  Eigen::MatrixXd m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++].get<double>();
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  std::vector<double> data(v.data(), v.data() + v.size());
  return nlohmann::json(data);
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  std::vector<double> data = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

inline nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json j;
  j["w1"] = matrix_to_json(net.w1);
  j["b1"] = vector_to_json(net.b1);
  j["w2"] = matrix_to_json(net.w2);
  j["b2"] = vector_to_json(net.b2);
  j["w3"] = matrix_to_json(net.w3);
  j["b3"] = vector_to_json(net.b3);
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j, const char* name) {
  Mlp net;
  net.w1 = matrix_from_json(j.at("w1"), name);
  net.b1 = vector_from_json(j.at("b1"));
  net.w2 = matrix_from_json(j.at("w2"), name);
  net.b2 = vector_from_json(j.at("b2"));
  net.w3 = matrix_from_json(j.at("w3"), name);
  net.b3 = vector_from_json(j.at("b3"));
  if (net.b1.size() != net.w1.rows() || net.w2.cols() != net.w1.rows() ||
      net.b2.size() != net.w2.rows() || net.w3.cols() != net.w2.rows() ||
      net.b3.size() != net.w3.rows())
    throw ConfigError(std::string("checkpoint: inconsistent layer shapes in ") + name);
  return net;
}

}  // namespace detail

struct Checkpoint {
  GaussianPolicy policy;
  std::string config_hash;
  std::string method;
  long long train_steps = 0;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["config_hash"] = ck.config_hash;
  j["method"] = ck.method;
  j["train_steps"] = ck.train_steps;
  j["feature_dim"] = ck.policy.feature_dim();
  j["action_dim"] = ck.policy.action_dim();
  j["actor"] = detail::mlp_to_json(ck.policy.actor);
  j["critic"] = detail::mlp_to_json(ck.policy.critic);
  j["log_std"] = detail::vector_to_json(ck.policy.log_std);
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  int version = j.at("version").get<int>();
  if (version != kCheckpointVersion)
    throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config_hash = j.at("config_hash").get<std::string>();
  ck.method = j.value("method", std::string{});
  ck.train_steps = j.value("train_steps", 0LL);
  ck.policy.actor = detail::mlp_from_json(j.at("actor"), "actor");
  ck.policy.critic = detail::mlp_from_json(j.at("critic"), "critic");
  ck.policy.log_std = detail::vector_from_json(j.at("log_std"));
  if (ck.policy.actor.in_dim() != j.at("feature_dim").get<int>() ||
      ck.policy.actor.out_dim() != j.at("action_dim").get<int>())
    throw ConfigError("checkpoint: declared dims do not match tensors");
  if (ck.policy.critic.in_dim() != ck.policy.actor.in_dim() || ck.policy.critic.out_dim() != 1)
    throw ConfigError("checkpoint: critic shape inconsistent with actor");
  if (ck.policy.log_std.size() != ck.policy.actor.out_dim())
    throw ConfigError("checkpoint: log_std length does not match action dim");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << checkpoint_to_json(ck).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace isac
