#pragma once

#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isac/action.hpp"
#include "isac/common.hpp"
#include "isac/config.hpp"
#include "isac/hash.hpp"
#include "isac/policy.hpp"
#include "isac/rng.hpp"
#include "isac/telemetry.hpp"
#include "isac/twin.hpp"
#include "isac/world.hpp"

namespace isac {

// ---------------------------------------------------------------------------
// Controller variants
// ---------------------------------------------------------------------------

enum class Method {
  dt_ppo,         // proposed: twin-synchronized belief into PPO
  delayed_ppo,    // PPO fed raw delayed observations, trained under delay
  unaware_ppo,    // PPO fed raw observations, trained with zero delay
  dt_heuristic,   // twin-synchronized belief into the rule-based controller
  raw_heuristic,  // raw delayed observations into the rule-based controller
};

inline const char* method_name(Method m) {
  switch (m) {
    case Method::dt_ppo: return "dt_ppo";
    case Method::delayed_ppo: return "delayed_ppo";
    case Method::unaware_ppo: return "unaware_ppo";
    case Method::dt_heuristic: return "dt_heuristic";
    case Method::raw_heuristic: return "raw_heuristic";
  }
  return "?";
}

inline std::optional<Method> method_from_string(std::string_view s) {
  for (Method m : {Method::dt_ppo, Method::delayed_ppo, Method::unaware_ppo, Method::dt_heuristic,
                   Method::raw_heuristic})
    if (s == method_name(m)) return m;
  return std::nullopt;
}

inline bool method_uses_twin(Method m) {
  return m == Method::dt_ppo || m == Method::dt_heuristic;
}

inline bool method_is_learned(Method m) {
  return m == Method::dt_ppo || m == Method::delayed_ppo || m == Method::unaware_ppo;
}

/// Training latency for a learned method: the configured delay for the
/// delay-trained variants, zero for the latency-unaware baseline.
inline double training_latency_ms(Method m, const SimConfig& cfg) {
  return m == Method::unaware_ppo ? 0.0 : cfg.train.latency_ms;
}

// ---------------------------------------------------------------------------
// Per-step result row
// ---------------------------------------------------------------------------

struct RunRecord {
  std::string method;
  double latency_ms = 0.0;
  long long seed = 0;  // seed index within the cell, not the derived stream seed
  int step = 0;
  double sum_rate_bps = 0.0;
  double mse_m2 = 0.0;
  double total_power_w = 0.0;
  bool violation = false;
  double reward = 0.0;
};

/// True iff the weakest link falls below the rate floor or the sensing error
/// exceeds its cap. Both comparisons are strict, so sitting exactly on a
/// threshold does not count as a violation. The rate handed in is the QoS
/// rate: a per-UE moving average over `qos_window_steps`, so fast-fading
/// flicker averages out and only sustained outages (lost or misdirected
/// beams) breach the floor.
inline bool violation_check(double min_qos_rate_bps, double mse_m2,
                            const SimConfig::Constraints& c) {
  return min_qos_rate_bps < c.r_min_bps || mse_m2 > c.mse_max_m2;
}

/// Instantaneous-rate convenience overload (equivalent to a window of 1).
inline bool violation_check(const GroundTruthMetrics& m, const SimConfig::Constraints& c) {
  double min_rate = std::numeric_limits<double>::infinity();
  for (double r : m.per_ue_rate_bps) min_rate = std::min(min_rate, r);
  return violation_check(min_rate, m.mse_m2, c);
}

// ---------------------------------------------------------------------------
// Episode setup
// ---------------------------------------------------------------------------

/// Association rule: strongest mean received power at reference conditions
/// (boresight gains, unit fading), which reduces to smallest pathloss. Ties
/// break toward the lowest BS id. Fixed for the whole episode.
inline int strongest_bs(Vec2 pos, const std::vector<BSConfig>& bss, const ChannelParams& ch) {
  int best = 0;
  double best_pw = -1.0;
  for (const auto& bs : bss) {
    double pw = bs.g_max_tx * bs.g_rx * path_loss(dist(bs.pos, pos), ch);
    if (pw > best_pw) {
      best_pw = pw;
      best = bs.id;
    }
  }
  return best;
}

/// Draw the initial world: uniform positions, uniform speed with uniform
/// heading, association by strongest mean power, fresh unit-mean fading.
/// Draw order is fixed: per UE (x, y, speed, heading), per target likewise,
/// then the fading matrix row-major.
inline WorldState init_world(const SimConfig& cfg, const WorldParams& wp, Rng& rng) {
  WorldState s;
  s.t = 0.0;
  s.n_bs = cfg.world.n_bs;
  s.ues.reserve(static_cast<std::size_t>(cfg.world.n_ue));
  for (int j = 0; j < cfg.world.n_ue; ++j) {
    UEState u;
    u.id = j;
    u.pos = {rng.uniform(0.0, cfg.world.arena_w_m), rng.uniform(0.0, cfg.world.arena_h_m)};
    double speed = rng.uniform(cfg.world.ue_speed_min_mps, cfg.world.ue_speed_max_mps);
    double heading = rng.angle();
    u.vel = {speed * std::cos(heading), speed * std::sin(heading)};
    u.serving_bs = strongest_bs(u.pos, wp.bss, wp.channel);
    s.ues.push_back(u);
  }
  s.targets.reserve(static_cast<std::size_t>(cfg.world.n_targets));
  for (int k = 0; k < cfg.world.n_targets; ++k) {
    TargetState t;
    t.id = k;
    t.pos = {rng.uniform(0.0, cfg.world.arena_w_m), rng.uniform(0.0, cfg.world.arena_h_m)};
    double speed = rng.uniform(cfg.world.target_speed_min_mps, cfg.world.target_speed_max_mps);
    double heading = rng.angle();
    t.vel = {speed * std::cos(heading), speed * std::sin(heading)};
    t.rcs = cfg.world.target_rcs_m2;
    s.targets.push_back(t);
  }
  s.fading.resize(static_cast<std::size_t>(cfg.world.n_bs * cfg.world.n_ue));
  for (auto& f : s.fading) f = rng.exponential();
  return s;
}

/// Raw-observation pathway: dress the newest delayed packet up as a belief
/// without any synchronization. Measured positions are taken as-is with zero
/// velocity; entities not covered by the packet fall back to the episode's
/// registration snapshot, mirroring a freshly seeded twin track so the two
/// pathways coincide when there is no delay and no noise.
inline BeliefState observation_to_belief(const std::optional<TelemetryPacket>& pkt, double now,
                                         const std::vector<Vec2>& ue_snapshot,
                                         const std::vector<Vec2>& target_snapshot,
                                         double r_floor) {
  BeliefState b;
  b.ue_tracks.resize(ue_snapshot.size());
  b.target_tracks.resize(target_snapshot.size());
  auto set_default = [&](EKFTrack& t, Vec2 p) {
    t.mean << p.x, p.y, 0.0, 0.0;
    t.cov = DigitalTwin::seed_cov();
    t.last_update = 0.0;
  };
  for (std::size_t j = 0; j < b.ue_tracks.size(); ++j) set_default(b.ue_tracks[j], ue_snapshot[j]);
  for (std::size_t k = 0; k < b.target_tracks.size(); ++k)
    set_default(b.target_tracks[k], target_snapshot[k]);
  if (pkt) {
    auto apply = [&](std::vector<EKFTrack>& tracks, const std::vector<Measurement>& meas) {
      for (const auto& m : meas) {
        if (m.id < 0 || m.id >= static_cast<int>(tracks.size())) continue;
        if (!is_finite(m.pos)) continue;
        auto& t = tracks[static_cast<std::size_t>(m.id)];
        t.mean << m.pos.x, m.pos.y, 0.0, 0.0;
        double var = std::max(m.sigma_m * m.sigma_m, r_floor);
        Eigen::Vector4d d(var, var, 100.0, 100.0);
        t.cov = d.asDiagonal();
        t.last_update = pkt->gen_time;
      }
    };
    apply(b.ue_tracks, pkt->ue_meas);
    apply(b.target_tracks, pkt->target_meas);
    b.effective_lag_s = now - pkt->gen_time;
  } else {
    b.effective_lag_s = now;  // same convention as a twin that never synced
  }
  return b;
}

// ---------------------------------------------------------------------------
// Episode loop
// ---------------------------------------------------------------------------

struct EpisodeResult {
  std::vector<RunRecord> records;
  std::vector<Action> actions;  // applied (projected) action per step
  Trajectory traj;              // populated only for learned methods
  double episode_reward = 0.0;
  // Per-step diagnostics (only steps where a packet was available): mean
  // position error of the belief vs truth, and of the raw measurement vs
  // truth. Used to quantify the synchronization advantage.
  std::vector<double> belief_err_m;
  std::vector<double> raw_err_m;
};

/// Derive the independent per-purpose streams for one episode cell. The cell
/// seed is shared by every method evaluated on that cell, so all controllers
/// face the same world draw, the same delays and the same measurement noise
/// (common random numbers).
struct EpisodeStreams {
  Rng world;
  Rng telemetry;
  Rng policy;

  explicit EpisodeStreams(std::uint64_t cell_seed)
      : world(hash_seed(std::to_string(cell_seed) + "/world")),
        telemetry(hash_seed(std::to_string(cell_seed) + "/telemetry")),
        policy(hash_seed(std::to_string(cell_seed) + "/policy")) {}
};

/// One closed-loop episode. Per step: sense with the in-flight action, emit
/// telemetry, pull the newest available packet, synchronize (or bypass),
/// featurize, act, project, apply to the world, score, record.
inline EpisodeResult run_episode(const SimConfig& cfg, Method method, double latency_ms,
                                 long long seed_index, std::uint64_t cell_seed,
                                 const GaussianPolicy* policy, bool train_mode) {
  const WorldParams wp = cfg.world_params();
  const DelayModel delay = cfg.delay_for_latency(latency_ms);
  const RewardWeights rw = cfg.resolved_reward();
  const Vec2 center{0.5 * cfg.world.arena_w_m, 0.5 * cfg.world.arena_h_m};

  EpisodeStreams streams(cell_seed);
  WorldState state = init_world(cfg, wp, streams.world);

  std::vector<int> serving;
  serving.reserve(state.ues.size());
  std::vector<Vec2> ue_snapshot, target_snapshot;
  for (const auto& ue : state.ues) {
    serving.push_back(ue.serving_bs);
    ue_snapshot.push_back(ue.pos);
  }
  for (const auto& tgt : state.targets) target_snapshot.push_back(tgt.pos);

  DigitalTwin twin(cfg.world.n_ue, cfg.world.n_targets, cfg.ekf_params(), center);
  twin.seed_from_snapshot(ue_snapshot, target_snapshot, state.t);
  TelemetryBuffer buffer(static_cast<std::size_t>(cfg.delay.buffer_capacity));

  EpisodeResult out;
  out.records.reserve(static_cast<std::size_t>(cfg.world.episode_steps));

  // Incumbent beam configuration: the cell was already running before this
  // episode window, so the first sensing pass sees beams pointed from the
  // registration snapshot rather than an unconfigured array.
  Action action;
  {
    BeliefState b0;
    b0.ue_tracks.resize(ue_snapshot.size());
    b0.target_tracks.resize(target_snapshot.size());
    for (std::size_t i = 0; i < ue_snapshot.size(); ++i)
      b0.ue_tracks[i].mean << ue_snapshot[i].x, ue_snapshot[i].y, 0.0, 0.0;
    for (std::size_t i = 0; i < target_snapshot.size(); ++i)
      b0.target_tracks[i].mean << target_snapshot[i].x, target_snapshot[i].y, 0.0, 0.0;
    b0.csi_proxy = predict_csi(b0, serving, wp.bss, wp.channel, cfg.csi_params());
    action = method_is_learned(method) ? guidance_policy(b0, serving, wp.bss, cfg.power)
                                       : heuristic_policy(b0, serving, wp.bss, cfg.power);
  }

  // Per-UE QoS rate: exponential moving average with the configured horizon,
  // seeded by the first step so short episodes are not biased toward zero.
  std::vector<double> qos_rate(state.ues.size(), 0.0);
  const double qos_alpha = 1.0 / static_cast<double>(cfg.constraints.qos_window_steps);

  for (int step = 0; step < cfg.world.episode_steps; ++step) {
    // Measurement made at the end of the previous dwell interval, i.e. with
    // the action that was in flight, reported at the current time.
    auto sensed = generate_sensing_estimates(state, action, wp.channel, wp.bss, wp.radar,
                                             wp.sensing, streams.world);
    buffer.push(emit(state, sensed, cfg.telemetry, delay, wp.dt_s, streams.telemetry));
    auto pkt = buffer.newest_available(state.t);

    BeliefState belief;
    if (method_uses_twin(method))
      belief = twin.synchronize(pkt, state.t);
    else
      belief = observation_to_belief(pkt, state.t, ue_snapshot, target_snapshot, cfg.twin.r_floor);
    belief.csi_proxy = predict_csi(belief, serving, wp.bss, wp.channel, cfg.csi_params(), &action);

    if (pkt) {
      double be = 0.0, re = 0.0;
      for (const auto& ue : state.ues)
        be += dist(belief.ue_tracks[static_cast<std::size_t>(ue.id)].pos(), ue.pos);
      for (const auto& tgt : state.targets)
        be += dist(belief.target_tracks[static_cast<std::size_t>(tgt.id)].pos(), tgt.pos);
      for (const auto& m : pkt->ue_meas)
        re += dist(m.pos, state.ues[static_cast<std::size_t>(m.id)].pos);
      for (const auto& m : pkt->target_meas)
        re += dist(m.pos, state.targets[static_cast<std::size_t>(m.id)].pos);
      double n_ent = static_cast<double>(state.ues.size() + state.targets.size());
      out.belief_err_m.push_back(be / n_ent);
      out.raw_err_m.push_back(re / n_ent);
    }

    TrajStep ts;
    if (method_is_learned(method)) {
      if (policy == nullptr)
        throw std::invalid_argument("run_episode: learned method requires a policy");
      Eigen::VectorXd features = featurize(belief, serving, wp.bss, cfg.features);
      auto act_res = policy->act(features, streams.policy, /*deterministic=*/!train_mode);
      Action anchor = guidance_policy(belief, serving, wp.bss, cfg.power);
      action = guided_action(act_res.raw_action, anchor, cfg.power,
                             deg_to_rad(cfg.ppo.residual_span_comm_deg),
                             deg_to_rad(cfg.ppo.residual_span_sense_deg));
      if (train_mode) {
        ts.features = std::move(features);
        ts.raw_action = act_res.raw_action;
        ts.log_prob = act_res.log_prob;
        ts.value = policy->value(ts.features);
      }
    } else {
      action = heuristic_policy(belief, serving, wp.bss, cfg.power);
    }

    WorldStepResult wr = world_step(state, action, wp, streams.world);

    double min_qos = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < qos_rate.size(); ++j) {
      double r = wr.metrics.per_ue_rate_bps[j];
      qos_rate[j] = step == 0 ? r : (1.0 - qos_alpha) * qos_rate[j] + qos_alpha * r;
      min_qos = std::min(min_qos, qos_rate[j]);
    }

    RunRecord rec;
    rec.method = method_name(method);
    rec.latency_ms = latency_ms;
    rec.seed = seed_index;
    rec.step = step;
    rec.sum_rate_bps = wr.metrics.sum_rate_bps;
    rec.mse_m2 = wr.metrics.mse_m2;
    rec.total_power_w = action.total_power_w();
    rec.violation = violation_check(min_qos, wr.metrics.mse_m2, cfg.constraints);
    rec.reward = reward(wr.metrics, action, rw, cfg.power);
    out.episode_reward += rec.reward;
    out.records.push_back(std::move(rec));
    out.actions.push_back(action);

    if (train_mode && method_is_learned(method)) {
      ts.reward = out.records.back().reward;
      ts.done = step == cfg.world.episode_steps - 1;
      out.traj.steps.push_back(std::move(ts));
    }

    state = std::move(wr.state);
  }
  return out;
}

}  // namespace isac
