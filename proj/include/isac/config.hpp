#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "isac/common.hpp"
#include "isac/hash.hpp"
#include "isac/policy.hpp"
#include "isac/telemetry.hpp"
#include "isac/twin.hpp"
#include "isac/world.hpp"

namespace isac {

/// Full experiment configuration. Every field has a default; JSON files only
/// override what they mention, and unknown keys are rejected with their path.
struct SimConfig {
  std::uint64_t master_seed = 1;

  struct World {
    int n_bs = 3;
    int n_ue = 6;
    int n_targets = 3;
    double arena_w_m = 200.0;
    double arena_h_m = 200.0;
    double dt_ms = 10.0;
    int episode_steps = 500;
    double ue_speed_min_mps = 0.0;
    double ue_speed_max_mps = 20.0;
    double target_speed_min_mps = 0.0;
    double target_speed_max_mps = 20.0;
    double target_rcs_m2 = 1.0;
    // One [x, y] per BS; resized/defaulted to n_bs sites spread over the arena.
    std::vector<Vec2> bs_positions;
  } world;

  struct Beams {
    double g_max_tx_dbi = 15.0;
    double g_rx_dbi = 10.0;
    double beamwidth_sigma_deg = 0.25;        // comm beam
    double sense_beamwidth_sigma_deg = 0.8;   // sensing beam (wider for robust tracking)
    double side_lobe_db = -25.0;  // floor relative to peak
  } beams;

  ChannelParams channel;    // bandwidth, noise PSD, pathloss
  RadarParams radar;        // folded radar constant and reference noise
  SensingParams sensing;    // estimate-sigma mapping
  PowerBudget power;        // per-BS power cap

  struct Delay {
    double mean_ms = 50.0;
    double std_ms = 15.0;
    double step_ms = 10.0;
    int buffer_capacity = 64;
  } delay;

  TelemetryNoise telemetry;  // UE position measurement noise

  struct Twin {
    // White-acceleration intensity. Sized for the maneuvers the arena actually
    // produces (wall rebounds flip a track's velocity in one step): large
    // enough that the filter re-acquires within a few steps instead of
    // coasting over-confidently through the turn.
    double q_scale = 100.0;
    double r_floor = 1e-4;
    double lost_sigma_m = 8.0;
    double lost_pos_var_m2 = 100.0;
    double csi_ref_power_w = 0.5;
  } twin;

  RewardWeights reward;      // rate_norm_bps <= 0 means "derive from config"

  struct Constraints {
    double r_min_bps = 2e6;
    double mse_max_m2 = 25.0;
    // Horizon (in control steps) of the per-UE moving-average rate the QoS
    // floor is checked against; 1 means instantaneous.
    int qos_window_steps = 20;
  } constraints;

  FeatureScales features;

  struct Ppo {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double lr = 3e-4;
    int epochs = 10;
    int minibatch = 256;
    double entropy_coef = 0.0;
    double vf_coef = 0.5;
    double max_grad_norm = 0.5;
    int rollout_steps = 2048;
    int hidden = 64;
    // Exploration noise must stay comfortably inside the beamwidths once it
    // is mapped through the steering spans, or sampled rollouts only ever see
    // sidelobe-quality pointing and the learning signal vanishes.
    double log_std_init = -2.0;
    bool normalize_advantages = true;
    double target_kl = 0.02;
    // Initial actor output bias, per station block. The power pair tilts the
    // fresh policy slightly comm-heavy relative to the anchor's even split;
    // the angle bias starts the pointing deliberately off-anchor so the first
    // updates face a strong, recoverable gradient instead of a plateau.
    double head_bias_p_comm = 0.1;
    double head_bias_p_sense = -0.1;
    double head_bias_theta = -0.5;
    // Steering-angle correction span around the baseline pointing, per beam.
    double residual_span_comm_deg = 1.0;
    double residual_span_sense_deg = 2.0;
  } ppo;

  struct Train {
    int updates = 150;
    double latency_ms = 50.0;  // training latency for delay-trained methods
    int checkpoint_every = 25;
  } train;

  struct Sweep {
    std::vector<double> latencies_ms = {0.0, 10.0, 25.0, 50.0, 75.0, 100.0};
    std::vector<std::string> methods = {"dt_ppo", "delayed_ppo", "unaware_ppo", "dt_heuristic",
                                        "raw_heuristic"};
    int seeds = 20;
  } sweep;

  double dt_s() const { return world.dt_ms / 1000.0; }

  /// Reward normalizer: derived as n_ue * B * log2(1 + 10) unless overridden.
  double rate_norm_bps() const {
    if (reward.rate_norm_bps > 0.0) return reward.rate_norm_bps;
    return static_cast<double>(world.n_ue) * channel.bandwidth_hz * std::log2(11.0);
  }

  RewardWeights resolved_reward() const {
    RewardWeights w = reward;
    w.rate_norm_bps = rate_norm_bps();
    return w;
  }

  /// Default BS sites: a triangle spread over the arena, scaled to its size.
  std::vector<Vec2> resolved_bs_positions() const {
    if (!bs_positions_default_needed()) return world.bs_positions;
    std::vector<Vec2> sites;
    sites.reserve(static_cast<std::size_t>(world.n_bs));
    const double w = world.arena_w_m, h = world.arena_h_m;
    const std::vector<Vec2> anchors = {
        {0.25 * w, 0.25 * h}, {0.75 * w, 0.25 * h}, {0.50 * w, 0.75 * h},
        {0.25 * w, 0.75 * h}, {0.75 * w, 0.75 * h}, {0.50 * w, 0.25 * h}};
    for (int i = 0; i < world.n_bs; ++i)
      sites.push_back(anchors[static_cast<std::size_t>(i) % anchors.size()]);
    return sites;
  }

  bool bs_positions_default_needed() const {
    return world.bs_positions.size() != static_cast<std::size_t>(world.n_bs);
  }

  std::vector<BSConfig> resolved_bs_configs() const {
    std::vector<BSConfig> out;
    auto sites = resolved_bs_positions();
    out.reserve(sites.size());
    for (int i = 0; i < world.n_bs; ++i) {
      BSConfig b;
      b.id = i;
      b.pos = sites[static_cast<std::size_t>(i)];
      b.g_max_tx = db_to_linear(beams.g_max_tx_dbi);
      b.g_rx = db_to_linear(beams.g_rx_dbi);
      b.beamwidth_sigma = deg_to_rad(beams.beamwidth_sigma_deg);
      b.beamwidth_sigma_sense = deg_to_rad(beams.sense_beamwidth_sigma_deg);
      b.side_lobe = db_to_linear(beams.side_lobe_db);
      out.push_back(b);
    }
    return out;
  }

  WorldParams world_params() const {
    WorldParams p;
    p.arena.width_m = world.arena_w_m;
    p.arena.height_m = world.arena_h_m;
    p.channel = channel;
    p.bss = resolved_bs_configs();
    p.radar = radar;
    p.sensing = sensing;
    p.dt_s = dt_s();
    return p;
  }

  EKFParams ekf_params() const {
    EKFParams p;
    p.q_scale = twin.q_scale;
    p.r_floor = twin.r_floor;
    p.lost_sigma_m = twin.lost_sigma_m;
    p.lost_pos_var_m2 = twin.lost_pos_var_m2;
    return p;
  }

  CsiParams csi_params() const {
    CsiParams p;
    p.ref_power_w = twin.csi_ref_power_w;
    return p;
  }

  /// Map a requested mean latency onto a delay model. The spread scales with
  /// the mean (keeping the configured coefficient of variation) so latency 0
  /// is genuinely delay-free and the configured (mean, std) pair is
  /// reproduced when the request equals the configured mean.
  DelayModel delay_for_latency(double latency_ms) const {
    DelayModel m;
    m.mean_ms = latency_ms;
    double ratio = delay.mean_ms > 0.0 ? delay.std_ms / delay.mean_ms : 0.0;
    m.std_ms = ratio * latency_ms;
    m.step_ms = delay.step_ms;
    return m;
  }

  void validate() const {
    if (world.n_bs < 1 || world.n_ue < 1 || world.n_targets < 1)
      throw ConfigError("config: n_bs, n_ue, n_targets must be >= 1");
    if (world.arena_w_m <= 0 || world.arena_h_m <= 0)
      throw ConfigError("config: arena dimensions must be positive");
    if (world.dt_ms <= 0) throw ConfigError("config: dt_ms must be positive");
    if (world.episode_steps < 1) throw ConfigError("config: episode_steps must be >= 1");
    if (world.ue_speed_min_mps < 0 || world.ue_speed_max_mps < world.ue_speed_min_mps)
      throw ConfigError("config: invalid UE speed range");
    if (world.target_speed_min_mps < 0 ||
        world.target_speed_max_mps < world.target_speed_min_mps)
      throw ConfigError("config: invalid target speed range");
    if (world.target_rcs_m2 <= 0) throw ConfigError("config: target_rcs_m2 must be positive");
    if (!world.bs_positions.empty() &&
        world.bs_positions.size() != static_cast<std::size_t>(world.n_bs))
      throw ConfigError("config: bs_positions length must equal n_bs");
    if (channel.bandwidth_hz <= 0) throw ConfigError("config: bandwidth_hz must be positive");
    if (channel.d_min_m <= 0) throw ConfigError("config: d_min_m must be positive");
    if (beams.beamwidth_sigma_deg <= 0)
      throw ConfigError("config: beamwidth_sigma_deg must be positive");
    if (beams.sense_beamwidth_sigma_deg <= 0)
      throw ConfigError("config: sense_beamwidth_sigma_deg must be positive");
    if (beams.side_lobe_db > 0)
      throw ConfigError("config: side_lobe_db must be <= 0 (relative to peak)");
    if (power.p_max_w <= 0) throw ConfigError("config: p_max_w must be positive");
    if (delay.mean_ms < 0 || delay.std_ms < 0)
      throw ConfigError("config: delay mean/std must be non-negative");
    if (delay.step_ms <= 0) throw ConfigError("config: delay step_ms must be positive");
    if (delay.buffer_capacity < 1) throw ConfigError("config: buffer_capacity must be >= 1");
    if (telemetry.ue_pos_sigma_m < 0)
      throw ConfigError("config: ue_pos_sigma_m must be non-negative");
    if (sensing.sigma_min_m < 0 || sensing.sigma_max_m < sensing.sigma_min_m)
      throw ConfigError("config: invalid sensing sigma bounds");
    if (twin.q_scale <= 0 || twin.r_floor <= 0)
      throw ConfigError("config: twin q_scale and r_floor must be positive");
    if (twin.lost_sigma_m <= 0 || twin.lost_pos_var_m2 < 0)
      throw ConfigError("config: twin track-loss parameters out of range");
    if (reward.mse_eps_m2 <= 0) throw ConfigError("config: mse_eps_m2 must be positive");
    if (constraints.r_min_bps < 0 || constraints.mse_max_m2 <= 0)
      throw ConfigError("config: invalid constraint thresholds");
    if (constraints.qos_window_steps < 1)
      throw ConfigError("config: qos_window_steps must be >= 1");
    if (ppo.epochs < 1 || ppo.minibatch < 1 || ppo.rollout_steps < 1 || ppo.hidden < 1)
      throw ConfigError("config: PPO integer parameters must be >= 1");
    if (ppo.gamma <= 0 || ppo.gamma > 1 || ppo.gae_lambda < 0 || ppo.gae_lambda > 1)
      throw ConfigError("config: gamma in (0,1], gae_lambda in [0,1]");
    if (ppo.clip_eps <= 0 || ppo.lr <= 0) throw ConfigError("config: clip_eps and lr must be positive");
    if (ppo.residual_span_comm_deg <= 0 || ppo.residual_span_comm_deg > 180 ||
        ppo.residual_span_sense_deg <= 0 || ppo.residual_span_sense_deg > 180)
      throw ConfigError("config: residual spans must be in (0, 180] degrees");
    if (train.updates < 0 || train.checkpoint_every < 1)
      throw ConfigError("config: train.updates must be >= 0 and checkpoint_every >= 1");
    if (train.latency_ms < 0) throw ConfigError("config: train.latency_ms must be >= 0");
    if (sweep.seeds < 1) throw ConfigError("config: sweep.seeds must be >= 1");
    for (double l : sweep.latencies_ms)
      if (l < 0) throw ConfigError("config: sweep latencies must be >= 0");
  }
};

namespace detail {

/// Strict JSON object reader: records which keys were consumed and reports
/// anything left over, with its full path.
class JsonReader {
 public:
  JsonReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: expected an object at " + path_);
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: bad value type at " + path_ + "." + key);
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ConfigError("config: unknown key " + path_ + "." + item.key());
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::vector<Vec2> vec2_list_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError("config: expected an array at " + path);
  std::vector<Vec2> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2)
      throw ConfigError("config: expected [x, y] pairs at " + path);
    out.push_back({e[0].get<double>(), e[1].get<double>()});
  }
  return out;
}

}  // namespace detail

inline SimConfig config_from_json(const nlohmann::json& j) {
  SimConfig c;
  detail::JsonReader root(j, "$");
  root.get("master_seed", c.master_seed);

  if (const auto* g = root.child("world")) {
    detail::JsonReader r(*g, "$.world");
    r.get("n_bs", c.world.n_bs);
    r.get("n_ue", c.world.n_ue);
    r.get("n_targets", c.world.n_targets);
    r.get("arena_w_m", c.world.arena_w_m);
    r.get("arena_h_m", c.world.arena_h_m);
    r.get("dt_ms", c.world.dt_ms);
    r.get("episode_steps", c.world.episode_steps);
    r.get("ue_speed_min_mps", c.world.ue_speed_min_mps);
    r.get("ue_speed_max_mps", c.world.ue_speed_max_mps);
    r.get("target_speed_min_mps", c.world.target_speed_min_mps);
    r.get("target_speed_max_mps", c.world.target_speed_max_mps);
    r.get("target_rcs_m2", c.world.target_rcs_m2);
    if (const auto* p = r.child("bs_positions"))
      c.world.bs_positions = detail::vec2_list_from_json(*p, "$.world.bs_positions");
    r.finish();
  }
  if (const auto* g = root.child("beams")) {
    detail::JsonReader r(*g, "$.beams");
    r.get("g_max_tx_dbi", c.beams.g_max_tx_dbi);
    r.get("g_rx_dbi", c.beams.g_rx_dbi);
    r.get("beamwidth_sigma_deg", c.beams.beamwidth_sigma_deg);
    r.get("sense_beamwidth_sigma_deg", c.beams.sense_beamwidth_sigma_deg);
    r.get("side_lobe_db", c.beams.side_lobe_db);
    r.finish();
  }
  if (const auto* g = root.child("channel")) {
    detail::JsonReader r(*g, "$.channel");
    r.get("bandwidth_hz", c.channel.bandwidth_hz);
    r.get("noise_psd_dbm_hz", c.channel.noise_psd_dbm_hz);
    r.get("pathloss_exp", c.channel.pathloss_exp);
    r.get("pathloss_const_db", c.channel.pathloss_const_db);
    r.get("d_min_m", c.channel.d_min_m);
    r.finish();
  }
  if (const auto* g = root.child("radar")) {
    detail::JsonReader r(*g, "$.radar");
    r.get("c_radar", c.radar.c_radar);
    r.get("noise_w", c.radar.noise_w);
    r.finish();
  }
  if (const auto* g = root.child("sensing")) {
    detail::JsonReader r(*g, "$.sensing");
    r.get("c_est_m", c.sensing.c_est_m);
    r.get("sigma_min_m", c.sensing.sigma_min_m);
    r.get("sigma_max_m", c.sensing.sigma_max_m);
    r.finish();
  }
  if (const auto* g = root.child("power")) {
    detail::JsonReader r(*g, "$.power");
    r.get("p_max_w", c.power.p_max_w);
    r.finish();
  }
  if (const auto* g = root.child("delay")) {
    detail::JsonReader r(*g, "$.delay");
    r.get("mean_ms", c.delay.mean_ms);
    r.get("std_ms", c.delay.std_ms);
    r.get("step_ms", c.delay.step_ms);
    r.get("buffer_capacity", c.delay.buffer_capacity);
    r.finish();
  }
  if (const auto* g = root.child("telemetry")) {
    detail::JsonReader r(*g, "$.telemetry");
    r.get("ue_pos_sigma_m", c.telemetry.ue_pos_sigma_m);
    r.finish();
  }
  if (const auto* g = root.child("twin")) {
    detail::JsonReader r(*g, "$.twin");
    r.get("q_scale", c.twin.q_scale);
    r.get("r_floor", c.twin.r_floor);
    r.get("lost_sigma_m", c.twin.lost_sigma_m);
    r.get("lost_pos_var_m2", c.twin.lost_pos_var_m2);
    r.get("csi_ref_power_w", c.twin.csi_ref_power_w);
    r.finish();
  }
  if (const auto* g = root.child("reward")) {
    detail::JsonReader r(*g, "$.reward");
    r.get("w1", c.reward.w1);
    r.get("w2", c.reward.w2);
    r.get("w3", c.reward.w3);
    r.get("rate_norm_bps", c.reward.rate_norm_bps);
    r.get("mse_eps_m2", c.reward.mse_eps_m2);
    r.finish();
  }
  if (const auto* g = root.child("constraints")) {
    detail::JsonReader r(*g, "$.constraints");
    r.get("r_min_bps", c.constraints.r_min_bps);
    r.get("mse_max_m2", c.constraints.mse_max_m2);
    r.get("qos_window_steps", c.constraints.qos_window_steps);
    r.finish();
  }
  if (const auto* g = root.child("features")) {
    detail::JsonReader r(*g, "$.features");
    r.get("pos_m", c.features.pos_m);
    r.get("vel_mps", c.features.vel_mps);
    r.get("csi_log_shift", c.features.csi_log_shift);
    r.get("csi_log_scale", c.features.csi_log_scale);
    r.get("cov_trace", c.features.cov_trace);
    r.get("lag_s", c.features.lag_s);
    r.finish();
  }
  if (const auto* g = root.child("ppo")) {
    detail::JsonReader r(*g, "$.ppo");
    r.get("gamma", c.ppo.gamma);
    r.get("gae_lambda", c.ppo.gae_lambda);
    r.get("clip_eps", c.ppo.clip_eps);
    r.get("lr", c.ppo.lr);
    r.get("epochs", c.ppo.epochs);
    r.get("minibatch", c.ppo.minibatch);
    r.get("entropy_coef", c.ppo.entropy_coef);
    r.get("vf_coef", c.ppo.vf_coef);
    r.get("max_grad_norm", c.ppo.max_grad_norm);
    r.get("rollout_steps", c.ppo.rollout_steps);
    r.get("hidden", c.ppo.hidden);
    r.get("log_std_init", c.ppo.log_std_init);
    r.get("normalize_advantages", c.ppo.normalize_advantages);
    r.get("target_kl", c.ppo.target_kl);
    r.get("head_bias_p_comm", c.ppo.head_bias_p_comm);
    r.get("head_bias_p_sense", c.ppo.head_bias_p_sense);
    r.get("head_bias_theta", c.ppo.head_bias_theta);
    r.get("residual_span_comm_deg", c.ppo.residual_span_comm_deg);
    r.get("residual_span_sense_deg", c.ppo.residual_span_sense_deg);
    r.finish();
  }
  if (const auto* g = root.child("train")) {
    detail::JsonReader r(*g, "$.train");
    r.get("updates", c.train.updates);
    r.get("latency_ms", c.train.latency_ms);
    r.get("checkpoint_every", c.train.checkpoint_every);
    r.finish();
  }
  if (const auto* g = root.child("sweep")) {
    detail::JsonReader r(*g, "$.sweep");
    r.get("latencies_ms", c.sweep.latencies_ms);
    r.get("methods", c.sweep.methods);
    r.get("seeds", c.sweep.seeds);
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

/// Fully resolved configuration dump: every field explicit, derived defaults
/// (BS sites, rate normalizer) filled in. Serializing twice yields identical
/// text, which is what the content hash is taken over.
inline nlohmann::json config_to_json(const SimConfig& c) {
  nlohmann::json j;
  j["master_seed"] = c.master_seed;
  auto& w = j["world"];
  w["n_bs"] = c.world.n_bs;
  w["n_ue"] = c.world.n_ue;
  w["n_targets"] = c.world.n_targets;
  w["arena_w_m"] = c.world.arena_w_m;
  w["arena_h_m"] = c.world.arena_h_m;
  w["dt_ms"] = c.world.dt_ms;
  w["episode_steps"] = c.world.episode_steps;
  w["ue_speed_min_mps"] = c.world.ue_speed_min_mps;
  w["ue_speed_max_mps"] = c.world.ue_speed_max_mps;
  w["target_speed_min_mps"] = c.world.target_speed_min_mps;
  w["target_speed_max_mps"] = c.world.target_speed_max_mps;
  w["target_rcs_m2"] = c.world.target_rcs_m2;
  {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : c.resolved_bs_positions()) arr.push_back({p.x, p.y});
    w["bs_positions"] = arr;
  }
  auto& b = j["beams"];
  b["g_max_tx_dbi"] = c.beams.g_max_tx_dbi;
  b["g_rx_dbi"] = c.beams.g_rx_dbi;
  b["beamwidth_sigma_deg"] = c.beams.beamwidth_sigma_deg;
  b["sense_beamwidth_sigma_deg"] = c.beams.sense_beamwidth_sigma_deg;
  b["side_lobe_db"] = c.beams.side_lobe_db;
  auto& ch = j["channel"];
  ch["bandwidth_hz"] = c.channel.bandwidth_hz;
  ch["noise_psd_dbm_hz"] = c.channel.noise_psd_dbm_hz;
  ch["pathloss_exp"] = c.channel.pathloss_exp;
  ch["pathloss_const_db"] = c.channel.pathloss_const_db;
  ch["d_min_m"] = c.channel.d_min_m;
  auto& ra = j["radar"];
  ra["c_radar"] = c.radar.c_radar;
  ra["noise_w"] = c.radar.noise_w;
  auto& se = j["sensing"];
  se["c_est_m"] = c.sensing.c_est_m;
  se["sigma_min_m"] = c.sensing.sigma_min_m;
  se["sigma_max_m"] = c.sensing.sigma_max_m;
  j["power"]["p_max_w"] = c.power.p_max_w;
  auto& de = j["delay"];
  de["mean_ms"] = c.delay.mean_ms;
  de["std_ms"] = c.delay.std_ms;
  de["step_ms"] = c.delay.step_ms;
  de["buffer_capacity"] = c.delay.buffer_capacity;
  j["telemetry"]["ue_pos_sigma_m"] = c.telemetry.ue_pos_sigma_m;
  auto& tw = j["twin"];
  tw["q_scale"] = c.twin.q_scale;
  tw["r_floor"] = c.twin.r_floor;
  tw["lost_sigma_m"] = c.twin.lost_sigma_m;
  tw["lost_pos_var_m2"] = c.twin.lost_pos_var_m2;
  tw["csi_ref_power_w"] = c.twin.csi_ref_power_w;
  auto& re = j["reward"];
  re["w1"] = c.reward.w1;
  re["w2"] = c.reward.w2;
  re["w3"] = c.reward.w3;
  re["rate_norm_bps"] = c.rate_norm_bps();
  re["mse_eps_m2"] = c.reward.mse_eps_m2;
  auto& co = j["constraints"];
  co["r_min_bps"] = c.constraints.r_min_bps;
  co["mse_max_m2"] = c.constraints.mse_max_m2;
  co["qos_window_steps"] = c.constraints.qos_window_steps;
  auto& fe = j["features"];
  fe["pos_m"] = c.features.pos_m;
  fe["vel_mps"] = c.features.vel_mps;
  fe["csi_log_shift"] = c.features.csi_log_shift;
  fe["csi_log_scale"] = c.features.csi_log_scale;
  fe["cov_trace"] = c.features.cov_trace;
  fe["lag_s"] = c.features.lag_s;
  auto& pp = j["ppo"];
  pp["gamma"] = c.ppo.gamma;
  pp["gae_lambda"] = c.ppo.gae_lambda;
  pp["clip_eps"] = c.ppo.clip_eps;
  pp["lr"] = c.ppo.lr;
  pp["epochs"] = c.ppo.epochs;
  pp["minibatch"] = c.ppo.minibatch;
  pp["entropy_coef"] = c.ppo.entropy_coef;
  pp["vf_coef"] = c.ppo.vf_coef;
  pp["max_grad_norm"] = c.ppo.max_grad_norm;
  pp["rollout_steps"] = c.ppo.rollout_steps;
  pp["hidden"] = c.ppo.hidden;
  pp["log_std_init"] = c.ppo.log_std_init;
  pp["normalize_advantages"] = c.ppo.normalize_advantages;
  pp["target_kl"] = c.ppo.target_kl;
  pp["head_bias_p_comm"] = c.ppo.head_bias_p_comm;
  pp["head_bias_p_sense"] = c.ppo.head_bias_p_sense;
  pp["head_bias_theta"] = c.ppo.head_bias_theta;
  pp["residual_span_comm_deg"] = c.ppo.residual_span_comm_deg;
  pp["residual_span_sense_deg"] = c.ppo.residual_span_sense_deg;
  auto& tr = j["train"];
  tr["updates"] = c.train.updates;
  tr["latency_ms"] = c.train.latency_ms;
  tr["checkpoint_every"] = c.train.checkpoint_every;
  auto& sw = j["sweep"];
  sw["latencies_ms"] = c.sweep.latencies_ms;
  sw["methods"] = c.sweep.methods;
  sw["seeds"] = c.sweep.seeds;
  return j;
}

/// Content hash of the resolved configuration (nlohmann dumps objects with
/// sorted keys, so the text is canonical).
inline std::string config_content_hash(const SimConfig& c) {
  return sha1_hex(config_to_json(c).dump());
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace isac
