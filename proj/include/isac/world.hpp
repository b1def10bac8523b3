#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "isac/action.hpp"
#include "isac/common.hpp"
#include "isac/rng.hpp"

namespace isac {

struct UEState {
  int id = 0;
  Vec2 pos;
  Vec2 vel;       // m/s
  int serving_bs = 0;
};

struct TargetState {
  int id = 0;
  Vec2 pos;
  Vec2 vel;
  double rcs = 1.0;  // sigma_RCS, m^2
};

struct BSConfig {
  int id = 0;
  Vec2 pos;
  double g_max_tx = 1.0;               // linear peak transmit gain
  double g_rx = 1.0;                   // linear receive gain
  double beamwidth_sigma = 0.1;        // comm beam, rad
  double beamwidth_sigma_sense = 0.1;  // sensing beam, rad (typically wider)
  double side_lobe = 0.01;             // sidelobe floor relative to peak (linear)
};

struct ChannelParams {
  double bandwidth_hz = 20e6;
  double noise_psd_dbm_hz = -174.0;
  double pathloss_exp = 3.2;
  double pathloss_const_db = -30.0;  // at 1 m
  double d_min_m = 1.0;

  /// Thermal noise integrated over the bandwidth, in watts.
  double noise_power_w() const {
    return dbm_to_watts(noise_psd_dbm_hz) * bandwidth_hz;
  }
};

/// Radar-equation calibration. The proportionality constant and receiver
/// noise reference are folded calibration knobs, not physical ground truth.
struct RadarParams {
  double c_radar = 1.3e8;
  double noise_w = 1.0;
};

struct SensingParams {
  double c_est_m = 5.0;
  double sigma_min_m = 0.1;
  double sigma_max_m = 10.0;
};

struct Arena {
  double width_m = 200.0;
  double height_m = 200.0;
};

struct WorldState {
  double t = 0.0;  // seconds
  std::vector<UEState> ues;
  std::vector<TargetState> targets;
  /// |h|^2 draws, row-major [bs][ue], E[|h|^2] = 1.
  std::vector<double> fading;
  int n_bs = 0;

  double fading_at(int bs, int ue) const {
    return fading[static_cast<std::size_t>(bs) * ues.size() + static_cast<std::size_t>(ue)];
  }
};

struct GroundTruthMetrics {
  std::vector<double> per_ue_rate_bps;
  double sum_rate_bps = 0.0;
  std::vector<double> per_target_sq_err_m2;
  double mse_m2 = 0.0;
  std::vector<double> interference_w;  // per UE
};

struct SensingEstimate {
  int target_id = 0;
  Vec2 est_pos;
  double est_sigma_m = 0.0;
};

/// Everything world_step needs besides the state itself.
struct WorldParams {
  Arena arena;
  ChannelParams channel;
  std::vector<BSConfig> bss;
  RadarParams radar;
  SensingParams sensing;
  double dt_s = 0.01;
};

inline double path_loss(double d, const ChannelParams& ch) {
  double dc = std::max(d, ch.d_min_m);
  return db_to_linear(ch.pathloss_const_db) * std::pow(dc, -ch.pathloss_exp);
}

/// Gaussian mainlobe over a flat sidelobe floor: peak gain at boresight,
/// rolled off by the wrapped angular offset between steering and bearing,
/// never below side_lobe * peak.
inline double beam_gain_peak(double steer, double bearing_to, double peak, double sigma,
                             double side_lobe) {
  double delta = wrap_angle(steer - bearing_to);
  double roll = std::exp(-delta * delta / (2.0 * sigma * sigma));
  return peak * std::max(roll, side_lobe);
}

inline double beam_gain(double steer, double bearing_to, const BSConfig& bs) {
  return beam_gain_peak(steer, bearing_to, bs.g_max_tx, bs.beamwidth_sigma, bs.side_lobe);
}

namespace detail {
inline void reflect_axis(double& p, double& v, double lo, double hi) {
  if (p < lo) {
    p = 2.0 * lo - p;
    v = -v;
  } else if (p > hi) {
    p = 2.0 * hi - p;
    v = -v;
  }
}
}  // namespace detail

/// Constant-velocity advance with reflective arena walls; fading is redrawn
/// i.i.d. each step.
inline WorldState advance_kinematics(WorldState state, double dt, const Arena& arena, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance_kinematics: dt must be > 0");
  for (auto& ue : state.ues) {
    ue.pos = ue.pos + ue.vel * dt;
    detail::reflect_axis(ue.pos.x, ue.vel.x, 0.0, arena.width_m);
    detail::reflect_axis(ue.pos.y, ue.vel.y, 0.0, arena.height_m);
  }
  for (auto& tg : state.targets) {
    tg.pos = tg.pos + tg.vel * dt;
    detail::reflect_axis(tg.pos.x, tg.vel.x, 0.0, arena.width_m);
    detail::reflect_axis(tg.pos.y, tg.vel.y, 0.0, arena.height_m);
  }
  for (auto& f : state.fading) f = rng.exponential();
  state.t += dt;
  return state;
}

/// Received power P_rx(i,j) for the communication link BS i -> UE j.
inline double received_power(const WorldState& state, const Action& action,
                             const ChannelParams& ch, const std::vector<BSConfig>& bss,
                             int bs, int ue) {
  const auto& b = bss[static_cast<std::size_t>(bs)];
  const auto& u = state.ues[static_cast<std::size_t>(ue)];
  const auto& a = action.bs[static_cast<std::size_t>(bs)];
  double g_t = beam_gain(a.theta_comm, bearing(b.pos, u.pos), b);
  double l = path_loss(dist(b.pos, u.pos), ch);
  return a.p_comm_w * g_t * b.g_rx * l * state.fading_at(bs, ue);
}

/// Per-UE achievable rates, inter-cell interference and the sum rate. Each UE
/// is served by its single associated BS; all other BSs contribute
/// interference.
inline GroundTruthMetrics compute_rates(const WorldState& state, const Action& action,
                                        const ChannelParams& ch,
                                        const std::vector<BSConfig>& bss) {
  GroundTruthMetrics m;
  const int n_ue = static_cast<int>(state.ues.size());
  const int n_bs = static_cast<int>(bss.size());
  m.per_ue_rate_bps.resize(static_cast<std::size_t>(n_ue));
  m.interference_w.resize(static_cast<std::size_t>(n_ue));
  const double noise = ch.noise_power_w();
  for (int j = 0; j < n_ue; ++j) {
    const int serving = state.ues[static_cast<std::size_t>(j)].serving_bs;
    double signal = 0.0;
    double interf = 0.0;
    for (int i = 0; i < n_bs; ++i) {
      double p = received_power(state, action, ch, bss, i, j);
      if (i == serving)
        signal = p;
      else
        interf += p;
    }
    double rate = ch.bandwidth_hz * std::log2(1.0 + signal / (noise + interf));
    m.per_ue_rate_bps[static_cast<std::size_t>(j)] = rate;
    m.interference_w[static_cast<std::size_t>(j)] = interf;
    m.sum_rate_bps += rate;
  }
  return m;
}

/// Radar range equation for one BS/target pair; both gains follow the sensing
/// beam of that BS.
inline double echo_snr(const BSConfig& bs, const TargetState& target, const Action& action,
                       const ChannelParams& ch, const RadarParams& radar) {
  const auto& a = action.bs[static_cast<std::size_t>(bs.id)];
  double range = std::max(dist(bs.pos, target.pos), ch.d_min_m);
  double brg = bearing(bs.pos, target.pos);
  double g_tx =
      beam_gain_peak(a.theta_sense, brg, bs.g_max_tx, bs.beamwidth_sigma_sense, bs.side_lobe);
  double g_rx =
      beam_gain_peak(a.theta_sense, brg, bs.g_rx, bs.beamwidth_sigma_sense, bs.side_lobe);
  double r4 = range * range * range * range;
  return radar.c_radar * a.p_sense_w * g_tx * g_rx * target.rcs / (r4 * radar.noise_w);
}

/// Per-target position estimates from the best-SNR BS, with CRLB-style noise
/// std c_est/sqrt(SNR) clamped to [sigma_min, sigma_max].
inline std::vector<SensingEstimate> generate_sensing_estimates(
    const WorldState& state, const Action& action, const ChannelParams& ch,
    const std::vector<BSConfig>& bss, const RadarParams& radar, const SensingParams& sp,
    Rng& rng) {
  std::vector<SensingEstimate> out;
  out.reserve(state.targets.size());
  for (const auto& tg : state.targets) {
    double best_snr = 0.0;
    for (const auto& bs : bss) best_snr = std::max(best_snr, echo_snr(bs, tg, action, ch, radar));
    double sigma;
    if (best_snr > 0.0)
      sigma = std::clamp(sp.c_est_m / std::sqrt(best_snr), sp.sigma_min_m, sp.sigma_max_m);
    else
      sigma = sp.sigma_max_m;
    double nx = rng.normal();
    double ny = rng.normal();
    out.push_back({tg.id, {tg.pos.x + sigma * nx, tg.pos.y + sigma * ny}, sigma});
  }
  return out;
}

inline double sensing_mse(const std::vector<Vec2>& true_pos, const std::vector<Vec2>& est_pos) {
  if (true_pos.size() != est_pos.size() || true_pos.empty())
    throw std::invalid_argument("sensing_mse: position lists must be equal-length and non-empty");
  double acc = 0.0;
  for (std::size_t k = 0; k < true_pos.size(); ++k) acc += (est_pos[k] - true_pos[k]).norm_sq();
  return acc / static_cast<double>(true_pos.size());
}

struct WorldStepResult {
  WorldState state;
  GroundTruthMetrics metrics;
  std::vector<SensingEstimate> estimates;
};

/// Apply an action: compute rates and sensing quality on the current state,
/// then advance kinematics by dt.
inline WorldStepResult world_step(const WorldState& state, const Action& action,
                                  const WorldParams& wp, Rng& rng) {
  WorldStepResult r;
  r.metrics = compute_rates(state, action, wp.channel, wp.bss);
  r.estimates =
      generate_sensing_estimates(state, action, wp.channel, wp.bss, wp.radar, wp.sensing, rng);
  std::vector<Vec2> tp, ep;
  tp.reserve(state.targets.size());
  ep.reserve(state.targets.size());
  r.metrics.per_target_sq_err_m2.resize(state.targets.size());
  for (std::size_t k = 0; k < state.targets.size(); ++k) {
    tp.push_back(state.targets[k].pos);
    ep.push_back(r.estimates[k].est_pos);
    r.metrics.per_target_sq_err_m2[k] = (ep[k] - tp[k]).norm_sq();
  }
  r.metrics.mse_m2 = sensing_mse(tp, ep);
  r.state = advance_kinematics(state, wp.dt_s, wp.arena, rng);
  return r;
}

}  // namespace isac
