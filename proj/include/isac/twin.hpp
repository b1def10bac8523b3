#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "isac/common.hpp"
#include "isac/telemetry.hpp"
#include "isac/world.hpp"

namespace isac {

struct EKFParams {
  double q_scale = 1.0;   // white-acceleration intensity, m^2/s^3
  double r_floor = 1e-4;  // minimum measurement variance, m^2
  // Track management: a measurement with sigma at or above lost_sigma_m is a
  // declared no-lock; the track's position covariance is inflated before the
  // update so the gain stays open and the track can re-acquire instead of
  // coasting on a stale velocity.
  double lost_sigma_m = 8.0;
  double lost_pos_var_m2 = 100.0;
};

/// One constant-velocity track: mean [px, py, vx, vy], 4x4 covariance.
struct EKFTrack {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();
  double last_update = 0.0;

  Vec2 pos() const { return {mean(0), mean(1)}; }
  Vec2 vel() const { return {mean(2), mean(3)}; }
};

inline Eigen::Matrix4d cv_transition(double dt) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

/// Discretized white-noise-acceleration process covariance.
inline Eigen::Matrix4d cv_process_noise(double dt, double q_scale) {
  double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q(0, 0) = q(1, 1) = dt4 / 4.0;
  q(0, 2) = q(2, 0) = q(1, 3) = q(3, 1) = dt3 / 2.0;
  q(2, 2) = q(3, 3) = dt2;
  return q * q_scale;
}

inline EKFTrack ekf_predict(EKFTrack track, double dt, const EKFParams& params) {
  if (dt < 0.0) throw std::invalid_argument("ekf_predict: dt must be >= 0");
  Eigen::Matrix4d f = cv_transition(dt);
  track.mean = f * track.mean;
  track.cov = f * track.cov * f.transpose() + cv_process_noise(dt, params.q_scale);
  track.last_update += dt;
  return track;
}

struct EKFUpdateResult {
  EKFTrack track;
  bool rejected = false;
};

/// Position-only linear update, Joseph-form covariance. Non-finite
/// measurements are rejected and leave the track unchanged.
inline EKFUpdateResult ekf_update(EKFTrack track, const Vec2& z, double meas_sigma,
                                  const EKFParams& params) {
  if (!is_finite(z)) return {track, true};
  double r = std::max(meas_sigma * meas_sigma, params.r_floor);
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  Eigen::Matrix2d rm = Eigen::Matrix2d::Identity() * r;
  Eigen::Matrix2d s = h * track.cov * h.transpose() + rm;
  Eigen::Matrix<double, 4, 2> k = track.cov * h.transpose() * s.inverse();
  Eigen::Vector2d innov(z.x - track.mean(0), z.y - track.mean(1));
  track.mean += k * innov;
  Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - k * h;
  track.cov = ikh * track.cov * ikh.transpose() + k * rm * k.transpose();
  return {track, false};
}

/// Twin output: synchronized per-entity tracks plus link-quality proxies.
struct BeliefState {
  std::vector<EKFTrack> ue_tracks;
  std::vector<EKFTrack> target_tracks;
  std::vector<double> csi_proxy;  // per UE, unitless SINR proxy
  double effective_lag_s = 0.0;
};

struct CsiParams {
  double ref_power_w = 0.5;
};

/// Deterministic SINR proxy from predicted positions: reference power, unit
/// fading, and — when the previous step's action is supplied — every BS's
/// comm-beam pattern at its last pointing, so the proxy reflects each UE's
/// current condition (a UE parked at a sidelobe, or caught in another cell's
/// mainlobe, ranks as weak). Without an action all gains are boresight.
inline std::vector<double> predict_csi(const BeliefState& belief, const std::vector<int>& serving,
                                       const std::vector<BSConfig>& bss, const ChannelParams& ch,
                                       const CsiParams& csi, const Action* prev_action = nullptr) {
  std::vector<double> out(belief.ue_tracks.size(), 0.0);
  const double noise = ch.noise_power_w();
  for (std::size_t j = 0; j < belief.ue_tracks.size(); ++j) {
    Vec2 p = belief.ue_tracks[j].pos();
    double signal = 0.0, interf = 0.0;
    for (const auto& bs : bss) {
      double gain = bs.g_max_tx;
      if (prev_action) {
        double bearing = std::atan2(p.y - bs.pos.y, p.x - bs.pos.x);
        gain = beam_gain(prev_action->bs[static_cast<std::size_t>(bs.id)].theta_comm, bearing, bs);
      }
      double pw = csi.ref_power_w * gain * path_loss(dist(bs.pos, p), ch);
      if (bs.id == serving[j])
        signal = pw;
      else
        interf += pw;
    }
    out[j] = signal / (noise + interf);
  }
  return out;
}

/// Digital Twin: one EKF track per UE and target, fed by delayed packets.
/// Tracks persist at the generation time of the last processed packet; the
/// belief is a prediction of those tracks forward to the decision time.
/// Never rewinds: packets at or before the last processed generation time
/// only trigger forward prediction.
class DigitalTwin {
 public:
  DigitalTwin() = default;

  DigitalTwin(int n_ue, int n_tgt, const EKFParams& params, Vec2 default_pos)
      : params_(params), default_pos_(default_pos) {
    ue_tracks_.resize(static_cast<std::size_t>(n_ue));
    ue_init_.assign(static_cast<std::size_t>(n_ue), false);
    target_tracks_.resize(static_cast<std::size_t>(n_tgt));
    target_init_.assign(static_cast<std::size_t>(n_tgt), false);
  }

  /// Seed every track from a known snapshot (the registration state handed
  /// over when the episode starts): exact positions, zero velocity, moderate
  /// uncertainty. Later packets refine these tracks through regular updates;
  /// a packet generated exactly at `t0` is considered already absorbed.
  void seed_from_snapshot(const std::vector<Vec2>& ue_pos, const std::vector<Vec2>& tgt_pos,
                          double t0) {
    if (ue_pos.size() != ue_tracks_.size() || tgt_pos.size() != target_tracks_.size())
      throw std::invalid_argument("seed_from_snapshot: size mismatch");
    seed_list(ue_tracks_, ue_init_, ue_pos, t0);
    seed_list(target_tracks_, target_init_, tgt_pos, t0);
    track_time_ = t0;
    last_meas_time_ = t0;
  }

  /// Covariance given to a freshly seeded track: loose on velocity (speed is
  /// never measured directly), moderately tight on position.
  static Eigen::Matrix4d seed_cov() {
    Eigen::Vector4d d(25.0, 25.0, 100.0, 100.0);
    return d.asDiagonal();
  }

  /// Process the newest packet (if new) and build the belief at `now`.
  BeliefState synchronize(const std::optional<TelemetryPacket>& pkt, double now) {
    if (pkt && pkt->gen_time > last_meas_time_) {
      double gap = pkt->gen_time - track_time_;
      advance_tracks(gap);
      apply_measurements(*pkt);
      track_time_ = pkt->gen_time;
      last_meas_time_ = pkt->gen_time;
    }
    BeliefState belief;
    double ahead = now - track_time_;
    belief.ue_tracks = predict_list(ue_tracks_, ue_init_, ahead);
    belief.target_tracks = predict_list(target_tracks_, target_init_, ahead);
    belief.effective_lag_s = now - last_meas_time_;
    return belief;
  }

  int unmatched_count() const { return unmatched_; }
  int rejected_count() const { return rejected_; }
  double last_measurement_time() const { return last_meas_time_; }

 private:
  static void seed_list(std::vector<EKFTrack>& tracks, std::vector<bool>& init,
                        const std::vector<Vec2>& pos, double t0) {
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      tracks[i].mean << pos[i].x, pos[i].y, 0.0, 0.0;
      tracks[i].cov = seed_cov();
      tracks[i].last_update = t0;
      init[i] = true;
    }
  }

  void advance_tracks(double dt) {
    if (dt <= 0.0) return;
    for (std::size_t i = 0; i < ue_tracks_.size(); ++i)
      if (ue_init_[i]) ue_tracks_[i] = ekf_predict(ue_tracks_[i], dt, params_);
    for (std::size_t i = 0; i < target_tracks_.size(); ++i)
      if (target_init_[i]) target_tracks_[i] = ekf_predict(target_tracks_[i], dt, params_);
  }

  void apply_one(std::vector<EKFTrack>& tracks, std::vector<bool>& init, const Measurement& m,
                 double gen_time) {
    if (m.id < 0 || m.id >= static_cast<int>(tracks.size())) {
      ++unmatched_;
      return;
    }
    auto idx = static_cast<std::size_t>(m.id);
    if (!init[idx]) {
      if (!is_finite(m.pos)) {
        ++rejected_;
        return;
      }
      // First measurement seeds the track: position from z, zero velocity.
      tracks[idx].mean << m.pos.x, m.pos.y, 0.0, 0.0;
      tracks[idx].cov = seed_cov();
      tracks[idx].last_update = gen_time;
      init[idx] = true;
      return;
    }
    if (m.sigma_m >= params_.lost_sigma_m) {
      tracks[idx].cov(0, 0) += params_.lost_pos_var_m2;
      tracks[idx].cov(1, 1) += params_.lost_pos_var_m2;
    }
    auto res = ekf_update(tracks[idx], m.pos, m.sigma_m, params_);
    tracks[idx] = res.track;
    if (res.rejected) ++rejected_;
  }

  void apply_measurements(const TelemetryPacket& pkt) {
    for (const auto& m : pkt.ue_meas) apply_one(ue_tracks_, ue_init_, m, pkt.gen_time);
    for (const auto& m : pkt.target_meas) apply_one(target_tracks_, target_init_, m, pkt.gen_time);
  }

  std::vector<EKFTrack> predict_list(const std::vector<EKFTrack>& tracks,
                                     const std::vector<bool>& init, double ahead) const {
    std::vector<EKFTrack> out;
    out.reserve(tracks.size());
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      EKFTrack t = tracks[i];
      if (!init[i]) {
        t.mean << default_pos_.x, default_pos_.y, 0.0, 0.0;
        Eigen::Vector4d d(1e4, 1e4, 100.0, 100.0);
        t.cov = d.asDiagonal();
      }
      if (ahead > 0.0) t = ekf_predict(t, ahead, params_);
      out.push_back(std::move(t));
    }
    return out;
  }

  EKFParams params_;
  Vec2 default_pos_;
  std::vector<EKFTrack> ue_tracks_;
  std::vector<EKFTrack> target_tracks_;
  std::vector<bool> ue_init_;
  std::vector<bool> target_init_;
  double track_time_ = 0.0;
  double last_meas_time_ = 0.0;
  int unmatched_ = 0;
  int rejected_ = 0;
};

}  // namespace isac
