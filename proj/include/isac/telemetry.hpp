#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "isac/common.hpp"
#include "isac/rng.hpp"
#include "isac/world.hpp"

namespace isac {

/// Truncated-Gaussian latency, quantized to the control step grid.
struct DelayModel {
  double mean_ms = 50.0;
  double std_ms = 15.0;
  double step_ms = 10.0;
};

struct TelemetryNoise {
  double ue_pos_sigma_m = 0.2;
};

struct Measurement {
  int id = 0;
  Vec2 pos;
  double sigma_m = 0.0;
};

struct TelemetryPacket {
  double gen_time = 0.0;      // tau, seconds, on the step grid
  double arrival_time = 0.0;  // tau + sampled delay
  int delay_steps = 0;
  std::vector<Measurement> ue_meas;
  std::vector<Measurement> target_meas;
};

/// Draw ~ N(mean, std), truncate at zero, round to whole steps.
inline int sample_delay(const DelayModel& model, Rng& rng) {
  double d = rng.normal(model.mean_ms, model.std_ms);
  d = std::max(d, 0.0);
  return static_cast<int>(std::llround(d / model.step_ms));
}

/// Snapshot the current state into a time-stamped packet. The arrival time is
/// accumulated in dt increments so it compares bit-exactly against the world
/// clock, which advances the same way.
inline TelemetryPacket emit(const WorldState& state, const std::vector<SensingEstimate>& sensing,
                            const TelemetryNoise& noise, const DelayModel& model, double dt_s,
                            Rng& rng) {
  TelemetryPacket pkt;
  pkt.gen_time = state.t;
  pkt.delay_steps = sample_delay(model, rng);
  double arr = state.t;
  for (int i = 0; i < pkt.delay_steps; ++i) arr += dt_s;
  pkt.arrival_time = arr;
  pkt.ue_meas.reserve(state.ues.size());
  for (const auto& ue : state.ues) {
    double nx = rng.normal();
    double ny = rng.normal();
    pkt.ue_meas.push_back({ue.id,
                           {ue.pos.x + noise.ue_pos_sigma_m * nx, ue.pos.y + noise.ue_pos_sigma_m * ny},
                           noise.ue_pos_sigma_m});
  }
  pkt.target_meas.reserve(sensing.size());
  for (const auto& est : sensing)
    pkt.target_meas.push_back({est.target_id, est.est_pos, est.est_sigma_m});
  return pkt;
}

/// Bounded store of packets keyed by generation time; oldest evicted first.
class TelemetryBuffer {
 public:
  explicit TelemetryBuffer(std::size_t capacity = 64) : capacity_(capacity) {}

  /// Insert (or replace, per timestamp) a packet; evicts the smallest
  /// gen_time when over capacity.
  void push(const TelemetryPacket& pkt) {
    packets_[pkt.gen_time] = pkt;
    while (packets_.size() > capacity_) packets_.erase(packets_.begin());
  }

  /// Newest-generated packet that has arrived by `now` (arrival_time <= now).
  std::optional<TelemetryPacket> newest_available(double now) const {
    for (auto it = packets_.rbegin(); it != packets_.rend(); ++it)
      if (it->second.arrival_time <= now) return it->second;
    return std::nullopt;
  }

  std::size_t size() const { return packets_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::map<double, TelemetryPacket> packets_;
  std::size_t capacity_;
};

}  // namespace isac
