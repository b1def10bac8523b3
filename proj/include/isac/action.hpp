#pragma once

#include <vector>

#include "isac/common.hpp"

namespace isac {

/// Per-BS joint control: communication/sensing transmit powers and the two
/// beam steering angles. Feasible once projected (powers >= 0, sum <= P_max,
/// angles in (-pi, pi]).
struct BsAction {
  double p_comm_w = 0.0;
  double p_sense_w = 0.0;
  double theta_comm = 0.0;
  double theta_sense = 0.0;
};

struct Action {
  std::vector<BsAction> bs;

  double total_power_w() const {
    double s = 0.0;
    for (const auto& a : bs) s += a.p_comm_w + a.p_sense_w;
    return s;
  }
};

inline Action zero_action(int n_bs) {
  Action a;
  a.bs.resize(static_cast<std::size_t>(n_bs));
  return a;
}

struct PowerBudget {
  double p_max_w = 1.0;
};

}  // namespace isac
