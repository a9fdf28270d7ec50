#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mesosim/network.hpp"

namespace mesosim::ctrl {

struct PcConfig {
  int interval_s = 90;
  // Gain rows follow the control-variable layout: one row per boundary group
  // (in network order), then one external row per region. Columns are regions.
  std::vector<std::vector<double>> kp;
  std::vector<std::vector<double>> ki;
  std::vector<double> setpoints;  // n-hat per region, vehicles
  std::vector<double> n_start;    // activation thresholds per region
  std::vector<double> n_stop;     // deactivation thresholds per region
  int min_regions_to_activate = 2;
  int rate_limit_s = 5;
  double external_floor = 0.15;   // minimum fraction of entry saturation flow
  double external_rate = 0.2;     // max gating-factor change per interval
  double external_nominal = 1.0;  // u value mapping to an open gate
};

// PI regulator state in velocity form: u carries the integral, so clamping u
// to its bounds is the anti-windup.
struct PiState {
  std::vector<double> u;
  std::vector<double> u_min;
  std::vector<double> u_max;
  std::vector<double> prev_n;
  bool have_prev_n = false;
  bool active = false;
  std::vector<std::vector<double>> kp;
  std::vector<std::vector<double>> ki;
  std::vector<double> setpoints;
  std::vector<double> n_start;
  std::vector<double> n_stop;
  int min_regions_to_activate = 2;
};

// One control-interval update: hysteresis automaton first, then the PI law
// while active. Returns +1 if this call activated the controller, -1 if it
// deactivated it, 0 otherwise.
int pi_step(PiState& s, std::span<const double> n);

struct BoundarySplit {
  int primary = 0;
  int secondary = 0;
};

// Queue-weighted split of the fixed primary+secondary budget around the
// regulator average u. Exhaustive scan over the feasible integers; ties are
// resolved toward the previous plan, then the smaller green.
BoundarySplit allocate_boundary_green(double u, double queue_primary,
                                      double queue_secondary, int total,
                                      BoundarySplit prev, int min_green_primary,
                                      int min_green_secondary, int rate_limit);

// Entry-saturation gate: target factor clamp(u / nominal, floor, 1) with a
// per-interval change limit.
double external_gate(double prev_factor, double u, double nominal, double floor,
                     double rate);

// One rate-limited restoration move toward the fixed-time plan.
std::vector<int> restore_toward(std::span<const int> current,
                                std::span<const int> target, int rate_limit);

// Regional perimeter controller. The engine feeds interval-mean accumulations
// and queue means at every control interval and asks for per-node plans at
// cycle boundaries; gating factors apply to external entry links immediately.
class PerimeterController {
 public:
  PerimeterController(const net::Network& net, PcConfig cfg);

  struct IntervalResult {
    bool active = false;
    std::vector<double> u;
    std::vector<double> gating;  // per region
  };

  // n_mean: interval-mean accumulation per region. queue_mean: interval-mean
  // vehicles per link. applied: current greens per node.
  IntervalResult interval_update(
      const net::Network& net, std::span<const double> n_mean,
      std::span<const double> queue_mean,
      const std::vector<std::vector<int>>& applied);

  // Plan to adopt at this node's cycle boundary, if the controller currently
  // commands one (pending gated plan while active, restoration step after).
  std::optional<std::vector<int>> plan_for(const net::Network& net,
                                           net::NodeIdx node,
                                           std::span<const int> current);

  bool governs(net::NodeIdx node) const { return governed_[node]; }
  bool active() const { return pi_.active; }
  std::span<const double> gating() const { return gating_; }
  const PiState& pi() const { return pi_; }

 private:
  void reinit_u(const net::Network& net,
                const std::vector<std::vector<int>>& applied);

  PcConfig cfg_;
  PiState pi_;
  std::vector<std::uint8_t> governed_;  // per node
  std::vector<double> gating_;          // per region
  bool restoring_ = false;
  // pending plans while active, indexed by node
  std::vector<std::optional<std::vector<int>>> pending_;
};

}  // namespace mesosim::ctrl
