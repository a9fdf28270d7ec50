#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mesosim/network.hpp"

namespace mesosim::ctrl {

struct MpConfig {
  int rate_limit_s = 5;  // max green change per phase between cycles
};

// Pressure of incoming link z: occupancy surplus over its turn-ratio-weighted
// downstream occupancies, scaled by saturation flow and clamped at zero.
// mean_queue holds cycle-mean vehicle counts indexed by link.
double link_pressure(const net::Network& net, const net::TurnRatioTable& ratios,
                     net::LinkIdx z, std::span<const double> mean_queue);

// Per-phase pressure: sum over the phase's incoming links (each counted once),
// clamped at zero.
std::vector<double> phase_pressures(const net::Node& node,
                                    std::span<const double> pressure_by_link);

// Proportional split of the effective green budget over the controllable
// phases. Ineligible phases stay pinned at their fixed-time green and are
// excluded from the budget. With zero total pressure the previous greens are
// kept (the split is undefined there, and holding is the least disruptive).
std::vector<double> raw_green_split(const net::Node& node,
                                    std::span<const double> phase_pressure,
                                    std::span<const int> prev_greens);

// Nearest feasible integer plan: cycle equality, min greens, per-cycle rate
// limit. Exact projection via the allocation solver.
std::vector<int> project_greens(const net::Node& node,
                                std::span<const double> raw_greens,
                                std::span<const int> prev_greens,
                                int rate_limit);

// Per-intersection controller state: previously applied greens plus the
// running-queue snapshot used to form cycle means.
class MpNode {
 public:
  MpNode(const net::Network& net, net::NodeIdx node, MpConfig cfg);

  net::NodeIdx node() const { return node_; }
  const std::vector<int>& applied_greens() const { return greens_; }

  // Called at this node's cycle boundary. cum_queue is the running per-link
  // sum of x_z over all steps so far; cycle means come from differencing it
  // against the snapshot taken at the previous boundary. The first call only
  // initializes the snapshot and returns the standing plan.
  const std::vector<int>& update(const net::Network& net,
                                 const net::TurnRatioTable& ratios,
                                 std::span<const double> cum_queue,
                                 std::int64_t step);

 private:
  net::NodeIdx node_;
  MpConfig cfg_;
  std::vector<int> greens_;
  std::vector<net::LinkIdx> adjacent_;  // incoming plus outgoing links
  std::vector<double> snapshot_;
  std::int64_t snapshot_step_ = -1;
  std::vector<double> mean_buf_;
  std::vector<double> pressure_buf_;
};

}  // namespace mesosim::ctrl
