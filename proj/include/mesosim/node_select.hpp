#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "mesosim/network.hpp"
#include "mesosim/sim.hpp"

namespace mesosim::select {

struct Weights {
  double alpha = 0.0;  // mean occupancy
  double beta = 0.0;   // occupancy variance
  double gamma = 0.0;  // congested fraction
};

struct NodeMetrics {
  net::NodeIdx node = net::kNone;
  double mean_occupancy = 0.0;      // m1
  double occupancy_variance = 0.0;  // m2, population variance
  double congested_fraction = 0.0;  // N_c
  double score = 0.0;               // R
};

// Signalized nodes not assigned to any boundary group.
std::vector<net::NodeIdx> eligible_nodes(const net::Network& net);

// Longest contiguous step interval where total accumulation stays at or above
// fraction * max. Returns [k0, k1).
std::pair<std::int64_t, std::int64_t> peak_window(const sim::Trajectory& traj,
                                                  double fraction = 0.8);

// Peak-period criteria of one node from a per-link trajectory: time-mean of
// the mean incoming occupancy, time-mean of its population variance, and the
// fraction of control cycles with some incoming link's cycle-mean queue at or
// above congestion_threshold * capacity.
NodeMetrics node_metrics(const sim::Trajectory& traj, const net::Network& net,
                         net::NodeIdx node, std::int64_t k0, std::int64_t k1,
                         double congestion_threshold = 0.8);

// Metrics plus linear score for every listed node.
std::vector<NodeMetrics> score_nodes(const sim::Trajectory& traj,
                                     const net::Network& net,
                                     std::span<const net::NodeIdx> nodes,
                                     std::int64_t k0, std::int64_t k1,
                                     Weights w,
                                     double congestion_threshold = 0.8);

// ceil(rate * n) nodes of smallest score, in ascending score order, ties by
// ascending node index.
std::vector<net::NodeIdx> select_lowest(std::vector<NodeMetrics> scored,
                                        double rate);

// Uniform samples without replacement of size ceil(rate * n), seeded.
std::vector<std::vector<net::NodeIdx>> random_sets(
    std::span<const net::NodeIdx> eligible, double rate, int count,
    std::uint64_t seed);

struct CalibrationPoint {
  Weights weights;
  double vht = 0.0;
  bool ok = false;
};

struct CalibrationResult {
  std::vector<CalibrationPoint> table;
  std::size_t best = 0;  // index into table
};

// Grid search: evaluate(weights) selects nodes, simulates, and returns VHT.
// Points whose evaluation throws are recorded as failed and skipped.
CalibrationResult calibrate_weights(
    std::span<const Weights> grid,
    const std::function<double(const Weights&)>& evaluate);

}  // namespace mesosim::select
