#pragma once

#include <span>
#include <vector>

#include "mesosim/network.hpp"

namespace mesosim::routing {

struct OdVolume {
  net::LinkIdx origin = net::kNone;
  net::LinkIdx destination = net::kNone;
  double volume = 0.0;  // vehicles entering during the window
};

// A trip split at the routing horizon: the remainder continues next window
// from the link it was in. time_in_link_s is carried for completeness but not
// consumed downstream.
struct TripStackEntry {
  net::LinkIdx origin = net::kNone;
  net::LinkIdx destination = net::kNone;
  double volume = 0.0;
  double time_in_link_s = 0.0;
};

struct UpdateResult {
  net::TurnRatioTable ratios;
  std::vector<TripStackEntry> stack;
  double completed_volume = 0.0;
  double dropped_volume = 0.0;  // unreachable destinations
};

// Window-mean speed per link from summed outflow and accumulation, clamped to
// [v_min, free-flow]; empty links travel at free-flow speed.
std::vector<double> estimate_link_speeds(const net::Network& net,
                                         std::span<const double> outflow_sum,
                                         std::span<const double> queue_sum,
                                         double step_s, double v_min);

// Recomputes turn ratios and trip-ending fractions from time-minimal paths
// under the given speeds. Ongoing trips are merged with the window demand,
// paths longer than the window are split and pushed onto the returned stack,
// and connection counters along traversed prefixes produce the new ratios.
// Links no path traversed keep their previous row.
UpdateResult update_turn_ratios(const net::Network& net,
                                std::span<const OdVolume> demand,
                                std::span<const TripStackEntry> ongoing,
                                std::span<const double> speed,
                                const net::TurnRatioTable& previous,
                                double window_s);

}  // namespace mesosim::routing
