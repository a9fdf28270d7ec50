#pragma once

#include <string>
#include <vector>

#include "mesosim/network.hpp"

namespace test_helpers {

inline mesosim::net::LinkSpec link(std::string id, std::string from,
                                   std::string to, double length = 200.0,
                                   int lanes = 2, double sat = 1.0,
                                   double vff = 10.0,
                                   std::string region = "R0") {
  mesosim::net::LinkSpec l;
  l.id = std::move(id);
  l.from_node = std::move(from);
  l.to_node = std::move(to);
  l.length_m = length;
  l.lanes = lanes;
  l.saturation_flow = sat;
  l.free_flow_speed = vff;
  l.region = std::move(region);
  return l;
}

// in -> node -> out, one phase holding the single movement
inline mesosim::net::NetworkSpec single_junction(int cycle = 90, int lost = 10,
                                                 int green = 80) {
  mesosim::net::NetworkSpec spec;
  spec.partition.regions = {"R0"};
  auto a = link("A", "", "N", 200.0);
  a.is_origin = true;
  auto b = link("B", "N", "", 200.0);
  b.is_destination = true;
  spec.links = {a, b};
  mesosim::net::NodeSpec n;
  n.id = "N";
  n.cycle_s = cycle;
  n.lost_time_s = lost;
  n.phases.push_back({"N_p0", {{"A", "B"}}, green, 7});
  spec.nodes = {n};
  return spec;
}

}  // namespace test_helpers
