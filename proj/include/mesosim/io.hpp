#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mesosim/network.hpp"

namespace mesosim::io {

// Demand as it appears in the demand file: piecewise-constant OD rates.
struct DemandEntry {
  std::string origin;
  std::string destination;
  double rate_vph = 0.0;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct DemandSpec {
  std::vector<DemandEntry> entries;
};

net::NetworkSpec load_network_spec(const std::string& path);
void save_network_spec(const net::NetworkSpec& spec, const std::string& path);

DemandSpec load_demand(const std::string& path);
void save_demand(const DemandSpec& demand, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace mesosim::io
