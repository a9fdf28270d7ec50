#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mesosim::net {

using LinkIdx = std::int32_t;
using NodeIdx = std::int32_t;
using RegionIdx = std::int32_t;
using ConnIdx = std::int32_t;

inline constexpr std::int32_t kNone = -1;

struct BuildError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Input records, matching the network file schema (docs/formats.md).

struct LinkSpec {
  std::string id;
  std::string from_node;  // empty: enters from outside the network
  std::string to_node;    // empty: leaves the network
  double length_m = 0.0;
  int lanes = 1;
  double saturation_flow = 0.0;   // veh/s
  double free_flow_speed = 0.0;   // m/s
  std::string region;
  bool is_origin = false;
  bool is_destination = false;
};

struct PhaseSpec {
  std::string id;
  // (incoming link, outgoing link) pairs that get right-of-way together
  std::vector<std::pair<std::string, std::string>> approaches;
  int fixed_green_s = 0;
  int min_green_s = 7;
};

struct NodeSpec {
  std::string id;
  int cycle_s = 90;
  int lost_time_s = 10;
  int offset_s = 0;
  std::vector<PhaseSpec> phases;
};

struct BoundaryNodeSpec {
  std::string node;
  std::string primary_phase;    // serves the gated direction
  std::string secondary_phase;  // receives the green taken from primary
};

struct BoundaryGroupSpec {
  std::string from_region;
  std::string to_region;
  std::vector<BoundaryNodeSpec> nodes;
};

struct PartitionSpec {
  std::vector<std::string> regions;
  std::vector<BoundaryGroupSpec> boundary_groups;
  // region -> origin links whose inflow is gated by the external perimeter
  std::map<std::string, std::vector<std::string>> external_entries;
};

struct NetworkSpec {
  double vehicle_length_m = 5.0;
  double mp_eligibility_threshold_s = 7.0;
  std::vector<LinkSpec> links;
  std::vector<NodeSpec> nodes;
  // allowed movements at unsignalized junctions (always green)
  std::vector<std::pair<std::string, std::string>> unsignalized_connections;
  PartitionSpec partition;
};

// ---------------------------------------------------------------------------
// Built network. Links live in dense index order sorted by (region, id) so
// regional reductions run over contiguous ranges. Immutable after build.

struct Connection {
  LinkIdx from = kNone;
  LinkIdx to = kNone;
  NodeIdx node = kNone;       // signalized node owning the movement, or kNone
  std::int32_t phase = kNone; // phase index within node, kNone = always green
};

struct Phase {
  std::string id;
  std::vector<ConnIdx> connections;
  std::vector<LinkIdx> in_links;  // unique incoming links of the phase
  int fixed_green = 0;
  int min_green = 0;
  bool mp_eligible = false;
};

struct Node {
  std::string id;
  int cycle = 0;
  int lost_time = 0;
  int offset = 0;
  std::vector<Phase> phases;
  std::vector<LinkIdx> incoming;
  std::vector<LinkIdx> outgoing;
};

struct BoundaryNode {
  NodeIdx node = kNone;
  std::int32_t primary_phase = kNone;
  std::int32_t secondary_phase = kNone;
};

struct BoundaryGroup {
  RegionIdx from = kNone;
  RegionIdx to = kNone;
  std::vector<BoundaryNode> nodes;
};

class Network {
 public:
  double vehicle_length = 5.0;

  std::vector<std::string> link_id;
  std::vector<double> length;
  std::vector<int> lanes;
  std::vector<double> capacity;   // c_z, vehicles
  std::vector<double> sat_flow;   // S_z, veh/s
  std::vector<double> vff;        // m/s
  std::vector<NodeIdx> link_from;
  std::vector<NodeIdx> link_to;
  std::vector<RegionIdx> link_region;
  std::vector<std::uint8_t> is_origin;
  std::vector<std::uint8_t> is_destination;

  std::vector<std::string> region_id;
  // per region: [begin, end) range of link indices
  std::vector<std::pair<LinkIdx, LinkIdx>> region_links;

  std::vector<Node> nodes;
  std::vector<std::uint8_t> is_boundary_node;  // per node

  std::vector<Connection> connections;   // sorted by (from, to)
  std::vector<ConnIdx> link_conn_begin;  // size n_links + 1

  std::vector<BoundaryGroup> boundary_groups;
  std::vector<std::vector<LinkIdx>> external_entries;  // per region

  std::size_t n_links() const { return link_id.size(); }
  std::size_t n_nodes() const { return nodes.size(); }
  std::size_t n_regions() const { return region_id.size(); }

  LinkIdx link_index(std::string_view id) const;
  NodeIdx node_index(std::string_view id) const;
  RegionIdx region_index(std::string_view id) const;

  std::span<const Connection> connections_from(LinkIdx z) const {
    return {connections.data() + link_conn_begin[z],
            connections.data() + link_conn_begin[z + 1]};
  }

  bool has_downstream(LinkIdx z) const {
    return link_conn_begin[z + 1] > link_conn_begin[z];
  }

  // Greens of the pre-timed plan, in phase order.
  std::vector<int> fixed_greens(NodeIdx n) const;

 private:
  friend Network build_network(const NetworkSpec&);
  std::map<std::string, LinkIdx, std::less<>> link_by_id_;
  std::map<std::string, NodeIdx, std::less<>> node_by_id_;
  std::map<std::string, RegionIdx, std::less<>> region_by_id_;
};

// Validates ids, cross-references, capacities and signal plans; resolves
// everything to dense indices. Throws BuildError with a description of the
// first problem found.
Network build_network(const NetworkSpec& spec);

// Plan feasibility check: sum of greens + lost time == cycle, and each green
// >= its phase minimum. Returns human-readable violations, empty when valid.
std::vector<std::string> validate_signal_plan(const Node& node,
                                              std::span<const int> greens);

// ---------------------------------------------------------------------------
// Turn ratios and trip-ending fractions, defined on the allowed movements.

struct TurnRatioTable {
  std::vector<double> beta;    // per connection index
  std::vector<double> ending;  // per link: fraction of waiting outflow ending here

  // Uniform split over allowed downstream links; ending = 1 on links with no
  // downstream (pure sinks), 0 elsewhere.
  static TurnRatioTable uniform(const Network& net);

  // Row-sum and range violations, empty when valid.
  std::vector<std::string> validate(const Network& net) const;
};

}  // namespace mesosim::net
