#include "mesosim/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mesosim::net {

namespace {

template <typename Map>
auto lookup(const Map& m, std::string_view id, const char* what) {
  const auto it = m.find(id);
  if (it == m.end()) {
    throw BuildError(std::string("unknown ") + what + ": " + std::string(id));
  }
  return it->second;
}

}  // namespace

LinkIdx Network::link_index(std::string_view id) const {
  return lookup(link_by_id_, id, "link");
}

NodeIdx Network::node_index(std::string_view id) const {
  return lookup(node_by_id_, id, "node");
}

RegionIdx Network::region_index(std::string_view id) const {
  return lookup(region_by_id_, id, "region");
}

std::vector<int> Network::fixed_greens(NodeIdx n) const {
  std::vector<int> g;
  g.reserve(nodes[n].phases.size());
  for (const Phase& ph : nodes[n].phases) g.push_back(ph.fixed_green);
  return g;
}

std::vector<std::string> validate_signal_plan(const Node& node,
                                              std::span<const int> greens) {
  std::vector<std::string> violations;
  if (greens.size() != node.phases.size()) {
    violations.push_back(node.id + ": plan has " +
                         std::to_string(greens.size()) + " greens for " +
                         std::to_string(node.phases.size()) + " phases");
    return violations;
  }
  const long total = std::accumulate(greens.begin(), greens.end(), 0L);
  if (total + node.lost_time != node.cycle) {
    violations.push_back(node.id + ": cycle violation, greens " +
                         std::to_string(total) + " + lost " +
                         std::to_string(node.lost_time) + " != cycle " +
                         std::to_string(node.cycle));
  }
  for (std::size_t j = 0; j < node.phases.size(); ++j) {
    if (greens[j] < node.phases[j].min_green) {
      violations.push_back(node.id + "/" + node.phases[j].id +
                           ": min-green violation, " +
                           std::to_string(greens[j]) + " < " +
                           std::to_string(node.phases[j].min_green));
    }
  }
  return violations;
}

Network build_network(const NetworkSpec& spec) {
  Network net;
  net.vehicle_length = spec.vehicle_length_m;
  if (net.vehicle_length <= 0.0) throw BuildError("vehicle length must be > 0");

  // Regions first: link order depends on them.
  for (const std::string& r : spec.partition.regions) {
    if (!net.region_by_id_.emplace(r, RegionIdx(net.region_id.size())).second) {
      throw BuildError("duplicate region id: " + r);
    }
    net.region_id.push_back(r);
  }
  if (net.region_id.empty()) throw BuildError("partition lists no regions");

  // Sort links by (region, id) so each region is a contiguous index range.
  std::vector<const LinkSpec*> ordered;
  ordered.reserve(spec.links.size());
  {
    std::set<std::string_view> seen;
    for (const LinkSpec& l : spec.links) {
      if (!seen.insert(l.id).second) {
        throw BuildError("duplicate link id: " + l.id);
      }
      ordered.push_back(&l);
    }
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [&](const LinkSpec* a, const LinkSpec* b) {
                     const RegionIdx ra = lookup(net.region_by_id_, a->region,
                                                 "region (in link)");
                     const RegionIdx rb = lookup(net.region_by_id_, b->region,
                                                 "region (in link)");
                     return std::tie(ra, a->id) < std::tie(rb, b->id);
                   });

  std::map<std::string, NodeIdx, std::less<>> node_ids;
  for (const NodeSpec& n : spec.nodes) {
    if (!node_ids.emplace(n.id, NodeIdx(node_ids.size())).second) {
      throw BuildError("duplicate node id: " + n.id);
    }
  }

  const auto n_links = ordered.size();
  net.link_id.reserve(n_links);
  for (const LinkSpec* l : ordered) {
    if (l->length_m <= 0.0) throw BuildError(l->id + ": length must be > 0");
    if (l->lanes < 1) throw BuildError(l->id + ": lanes must be >= 1");
    if (l->saturation_flow <= 0.0) {
      throw BuildError(l->id + ": saturation flow must be > 0");
    }
    if (l->free_flow_speed <= 0.0) {
      throw BuildError(l->id + ": free-flow speed must be > 0");
    }
    const double cap =
        std::floor(l->length_m * l->lanes / net.vehicle_length);
    if (cap < 1.0) throw BuildError(l->id + ": storage capacity below 1 veh");

    net.link_by_id_.emplace(l->id, LinkIdx(net.link_id.size()));
    net.link_id.push_back(l->id);
    net.length.push_back(l->length_m);
    net.lanes.push_back(l->lanes);
    net.capacity.push_back(cap);
    net.sat_flow.push_back(l->saturation_flow);
    net.vff.push_back(l->free_flow_speed);
    net.link_from.push_back(
        l->from_node.empty() ? kNone : lookup(node_ids, l->from_node, "node"));
    net.link_to.push_back(
        l->to_node.empty() ? kNone : lookup(node_ids, l->to_node, "node"));
    net.link_region.push_back(net.region_index(l->region));
    net.is_origin.push_back(l->is_origin ? 1 : 0);
    net.is_destination.push_back(l->is_destination ? 1 : 0);
  }

  net.region_links.assign(net.n_regions(), {0, 0});
  for (std::size_t r = 0; r < net.n_regions(); ++r) {
    const auto lo = std::find(net.link_region.begin(), net.link_region.end(),
                              RegionIdx(r));
    auto hi = lo;
    while (hi != net.link_region.end() && *hi == RegionIdx(r)) ++hi;
    net.region_links[r] = {LinkIdx(lo - net.link_region.begin()),
                           LinkIdx(hi - net.link_region.begin())};
  }

  // Nodes, phases and the connection table.
  net.nodes.resize(node_ids.size());
  struct RawConn {
    LinkIdx from, to;
    NodeIdx node;
    std::int32_t phase;
  };
  std::vector<RawConn> raw;
  for (const NodeSpec& ns : spec.nodes) {
    const NodeIdx ni = node_ids.at(ns.id);
    Node& node = net.nodes[ni];
    node.id = ns.id;
    node.cycle = ns.cycle_s;
    node.lost_time = ns.lost_time_s;
    node.offset = ns.offset_s;
    if (node.cycle <= 0) throw BuildError(ns.id + ": cycle must be > 0");
    if (node.lost_time < 0) throw BuildError(ns.id + ": negative lost time");

    std::set<std::pair<LinkIdx, LinkIdx>> seen_moves;
    std::vector<int> greens;
    for (const PhaseSpec& ps : ns.phases) {
      Phase ph;
      ph.id = ps.id;
      ph.fixed_green = ps.fixed_green_s;
      ph.min_green = ps.min_green_s;
      if (ph.min_green < 1) {
        throw BuildError(ns.id + "/" + ps.id + ": min green must be >= 1");
      }
      if (ph.fixed_green < ph.min_green) {
        throw BuildError(ns.id + "/" + ps.id + ": fixed green below minimum");
      }
      ph.mp_eligible = ph.fixed_green > spec.mp_eligibility_threshold_s;
      for (const auto& [in_id, out_id] : ps.approaches) {
        const LinkIdx zi = net.link_index(in_id);
        const LinkIdx wi = net.link_index(out_id);
        if (net.link_to[zi] != ni) {
          throw BuildError(ns.id + "/" + ps.id + ": approach in-link " +
                           in_id + " does not end at this node");
        }
        if (net.link_from[wi] != ni) {
          throw BuildError(ns.id + "/" + ps.id + ": approach out-link " +
                           out_id + " does not start at this node");
        }
        if (!seen_moves.insert({zi, wi}).second) {
          throw BuildError(ns.id + ": movement " + in_id + " -> " + out_id +
                           " appears in more than one phase");
        }
        raw.push_back({zi, wi, ni, std::int32_t(node.phases.size())});
        if (std::find(ph.in_links.begin(), ph.in_links.end(), zi) ==
            ph.in_links.end()) {
          ph.in_links.push_back(zi);
        }
      }
      std::sort(ph.in_links.begin(), ph.in_links.end());
      greens.push_back(ph.fixed_green);
      node.phases.push_back(std::move(ph));
    }
    const auto violations = validate_signal_plan(node, greens);
    if (!violations.empty()) throw BuildError(violations.front());
  }
  net.node_by_id_ = std::move(node_ids);

  for (const auto& [in_id, out_id] : spec.unsignalized_connections) {
    const LinkIdx zi = net.link_index(in_id);
    const LinkIdx wi = net.link_index(out_id);
    raw.push_back({zi, wi, net.link_to[zi], kNone});
  }

  std::sort(raw.begin(), raw.end(), [](const RawConn& a, const RawConn& b) {
    return std::tie(a.from, a.to) < std::tie(b.from, b.to);
  });
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (raw[i].from == raw[i - 1].from && raw[i].to == raw[i - 1].to) {
      throw BuildError("duplicate movement " + net.link_id[raw[i].from] +
                       " -> " + net.link_id[raw[i].to]);
    }
  }
  net.connections.reserve(raw.size());
  for (const RawConn& rc : raw) {
    net.connections.push_back({rc.from, rc.to, rc.node, rc.phase});
  }
  net.link_conn_begin.assign(n_links + 1, 0);
  for (const Connection& c : net.connections) net.link_conn_begin[c.from + 1]++;
  for (std::size_t z = 0; z < n_links; ++z) {
    net.link_conn_begin[z + 1] += net.link_conn_begin[z];
  }

  // Incoming/outgoing link lists per node, then the connection phase indices
  // stay valid because phases were appended in file order.
  for (std::size_t z = 0; z < n_links; ++z) {
    if (net.link_to[z] != kNone) {
      net.nodes[net.link_to[z]].incoming.push_back(LinkIdx(z));
    }
    if (net.link_from[z] != kNone) {
      net.nodes[net.link_from[z]].outgoing.push_back(LinkIdx(z));
    }
  }

  // Partition extras.
  net.is_boundary_node.assign(net.n_nodes(), 0);
  for (const BoundaryGroupSpec& g : spec.partition.boundary_groups) {
    BoundaryGroup group;
    group.from = net.region_index(g.from_region);
    group.to = net.region_index(g.to_region);
    for (const BoundaryNodeSpec& bn : g.nodes) {
      BoundaryNode b;
      b.node = net.node_index(bn.node);
      const Node& node = net.nodes[b.node];
      for (std::size_t j = 0; j < node.phases.size(); ++j) {
        if (node.phases[j].id == bn.primary_phase) b.primary_phase = j;
        if (node.phases[j].id == bn.secondary_phase) b.secondary_phase = j;
      }
      if (b.primary_phase == kNone || b.secondary_phase == kNone) {
        throw BuildError("boundary node " + bn.node +
                         ": unknown primary/secondary phase");
      }
      if (b.primary_phase == b.secondary_phase) {
        throw BuildError("boundary node " + bn.node +
                         ": primary and secondary phase coincide");
      }
      net.is_boundary_node[b.node] = 1;
      group.nodes.push_back(b);
    }
    net.boundary_groups.push_back(std::move(group));
  }

  net.external_entries.assign(net.n_regions(), {});
  for (const auto& [region, links] : spec.partition.external_entries) {
    const RegionIdx r = net.region_index(region);
    for (const std::string& lid : links) {
      const LinkIdx z = net.link_index(lid);
      if (!net.is_origin[z]) {
        throw BuildError("external entry " + lid + " is not an origin link");
      }
      net.external_entries[r].push_back(z);
    }
    std::sort(net.external_entries[r].begin(), net.external_entries[r].end());
  }

  return net;
}

TurnRatioTable TurnRatioTable::uniform(const Network& net) {
  TurnRatioTable t;
  t.beta.assign(net.connections.size(), 0.0);
  t.ending.assign(net.n_links(), 0.0);
  for (std::size_t z = 0; z < net.n_links(); ++z) {
    const auto conns = net.connections_from(LinkIdx(z));
    if (conns.empty()) {
      t.ending[z] = 1.0;
      continue;
    }
    const double share = 1.0 / double(conns.size());
    for (ConnIdx c = net.link_conn_begin[z]; c < net.link_conn_begin[z + 1];
         ++c) {
      t.beta[c] = share;
    }
  }
  return t;
}

std::vector<std::string> TurnRatioTable::validate(const Network& net) const {
  std::vector<std::string> out;
  if (beta.size() != net.connections.size() ||
      ending.size() != net.n_links()) {
    out.push_back("turn table sized for a different network");
    return out;
  }
  for (std::size_t z = 0; z < net.n_links(); ++z) {
    double row = 0.0;
    for (ConnIdx c = net.link_conn_begin[z]; c < net.link_conn_begin[z + 1];
         ++c) {
      if (beta[c] < 0.0) out.push_back(net.link_id[z] + ": negative ratio");
      row += beta[c];
    }
    if (net.has_downstream(LinkIdx(z)) && std::abs(row - 1.0) > 1e-9) {
      out.push_back(net.link_id[z] + ": ratio row sums to " +
                    std::to_string(row));
    }
    if (ending[z] < 0.0 || ending[z] > 1.0) {
      out.push_back(net.link_id[z] + ": ending fraction out of [0,1]");
    }
  }
  return out;
}

}  // namespace mesosim::net
