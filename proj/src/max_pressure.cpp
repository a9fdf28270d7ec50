#include "mesosim/max_pressure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mesosim/alloc.hpp"

namespace mesosim::ctrl {

double link_pressure(const net::Network& net, const net::TurnRatioTable& ratios,
                     net::LinkIdx z, std::span<const double> mean_queue) {
  if (ratios.beta.size() != net.connections.size()) {
    throw std::invalid_argument("turn-ratio table does not match network");
  }
  double occ = mean_queue[z] / net.capacity[z];
  for (net::ConnIdx c = net.link_conn_begin[z]; c < net.link_conn_begin[z + 1];
       ++c) {
    const net::LinkIdx w = net.connections[c].to;
    occ -= ratios.beta[c] * mean_queue[w] / net.capacity[w];
  }
  return std::max(0.0, occ * net.sat_flow[z]);
}

std::vector<double> phase_pressures(const net::Node& node,
                                    std::span<const double> pressure_by_link) {
  std::vector<double> p;
  p.reserve(node.phases.size());
  for (const net::Phase& ph : node.phases) {
    double sum = 0.0;
    for (const net::LinkIdx z : ph.in_links) sum += pressure_by_link[z];
    p.push_back(std::max(0.0, sum));
  }
  return p;
}

std::vector<double> raw_green_split(const net::Node& node,
                                    std::span<const double> phase_pressure,
                                    std::span<const int> prev_greens) {
  const std::size_t n = node.phases.size();
  std::vector<double> raw(n);
  double budget = node.cycle - node.lost_time;
  double total_pressure = 0.0;
  std::size_t eligible = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (node.phases[j].mp_eligible) {
      total_pressure += phase_pressure[j];
      ++eligible;
    } else {
      budget -= node.phases[j].fixed_green;
      raw[j] = node.phases[j].fixed_green;
    }
  }
  if (eligible <= 1 || total_pressure <= 0.0) {
    for (std::size_t j = 0; j < n; ++j) raw[j] = prev_greens[j];
    return raw;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (node.phases[j].mp_eligible) {
      raw[j] = phase_pressure[j] / total_pressure * budget;
    }
  }
  return raw;
}

std::vector<int> project_greens(const net::Node& node,
                                std::span<const double> raw_greens,
                                std::span<const int> prev_greens,
                                int rate_limit) {
  alloc::Problem p;
  std::vector<std::size_t> vars;
  int budget = node.cycle - node.lost_time;
  for (std::size_t j = 0; j < node.phases.size(); ++j) {
    if (!node.phases[j].mp_eligible) {
      budget -= node.phases[j].fixed_green;
      continue;
    }
    vars.push_back(j);
    p.weight.push_back(1.0);
    p.target.push_back(raw_greens[j]);
    p.lo.push_back(std::max(node.phases[j].min_green,
                            prev_greens[j] - rate_limit));
    p.hi.push_back(prev_greens[j] + rate_limit);
  }
  std::vector<int> greens(prev_greens.begin(), prev_greens.end());
  if (vars.empty()) return greens;
  p.budget = budget;
  const std::vector<int> solved = alloc::solve(p);
  for (std::size_t i = 0; i < vars.size(); ++i) greens[vars[i]] = solved[i];
  return greens;
}

MpNode::MpNode(const net::Network& net, net::NodeIdx node, MpConfig cfg)
    : node_(node), cfg_(cfg), greens_(net.fixed_greens(node)) {
  const net::Node& nd = net.nodes[node];
  adjacent_ = nd.incoming;
  adjacent_.insert(adjacent_.end(), nd.outgoing.begin(), nd.outgoing.end());
  std::sort(adjacent_.begin(), adjacent_.end());
  adjacent_.erase(std::unique(adjacent_.begin(), adjacent_.end()),
                  adjacent_.end());
  snapshot_.assign(adjacent_.size(), 0.0);
  mean_buf_.assign(net.n_links(), 0.0);
}

const std::vector<int>& MpNode::update(const net::Network& net,
                                       const net::TurnRatioTable& ratios,
                                       std::span<const double> cum_queue,
                                       std::int64_t step) {
  if (snapshot_step_ < 0 || step <= snapshot_step_) {
    for (std::size_t i = 0; i < adjacent_.size(); ++i) {
      snapshot_[i] = cum_queue[adjacent_[i]];
    }
    snapshot_step_ = step;
    return greens_;
  }
  const double inv_steps = 1.0 / double(step - snapshot_step_);
  for (std::size_t i = 0; i < adjacent_.size(); ++i) {
    mean_buf_[adjacent_[i]] =
        (cum_queue[adjacent_[i]] - snapshot_[i]) * inv_steps;
    snapshot_[i] = cum_queue[adjacent_[i]];
  }
  snapshot_step_ = step;

  const net::Node& nd = net.nodes[node_];
  pressure_buf_.assign(net.n_links(), 0.0);
  for (const net::LinkIdx z : nd.incoming) {
    pressure_buf_[z] = link_pressure(net, ratios, z, mean_buf_);
  }
  const std::vector<double> phase_p = phase_pressures(nd, pressure_buf_);
  const std::vector<double> raw = raw_green_split(nd, phase_p, greens_);
  greens_ = project_greens(nd, raw, greens_, cfg_.rate_limit_s);
  return greens_;
}

}  // namespace mesosim::ctrl
