#include "mesosim/node_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mesosim/rng.hpp"

namespace mesosim::select {

std::vector<net::NodeIdx> eligible_nodes(const net::Network& net) {
  std::vector<net::NodeIdx> out;
  for (std::size_t n = 0; n < net.n_nodes(); ++n) {
    if (!net.is_boundary_node[n] && !net.nodes[n].phases.empty()) {
      out.push_back(net::NodeIdx(n));
    }
  }
  return out;
}

std::pair<std::int64_t, std::int64_t> peak_window(const sim::Trajectory& traj,
                                                  double fraction) {
  if (traj.horizon <= 0) throw std::invalid_argument("empty trajectory");
  double peak = 0.0;
  for (const double v : traj.x_total) peak = std::max(peak, v);
  const double bar = fraction * peak;
  std::int64_t best_b = 0, best_e = 0, b = -1;
  for (std::int64_t k = 0; k <= traj.horizon; ++k) {
    const bool in = k < traj.horizon && traj.x_total[std::size_t(k)] >= bar;
    if (in && b < 0) b = k;
    if (!in && b >= 0) {
      if (k - b > best_e - best_b) {
        best_b = b;
        best_e = k;
      }
      b = -1;
    }
  }
  return {best_b, best_e};
}

NodeMetrics node_metrics(const sim::Trajectory& traj, const net::Network& net,
                         net::NodeIdx node, std::int64_t k0, std::int64_t k1,
                         double congestion_threshold) {
  if (k1 <= k0 || k0 < 0 || k1 > traj.horizon) {
    throw std::invalid_argument("empty or out-of-range peak window");
  }
  if (traj.link_x.empty()) {
    throw std::invalid_argument(
        "trajectory was recorded without per-link series");
  }
  const std::vector<net::LinkIdx>& in = net.nodes[node].incoming;
  if (in.empty()) throw std::invalid_argument("node has no incoming links");

  NodeMetrics m;
  m.node = node;
  const double inv_links = 1.0 / double(in.size());
  for (std::int64_t k = k0; k < k1; ++k) {
    double mean = 0.0;
    double sq = 0.0;
    for (const net::LinkIdx z : in) {
      const double occ = traj.link_x_at(k, z) / net.capacity[z];
      mean += occ;
      sq += occ * occ;
    }
    mean *= inv_links;
    sq *= inv_links;
    m.mean_occupancy += mean;
    m.occupancy_variance += std::max(0.0, sq - mean * mean);
  }
  const double inv_steps = 1.0 / double(k1 - k0);
  m.mean_occupancy *= inv_steps;
  m.occupancy_variance *= inv_steps;

  // congested-cycle fraction over whole control cycles inside the window;
  // a shorter window counts as a single truncated cycle
  const auto cycle_steps = std::int64_t(
      std::llround(net.nodes[node].cycle / traj.step_s));
  const std::int64_t span = k1 - k0;
  const std::int64_t n_cycles =
      cycle_steps > 0 && span >= cycle_steps ? span / cycle_steps : 1;
  const std::int64_t len = span >= cycle_steps ? cycle_steps : span;
  std::int64_t congested = 0;
  for (std::int64_t c = 0; c < n_cycles; ++c) {
    bool hit = false;
    for (const net::LinkIdx z : in) {
      double sum = 0.0;
      for (std::int64_t k = k0 + c * len; k < k0 + (c + 1) * len; ++k) {
        sum += traj.link_x_at(k, z);
      }
      if (sum / double(len) >= congestion_threshold * net.capacity[z]) {
        hit = true;
        break;
      }
    }
    if (hit) ++congested;
  }
  m.congested_fraction = double(congested) / double(n_cycles);
  return m;
}

std::vector<NodeMetrics> score_nodes(const sim::Trajectory& traj,
                                     const net::Network& net,
                                     std::span<const net::NodeIdx> nodes,
                                     std::int64_t k0, std::int64_t k1,
                                     Weights w, double congestion_threshold) {
  std::vector<NodeMetrics> out;
  out.reserve(nodes.size());
  for (const net::NodeIdx n : nodes) {
    NodeMetrics m = node_metrics(traj, net, n, k0, k1, congestion_threshold);
    m.score = w.alpha * m.mean_occupancy + w.beta * m.occupancy_variance +
              w.gamma * m.congested_fraction;
    out.push_back(m);
  }
  return out;
}

std::vector<net::NodeIdx> select_lowest(std::vector<NodeMetrics> scored,
                                        double rate) {
  if (rate <= 0.0 || rate > 1.0) {
    throw std::invalid_argument("penetration rate must be in (0, 1]");
  }
  const auto want = std::size_t(std::ceil(rate * double(scored.size())));
  std::stable_sort(scored.begin(), scored.end(),
                   [](const NodeMetrics& a, const NodeMetrics& b) {
                     return std::tie(a.score, a.node) <
                            std::tie(b.score, b.node);
                   });
  std::vector<net::NodeIdx> out;
  out.reserve(want);
  for (std::size_t i = 0; i < want && i < scored.size(); ++i) {
    out.push_back(scored[i].node);
  }
  return out;
}

std::vector<std::vector<net::NodeIdx>> random_sets(
    std::span<const net::NodeIdx> eligible, double rate, int count,
    std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  if (rate <= 0.0 || rate > 1.0) {
    throw std::invalid_argument("penetration rate must be in (0, 1]");
  }
  const auto want = std::size_t(std::ceil(rate * double(eligible.size())));
  if (want > eligible.size()) {
    throw std::invalid_argument("set size exceeds eligible count");
  }
  rng::SplitMix64 gen(seed);
  std::vector<std::vector<net::NodeIdx>> sets;
  sets.reserve(std::size_t(count));
  std::vector<net::NodeIdx> pool(eligible.begin(), eligible.end());
  for (int s = 0; s < count; ++s) {
    // partial Fisher-Yates
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j = i + std::size_t(gen.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    std::vector<net::NodeIdx> set(pool.begin(), pool.begin() + want);
    std::sort(set.begin(), set.end());
    sets.push_back(std::move(set));
  }
  return sets;
}

CalibrationResult calibrate_weights(
    std::span<const Weights> grid,
    const std::function<double(const Weights&)>& evaluate) {
  if (grid.empty()) throw std::invalid_argument("empty weight grid");
  CalibrationResult res;
  double best = std::numeric_limits<double>::infinity();
  for (const Weights& w : grid) {
    CalibrationPoint pt;
    pt.weights = w;
    try {
      pt.vht = evaluate(w);
      pt.ok = true;
    } catch (const std::exception&) {
      pt.ok = false;
    }
    if (pt.ok && pt.vht < best) {
      best = pt.vht;
      res.best = res.table.size();
    }
    res.table.push_back(pt);
  }
  if (!std::isfinite(best)) {
    throw std::runtime_error("every calibration point failed");
  }
  return res;
}

}  // namespace mesosim::select
