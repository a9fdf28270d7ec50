#include "mesosim/perimeter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mesosim::ctrl {

int pi_step(PiState& s, std::span<const double> n) {
  const std::size_t regions = s.setpoints.size();
  const std::size_t dim = s.u.size();
  if (n.size() != regions || s.n_start.size() != regions ||
      s.n_stop.size() != regions || s.kp.size() != dim ||
      s.ki.size() != dim) {
    throw std::invalid_argument("PI state dimensions do not match layout");
  }

  int transition = 0;
  if (!s.active) {
    int above = 0;
    for (std::size_t i = 0; i < regions; ++i) {
      if (n[i] >= s.n_start[i]) ++above;
    }
    if (above >= s.min_regions_to_activate) {
      s.active = true;
      transition = 1;
    }
  } else {
    bool all_below = true;
    for (std::size_t i = 0; i < regions; ++i) {
      if (n[i] >= s.n_stop[i]) {
        all_below = false;
        break;
      }
    }
    if (all_below) {
      s.active = false;
      transition = -1;
    }
  }

  if (s.active) {
    for (std::size_t j = 0; j < dim; ++j) {
      if (s.kp[j].size() != regions || s.ki[j].size() != regions) {
        throw std::invalid_argument("gain row does not span all regions");
      }
      double du = 0.0;
      for (std::size_t i = 0; i < regions; ++i) {
        const double delta = s.have_prev_n ? n[i] - s.prev_n[i] : 0.0;
        du -= s.kp[j][i] * delta;
        du -= s.ki[j][i] * (n[i] - s.setpoints[i]);
      }
      s.u[j] = std::clamp(s.u[j] + du, s.u_min[j], s.u_max[j]);
    }
  }

  s.prev_n.assign(n.begin(), n.end());
  s.have_prev_n = true;
  return transition;
}

BoundarySplit allocate_boundary_green(double u, double queue_primary,
                                      double queue_secondary, int total,
                                      BoundarySplit prev, int min_green_primary,
                                      int min_green_secondary, int rate_limit) {
  int lo = std::max(min_green_primary, prev.primary - rate_limit);
  int hi = std::min(prev.primary + rate_limit, total - min_green_secondary);
  // the secondary rate limit maps onto the primary variable as well
  lo = std::max(lo, total - prev.secondary - rate_limit);
  hi = std::min(hi, total - prev.secondary + rate_limit);
  if (lo > hi) {
    throw std::runtime_error("boundary green allocation infeasible");
  }
  const double target_secondary = total - u;
  int best = lo;
  double best_cost = 0.0;
  bool first = true;
  for (int g = lo; g <= hi; ++g) {
    const double dp = g - u;
    const double ds = (total - g) - target_secondary;
    const double cost = queue_primary * dp * dp + queue_secondary * ds * ds;
    if (first || cost < best_cost ||
        (cost == best_cost &&
         std::abs(g - prev.primary) < std::abs(best - prev.primary))) {
      best = g;
      best_cost = cost;
      first = false;
    }
  }
  return {best, total - best};
}

double external_gate(double prev_factor, double u, double nominal, double floor,
                     double rate) {
  const double target = std::clamp(u / nominal, floor, 1.0);
  return prev_factor + std::clamp(target - prev_factor, -rate, rate);
}

std::vector<int> restore_toward(std::span<const int> current,
                                std::span<const int> target, int rate_limit) {
  std::vector<int> next(current.begin(), current.end());
  for (std::size_t j = 0; j < next.size(); ++j) {
    next[j] += std::clamp(target[j] - next[j], -rate_limit, rate_limit);
  }
  return next;
}

PerimeterController::PerimeterController(const net::Network& net, PcConfig cfg)
    : cfg_(std::move(cfg)) {
  const std::size_t groups = net.boundary_groups.size();
  const std::size_t regions = net.n_regions();
  const std::size_t dim = groups + regions;
  if (cfg_.kp.size() != dim || cfg_.ki.size() != dim) {
    throw std::invalid_argument(
        "gain matrices must have one row per boundary group plus one per "
        "region");
  }
  if (cfg_.setpoints.size() != regions || cfg_.n_start.size() != regions ||
      cfg_.n_stop.size() != regions) {
    throw std::invalid_argument("setpoint vectors must cover all regions");
  }

  pi_.u.assign(dim, 0.0);
  pi_.u_min.assign(dim, 0.0);
  pi_.u_max.assign(dim, 0.0);
  pi_.kp = cfg_.kp;
  pi_.ki = cfg_.ki;
  pi_.setpoints = cfg_.setpoints;
  pi_.n_start = cfg_.n_start;
  pi_.n_stop = cfg_.n_stop;
  pi_.min_regions_to_activate = cfg_.min_regions_to_activate;

  governed_.assign(net.n_nodes(), 0);
  for (std::size_t g = 0; g < groups; ++g) {
    double lo = 0.0;
    double hi = 0.0;
    bool any = false;
    for (const net::BoundaryNode& b : net.boundary_groups[g].nodes) {
      if (governed_[b.node]) {
        throw std::invalid_argument("node " + net.nodes[b.node].id +
                                    " appears in more than one boundary group");
      }
      governed_[b.node] = 1;
      const net::Node& nd = net.nodes[b.node];
      const int gp = nd.phases[b.primary_phase].fixed_green;
      const int gs = nd.phases[b.secondary_phase].fixed_green;
      const int min_p = nd.phases[b.primary_phase].min_green;
      const int min_s = nd.phases[b.secondary_phase].min_green;
      const double node_lo = min_p;
      const double node_hi = gp + gs - min_s;
      lo = any ? std::max(lo, node_lo) : node_lo;
      hi = any ? std::min(hi, node_hi) : node_hi;
      pi_.u[g] += gp;
      any = true;
    }
    if (any) {
      pi_.u[g] /= double(net.boundary_groups[g].nodes.size());
      pi_.u_min[g] = lo;
      pi_.u_max[g] = hi;
    }
  }
  for (std::size_t r = 0; r < regions; ++r) {
    const std::size_t j = groups + r;
    pi_.u[j] = cfg_.external_nominal;
    pi_.u_min[j] = cfg_.external_floor * cfg_.external_nominal;
    pi_.u_max[j] = cfg_.external_nominal;
  }

  gating_.assign(regions, 1.0);
  pending_.resize(net.n_nodes());
}

void PerimeterController::reinit_u(const net::Network& net,
                                   const std::vector<std::vector<int>>& applied) {
  const std::size_t groups = net.boundary_groups.size();
  for (std::size_t g = 0; g < groups; ++g) {
    const auto& members = net.boundary_groups[g].nodes;
    if (members.empty()) continue;
    double sum = 0.0;
    for (const net::BoundaryNode& b : members) {
      sum += applied[b.node][b.primary_phase];
    }
    pi_.u[g] = std::clamp(sum / double(members.size()), pi_.u_min[g],
                          pi_.u_max[g]);
  }
  for (std::size_t r = 0; r < net.n_regions(); ++r) {
    pi_.u[groups + r] = std::clamp(gating_[r] * cfg_.external_nominal,
                                   pi_.u_min[groups + r],
                                   pi_.u_max[groups + r]);
  }
}

PerimeterController::IntervalResult PerimeterController::interval_update(
    const net::Network& net, std::span<const double> n_mean,
    std::span<const double> queue_mean,
    const std::vector<std::vector<int>>& applied) {
  // Bumpless transfer: when about to activate, re-seed u from the plans and
  // gates actually in force, which may have drifted during restoration.
  if (!pi_.active) {
    int above = 0;
    for (std::size_t i = 0; i < n_mean.size(); ++i) {
      if (n_mean[i] >= pi_.n_start[i]) ++above;
    }
    if (above >= pi_.min_regions_to_activate) reinit_u(net, applied);
  }

  const int transition = pi_step(pi_, n_mean);
  if (transition < 0) {
    restoring_ = true;
    for (auto& p : pending_) p.reset();
  }

  const std::size_t groups = net.boundary_groups.size();
  if (pi_.active) {
    restoring_ = false;
    for (std::size_t g = 0; g < groups; ++g) {
      const double u = pi_.u[g];
      for (const net::BoundaryNode& b : net.boundary_groups[g].nodes) {
        const net::Node& nd = net.nodes[b.node];
        double qp = 0.0;
        double qs = 0.0;
        for (const net::LinkIdx z : nd.phases[b.primary_phase].in_links) {
          qp += queue_mean[z];
        }
        for (const net::LinkIdx z : nd.phases[b.secondary_phase].in_links) {
          qs += queue_mean[z];
        }
        const BoundarySplit prev{applied[b.node][b.primary_phase],
                                 applied[b.node][b.secondary_phase]};
        const BoundarySplit split = allocate_boundary_green(
            u, qp, qs, prev.primary + prev.secondary, prev,
            nd.phases[b.primary_phase].min_green,
            nd.phases[b.secondary_phase].min_green, cfg_.rate_limit_s);
        std::vector<int> plan = applied[b.node];
        plan[b.primary_phase] = split.primary;
        plan[b.secondary_phase] = split.secondary;
        pending_[b.node] = std::move(plan);
      }
    }
    for (std::size_t r = 0; r < net.n_regions(); ++r) {
      gating_[r] = external_gate(gating_[r], pi_.u[groups + r],
                                 cfg_.external_nominal, cfg_.external_floor,
                                 cfg_.external_rate);
    }
  } else {
    // gates walk back to fully open while the controller rests
    for (std::size_t r = 0; r < net.n_regions(); ++r) {
      gating_[r] = external_gate(gating_[r], cfg_.external_nominal,
                                 cfg_.external_nominal, cfg_.external_floor,
                                 cfg_.external_rate);
    }
  }

  return {pi_.active, pi_.u, gating_};
}

std::optional<std::vector<int>> PerimeterController::plan_for(
    const net::Network& net, net::NodeIdx node, std::span<const int> current) {
  if (!governed_[node]) return std::nullopt;
  if (pi_.active) {
    if (pending_[node]) return pending_[node];
    return std::nullopt;
  }
  if (!restoring_) return std::nullopt;
  const std::vector<int> target = net.fixed_greens(node);
  if (std::equal(current.begin(), current.end(), target.begin(),
                 target.end())) {
    return std::nullopt;
  }
  return restore_toward(current, target, cfg_.rate_limit_s);
}

}  // namespace mesosim::ctrl
