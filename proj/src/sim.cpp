#include "mesosim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mesosim/kernels.hpp"

namespace mesosim::sim {

State State::zero(const net::Network& net) {
  State s;
  const std::size_t n = net.n_links();
  s.moving.assign(n, 0.0);
  s.waiting.assign(n, 0.0);
  s.vq.assign(n, 0.0);
  s.cohorts.assign(n, {});
  s.cum_x.assign(n, 0.0);
  s.cum_out.assign(n, 0.0);
  s.cum_entry.assign(n, 0.0);
  return s;
}

std::vector<double> State::x() const {
  std::vector<double> out(moving.size());
  for (std::size_t z = 0; z < moving.size(); ++z) {
    out[z] = moving[z] + waiting[z];
  }
  return out;
}

StepScratch::StepScratch(const net::Network& net)
    : served(net.n_links(), 0.0),
      candidate(net.connections.size(), 0.0),
      inflow_sum(net.n_links(), 0.0),
      room(net.n_links(), 0.0),
      arrivals_in(net.n_links(), 0.0),
      outflow(net.n_links(), 0.0) {}

namespace {

// steps until a cohort entering now reaches the queue tail
std::int64_t entry_delay(const net::Network& net, const Params& p,
                         net::LinkIdx z, double queue_tail_veh) {
  const double run = std::max(
      0.0, net.length[z] - queue_tail_veh * net.vehicle_length);
  return std::int64_t(std::ceil(run / (net.vff[z] * p.step_s)));
}

void push_cohort(State& s, const net::Network& net, const Params& p,
                 net::LinkIdx z, double volume) {
  Cohort c;
  c.release_step = s.step + entry_delay(net, p, z, s.waiting[z]);
  c.volume = volume;
  s.cohorts[z].push_back(c);
  s.moving[z] += volume;
}

}  // namespace

void advance(const net::Network& net, const Params& p, State& s,
             std::span<const double> arrivals, const StepSignals& signals,
             const net::TurnRatioTable& ratios, std::span<const double> end_cap,
             StepScratch& sc) {
  const std::size_t n = net.n_links();
  const double T = p.step_s;
  const std::int64_t k = s.step;

  // (1) demand joins the virtual queues
  for (std::size_t z = 0; z < n; ++z) {
    if (arrivals[z] > 0.0) {
      s.vq[z] += arrivals[z];
      s.generated += arrivals[z];
    }
  }

  // (2) gated release from virtual queues into origin links
  for (std::size_t z = 0; z < n; ++z) {
    if (s.vq[z] <= 0.0) continue;
    const double free = net.capacity[z] - (s.moving[z] + s.waiting[z]);
    const double rel =
        std::min({s.vq[z], net.sat_flow[z] * signals.entry_gate[z] * T,
                  std::max(0.0, free)});
    if (rel <= 0.0) continue;
    s.vq[z] -= rel;
    s.cum_entry[z] += rel;
    push_cohort(s, net, p, net::LinkIdx(z), rel);
  }

  // (3) trip endings, served off the waiting queues regardless of signals
  kernels::serve_capped(s.waiting.data(), end_cap.data(), sc.served.data(), n);
  s.completed += kernels::sum(sc.served.data(), n);
  std::copy(sc.served.begin(), sc.served.end(), sc.outflow.begin());

  // (4) transfers: candidates from a consistent snapshot, then rationed
  std::fill(sc.inflow_sum.begin(), sc.inflow_sum.end(), 0.0);
  std::fill(sc.arrivals_in.begin(), sc.arrivals_in.end(), 0.0);
  for (std::size_t z = 0; z < n; ++z) {
    sc.room[z] =
        std::max(0.0, net.capacity[z] - (s.moving[z] + s.waiting[z]));
  }
  const std::size_t n_conn = net.connections.size();
  for (std::size_t c = 0; c < n_conn; ++c) {
    const net::Connection& cn = net.connections[c];
    sc.candidate[c] = 0.0;
    const bool green = cn.phase == net::kNone ||
                       signals.active_phase[cn.node] == cn.phase;
    if (!green) continue;
    const double avail = std::min(s.waiting[cn.from], net.sat_flow[cn.from] * T);
    if (avail <= 0.0) continue;
    const double x_to = s.moving[cn.to] + s.waiting[cn.to];
    if (x_to >= p.theta_jam * net.capacity[cn.to]) continue;  // spill-back
    const double cand = ratios.beta[c] * avail;
    if (cand < 0.0) {
      throw std::logic_error("negative transfer candidate at step " +
                             std::to_string(k));
    }
    sc.candidate[c] = cand;
    sc.inflow_sum[cn.to] += cand;
  }
  // proportional rationing of scarce receiving space; the running room and
  // queue caps only trim floating-point residue
  for (std::size_t c = 0; c < n_conn; ++c) {
    if (sc.candidate[c] <= 0.0) continue;
    const net::Connection& cn = net.connections[c];
    const double demand_in = sc.inflow_sum[cn.to];
    // room shrinks as flows land; the scale uses the pre-transfer room
    const double pre_room = sc.room[cn.to] + sc.arrivals_in[cn.to];
    double flow = sc.candidate[c];
    if (demand_in > pre_room) flow *= pre_room / demand_in;
    flow = std::min({flow, s.waiting[cn.from], sc.room[cn.to]});
    if (flow <= 0.0) continue;
    s.waiting[cn.from] -= flow;
    sc.room[cn.to] -= flow;
    sc.arrivals_in[cn.to] += flow;
    sc.outflow[cn.from] += flow;
  }

  // (5) transfer arrivals enter the moving part behind the current queue
  for (std::size_t z = 0; z < n; ++z) {
    if (sc.arrivals_in[z] > 0.0) {
      push_cohort(s, net, p, net::LinkIdx(z), sc.arrivals_in[z]);
    }
  }

  // (6) matured cohorts join the waiting queue
  for (std::size_t z = 0; z < n; ++z) {
    auto& pending = s.cohorts[z];
    for (std::size_t i = 0; i < pending.size();) {
      if (pending[i].release_step <= k) {
        s.moving[z] -= pending[i].volume;
        s.waiting[z] += pending[i].volume;
        pending[i] = pending.back();
        pending.pop_back();
      } else {
        ++i;
      }
    }
  }

  // (7) cumulative bookkeeping
  for (std::size_t z = 0; z < n; ++z) {
    s.cum_out[z] += sc.outflow[z];
    s.cum_x[z] += s.moving[z] + s.waiting[z];
  }
  ++s.step;
}

// ---------------------------------------------------------------------------

DemandSchedule::DemandSchedule(const net::Network& net,
                               const io::DemandSpec& spec) {
  std::map<std::pair<net::LinkIdx, net::LinkIdx>, std::vector<Interval>> acc;
  for (const io::DemandEntry& e : spec.entries) {
    const net::LinkIdx o = net.link_index(e.origin);
    const net::LinkIdx d = net.link_index(e.destination);
    if (!net.is_origin[o]) {
      throw std::invalid_argument("demand origin " + e.origin +
                                  " is not an origin link");
    }
    if (!net.is_destination[d]) {
      throw std::invalid_argument("demand destination " + e.destination +
                                  " is not a destination link");
    }
    if (e.rate_vph < 0.0 || e.end_s <= e.start_s) {
      throw std::invalid_argument("bad demand entry for " + e.origin);
    }
    acc[{o, d}].push_back({e.start_s, e.end_s, e.rate_vph / 3600.0});
  }
  pairs_.reserve(acc.size());
  for (auto& [od, profile] : acc) {
    std::sort(profile.begin(), profile.end(),
              [](const Interval& a, const Interval& b) {
                return a.start_s < b.start_s;
              });
    pairs_.push_back({od.first, od.second, std::move(profile)});
  }
}

std::vector<std::pair<net::LinkIdx, std::vector<double>>>
DemandSchedule::arrival_table(std::int64_t horizon, double step_s) const {
  std::map<net::LinkIdx, std::vector<double>> rows;
  for (const Pair& pr : pairs_) {
    auto [it, fresh] = rows.try_emplace(pr.origin);
    if (fresh) it->second.assign(std::size_t(horizon), 0.0);
    std::vector<double>& row = it->second;
    for (const Interval& iv : pr.profile) {
      const auto k0 = std::max<std::int64_t>(
          0, std::int64_t(std::floor(iv.start_s / step_s)));
      const auto k1 = std::min<std::int64_t>(
          horizon, std::int64_t(std::ceil(iv.end_s / step_s)));
      for (std::int64_t kk = k0; kk < k1; ++kk) {
        const double lo = std::max(iv.start_s, kk * step_s);
        const double hi = std::min(iv.end_s, (kk + 1) * step_s);
        if (hi > lo) row[std::size_t(kk)] += iv.rate_vps * (hi - lo);
      }
    }
  }
  return {rows.begin(), rows.end()};
}

double DemandSchedule::pair_volume(std::size_t pair_idx, double t0_s,
                                   double t1_s) const {
  double vol = 0.0;
  for (const Interval& iv : pairs_[pair_idx].profile) {
    const double lo = std::max(iv.start_s, t0_s);
    const double hi = std::min(iv.end_s, t1_s);
    if (hi > lo) vol += iv.rate_vps * (hi - lo);
  }
  return vol;
}

double DemandSchedule::total_volume(std::size_t pair_idx) const {
  double vol = 0.0;
  for (const Interval& iv : pairs_[pair_idx].profile) {
    vol += iv.rate_vps * (iv.end_s - iv.start_s);
  }
  return vol;
}

// ---------------------------------------------------------------------------

bool same_dynamics(const Trajectory& a, const Trajectory& b) {
  return a.step_s == b.step_s && a.n_regions == b.n_regions &&
         a.horizon == b.horizon && a.region_n == b.region_n &&
         a.region_prod == b.region_prod && a.x_total == b.x_total &&
         a.vq_total == b.vq_total && a.completed == b.completed &&
         a.generated == b.generated && a.link_x == b.link_x;
}

double vht_hours(const Trajectory& t) {
  const double veh_seconds =
      (kernels::sum(t.x_total.data(), t.x_total.size()) +
       kernels::sum(t.vq_total.data(), t.vq_total.size())) *
      t.step_s;
  return veh_seconds / 3600.0;
}

std::vector<double> regional_accumulation(const net::Network& net,
                                          std::span<const double> x) {
  std::vector<double> n(net.n_regions(), 0.0);
  for (std::size_t r = 0; r < net.n_regions(); ++r) {
    const auto [b, e] = net.region_links[r];
    n[r] = kernels::sum(x.data() + b, std::size_t(e - b));
  }
  return n;
}

std::vector<double> mean_production(const Trajectory& t, std::int64_t k0,
                                    std::int64_t k1) {
  std::vector<double> p(t.n_regions, 0.0);
  k0 = std::max<std::int64_t>(0, k0);
  k1 = std::min<std::int64_t>(t.horizon, k1);
  if (k1 <= k0) return p;
  for (std::int64_t k = k0; k < k1; ++k) {
    for (std::int32_t r = 0; r < t.n_regions; ++r) {
      p[r] += t.region_prod[std::size_t(k) * t.n_regions + r];
    }
  }
  for (double& v : p) v /= double(k1 - k0);
  return p;
}

// ---------------------------------------------------------------------------

Engine::Engine(const net::Network& net, Params params)
    : net_(net), params_(params) {
  if (params_.step_s <= 0.0) throw std::invalid_argument("step must be > 0");
  if (params_.theta_jam <= 0.0 || params_.theta_jam > 1.0) {
    throw std::invalid_argument("theta_jam must be in (0, 1]");
  }
  initial_ratios_ = net::TurnRatioTable::uniform(net_);
}

void Engine::set_initial_ratios(net::TurnRatioTable table) {
  const auto problems = table.validate(net_);
  if (!problems.empty()) {
    throw std::invalid_argument("initial turn ratios invalid: " +
                                problems.front());
  }
  initial_ratios_ = std::move(table);
}

void Engine::set_max_pressure(std::span<const net::NodeIdx> nodes,
                              ctrl::MpConfig cfg) {
  mp_node_ids_.assign(nodes.begin(), nodes.end());
  std::sort(mp_node_ids_.begin(), mp_node_ids_.end());
  mp_node_ids_.erase(std::unique(mp_node_ids_.begin(), mp_node_ids_.end()),
                     mp_node_ids_.end());
  for (const net::NodeIdx n : mp_node_ids_) {
    if (n < 0 || std::size_t(n) >= net_.n_nodes()) {
      throw std::invalid_argument("max-pressure node index out of range");
    }
  }
  mp_cfg_ = cfg;
}

void Engine::set_perimeter(ctrl::PcConfig cfg) { pc_cfg_ = std::move(cfg); }

std::int64_t Engine::to_steps(double seconds, const char* what) const {
  const double ratio = seconds / params_.step_s;
  const auto steps = std::int64_t(std::llround(ratio));
  if (std::abs(ratio - double(steps)) > 1e-9) {
    throw std::invalid_argument(std::string(what) +
                                " is not a multiple of the simulation step");
  }
  return steps;
}

void Engine::rebuild_windows(net::NodeIdx n) {
  const net::Node& node = net_.nodes[n];
  NodeTiming& t = timing_[n];
  t.windows.clear();
  const int n_phases = int(node.phases.size());
  if (n_phases == 0) return;
  // lost time sits after each phase; remainder seconds go to the earliest
  const int base_lost = node.lost_time / n_phases;
  const int extra = node.lost_time % n_phases;
  std::int64_t cursor = 0;
  for (int j = 0; j < n_phases; ++j) {
    const std::int64_t g = to_steps(plans_[n][j], "green");
    t.windows.emplace_back(cursor, cursor + g);
    cursor += g + to_steps(base_lost + (j < extra ? 1 : 0), "lost time");
  }
}

void Engine::apply_plan(net::NodeIdx n, std::vector<int> greens,
                        std::int64_t step, Trajectory& traj) {
  const auto violations = net::validate_signal_plan(net_.nodes[n], greens);
  if (!violations.empty()) {
    throw std::runtime_error("infeasible plan at step " + std::to_string(step) +
                             ": " + violations.front());
  }
  plans_[n] = std::move(greens);
  rebuild_windows(n);
  (void)traj;
}

void Engine::refresh_end_caps() {
  end_cap_.resize(net_.n_links());
  for (std::size_t z = 0; z < net_.n_links(); ++z) {
    end_cap_[z] = ratios_.ending[z] * net_.sat_flow[z] * params_.step_s;
  }
}

void Engine::routing_update(const DemandSchedule& demand, std::int64_t step) {
  const std::size_t n = net_.n_links();
  std::vector<double> speeds(n);
  std::vector<routing::OdVolume> volumes;
  const double t_now = step * params_.step_s;

  if (step == 0) {
    // bootstrap: free-flow paths, nominal first-window volumes
    speeds.assign(net_.vff.begin(), net_.vff.end());
    for (std::size_t i = 0; i < demand.pairs().size(); ++i) {
      const double vol = demand.pair_volume(i, 0.0, params_.turn_window_s);
      if (vol > 0.0) {
        volumes.push_back(
            {demand.pairs()[i].origin, demand.pairs()[i].destination, vol});
      }
    }
  } else {
    std::vector<double> out_sum(n), x_sum(n);
    for (std::size_t z = 0; z < n; ++z) {
      out_sum[z] = state_.cum_out[z] - win_out_[z];
      x_sum[z] = state_.cum_x[z] - win_x_[z];
    }
    speeds = routing::estimate_link_speeds(net_, out_sum, x_sum,
                                           params_.step_s, params_.v_min);
    // measured origin inflow over the window, split across that origin's
    // destinations in proportion to the nominal window demand
    const auto& pairs = demand.pairs();
    std::size_t i = 0;
    while (i < pairs.size()) {
      std::size_t j = i;
      while (j < pairs.size() && pairs[j].origin == pairs[i].origin) ++j;
      const net::LinkIdx o = pairs[i].origin;
      const double inflow = state_.cum_entry[o] - win_entry_[o];
      if (inflow > 0.0) {
        std::vector<double> weight(j - i, 0.0);
        double total = 0.0;
        for (std::size_t q = i; q < j; ++q) {
          weight[q - i] =
              demand.pair_volume(q, t_now - params_.turn_window_s, t_now);
          total += weight[q - i];
        }
        if (total <= 0.0) {
          total = 0.0;
          for (std::size_t q = i; q < j; ++q) {
            weight[q - i] = demand.total_volume(q);
            total += weight[q - i];
          }
        }
        if (total > 0.0) {
          for (std::size_t q = i; q < j; ++q) {
            if (weight[q - i] > 0.0) {
              volumes.push_back({o, pairs[q].destination,
                                 inflow * weight[q - i] / total});
            }
          }
        }
      }
      i = j;
    }
  }

  auto result = routing::update_turn_ratios(net_, volumes, trip_stack_, speeds,
                                            ratios_, params_.turn_window_s);
  ratios_ = std::move(result.ratios);
  trip_stack_ = std::move(result.stack);
  refresh_end_caps();

  win_out_ = state_.cum_out;
  win_x_ = state_.cum_x;
  win_entry_ = state_.cum_entry;
}

Trajectory Engine::run(const DemandSchedule& demand, std::int64_t horizon,
                       std::uint64_t seed) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const std::size_t n = net_.n_links();
  const std::size_t n_nodes = net_.n_nodes();
  const std::size_t n_regions = net_.n_regions();
  const double T = params_.step_s;

  ratios_ = initial_ratios_;
  refresh_end_caps();
  plans_.assign(n_nodes, {});
  timing_.assign(n_nodes, {});
  for (std::size_t nd = 0; nd < n_nodes; ++nd) {
    plans_[nd] = net_.fixed_greens(net::NodeIdx(nd));
    timing_[nd].cycle_steps = to_steps(net_.nodes[nd].cycle, "cycle");
    timing_[nd].offset_steps = to_steps(net_.nodes[nd].offset, "offset");
    rebuild_windows(net::NodeIdx(nd));
  }

  mp_nodes_.clear();
  for (const net::NodeIdx nd : mp_node_ids_) {
    if (pc_cfg_ && net_.is_boundary_node[nd]) {
      throw std::invalid_argument("node " + net_.nodes[nd].id +
                                  " is both perimeter-controlled and "
                                  "max-pressure-controlled");
    }
    mp_nodes_.emplace_back(net_, nd, mp_cfg_);
  }
  pc_.reset();
  std::int64_t interval_steps = 0;
  if (pc_cfg_) {
    pc_.emplace(net_, *pc_cfg_);
    interval_steps = to_steps(pc_cfg_->interval_s, "control interval");
  }

  state_ = State::zero(net_);
  entry_gate_.assign(n, 1.0);
  trip_stack_.clear();
  win_out_.assign(n, 0.0);
  win_x_.assign(n, 0.0);
  win_entry_.assign(n, 0.0);
  interval_x_snap_.assign(n, 0.0);
  interval_n_snap_.assign(n_regions, 0.0);
  std::vector<double> cum_region_n(n_regions, 0.0);

  const std::int64_t window_steps = to_steps(params_.turn_window_s,
                                             "turn-ratio window");
  if (params_.dynamic_routing) routing_update(demand, 0);

  const auto arrival_rows = demand.arrival_table(horizon, T);

  Trajectory traj;
  traj.step_s = T;
  traj.seed = seed;
  traj.n_regions = std::int32_t(n_regions);
  traj.n_links = std::int32_t(n);
  traj.horizon = horizon;
  traj.region_n.reserve(std::size_t(horizon) * n_regions);
  traj.region_prod.reserve(std::size_t(horizon) * n_regions);
  traj.x_total.reserve(horizon);
  traj.vq_total.reserve(horizon);
  traj.completed.reserve(horizon);
  traj.generated.reserve(horizon);
  if (params_.record_link_series) {
    traj.link_x.reserve(std::size_t(horizon) * n);
  }

  StepScratch scratch(net_);
  std::vector<double> step_arrivals(n, 0.0);
  std::vector<std::int32_t> active_phase(n_nodes, net::kNone);
  std::vector<double> q_mean(n), n_mean(n_regions);

  for (std::int64_t k = 0; k < horizon; ++k) {
    // perimeter layer at its control-interval boundaries
    if (pc_ && k > 0 && k % interval_steps == 0) {
      const double inv = 1.0 / double(interval_steps);
      for (std::size_t r = 0; r < n_regions; ++r) {
        n_mean[r] = (cum_region_n[r] - interval_n_snap_[r]) * inv;
      }
      for (std::size_t z = 0; z < n; ++z) {
        q_mean[z] = (state_.cum_x[z] - interval_x_snap_[z]) * inv;
      }
      const auto res = pc_->interval_update(net_, n_mean, q_mean, plans_);
      for (std::size_t r = 0; r < n_regions; ++r) {
        for (const net::LinkIdx z : net_.external_entries[r]) {
          entry_gate_[z] = res.gating[r];
        }
      }
      traj.pc.push_back({k, res.active, res.u, res.gating});
      interval_n_snap_ = cum_region_n;
      interval_x_snap_ = state_.cum_x;
    }

    // per-node cycle boundaries: adopt pending plans, run local controllers
    for (auto& mp : mp_nodes_) {
      const net::NodeIdx nd = mp.node();
      const NodeTiming& t = timing_[nd];
      if ((k - t.offset_steps) % t.cycle_steps == 0) {
        auto plan = mp.update(net_, ratios_, state_.cum_x, k);
        apply_plan(nd, plan, k, traj);
        traj.greens.push_back({k, nd, plans_[nd]});
      }
    }
    if (pc_) {
      for (std::size_t nd = 0; nd < n_nodes; ++nd) {
        if (!pc_->governs(net::NodeIdx(nd))) continue;
        const NodeTiming& t = timing_[nd];
        if ((k - t.offset_steps) % t.cycle_steps != 0) continue;
        if (auto plan = pc_->plan_for(net_, net::NodeIdx(nd), plans_[nd])) {
          apply_plan(net::NodeIdx(nd), std::move(*plan), k, traj);
        }
        traj.greens.push_back({k, net::NodeIdx(nd), plans_[nd]});
      }
    }

    if (params_.dynamic_routing && k > 0 && k % window_steps == 0) {
      routing_update(demand, k);
    }

    // dynamics
    std::fill(step_arrivals.begin(), step_arrivals.end(), 0.0);
    for (const auto& [origin, row] : arrival_rows) {
      step_arrivals[origin] = row[std::size_t(k)];
    }
    for (std::size_t nd = 0; nd < n_nodes; ++nd) {
      const NodeTiming& t = timing_[nd];
      std::int64_t tau = (k - t.offset_steps) % t.cycle_steps;
      if (tau < 0) tau += t.cycle_steps;
      active_phase[nd] = net::kNone;
      for (std::size_t j = 0; j < t.windows.size(); ++j) {
        if (tau >= t.windows[j].first && tau < t.windows[j].second) {
          active_phase[nd] = std::int32_t(j);
          break;
        }
      }
    }
    advance(net_, params_, state_, step_arrivals,
            {active_phase, entry_gate_}, ratios_, end_cap_, scratch);

    // per-step aggregates and conservation
    double x_tot = 0.0;
    for (std::size_t r = 0; r < n_regions; ++r) {
      const auto [b, e] = net_.region_links[r];
      const std::size_t len = std::size_t(e - b);
      const double nr = kernels::sum2(state_.moving.data() + b,
                                      state_.waiting.data() + b, len);
      const double prod =
          kernels::dot(scratch.outflow.data() + b, net_.length.data() + b,
                       len) /
          T;
      traj.region_n.push_back(nr);
      traj.region_prod.push_back(prod);
      cum_region_n[r] += nr;
      x_tot += nr;
    }
    const double vq_tot = kernels::sum(state_.vq.data(), n);
    traj.x_total.push_back(x_tot);
    traj.vq_total.push_back(vq_tot);
    traj.completed.push_back(state_.completed);
    traj.generated.push_back(state_.generated);
    if (params_.record_link_series) {
      for (std::size_t z = 0; z < n; ++z) {
        traj.link_x.push_back(float(state_.moving[z] + state_.waiting[z]));
      }
    }

    const double drift =
        state_.generated - (x_tot + vq_tot + state_.completed);
    if (std::abs(drift) > params_.conservation_tol) {
      throw std::logic_error("vehicle conservation violated at step " +
                             std::to_string(k) + ": drift " +
                             std::to_string(drift));
    }
  }
  return traj;
}

}  // namespace mesosim::sim
