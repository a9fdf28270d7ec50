#include "mesosim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mesosim/rng.hpp"

namespace mesosim::scenario {

using nlohmann::json;

namespace {

enum Dir { kEast, kWest, kNorth, kSouth };

std::string node_name(int r, int c) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "N%02d%02d", r % 100, c % 100);
  return buf;
}

std::string link_name(const std::string& a, const std::string& b) {
  return "L_" + a + "_" + b;
}

int band_of_col(int c, int cols, int regions) {
  return c * regions / cols;
}

}  // namespace

net::NetworkSpec gen_grid(const GridParams& p) {
  if (p.rows < 2 || p.cols < 2) {
    throw std::invalid_argument("grid needs at least 2x2 nodes");
  }
  if (p.regions < 1 || p.cols / p.regions < 2) {
    throw std::invalid_argument("each region band needs at least 2 columns");
  }

  net::NetworkSpec spec;
  spec.vehicle_length_m = p.vehicle_length_m;
  for (int r = 0; r < p.regions; ++r) {
    spec.partition.regions.push_back("R" + std::to_string(r));
  }
  const auto region_of_col = [&](int c) {
    return "R" + std::to_string(band_of_col(c, p.cols, p.regions));
  };

  // heading of each incoming/outgoing link per (node, side); stubs reuse it
  struct Ends {
    std::string in[4];   // incoming link id arriving with heading Dir
    std::string out[4];  // outgoing link id leaving with heading Dir
  };
  std::vector<Ends> ends(std::size_t(p.rows) * p.cols);
  const auto at = [&](int r, int c) -> Ends& {
    return ends[std::size_t(r) * p.cols + c];
  };

  const auto add_link = [&](const std::string& id, const std::string& from,
                            const std::string& to, const std::string& region,
                            double length, bool origin, bool destination) {
    net::LinkSpec l;
    l.id = id;
    l.from_node = from;
    l.to_node = to;
    l.length_m = length;
    l.lanes = p.lanes;
    l.saturation_flow = p.sat_flow_vps;
    l.free_flow_speed = p.vff_mps;
    l.region = region;
    l.is_origin = origin;
    l.is_destination = destination;
    spec.links.push_back(std::move(l));
  };

  // interior links double as trip generators/attractors on a fixed stride,
  // so load does not only enter through the gated perimeter
  int interior_count = 0;
  const auto interior_flags = [&]() -> std::pair<bool, bool> {
    const int k = interior_count++;
    const bool o = p.internal_origin_stride > 0 &&
                   k % p.internal_origin_stride == 0;
    const bool d = p.internal_destination_stride > 0 &&
                   (k + p.internal_destination_stride / 2) %
                           p.internal_destination_stride ==
                       0;
    return {o, d};
  };

  for (int r = 0; r < p.rows; ++r) {
    for (int c = 0; c < p.cols; ++c) {
      const std::string me = node_name(r, c);
      if (c + 1 < p.cols) {
        const std::string east = node_name(r, c + 1);
        const std::string a = link_name(me, east);
        const std::string b = link_name(east, me);
        const auto [ao, ad] = interior_flags();
        const auto [bo, bd] = interior_flags();
        add_link(a, me, east, region_of_col(c + 1), p.link_length_m, ao, ad);
        add_link(b, east, me, region_of_col(c), p.link_length_m, bo, bd);
        at(r, c).out[kEast] = a;
        at(r, c + 1).in[kEast] = a;
        at(r, c + 1).out[kWest] = b;
        at(r, c).in[kWest] = b;
      }
      if (r + 1 < p.rows) {
        const std::string north = node_name(r + 1, c);
        const std::string a = link_name(me, north);
        const std::string b = link_name(north, me);
        const auto [ao, ad] = interior_flags();
        const auto [bo, bd] = interior_flags();
        add_link(a, me, north, region_of_col(c), p.link_length_m, ao, ad);
        add_link(b, north, me, region_of_col(c), p.link_length_m, bo, bd);
        at(r, c).out[kNorth] = a;
        at(r + 1, c).in[kNorth] = a;
        at(r + 1, c).out[kSouth] = b;
        at(r, c).in[kSouth] = b;
      }
    }
  }

  // entry (origin) and exit (sink) stubs on every outside-facing side
  std::map<std::string, std::vector<std::string>> entries_by_region;
  for (int r = 0; r < p.rows; ++r) {
    for (int c = 0; c < p.cols; ++c) {
      const std::string me = node_name(r, c);
      const std::string region = region_of_col(c);
      struct Side {
        bool open;
        Dir heading_in;   // heading of traffic entering the grid here
        Dir heading_out;  // heading of traffic leaving
        const char* tag;
      };
      const Side sides[4] = {
          {c == 0, kEast, kWest, "w"},
          {c == p.cols - 1, kWest, kEast, "e"},
          {r == 0, kNorth, kSouth, "s"},
          {r == p.rows - 1, kSouth, kNorth, "n"},
      };
      for (const Side& s : sides) {
        if (!s.open) continue;
        const std::string entry = "E" + std::string(s.tag) + "_" + me;
        const std::string exit = "X" + std::string(s.tag) + "_" + me;
        add_link(entry, "", me, region, p.stub_length_m, true, false);
        add_link(exit, me, "", region, p.stub_length_m, false, true);
        at(r, c).in[s.heading_in] = entry;
        at(r, c).out[s.heading_out] = exit;
        entries_by_region[region].push_back(entry);
      }
    }
  }

  // two-phase plans: east-west headings against north-south, no U-turns
  const auto opposite = [](int d) {
    switch (d) {
      case kEast: return int(kWest);
      case kWest: return int(kEast);
      case kNorth: return int(kSouth);
      default: return int(kNorth);
    }
  };
  for (int r = 0; r < p.rows; ++r) {
    for (int c = 0; c < p.cols; ++c) {
      net::NodeSpec node;
      node.id = node_name(r, c);
      node.cycle_s = p.cycle_s;
      node.lost_time_s = p.lost_time_s;
      net::PhaseSpec ew{node.id + "_EW", {}, p.green_ew_s, p.min_green_s};
      net::PhaseSpec ns{node.id + "_NS", {}, p.green_ns_s, p.min_green_s};
      const Ends& e = at(r, c);
      for (int din = 0; din < 4; ++din) {
        if (e.in[din].empty()) continue;
        net::PhaseSpec& phase = (din == kEast || din == kWest) ? ew : ns;
        for (int dout = 0; dout < 4; ++dout) {
          if (e.out[dout].empty() || dout == opposite(din)) continue;
          phase.approaches.emplace_back(e.in[din], e.out[dout]);
        }
      }
      node.phases.push_back(std::move(ew));
      node.phases.push_back(std::move(ns));
      spec.nodes.push_back(std::move(node));
    }
  }

  // boundary control groups between adjacent bands, both directions
  for (int band = 0; band + 1 < p.regions; ++band) {
    int last_col = -1, first_col = -1;
    for (int c = 0; c < p.cols; ++c) {
      if (band_of_col(c, p.cols, p.regions) == band) last_col = c;
      if (band_of_col(c, p.cols, p.regions) == band + 1 && first_col < 0) {
        first_col = c;
      }
    }
    net::BoundaryGroupSpec fwd, back;
    fwd.from_region = "R" + std::to_string(band);
    fwd.to_region = "R" + std::to_string(band + 1);
    back.from_region = fwd.to_region;
    back.to_region = fwd.from_region;
    for (int r = 0; r < p.rows; ++r) {
      const std::string a = node_name(r, last_col);
      const std::string b = node_name(r, first_col);
      fwd.nodes.push_back({a, a + "_EW", a + "_NS"});
      back.nodes.push_back({b, b + "_EW", b + "_NS"});
    }
    spec.partition.boundary_groups.push_back(std::move(fwd));
    spec.partition.boundary_groups.push_back(std::move(back));
  }
  spec.partition.external_entries = {entries_by_region.begin(),
                                     entries_by_region.end()};
  return spec;
}

io::DemandSpec gen_grid_demand(const net::NetworkSpec& grid,
                               const DemandParams& p) {
  std::vector<const net::LinkSpec*> origins, exits;
  for (const net::LinkSpec& l : grid.links) {
    if (l.is_origin) origins.push_back(&l);
    if (l.is_destination) exits.push_back(&l);
  }
  std::sort(origins.begin(), origins.end(),
            [](auto* a, auto* b) { return a->id < b->id; });
  std::sort(exits.begin(), exits.end(),
            [](auto* a, auto* b) { return a->id < b->id; });
  if (origins.empty() || exits.empty()) {
    throw std::invalid_argument("network has no origin or destination stubs");
  }

  const int regions = int(grid.partition.regions.size());
  const int center = regions / 2;
  const auto region_idx = [&](const std::string& r) {
    for (int i = 0; i < regions; ++i) {
      if (grid.partition.regions[i] == r) return i;
    }
    throw std::invalid_argument("unknown region " + r);
  };
  const bool directional = p.preset == "high";
  if (!directional && p.preset != "medium") {
    throw std::invalid_argument("unknown demand preset " + p.preset);
  }
  const auto factor = [&](int from, int to) {
    if (directional) {
      // peripheral origins feeding the center, little else
      if (to == center) return from == center ? 0.3 : 4.0;
      return from == to ? 0.4 : 0.15;
    }
    // mixed but cross-band dominant, with a mild pull toward the center
    if (from == to) return 0.3;
    return 1.2 + (to == center ? 0.3 : 0.0);
  };

  // deterministic spread of destinations per origin, weighted per region pair
  struct Od {
    const net::LinkSpec* o;
    const net::LinkSpec* d;
    double weight;
  };
  std::vector<Od> ods;
  const std::size_t n_exits = exits.size();
  const int k_dest = std::min<int>(p.dests_per_origin, int(n_exits));
  for (std::size_t i = 0; i < origins.size(); ++i) {
    for (int m = 0; m < k_dest; ++m) {
      const std::size_t di = (i * 7 + std::size_t(m) * 13) % n_exits;
      const net::LinkSpec* d = exits[di];
      if (d->id == origins[i]->id) continue;
      if (!d->from_node.empty() && d->from_node == origins[i]->to_node) {
        continue;  // ends right at the origin's intersection
      }
      const double w = factor(region_idx(origins[i]->region),
                              region_idx(d->region));
      if (w > 0.0) ods.push_back({origins[i], d, w});
    }
  }
  double total_w = 0.0;
  for (const Od& od : ods) total_w += od.weight;
  if (total_w <= 0.0) throw std::invalid_argument("degenerate demand weights");

  io::DemandSpec demand;
  const double slice = 60.0;
  const int n_up = int(std::round(p.warmup_s / slice));
  const int n_down = int(std::round(p.rampdown_s / slice));
  for (const Od& od : ods) {
    const double rate = p.total_peak_vph * od.weight / total_w;
    const auto push = [&](double r, double t0, double t1) {
      if (r > 0.0) {
        demand.entries.push_back({od.o->id, od.d->id, r, t0, t1});
      }
    };
    for (int s = 0; s < n_up; ++s) {
      push(rate * (s + 0.5) / n_up, s * slice, (s + 1) * slice);
    }
    push(rate, p.warmup_s, p.warmup_s + p.peak_s);
    for (int s = 0; s < n_down; ++s) {
      push(rate * (1.0 - (s + 0.5) / n_down), p.warmup_s + p.peak_s + s * slice,
           p.warmup_s + p.peak_s + (s + 1) * slice);
    }
  }
  return demand;
}

// ---------------------------------------------------------------------------

SetpointEstimate estimate_setpoints(const sim::Trajectory& traj, int bins,
                                    double start_frac, double stop_frac) {
  if (bins < 2) throw std::invalid_argument("need at least 2 bins");
  SetpointEstimate est;
  for (std::int32_t r = 0; r < traj.n_regions; ++r) {
    double n_max = 0.0;
    for (std::int64_t k = 0; k < traj.horizon; ++k) {
      n_max = std::max(n_max, traj.region_n[std::size_t(k) * traj.n_regions + r]);
    }
    if (n_max <= 0.0) {
      throw std::runtime_error("degenerate MFD: region " + std::to_string(r) +
                               " never accumulates");
    }
    std::vector<double> prod_sum(std::size_t(bins), 0.0);
    std::vector<std::int64_t> count(std::size_t(bins), 0);
    for (std::int64_t k = 0; k < traj.horizon; ++k) {
      const double n = traj.region_n[std::size_t(k) * traj.n_regions + r];
      const auto b = std::min<std::size_t>(std::size_t(bins) - 1,
                                           std::size_t(n / n_max * bins));
      prod_sum[b] += traj.region_prod[std::size_t(k) * traj.n_regions + r];
      ++count[b];
    }
    double best_prod = -std::numeric_limits<double>::infinity();
    std::size_t best_bin = 0;
    for (std::size_t b = 0; b < std::size_t(bins); ++b) {
      if (count[b] == 0) continue;
      const double mean = prod_sum[b] / double(count[b]);
      if (mean > best_prod) {
        best_prod = mean;
        best_bin = b;
      }
    }
    const double critical = (double(best_bin) + 0.5) * n_max / bins;
    est.setpoint.push_back(critical);
    est.n_start.push_back(start_frac * critical);
    est.n_stop.push_back(stop_frac * critical);
  }
  return est;
}

io::DemandSpec perturb_demand(const io::DemandSpec& demand, double cv,
                              std::uint64_t seed) {
  if (cv < 0.0) throw std::invalid_argument("cv must be >= 0");
  std::map<std::pair<std::string, std::string>, double> factor;
  for (const io::DemandEntry& e : demand.entries) {
    factor.try_emplace({e.origin, e.destination}, 1.0);
  }
  rng::SplitMix64 gen(seed);
  for (auto& [od, f] : factor) {
    f = std::max(0.0, 1.0 + cv * gen.normal());
  }
  io::DemandSpec out = demand;
  for (io::DemandEntry& e : out.entries) {
    e.rate_vph *= factor.at({e.origin, e.destination});
  }
  return out;
}

// ---------------------------------------------------------------------------

sim::Trajectory run_one(const net::Network& net,
                        const sim::DemandSchedule& demand,
                        const ScenarioConfig& cfg,
                        std::span<const net::NodeIdx> mp_nodes,
                        const std::optional<ctrl::PcConfig>& pc,
                        bool record_links) {
  sim::Params params;
  params.step_s = cfg.step_s;
  params.theta_jam = cfg.theta_jam;
  params.turn_window_s = cfg.turn_window_s;
  params.v_min = cfg.v_min;
  params.dynamic_routing = cfg.dynamic_routing;
  params.record_link_series = record_links;
  sim::Engine engine(net, params);
  if (!mp_nodes.empty()) {
    engine.set_max_pressure(mp_nodes, {cfg.mp.rate_limit_s});
  }
  if (pc) engine.set_perimeter(*pc);
  return engine.run(demand, cfg.horizon_steps, cfg.seed);
}

ctrl::PcConfig build_pc_config(const net::Network& net, const PcSettings& s,
                               const sim::Trajectory* baseline) {
  ctrl::PcConfig cfg;
  cfg.interval_s = s.interval_s;
  if (s.kp.empty()) throw std::invalid_argument("perimeter gains missing");
  cfg.kp = s.kp;
  if (!s.ki.empty()) {
    cfg.ki = s.ki;
  } else if (s.ki_scale_of_kp > 0.0) {
    cfg.ki = s.kp;
    for (auto& row : cfg.ki) {
      for (double& v : row) v *= s.ki_scale_of_kp;
    }
  } else {
    throw std::invalid_argument("perimeter integral gains missing");
  }
  if (!s.setpoints.empty()) {
    cfg.setpoints = s.setpoints;
    cfg.n_start.clear();
    cfg.n_stop.clear();
    for (const double v : s.setpoints) {
      cfg.n_start.push_back(s.start_frac * v);
      cfg.n_stop.push_back(s.stop_frac * v);
    }
  } else {
    if (baseline == nullptr) {
      throw std::invalid_argument(
          "setpoint estimation needs a fixed-time baseline");
    }
    const SetpointEstimate est =
        estimate_setpoints(*baseline, s.mfd_bins, s.start_frac, s.stop_frac);
    cfg.setpoints = est.setpoint;
    cfg.n_start = est.n_start;
    cfg.n_stop = est.n_stop;
  }
  cfg.min_regions_to_activate = s.min_regions_to_activate;
  cfg.rate_limit_s = s.rate_limit_s;
  cfg.external_floor = s.external_floor;
  cfg.external_rate = s.external_rate;
  (void)net;
  return cfg;
}

std::vector<net::NodeIdx> choose_mp_nodes(
    const net::Network& net, const MpSettings& s,
    const sim::Trajectory* baseline,
    std::vector<select::NodeMetrics>* metrics_out) {
  if (s.penetration <= 0.0) return {};
  const std::vector<net::NodeIdx> eligible = select::eligible_nodes(net);
  if (s.selection == "all" || s.penetration >= 1.0) return eligible;
  if (s.selection == "random") {
    const auto sets = select::random_sets(eligible, s.penetration,
                                          s.random_count, s.random_seed);
    return sets.at(std::size_t(s.random_index));
  }
  if (s.selection == "targeted") {
    if (baseline == nullptr || baseline->link_x.empty()) {
      throw std::invalid_argument(
          "targeted selection needs a baseline with per-link series");
    }
    const auto [k0, k1] = select::peak_window(*baseline);
    auto metrics = select::score_nodes(*baseline, net, eligible, k0, k1,
                                       s.weights, s.congestion_threshold);
    if (metrics_out) *metrics_out = metrics;
    return select::select_lowest(std::move(metrics), s.penetration);
  }
  throw std::invalid_argument("unknown selection mode " + s.selection);
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

double delta_vht_pct(double vht, double baseline) {
  const double pct = 100.0 * (vht - baseline) / baseline;
  return std::round(pct * 10.0) / 10.0;
}

void export_timeseries_csv(const std::string& path, const sim::Trajectory& t,
                           int stride) {
  std::ostringstream out;
  out << "step,time_s";
  for (std::int32_t r = 0; r < t.n_regions; ++r) out << ",n_region" << r;
  for (std::int32_t r = 0; r < t.n_regions; ++r) out << ",prod_region" << r;
  out << ",total_virtual_queue,total_accumulation,cumulative_endings,"
         "cumulative_generated\n";
  if (stride < 1) stride = 1;
  for (std::int64_t k = 0; k < t.horizon; k += stride) {
    out << k << ',' << fmt(double(k + 1) * t.step_s);
    for (std::int32_t r = 0; r < t.n_regions; ++r) {
      out << ',' << fmt(t.region_n[std::size_t(k) * t.n_regions + r]);
    }
    for (std::int32_t r = 0; r < t.n_regions; ++r) {
      out << ',' << fmt(t.region_prod[std::size_t(k) * t.n_regions + r]);
    }
    out << ',' << fmt(t.vq_total[std::size_t(k)]) << ','
        << fmt(t.x_total[std::size_t(k)]) << ','
        << fmt(t.completed[std::size_t(k)]) << ','
        << fmt(t.generated[std::size_t(k)]) << '\n';
  }
  io::write_file(path, out.str());
}

void export_mfd_csv(const std::string& path, const sim::Trajectory& t,
                    int window) {
  std::ostringstream out;
  out << "window_start_step";
  for (std::int32_t r = 0; r < t.n_regions; ++r) out << ",n_region" << r;
  for (std::int32_t r = 0; r < t.n_regions; ++r) out << ",prod_region" << r;
  out << '\n';
  if (window < 1) window = 1;
  for (std::int64_t k0 = 0; k0 + window <= t.horizon; k0 += window) {
    out << k0;
    for (int what = 0; what < 2; ++what) {
      const std::vector<double>& series = what ? t.region_prod : t.region_n;
      for (std::int32_t r = 0; r < t.n_regions; ++r) {
        double sum = 0.0;
        for (std::int64_t k = k0; k < k0 + window; ++k) {
          sum += series[std::size_t(k) * t.n_regions + r];
        }
        out << ',' << fmt(sum / window);
      }
    }
    out << '\n';
  }
  io::write_file(path, out.str());
}

void export_summary_json(const std::string& path, const sim::Trajectory& t,
                         const std::string& mode,
                         std::optional<double> baseline_vht,
                         std::size_t mp_node_count) {
  json j;
  j["mode"] = mode;
  j["seed"] = t.seed;
  j["horizon_steps"] = t.horizon;
  j["step_s"] = t.step_s;
  const double vht = sim::vht_hours(t);
  j["vht_hours"] = vht;
  if (baseline_vht) {
    j["baseline_vht_hours"] = *baseline_vht;
    j["delta_vht_pct"] = delta_vht_pct(vht, *baseline_vht);
  }
  double peak = 0.0;
  for (const double v : t.x_total) peak = std::max(peak, v);
  j["peak_accumulation"] = peak;
  j["generated_total"] = t.generated.empty() ? 0.0 : t.generated.back();
  j["completed_total"] = t.completed.empty() ? 0.0 : t.completed.back();
  j["mp_node_count"] = mp_node_count;
  json spans = json::array();
  std::int64_t open = -1;
  for (const auto& ev : t.pc) {
    if (ev.active && open < 0) open = ev.step;
    if (!ev.active && open >= 0) {
      spans.push_back(json::array({open, ev.step}));
      open = -1;
    }
  }
  if (open >= 0) spans.push_back(json::array({open, t.horizon}));
  j["pc_active_spans"] = std::move(spans);
  io::write_file(path, j.dump(1) + "\n");
}

void export_pc_log_csv(const std::string& path, const sim::Trajectory& t) {
  std::ostringstream out;
  const std::size_t nu = t.pc.empty() ? 0 : t.pc.front().u.size();
  const std::size_t ng = t.pc.empty() ? 0 : t.pc.front().gating.size();
  out << "step,active";
  for (std::size_t i = 0; i < nu; ++i) out << ",u" << i;
  for (std::size_t i = 0; i < ng; ++i) out << ",gate" << i;
  out << '\n';
  for (const auto& ev : t.pc) {
    out << ev.step << ',' << (ev.active ? 1 : 0);
    for (const double v : ev.u) out << ',' << fmt(v);
    for (const double v : ev.gating) out << ',' << fmt(v);
    out << '\n';
  }
  io::write_file(path, out.str());
}

void export_node_set_json(const std::string& path, const net::Network& net,
                          std::span<const net::NodeIdx> nodes,
                          const MpSettings& s) {
  json j;
  j["selection"] = s.selection;
  j["penetration"] = s.penetration;
  j["weights"] = json::array({s.weights.alpha, s.weights.beta, s.weights.gamma});
  json ids = json::array();
  for (const net::NodeIdx n : nodes) ids.push_back(net.nodes[n].id);
  j["nodes"] = std::move(ids);
  io::write_file(path, j.dump(1) + "\n");
}

void export_ranking_csv(const std::string& path, const net::Network& net,
                        std::span<const select::NodeMetrics> metrics) {
  std::vector<select::NodeMetrics> sorted(metrics.begin(), metrics.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) {
                     return std::tie(a.score, a.node) <
                            std::tie(b.score, b.node);
                   });
  std::ostringstream out;
  out << "node_id,m1,m2,n_c,score,rank\n";
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    out << net.nodes[sorted[i].node].id << ',' << fmt(sorted[i].mean_occupancy)
        << ',' << fmt(sorted[i].occupancy_variance) << ','
        << fmt(sorted[i].congested_fraction) << ',' << fmt(sorted[i].score)
        << ',' << (i + 1) << '\n';
  }
  io::write_file(path, out.str());
}

void export_calibration_csv(const std::string& path,
                            const select::CalibrationResult& res) {
  std::ostringstream out;
  out << "alpha,beta,gamma,vht_hours,ok\n";
  for (const auto& pt : res.table) {
    out << fmt(pt.weights.alpha) << ',' << fmt(pt.weights.beta) << ','
        << fmt(pt.weights.gamma) << ',' << (pt.ok ? fmt(pt.vht) : "") << ','
        << (pt.ok ? 1 : 0) << '\n';
  }
  io::write_file(path, out.str());
}

// ---------------------------------------------------------------------------

ScenarioConfig load_config(const std::string& path) {
  const json j = json::parse(io::read_file(path));
  ScenarioConfig c;
  c.network_path = j.at("network").get<std::string>();
  c.demand_path = j.at("demand").get<std::string>();
  c.out_dir = j.value("out_dir", std::string("."));
  c.mode = j.value("mode", std::string("ftc"));
  c.horizon_steps = j.value("horizon_steps", std::int64_t(21600));
  c.step_s = j.value("step_s", 1.0);
  c.turn_window_s = j.value("turn_window_s", 900.0);
  c.seed = j.value("seed", std::uint64_t(1));
  c.theta_jam = j.value("theta_jam", 0.95);
  c.v_min = j.value("v_min", 0.5);
  c.dynamic_routing = j.value("dynamic_routing", true);
  c.sample_stride = j.value("sample_stride", 60);
  c.mfd_window = j.value("mfd_window", 90);
  if (j.contains("mp")) {
    const json& m = j.at("mp");
    c.mp.penetration = m.value("penetration", 1.0);
    c.mp.selection = m.value("selection", std::string("targeted"));
    if (m.contains("weights")) {
      const auto w = m.at("weights").get<std::vector<double>>();
      if (w.size() != 3) throw std::invalid_argument("weights need 3 values");
      c.mp.weights = {w[0], w[1], w[2]};
    }
    c.mp.random_count = m.value("random_count", 10);
    c.mp.random_index = m.value("random_index", 0);
    c.mp.random_seed = m.value("random_seed", std::uint64_t(1));
    c.mp.rate_limit_s = m.value("rate_limit_s", 5);
    c.mp.congestion_threshold = m.value("congestion_threshold", 0.8);
  }
  if (j.contains("pc")) {
    const json& pc = j.at("pc");
    c.pc.interval_s = pc.value("interval_s", 90);
    if (pc.contains("kp")) {
      c.pc.kp = pc.at("kp").get<std::vector<std::vector<double>>>();
    }
    if (pc.contains("ki")) {
      c.pc.ki = pc.at("ki").get<std::vector<std::vector<double>>>();
    }
    c.pc.ki_scale_of_kp = pc.value("ki_scale_of_kp", 0.0);
    if (pc.contains("setpoints")) {
      c.pc.setpoints = pc.at("setpoints").get<std::vector<double>>();
    }
    c.pc.start_frac = pc.value("start_frac", 1.0);
    c.pc.stop_frac = pc.value("stop_frac", 0.85);
    c.pc.min_regions_to_activate = pc.value("min_regions_to_activate", 2);
    c.pc.rate_limit_s = pc.value("rate_limit_s", 5);
    c.pc.external_floor = pc.value("external_floor", 0.15);
    c.pc.external_rate = pc.value("external_rate", 0.2);
    c.pc.mfd_bins = pc.value("mfd_bins", 25);
  }
  return c;
}

RunOutcome run_scenario(const ScenarioConfig& cfg) {
  if (cfg.mode != "ftc" && cfg.mode != "mp" && cfg.mode != "pc" &&
      cfg.mode != "pc+mp") {
    throw std::invalid_argument("unknown mode " + cfg.mode);
  }
  const net::Network network =
      net::build_network(io::load_network_spec(cfg.network_path));
  const sim::DemandSchedule demand(network, io::load_demand(cfg.demand_path));

  const bool use_mp = cfg.mode == "mp" || cfg.mode == "pc+mp";
  const bool use_pc = cfg.mode == "pc" || cfg.mode == "pc+mp";
  const bool targeted = use_mp && cfg.mp.selection == "targeted" &&
                        cfg.mp.penetration > 0.0 && cfg.mp.penetration < 1.0;

  const sim::Trajectory ftc =
      run_one(network, demand, cfg, {}, std::nullopt, targeted);

  RunOutcome out;
  std::vector<select::NodeMetrics> metrics;
  if (cfg.mode == "ftc") {
    out.trajectory = ftc;
  } else {
    if (use_mp) {
      out.mp_nodes = choose_mp_nodes(network, cfg.mp, &ftc,
                                     targeted ? &metrics : nullptr);
    }
    std::optional<ctrl::PcConfig> pc;
    if (use_pc) pc = build_pc_config(network, cfg.pc, &ftc);
    out.trajectory = run_one(network, demand, cfg, out.mp_nodes, pc, false);
    out.baseline_vht = sim::vht_hours(ftc);
  }
  out.vht = sim::vht_hours(out.trajectory);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const auto in_dir = [&](const char* name) {
    return (fs::path(cfg.out_dir) / name).string();
  };
  export_timeseries_csv(in_dir("timeseries.csv"), out.trajectory,
                        cfg.sample_stride);
  export_mfd_csv(in_dir("mfd.csv"), out.trajectory, cfg.mfd_window);
  export_summary_json(in_dir("summary.json"), out.trajectory, cfg.mode,
                      out.baseline_vht, out.mp_nodes.size());
  if (use_pc) export_pc_log_csv(in_dir("pc_log.csv"), out.trajectory);
  if (use_mp) {
    export_node_set_json(in_dir("node_set.json"), network, out.mp_nodes,
                         cfg.mp);
  }
  if (targeted) export_ranking_csv(in_dir("ranking.csv"), network, metrics);
  return out;
}

}  // namespace mesosim::scenario
