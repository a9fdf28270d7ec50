#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "mesosim/io.hpp"
#include "mesosim/max_pressure.hpp"
#include "mesosim/network.hpp"
#include "mesosim/perimeter.hpp"
#include "mesosim/routing.hpp"

namespace mesosim::sim {

struct Params {
  double step_s = 1.0;
  double theta_jam = 0.95;       // receiving link blocks above this occupancy
  double turn_window_s = 900.0;  // turn-ratio refresh period
  double v_min = 0.5;            // path-cost speed floor, m/s
  bool dynamic_routing = true;
  bool record_link_series = false;
  double conservation_tol = 1e-6;  // vehicles
};

// Vehicles traversing the moving part of a link, released into the waiting
// queue at release_step. The delay is frozen at entry from the queue tail
// position at that moment.
struct Cohort {
  std::int64_t release_step = 0;
  double volume = 0.0;
};

struct State {
  std::vector<double> moving;
  std::vector<double> waiting;
  std::vector<double> vq;  // virtual queues, origins only
  std::vector<std::deque<Cohort>> cohorts;
  std::vector<double> cum_x;      // running sum of x_z over steps
  std::vector<double> cum_out;    // cumulative outflow (transfers + endings)
  std::vector<double> cum_entry;  // cumulative virtual-queue release
  double generated = 0.0;
  double completed = 0.0;
  std::int64_t step = 0;

  // Kahan carries: vq and the two totals accumulate millions of small
  // increments against large magnitudes, and uncompensated rounding bias
  // would eat the per-step conservation budget on heavy runs.
  std::vector<double> vq_comp;
  double generated_comp = 0.0;
  double completed_comp = 0.0;

  void add_vq(std::size_t z, double delta) {
    const double y = delta + vq_comp[z];
    const double t = vq[z] + y;
    vq_comp[z] = y - (t - vq[z]);
    vq[z] = t;
  }

  static State zero(const net::Network& net);
  std::vector<double> x() const;  // moving + waiting per link
};

struct StepSignals {
  // active phase per node (index into node.phases), net::kNone in lost time
  std::span<const std::int32_t> active_phase;
  std::span<const double> entry_gate;  // per link, 1 = ungated
};

struct StepScratch {
  std::vector<double> served;
  std::vector<double> candidate;  // per connection
  std::vector<double> inflow_sum;
  std::vector<double> room;
  std::vector<double> arrivals_in;
  std::vector<double> outflow;  // this step's outflow per link
  explicit StepScratch(const net::Network& net);
};

// One step of the queue dynamics, in order: (1) demand into virtual queues,
// (2) gated virtual-queue release, (3) trip endings off the waiting queues,
// (4) signal-gated transfers with spill-back blocking and proportional
// rationing of scarce receiving space, (5) arrivals become moving cohorts,
// (6) matured cohorts join the waiting queues, (7) bookkeeping.
void advance(const net::Network& net, const Params& p, State& s,
             std::span<const double> arrivals, const StepSignals& signals,
             const net::TurnRatioTable& ratios, std::span<const double> end_cap,
             StepScratch& scratch);

// ---------------------------------------------------------------------------

// Piecewise-constant OD demand resolved against a network.
class DemandSchedule {
 public:
  DemandSchedule() = default;
  DemandSchedule(const net::Network& net, const io::DemandSpec& spec);

  struct Interval {
    double start_s = 0.0;
    double end_s = 0.0;
    double rate_vps = 0.0;
  };
  struct Pair {
    net::LinkIdx origin = net::kNone;
    net::LinkIdx destination = net::kNone;
    std::vector<Interval> profile;
  };

  const std::vector<Pair>& pairs() const { return pairs_; }

  // veh arriving in each link's virtual queue per step; [link][step] with
  // rows only for origin links that appear in the demand.
  std::vector<std::pair<net::LinkIdx, std::vector<double>>> arrival_table(
      std::int64_t horizon, double step_s) const;

  double pair_volume(std::size_t pair_idx, double t0_s, double t1_s) const;
  double total_volume(std::size_t pair_idx) const;

 private:
  std::vector<Pair> pairs_;
};

// ---------------------------------------------------------------------------

struct Trajectory {
  double step_s = 1.0;
  std::uint64_t seed = 0;
  std::int32_t n_regions = 0;
  std::int32_t n_links = 0;
  std::int64_t horizon = 0;

  // per step, region-major rows
  std::vector<double> region_n;     // vehicles
  std::vector<double> region_prod;  // veh*m/s
  std::vector<double> x_total;
  std::vector<double> vq_total;
  std::vector<double> completed;  // cumulative trip endings
  std::vector<double> generated;  // cumulative demand

  // per-link accumulation series, only when Params::record_link_series
  std::vector<float> link_x;

  struct GreenEvent {
    std::int64_t step = 0;
    net::NodeIdx node = net::kNone;
    std::vector<int> greens;
    bool operator==(const GreenEvent&) const = default;
  };
  std::vector<GreenEvent> greens;

  struct PcEvent {
    std::int64_t step = 0;
    bool active = false;
    std::vector<double> u;
    std::vector<double> gating;
    bool operator==(const PcEvent&) const = default;
  };
  std::vector<PcEvent> pc;

  bool operator==(const Trajectory&) const = default;

  double link_x_at(std::int64_t k, net::LinkIdx z) const {
    return link_x[std::size_t(k) * n_links + z];
  }
};

// Equality of the physical trajectory, ignoring controller command logs
// (a zero-gain perimeter run matches fixed-time physics but still logs).
bool same_dynamics(const Trajectory& a, const Trajectory& b);

// Total time spent in the network plus in virtual queues, in vehicle-hours.
double vht_hours(const Trajectory& t);

// Accumulation per region from a per-link state (virtual queues excluded).
std::vector<double> regional_accumulation(const net::Network& net,
                                          std::span<const double> x);

// Mean production per region over [k0, k1).
std::vector<double> mean_production(const Trajectory& t, std::int64_t k0,
                                    std::int64_t k1);

// ---------------------------------------------------------------------------

// Orchestrates a full run: signal timing, controller callbacks at cycle and
// control-interval boundaries, periodic turn-ratio refresh, trajectory
// recording, per-step conservation checks.
class Engine {
 public:
  Engine(const net::Network& net, Params params);

  void set_initial_ratios(net::TurnRatioTable table);
  void set_max_pressure(std::span<const net::NodeIdx> nodes,
                        ctrl::MpConfig cfg);
  void set_perimeter(ctrl::PcConfig cfg);

  // Deterministic for fixed inputs; the seed is recorded in the trajectory
  // so downstream artifacts carry their provenance.
  Trajectory run(const DemandSchedule& demand, std::int64_t horizon,
                 std::uint64_t seed = 0);

 private:
  struct NodeTiming {
    std::int64_t cycle_steps = 0;
    std::int64_t offset_steps = 0;
    // per phase: [start, end) step window within the cycle
    std::vector<std::pair<std::int64_t, std::int64_t>> windows;
  };

  std::int64_t to_steps(double seconds, const char* what) const;
  void rebuild_windows(net::NodeIdx n);
  void apply_plan(net::NodeIdx n, std::vector<int> greens, std::int64_t step,
                  Trajectory& traj);
  void refresh_end_caps();
  void routing_update(const DemandSchedule& demand, std::int64_t step);

  const net::Network& net_;
  Params params_;
  net::TurnRatioTable initial_ratios_;

  std::vector<net::NodeIdx> mp_node_ids_;
  ctrl::MpConfig mp_cfg_;
  std::optional<ctrl::PcConfig> pc_cfg_;

  // run-scoped state below; rebuilt at the start of every run()
  net::TurnRatioTable ratios_;
  std::vector<double> end_cap_;
  std::vector<std::vector<int>> plans_;  // applied greens per node
  std::vector<NodeTiming> timing_;
  std::vector<ctrl::MpNode> mp_nodes_;
  std::optional<ctrl::PerimeterController> pc_;
  State state_{};
  std::vector<double> entry_gate_;
  std::vector<double> win_out_, win_x_, win_entry_;  // window-start snapshots
  std::vector<routing::TripStackEntry> trip_stack_;
  std::vector<double> interval_x_snap_;
  std::vector<double> interval_n_snap_;
};

}  // namespace mesosim::sim
