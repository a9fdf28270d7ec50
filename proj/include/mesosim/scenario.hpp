#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mesosim/io.hpp"
#include "mesosim/network.hpp"
#include "mesosim/node_select.hpp"
#include "mesosim/perimeter.hpp"
#include "mesosim/sim.hpp"

namespace mesosim::scenario {

// ---------------------------------------------------------------------------
// Synthetic grid networks. Column bands form the regions; nodes on band
// edges become boundary-control nodes, perimeter nodes carry gated entry
// stubs and sink exit stubs.

struct GridParams {
  int rows = 10;
  int cols = 10;
  int regions = 3;
  double link_length_m = 200.0;
  int lanes = 2;
  double sat_flow_vps = 1.0;
  double vff_mps = 25.0 / 3.6;
  double stub_length_m = 300.0;
  int cycle_s = 90;
  int lost_time_s = 10;
  int green_ew_s = 40;
  int green_ns_s = 40;
  int min_green_s = 7;
  double vehicle_length_m = 5.0;
  // every k-th interior link also generates or attracts trips (0 disables);
  // interior origins are not gated by the external perimeter
  int internal_origin_stride = 3;
  int internal_destination_stride = 12;
};

net::NetworkSpec gen_grid(const GridParams& p);

struct DemandParams {
  std::string preset = "medium";  // medium (mixed) | high (directional)
  double total_peak_vph = 14000.0;
  int dests_per_origin = 8;
  double warmup_s = 900.0;     // linear ramp-up
  double peak_s = 7200.0;      // constant plateau
  double rampdown_s = 1800.0;  // linear ramp-down, zero afterwards
};

io::DemandSpec gen_grid_demand(const net::NetworkSpec& grid,
                               const DemandParams& p);

// ---------------------------------------------------------------------------

struct MpSettings {
  double penetration = 1.0;
  std::string selection = "targeted";  // targeted | random | all
  select::Weights weights{0.6, -1.8, -1.0};
  int random_count = 10;
  int random_index = 0;
  std::uint64_t random_seed = 1;
  int rate_limit_s = 5;
  double congestion_threshold = 0.8;
};

struct PcSettings {
  int interval_s = 90;
  std::vector<std::vector<double>> kp;
  std::vector<std::vector<double>> ki;
  double ki_scale_of_kp = 0.0;  // ki = scale * kp when ki is omitted
  std::vector<double> setpoints;  // empty: estimated from the FTC baseline
  double start_frac = 1.0;
  double stop_frac = 0.85;
  int min_regions_to_activate = 2;
  int rate_limit_s = 5;
  double external_floor = 0.15;
  double external_rate = 0.2;
  int mfd_bins = 25;
};

struct ScenarioConfig {
  std::string network_path;
  std::string demand_path;
  std::string out_dir = ".";
  std::string mode = "ftc";  // ftc | mp | pc | pc+mp
  std::int64_t horizon_steps = 21600;
  double step_s = 1.0;
  double turn_window_s = 900.0;
  std::uint64_t seed = 1;
  double theta_jam = 0.95;
  double v_min = 0.5;
  bool dynamic_routing = true;
  int sample_stride = 60;
  int mfd_window = 90;
  MpSettings mp;
  PcSettings pc;
};

ScenarioConfig load_config(const std::string& path);

// ---------------------------------------------------------------------------

struct SetpointEstimate {
  std::vector<double> setpoint;
  std::vector<double> n_start;
  std::vector<double> n_stop;
};

// Critical accumulation per region from binned production against
// accumulation (the MFD argmax), with hysteresis thresholds at the given
// fractions of it.
SetpointEstimate estimate_setpoints(const sim::Trajectory& traj, int bins,
                                    double start_frac, double stop_frac);

// Per-OD-pair multiplicative noise: every pair's whole profile is scaled by
// max(0, 1 + cv * z), z standard normal. Reproducible by seed.
io::DemandSpec perturb_demand(const io::DemandSpec& demand, double cv,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------

struct RunOutcome {
  double vht = 0.0;
  std::optional<double> baseline_vht;
  std::vector<net::NodeIdx> mp_nodes;
  sim::Trajectory trajectory;
};

// Wire controllers per settings and run once. Empty mp_nodes means no local
// layer; absent pc config means no perimeter layer.
sim::Trajectory run_one(const net::Network& net,
                        const sim::DemandSchedule& demand,
                        const ScenarioConfig& cfg,
                        std::span<const net::NodeIdx> mp_nodes,
                        const std::optional<ctrl::PcConfig>& pc,
                        bool record_links);

// Perimeter config from settings, estimating setpoints from the baseline
// when none are given.
ctrl::PcConfig build_pc_config(const net::Network& net, const PcSettings& s,
                               const sim::Trajectory* baseline);

// MP node choice per settings: empty at penetration 0, the full eligible set
// at 1. Targeted selection fills metrics_out with the scored table when given.
std::vector<net::NodeIdx> choose_mp_nodes(
    const net::Network& net, const MpSettings& s,
    const sim::Trajectory* baseline,
    std::vector<select::NodeMetrics>* metrics_out = nullptr);

// Full pipeline: baseline as needed, selection, controller wiring, run,
// export into cfg.out_dir.
RunOutcome run_scenario(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------
// Exporters. All output is deterministic for identical inputs.

void export_timeseries_csv(const std::string& path, const sim::Trajectory& t,
                           int stride);
void export_mfd_csv(const std::string& path, const sim::Trajectory& t,
                    int window);
void export_summary_json(const std::string& path, const sim::Trajectory& t,
                         const std::string& mode,
                         std::optional<double> baseline_vht,
                         std::size_t mp_node_count);
void export_pc_log_csv(const std::string& path, const sim::Trajectory& t);
void export_node_set_json(const std::string& path, const net::Network& net,
                          std::span<const net::NodeIdx> nodes,
                          const MpSettings& s);
void export_ranking_csv(const std::string& path, const net::Network& net,
                        std::span<const select::NodeMetrics> metrics);
void export_calibration_csv(const std::string& path,
                            const select::CalibrationResult& res);

double delta_vht_pct(double vht, double baseline);

}  // namespace mesosim::scenario
