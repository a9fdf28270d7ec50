#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mesosim/io.hpp"
#include "mesosim/network.hpp"
#include "mesosim/scenario.hpp"
#include "mesosim/sim.hpp"

namespace ms = mesosim;
namespace fs = std::filesystem;

namespace {

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

int cmd_gen_grid(const ms::scenario::GridParams& gp, const std::string& out,
                 const std::string& demand_preset, double demand_peak_vph,
                 const std::string& demand_out) {
  const ms::net::NetworkSpec spec = ms::scenario::gen_grid(gp);
  ms::net::build_network(spec);  // reject anything malformed before writing
  ms::io::save_network_spec(spec, out);
  std::printf("wrote %s (%zu links, %zu nodes)\n", out.c_str(),
              spec.links.size(), spec.nodes.size());
  if (!demand_preset.empty()) {
    ms::scenario::DemandParams dp;
    dp.preset = demand_preset;
    dp.total_peak_vph = demand_peak_vph;
    const ms::io::DemandSpec demand = ms::scenario::gen_grid_demand(spec, dp);
    ms::io::save_demand(demand, demand_out);
    std::printf("wrote %s (%zu entries)\n", demand_out.c_str(),
                demand.entries.size());
  }
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
  ms::scenario::ScenarioConfig cfg = ms::scenario::load_config(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (seed) cfg.seed = *seed;
  const auto outcome = ms::scenario::run_scenario(cfg);
  std::printf("mode=%s vht=%.2f", cfg.mode.c_str(), outcome.vht);
  if (outcome.baseline_vht) {
    std::printf(" ftc=%.2f delta=%+.1f%%", *outcome.baseline_vht,
                ms::scenario::delta_vht_pct(outcome.vht,
                                            *outcome.baseline_vht));
  }
  std::printf(" out=%s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_select_nodes(const std::string& config_path,
                     const std::string& out_dir) {
  ms::scenario::ScenarioConfig cfg = ms::scenario::load_config(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const ms::net::Network network =
      ms::net::build_network(ms::io::load_network_spec(cfg.network_path));
  const ms::sim::DemandSchedule demand(network,
                                       ms::io::load_demand(cfg.demand_path));
  const ms::sim::Trajectory ftc =
      ms::scenario::run_one(network, demand, cfg, {}, std::nullopt, true);
  std::vector<ms::select::NodeMetrics> metrics;
  ms::scenario::MpSettings settings = cfg.mp;
  settings.selection = "targeted";
  const auto nodes =
      ms::scenario::choose_mp_nodes(network, settings, &ftc, &metrics);
  fs::create_directories(cfg.out_dir);
  ms::scenario::export_ranking_csv(
      (fs::path(cfg.out_dir) / "ranking.csv").string(), network, metrics);
  ms::scenario::export_node_set_json(
      (fs::path(cfg.out_dir) / "node_set.json").string(), network, nodes,
      settings);
  std::printf("selected %zu of %zu eligible nodes, ranking in %s\n",
              nodes.size(), metrics.size(), cfg.out_dir.c_str());
  return 0;
}

int cmd_calibrate(const std::string& config_path, const std::string& out_dir,
                  const std::string& alphas, const std::string& betas,
                  const std::string& gammas) {
  ms::scenario::ScenarioConfig cfg = ms::scenario::load_config(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const ms::net::Network network =
      ms::net::build_network(ms::io::load_network_spec(cfg.network_path));
  const ms::sim::DemandSchedule demand(network,
                                       ms::io::load_demand(cfg.demand_path));
  const ms::sim::Trajectory ftc =
      ms::scenario::run_one(network, demand, cfg, {}, std::nullopt, true);

  std::vector<ms::select::Weights> grid;
  for (const double a : parse_list(alphas)) {
    for (const double b : parse_list(betas)) {
      for (const double g : parse_list(gammas)) {
        grid.push_back({a, b, g});
      }
    }
  }
  const auto result = ms::select::calibrate_weights(
      grid, [&](const ms::select::Weights& w) {
        ms::scenario::MpSettings s = cfg.mp;
        s.selection = "targeted";
        s.weights = w;
        const auto nodes = ms::scenario::choose_mp_nodes(network, s, &ftc);
        std::optional<ms::ctrl::PcConfig> pc;
        if (cfg.mode == "pc+mp") {
          pc = ms::scenario::build_pc_config(network, cfg.pc, &ftc);
        }
        return ms::sim::vht_hours(
            ms::scenario::run_one(network, demand, cfg, nodes, pc, false));
      });
  fs::create_directories(cfg.out_dir);
  ms::scenario::export_calibration_csv(
      (fs::path(cfg.out_dir) / "calibration.csv").string(), result);
  const auto& best = result.table[result.best];
  std::printf("best weights: alpha=%g beta=%g gamma=%g (vht %.2f) over %zu "
              "points\n",
              best.weights.alpha, best.weights.beta, best.weights.gamma,
              best.vht, result.table.size());
  return 0;
}

int cmd_perturb(const std::string& demand_path, double cv, std::uint64_t seed,
                const std::string& out) {
  const ms::io::DemandSpec base = ms::io::load_demand(demand_path);
  ms::io::save_demand(ms::scenario::perturb_demand(base, cv, seed), out);
  std::printf("wrote %s (cv=%.3f seed=%llu)\n", out.c_str(), cv,
              static_cast<unsigned long long>(seed));
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& modes_csv, const std::string& rates_csv,
              const std::string& seeds_csv, int random_count) {
  ms::scenario::ScenarioConfig base = ms::scenario::load_config(config_path);
  if (!out_dir.empty()) base.out_dir = out_dir;
  fs::create_directories(base.out_dir);

  std::vector<std::string> modes;
  {
    std::stringstream ss(modes_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) modes.push_back(item);
    }
  }
  const std::vector<double> rates = parse_list(rates_csv);
  std::vector<std::uint64_t> seeds;
  for (const double s : parse_list(seeds_csv)) {
    seeds.push_back(std::uint64_t(s));
  }

  std::ostringstream csv;
  csv << "mode,selection,rate,seed,replicate,vht_hours,delta_vht_pct\n";
  for (const std::uint64_t seed : seeds) {
    for (const std::string& mode : modes) {
      ms::scenario::ScenarioConfig cfg = base;
      cfg.mode = mode;
      cfg.seed = seed;
      cfg.out_dir = (fs::path(base.out_dir) /
                     (mode + "_seed" + std::to_string(seed)))
                        .string();
      const bool has_mp = mode == "mp" || mode == "pc+mp";
      const std::vector<double> rate_list =
          has_mp && !rates.empty() ? rates : std::vector<double>{cfg.mp.penetration};
      for (const double rate : rate_list) {
        cfg.mp.penetration = rate;
        const int reps =
            has_mp && cfg.mp.selection == "random" ? random_count : 1;
        for (int rep = 0; rep < reps; ++rep) {
          cfg.mp.random_index = rep;
          cfg.out_dir = (fs::path(base.out_dir) /
                         (mode + "_r" + std::to_string(rate) + "_s" +
                          std::to_string(seed) + "_i" + std::to_string(rep)))
                            .string();
          const auto outcome = ms::scenario::run_scenario(cfg);
          csv << mode << ',' << cfg.mp.selection << ',' << rate << ',' << seed
              << ',' << rep << ',' << outcome.vht << ',';
          if (outcome.baseline_vht) {
            csv << ms::scenario::delta_vht_pct(outcome.vht,
                                               *outcome.baseline_vht);
          }
          csv << '\n';
          std::printf("%s rate=%.2f seed=%llu rep=%d vht=%.2f\n", mode.c_str(),
                      rate, static_cast<unsigned long long>(seed), rep,
                      outcome.vht);
        }
      }
    }
  }
  ms::io::write_file((fs::path(base.out_dir) / "sweep.csv").string(),
                     csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mesoscopic traffic network simulator with adaptive signal "
               "control"};
  app.require_subcommand(1);

  // gen-grid
  auto* gen = app.add_subcommand("gen-grid", "generate a synthetic grid "
                                             "network (and optional demand)");
  ms::scenario::GridParams gp;
  std::string gen_out = "network.json";
  std::string demand_preset;
  double demand_peak = 14000.0;
  std::string demand_out = "demand.json";
  gen->add_option("--rows", gp.rows);
  gen->add_option("--cols", gp.cols);
  gen->add_option("--regions", gp.regions);
  gen->add_option("--link-length", gp.link_length_m);
  gen->add_option("--lanes", gp.lanes);
  gen->add_option("--sat-flow", gp.sat_flow_vps);
  gen->add_option("--vff", gp.vff_mps);
  gen->add_option("--cycle", gp.cycle_s);
  gen->add_option("--lost", gp.lost_time_s);
  gen->add_option("--green-ew", gp.green_ew_s);
  gen->add_option("--green-ns", gp.green_ns_s);
  gen->add_option("--min-green", gp.min_green_s);
  gen->add_option("--origin-stride", gp.internal_origin_stride,
                  "every k-th interior link generates trips (0 = none)");
  gen->add_option("--dest-stride", gp.internal_destination_stride,
                  "every k-th interior link attracts trips (0 = none)");
  gen->add_option("--out", gen_out);
  gen->add_option("--demand-preset", demand_preset,
                  "medium or high; writes a demand file too");
  gen->add_option("--demand-peak-vph", demand_peak);
  gen->add_option("--demand-out", demand_out);

  // simulate
  auto* simc = app.add_subcommand("simulate", "run one scenario from a config");
  std::string sim_config, sim_out;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  simc->add_option("--config", sim_config)->required();
  simc->add_option("--out", sim_out);
  simc->add_option("--seed", sim_seed)->each([&](const std::string&) {
    sim_seed_set = true;
  });

  // select-nodes
  auto* sel = app.add_subcommand("select-nodes",
                                 "rank nodes from an FTC baseline run");
  std::string sel_config, sel_out;
  sel->add_option("--config", sel_config)->required();
  sel->add_option("--out", sel_out);

  // calibrate
  auto* cal = app.add_subcommand("calibrate",
                                 "grid-search selection weights by VHT");
  std::string cal_config, cal_out;
  std::string cal_alphas = "0.6,-0.72";
  std::string cal_betas = "-1.8,-0.4";
  std::string cal_gammas = "-1,-0.2";
  cal->add_option("--config", cal_config)->required();
  cal->add_option("--out", cal_out);
  cal->add_option("--alphas", cal_alphas, "comma-separated grid values");
  cal->add_option("--betas", cal_betas);
  cal->add_option("--gammas", cal_gammas);

  // perturb-demand
  auto* per = app.add_subcommand("perturb-demand",
                                 "draw a noisy copy of a demand file");
  std::string per_demand, per_out = "demand_perturbed.json";
  double per_cv = 0.1;
  std::uint64_t per_seed = 1;
  per->add_option("--demand", per_demand)->required();
  per->add_option("--cv", per_cv);
  per->add_option("--seed", per_seed);
  per->add_option("--out", per_out);

  // sweep
  auto* sw = app.add_subcommand("sweep",
                                "batch runs over modes, rates and seeds");
  std::string sw_config, sw_out;
  std::string sw_modes = "ftc,mp";
  std::string sw_rates = "";
  std::string sw_seeds = "1";
  int sw_random = 1;
  sw->add_option("--config", sw_config)->required();
  sw->add_option("--out", sw_out);
  sw->add_option("--modes", sw_modes);
  sw->add_option("--rates", sw_rates);
  sw->add_option("--seeds", sw_seeds);
  sw->add_option("--random-count", sw_random);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen_grid(gp, gen_out, demand_preset, demand_peak, demand_out);
    }
    if (simc->parsed()) {
      return cmd_simulate(sim_config, sim_out,
                          sim_seed_set ? std::optional(sim_seed)
                                       : std::nullopt);
    }
    if (sel->parsed()) return cmd_select_nodes(sel_config, sel_out);
    if (cal->parsed()) {
      return cmd_calibrate(cal_config, cal_out, cal_alphas, cal_betas,
                           cal_gammas);
    }
    if (per->parsed()) return cmd_perturb(per_demand, per_cv, per_seed, per_out);
    if (sw->parsed()) {
      return cmd_sweep(sw_config, sw_out, sw_modes, sw_rates, sw_seeds,
                       sw_random);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
