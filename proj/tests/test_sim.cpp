#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mesosim/scenario.hpp"
#include "mesosim/sim.hpp"

using namespace mesosim;
using test_helpers::link;

TEST_SUITE_BEGIN("sim");

namespace {

// drives advance() directly with explicit signals and gates
struct Harness {
  const net::Network& network;
  sim::Params params;
  sim::State state;
  sim::StepScratch scratch;
  net::TurnRatioTable ratios;
  std::vector<double> end_cap;
  std::vector<double> arrivals;
  std::vector<double> gate;
  std::vector<std::int32_t> phase;

  explicit Harness(const net::Network& n, sim::Params p = {})
      : network(n),
        params(p),
        state(sim::State::zero(n)),
        scratch(n),
        ratios(net::TurnRatioTable::uniform(n)),
        arrivals(n.n_links(), 0.0),
        gate(n.n_links(), 1.0),
        phase(n.n_nodes(), 0) {
    refresh_caps();
  }

  void refresh_caps() {
    end_cap.assign(network.n_links(), 0.0);
    for (std::size_t z = 0; z < network.n_links(); ++z) {
      end_cap[z] = ratios.ending[z] * network.sat_flow[z] * params.step_s;
    }
  }

  void step() {
    sim::advance(network, params, state, arrivals, {phase, gate}, ratios,
                 end_cap, scratch);
  }
};

net::NetworkSpec two_region_junction() {
  // A -> N -> B with saturation 0.5 so one green step moves 0.5 veh
  auto spec = test_helpers::single_junction();
  spec.links[0].saturation_flow = 0.5;
  spec.links[1].saturation_flow = 0.5;
  return spec;
}

}  // namespace

TEST_CASE("zero demand leaves the state untouched") {
  const net::Network n = net::build_network(two_region_junction());
  Harness h(n);
  h.step();
  CHECK(h.state.generated == 0.0);
  CHECK(h.state.completed == 0.0);
  for (std::size_t z = 0; z < n.n_links(); ++z) {
    CHECK(h.state.moving[z] == 0.0);
    CHECK(h.state.waiting[z] == 0.0);
    CHECK(h.scratch.outflow[z] == 0.0);
  }
}

TEST_CASE("green approach moves exactly the saturation-bounded share") {
  const net::Network n = net::build_network(two_region_junction());
  Harness h(n);
  const net::LinkIdx a = n.link_index("A");
  const net::LinkIdx b = n.link_index("B");
  h.state.waiting[a] = 10.0;
  h.step();
  CHECK(h.state.waiting[a] == 9.5);
  CHECK(h.state.moving[b] == 0.5);
  CHECK(h.scratch.outflow[a] == 0.5);
}

TEST_CASE("spill-back blocks transfers into a nearly full link") {
  const net::Network n = net::build_network(two_region_junction());
  Harness h(n);
  const net::LinkIdx a = n.link_index("A");
  const net::LinkIdx b = n.link_index("B");
  h.state.waiting[a] = 10.0;
  h.state.waiting[b] = 0.96 * n.capacity[b];
  h.ratios.ending[b] = 0.0;  // hold the receiver full
  h.refresh_caps();
  h.step();
  CHECK(h.state.waiting[a] == 10.0);
  CHECK(h.state.moving[b] == 0.0);
}

TEST_CASE("red signal stops transfers but not trip endings") {
  const net::Network n = net::build_network(two_region_junction());
  Harness h(n);
  const net::LinkIdx a = n.link_index("A");
  h.state.waiting[a] = 10.0;
  h.phase[0] = net::kNone;  // lost time everywhere
  h.ratios.ending[a] = 0.6;
  h.refresh_caps();
  h.step();
  CHECK(h.state.waiting[a] == 10.0 - 0.6 * 0.5);  // endings at e*S*T only
  CHECK(h.state.moving[n.link_index("B")] == 0.0);
  CHECK(h.state.completed == 0.3);
}

TEST_CASE("virtual queue release respects gate, saturation and space") {
  const net::Network n = net::build_network(two_region_junction());
  Harness h(n);
  const net::LinkIdx a = n.link_index("A");
  h.state.vq[a] = 100.0;
  h.gate[a] = 0.4;
  h.step();
  CHECK(h.state.cum_entry[a] == 0.5 * 0.4);  // sat * gate * T
  CHECK(h.state.vq[a] == 100.0 - 0.2);
}

TEST_CASE("gating monotonicity: a lower gate never admits more") {
  const net::Network n = net::build_network(two_region_junction());
  for (int trial = 0; trial < 5; ++trial) {
    const double lo = 0.15 + 0.1 * trial;
    const double hi = lo + 0.25;
    Harness a(n), b(n);
    const net::LinkIdx origin = n.link_index("A");
    a.gate[origin] = lo;
    b.gate[origin] = hi;
    for (int k = 0; k < 200; ++k) {
      a.arrivals[origin] = b.arrivals[origin] = (k % 7) * 0.3;
      a.step();
      b.step();
      CHECK(a.state.cum_entry[origin] <= b.state.cum_entry[origin] + 1e-12);
    }
  }
}

TEST_CASE("point-queue limit: all green, no blocking, outflow is min(w, sT)") {
  // chain A -> N1 -> B -> N2 -> C, single always-green phase per node
  net::NetworkSpec spec;
  spec.partition.regions = {"R0"};
  auto a = link("A", "", "N1", 5000.0, 2, 0.7);
  a.is_origin = true;
  auto b = link("B", "N1", "N2", 5000.0, 2, 0.4);
  auto c = link("C", "N2", "", 5000.0, 2, 0.9);
  c.is_destination = true;
  spec.links = {a, b, c};
  net::NodeSpec n1{"N1", 90, 0, 0, {{"p", {{"A", "B"}}, 90, 7}}};
  net::NodeSpec n2{"N2", 90, 0, 0, {{"p", {{"B", "C"}}, 90, 7}}};
  spec.nodes = {n1, n2};
  const net::Network n = net::build_network(spec);
  Harness h(n);
  h.state.waiting[n.link_index("A")] = 0.3;  // below saturation
  h.state.waiting[n.link_index("B")] = 9.0;  // above
  h.state.waiting[n.link_index("C")] = 5.0;
  h.step();
  const double expect = std::min(0.3, 0.7) + std::min(9.0, 0.4) +
                        std::min(5.0, 0.9);
  double total = 0.0;
  for (std::size_t z = 0; z < n.n_links(); ++z) total += h.scratch.outflow[z];
  CHECK(total == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("vht of an empty trajectory is zero") {
  sim::Trajectory t;
  CHECK(sim::vht_hours(t) == 0.0);
}

TEST_CASE("vht sums network time and virtual-queue time") {
  sim::Trajectory t;
  t.step_s = 1.0;
  t.horizon = 10;
  t.x_total.assign(10, 6.0);  // 2 links x 3 veh
  t.vq_total.assign(10, 0.0);
  CHECK(sim::vht_hours(t) == doctest::Approx(1.0 / 60.0).epsilon(1e-12));

  sim::Trajectory t2;
  t2.step_s = 1.0;
  t2.horizon = 100;
  t2.x_total.assign(100, 0.0);
  t2.vq_total.assign(100, 5.0);
  CHECK(sim::vht_hours(t2) ==
        doctest::Approx(500.0 / 3600.0).epsilon(1e-12));
}

TEST_CASE("regional accumulation sums links and excludes virtual queues") {
  net::NetworkSpec spec;
  spec.partition.regions = {"R0", "R1"};
  auto a = link("A", "", "N", 200.0, 2, 1.0, 10.0, "R0");
  a.is_origin = true;
  auto b = link("B", "N", "", 200.0, 2, 1.0, 10.0, "R1");
  b.is_destination = true;
  spec.links = {a, b};
  net::NodeSpec nd{"N", 90, 10, 0, {{"p", {{"A", "B"}}, 80, 7}}};
  spec.nodes = {nd};
  const net::Network n = net::build_network(spec);

  std::vector<double> x(n.n_links(), 0.0);
  CHECK(sim::regional_accumulation(n, x) == std::vector<double>{0.0, 0.0});

  x[n.link_index("A")] = 3.0;
  x[n.link_index("B")] = 7.0;
  const auto acc = sim::regional_accumulation(n, x);
  CHECK(acc[n.region_index("R0")] == 3.0);
  CHECK(acc[n.region_index("R1")] == 7.0);

  // a loaded virtual queue contributes nothing
  Harness h(n);
  h.state.vq[n.link_index("A")] = 50.0;
  const auto acc2 = sim::regional_accumulation(n, h.state.x());
  CHECK(acc2[0] == 0.0);
  CHECK(acc2[1] == 0.0);
}

TEST_CASE("engine: zero demand gives an all-zero trajectory of full length") {
  const net::Network n = net::build_network(two_region_junction());
  sim::Params p;
  sim::Engine engine(n, p);
  const sim::DemandSchedule demand(n, io::DemandSpec{});
  const sim::Trajectory t = engine.run(demand, 21600, 5);
  CHECK(t.horizon == 21600);
  CHECK(t.x_total.size() == 21600);
  for (const double v : t.x_total) CHECK(v == 0.0);
  for (const double v : t.vq_total) CHECK(v == 0.0);
  CHECK(t.completed.back() == 0.0);
}

TEST_CASE("engine: steady service production matches outflow times length") {
  // two self-contained sink links in one region, steady 0.5 veh/step each
  net::NetworkSpec spec;
  spec.partition.regions = {"R0"};
  auto a = link("A", "", "", 100.0, 2, 0.5, 50.0);
  a.is_origin = true;
  a.is_destination = true;
  auto b = link("B", "", "", 200.0, 2, 0.5, 50.0);
  b.is_origin = true;
  b.is_destination = true;
  spec.links = {a, b};
  const net::Network n = net::build_network(spec);

  io::DemandSpec d;
  d.entries.push_back({"A", "A", 1800.0, 0.0, 600.0});
  d.entries.push_back({"B", "B", 1800.0, 0.0, 600.0});
  sim::Engine engine(n, {});
  const sim::Trajectory t = engine.run(sim::DemandSchedule(n, d), 400, 1);

  // after the free-flow lead-in both links serve exactly sat*T = 0.5
  const auto prod = sim::mean_production(t, 100, 400);
  REQUIRE(prod.size() == 1);
  CHECK(prod[0] == doctest::Approx(150.0).epsilon(1e-12));
  CHECK(t.region_prod[399] == 150.0);
}

TEST_CASE("engine: grid run conserves vehicles and honors capacities") {
  scenario::GridParams gp;
  gp.rows = 4;
  gp.cols = 4;
  gp.regions = 2;
  const net::NetworkSpec spec = scenario::gen_grid(gp);
  const net::Network n = net::build_network(spec);
  scenario::DemandParams dp;
  dp.preset = "medium";
  dp.total_peak_vph = 6000.0;
  dp.warmup_s = 120.0;
  dp.peak_s = 600.0;
  dp.rampdown_s = 120.0;
  const sim::DemandSchedule demand(n, scenario::gen_grid_demand(spec, dp));

  sim::Params p;
  p.record_link_series = true;
  sim::Engine engine(n, p);
  const sim::Trajectory t = engine.run(demand, 1800, 3);

  CHECK(t.generated.back() > 100.0);   // the run actually loads
  CHECK(t.completed.back() > 50.0);    // and unloads
  for (std::int64_t k = 0; k < t.horizon; ++k) {
    const double drift = t.generated[std::size_t(k)] -
                         (t.x_total[std::size_t(k)] +
                          t.vq_total[std::size_t(k)] +
                          t.completed[std::size_t(k)]);
    REQUIRE(std::abs(drift) <= 1e-6);
    for (std::size_t z = 0; z < n.n_links(); ++z) {
      const double x = t.link_x_at(k, net::LinkIdx(z));
      REQUIRE(x >= -1e-9);
      REQUIRE(x <= n.capacity[z] + 1e-6);
    }
  }
}

TEST_CASE("engine: identical runs are identical trajectories") {
  scenario::GridParams gp;
  gp.rows = 4;
  gp.cols = 4;
  gp.regions = 2;
  const net::NetworkSpec spec = scenario::gen_grid(gp);
  const net::Network n = net::build_network(spec);
  scenario::DemandParams dp;
  dp.total_peak_vph = 5000.0;
  dp.warmup_s = 120.0;
  dp.peak_s = 300.0;
  dp.rampdown_s = 120.0;
  const sim::DemandSchedule demand(n, scenario::gen_grid_demand(spec, dp));

  sim::Engine engine(n, {});
  const sim::Trajectory t1 = engine.run(demand, 900, 7);
  const sim::Trajectory t2 = engine.run(demand, 900, 7);
  CHECK(t1 == t2);
}

TEST_SUITE_END();
