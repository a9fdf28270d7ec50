#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mesosim/alloc.hpp"
#include "mesosim/max_pressure.hpp"
#include "mesosim/rng.hpp"

using namespace mesosim;
using test_helpers::link;

TEST_SUITE_BEGIN("max_pressure");

namespace {

// one incoming link (capacity 40) splitting to two outgoing (capacity 50)
net::NetworkSpec fork_spec() {
  net::NetworkSpec spec;
  spec.partition.regions = {"R0"};
  auto z = link("Z", "", "N", 100.0, 2, 0.5);  // c = 40
  z.is_origin = true;
  auto w1 = link("W1", "N", "", 125.0, 2, 1.0);  // c = 50
  w1.is_destination = true;
  auto w2 = link("W2", "N", "", 125.0, 2, 1.0);
  w2.is_destination = true;
  spec.links = {z, w1, w2};
  net::NodeSpec n;
  n.id = "N";
  n.cycle_s = 90;
  n.lost_time_s = 10;
  n.phases.push_back({"p0", {{"Z", "W1"}, {"Z", "W2"}}, 80, 7});
  spec.nodes = {n};
  return spec;
}

// two competing single-link phases, effective green 30
net::NetworkSpec two_phase_spec(int g0 = 15, int g1 = 15) {
  net::NetworkSpec spec;
  spec.partition.regions = {"R0"};
  auto a = link("A", "", "N");
  a.is_origin = true;
  auto c = link("C", "", "N");
  c.is_origin = true;
  auto b = link("B", "N", "");
  b.is_destination = true;
  spec.links = {a, b, c};
  net::NodeSpec n;
  n.id = "N";
  n.cycle_s = 40;
  n.lost_time_s = 40 - g0 - g1;
  n.phases.push_back({"p0", {{"A", "B"}}, g0, 7});
  n.phases.push_back({"p1", {{"C", "B"}}, g1, 7});
  spec.nodes = {n};
  return spec;
}

}  // namespace

TEST_CASE("link pressure: hand-evaluated occupancy difference") {
  const net::Network n = net::build_network(fork_spec());
  net::TurnRatioTable t = net::TurnRatioTable::uniform(n);
  const net::LinkIdx z = n.link_index("Z");
  const net::LinkIdx w1 = n.link_index("W1");
  const net::LinkIdx w2 = n.link_index("W2");
  // beta 0.6 / 0.4 in connection order (W1 before W2)
  t.beta[net::ConnIdx(0)] = 0.6;
  t.beta[net::ConnIdx(1)] = 0.4;

  std::vector<double> q(n.n_links(), 0.0);
  CHECK(ctrl::link_pressure(n, t, z, q) == 0.0);

  q[z] = 20.0;
  q[w1] = 10.0;
  q[w2] = 45.0;
  CHECK(ctrl::link_pressure(n, t, z, q) ==
        doctest::Approx(0.01).epsilon(1e-12));

  q[z] = 0.0;
  q[w1] = 50.0;
  q[w2] = 50.0;
  CHECK(ctrl::link_pressure(n, t, z, q) == 0.0);  // clamped
}

TEST_CASE("phase pressure sums incoming links once and clamps") {
  const net::Network n = net::build_network(two_phase_spec());
  std::vector<double> by_link(n.n_links(), 0.0);
  by_link[n.link_index("A")] = 0.01;
  by_link[n.link_index("C")] = 0.02;
  const auto p = ctrl::phase_pressures(n.nodes[0], by_link);
  REQUIRE(p.size() == 2);
  CHECK(p[0] == doctest::Approx(0.01));
  CHECK(p[1] == doctest::Approx(0.02));

  std::vector<double> zeros(n.n_links(), 0.0);
  const auto p0 = ctrl::phase_pressures(n.nodes[0], zeros);
  CHECK(p0 == std::vector<double>{0.0, 0.0});
}

TEST_CASE("raw split is proportional over the effective green") {
  const net::Network n = net::build_network(two_phase_spec());
  const std::vector<int> prev{15, 15};
  const auto raw =
      ctrl::raw_green_split(n.nodes[0], std::vector<double>{2.0, 1.0}, prev);
  CHECK(raw[0] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(raw[1] == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("equal pressures give equal raw greens") {
  net::NetworkSpec spec;
  spec.partition.regions = {"R0"};
  auto b = link("B", "N", "");
  b.is_destination = true;
  spec.links = {b};
  for (const char* id : {"A0", "A1", "A2"}) {
    auto l = link(id, "", "N");
    l.is_origin = true;
    spec.links.push_back(l);
  }
  net::NodeSpec nd;
  nd.id = "N";
  nd.cycle_s = 40;
  nd.lost_time_s = 10;
  nd.phases.push_back({"p0", {{"A0", "B"}}, 10, 7});
  nd.phases.push_back({"p1", {{"A1", "B"}}, 10, 7});
  nd.phases.push_back({"p2", {{"A2", "B"}}, 10, 7});
  spec.nodes = {nd};
  const net::Network n = net::build_network(spec);
  const auto raw = ctrl::raw_green_split(
      n.nodes[0], std::vector<double>{0.37, 0.37, 0.37},
      std::vector<int>{10, 10, 10});
  CHECK(raw[0] == doctest::Approx(10.0));
  CHECK(raw[1] == doctest::Approx(10.0));
  CHECK(raw[2] == doctest::Approx(10.0));
}

TEST_CASE("zero total pressure keeps the previous greens") {
  const net::Network n = net::build_network(two_phase_spec());
  const auto raw = ctrl::raw_green_split(
      n.nodes[0], std::vector<double>{0.0, 0.0}, std::vector<int>{18, 12});
  CHECK(raw[0] == 18.0);
  CHECK(raw[1] == 12.0);
}

TEST_CASE("scale invariance: pressures times lambda leave the split fixed") {
  const net::Network n = net::build_network(two_phase_spec());
  rng::SplitMix64 gen(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<double> p{gen.uniform01() + 1e-6,
                                gen.uniform01() + 1e-6};
    const double lambda = gen.uniform01() * 99.0 + 0.01;
    std::vector<double> scaled{p[0] * lambda, p[1] * lambda};
    const std::vector<int> prev{15, 15};
    const auto a = ctrl::raw_green_split(n.nodes[0], p, prev);
    const auto b = ctrl::raw_green_split(n.nodes[0], scaled, prev);
    CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-9));
    CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-9));
  }
}

TEST_CASE("projection: derived integer plans") {
  const net::Network n = net::build_network(two_phase_spec());
  const net::Node& node = n.nodes[0];

  CHECK(ctrl::project_greens(node, std::vector<double>{20.4, 9.6},
                             std::vector<int>{18, 12}, 5) ==
        std::vector<int>{20, 10});

  CHECK(ctrl::project_greens(node, std::vector<double>{25.0, 5.0},
                             std::vector<int>{15, 15}, 5) ==
        std::vector<int>{20, 10});

  CHECK(ctrl::project_greens(node, std::vector<double>{18.0, 12.0},
                             std::vector<int>{18, 12}, 5) ==
        std::vector<int>{18, 12});
}

TEST_CASE("projection always satisfies the plan constraints") {
  const net::Network n = net::build_network(two_phase_spec());
  const net::Node& node = n.nodes[0];
  rng::SplitMix64 gen(29);
  for (int trial = 0; trial < 500; ++trial) {
    const int prev0 = 7 + int(gen.below(17));
    const std::vector<int> prev{prev0, 30 - prev0};
    if (prev[1] < 7) continue;
    const std::vector<double> raw{gen.uniform01() * 35.0,
                                  gen.uniform01() * 35.0};
    const auto g = ctrl::project_greens(node, raw, prev, 5);
    CHECK(g[0] + g[1] == 30);
    CHECK(g[0] >= 7);
    CHECK(g[1] >= 7);
    CHECK(std::abs(g[0] - prev[0]) <= 5);
    CHECK(std::abs(g[1] - prev[1]) <= 5);

    alloc::Problem p;
    p.weight = {1.0, 1.0};
    p.target = {raw[0], raw[1]};
    p.lo = {std::max(7, prev[0] - 5), std::max(7, prev[1] - 5)};
    p.hi = {prev[0] + 5, prev[1] + 5};
    p.budget = 30;
    const auto oracle = alloc::brute_force_oracle(p);
    CHECK(alloc::objective(p, {g[0], g[1]}) ==
          alloc::objective(p, oracle));
  }
}

TEST_CASE("ineligible phases stay pinned at their fixed green") {
  // p1 fixed at 7 s is below the eligibility threshold
  net::NetworkSpec spec = two_phase_spec(23, 7);
  const net::Network n = net::build_network(spec);
  const net::Node& node = n.nodes[0];
  REQUIRE_FALSE(node.phases[1].mp_eligible);
  const auto raw = ctrl::raw_green_split(
      node, std::vector<double>{5.0, 50.0}, std::vector<int>{23, 7});
  // a single eligible phase cannot be reallocated
  CHECK(raw == std::vector<double>{23.0, 7.0});
  const auto g = ctrl::project_greens(node, raw, std::vector<int>{23, 7}, 5);
  CHECK(g == std::vector<int>{23, 7});
}

TEST_SUITE_END();
