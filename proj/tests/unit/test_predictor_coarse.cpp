#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "dnnchip/predictor_coarse.hpp"
#include "dnnchip/timing.hpp"
#include "oracle.hpp"
#include "random_graph.hpp"
#include "test_util.hpp"

using namespace dnnchip;
using namespace dnnchip::testing;

namespace {

AccelGraph bare(std::vector<IpNode> nodes) {
  AccelGraph g;
  g.name = "g";
  g.technology = "test";
  g.nodes = std::move(nodes);
  return g;
}

// A feeds B and C, both feed D. Work is in MACs at U = 1, 1 ns per MAC.
AccelGraph diamond(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  auto g = bare({compute_node("A"), compute_node("B"), compute_node("C"), compute_node("D")});
  g.nodes[0].states = {state({"x"}, {"a"}, a)};
  g.nodes[1].states = {state({"a"}, {"b"}, b)};
  g.nodes[2].states = {state({"a"}, {"c"}, c)};
  g.nodes[3].states = {state({"b", "c"}, {"d"}, d)};
  g.edges = {{"A", "B"}, {"A", "C"}, {"B", "D"}, {"C", "D"}};
  g.primary_inputs = {"x"};
  g.final_outputs = {"d"};
  return g;
}

}  // namespace

TEST_SUITE("predictor_coarse") {
  TEST_CASE("computation IP estimate") {
    const auto costs = simple_costs();
    auto ip = compute_node("C", 16);
    ip.states = {state({}, {"y"}, 64)};
    const auto est = ip_estimate(ip, costs, "test");
    // 4 beats of 16 MACs at 1 pJ each
    CHECK(est.energy_j == doctest::Approx(64e-12).epsilon(1e-12));
    CHECK(est.latency_cycles == 4);
    CHECK(est.latency_seconds == doctest::Approx(4e-9).epsilon(1e-12));
  }

  TEST_CASE("data-path IP estimate") {
    const auto costs = simple_costs();
    auto ip = path_node("D", 16);
    ip.states = {state({}, {"y"}, 64)};
    const auto est = ip_estimate(ip, costs, "test");
    CHECK(est.energy_j == doctest::Approx(64e-12).epsilon(1e-12));
    CHECK(est.latency_cycles == 4);
  }

  TEST_CASE("partial beats round up") {
    const auto costs = simple_costs();
    auto ip = compute_node("C", 16);
    ip.states = {state({}, {"y"}, 65)};
    const auto est = ip_estimate(ip, costs, "test");
    CHECK(est.latency_cycles == 5);
    CHECK(est.energy_j == doctest::Approx(80e-12).epsilon(1e-12));
  }

  TEST_CASE("stateless IP costs its warm-up only") {
    const auto costs = simple_costs(1e-9, 1e-9, 3e-9);
    const auto est = ip_estimate(compute_node("C"), costs, "test");
    CHECK(est.latency_cycles == 3);
    CHECK(est.energy_j == 0.0);
  }

  TEST_CASE("diamond critical path") {
    const auto report = predict_coarse(diamond(2, 5, 1, 2), simple_costs());
    CHECK(report.latency_cycles == 9);
    CHECK(report.critical_path == std::vector<std::string>{"A", "B", "D"});
    const auto other = predict_coarse(diamond(2, 1, 5, 2), simple_costs());
    CHECK(other.critical_path == std::vector<std::string>{"A", "C", "D"});
  }

  TEST_CASE("rounds add up") {
    auto g = diamond(2, 5, 1, 2);
    g.nodes[0].states.push_back(state({"d"}, {"a2"}, 4, 1));
    g.nodes[1].states.push_back(state({"a2"}, {"b2"}, 3, 1));
    g.final_outputs = {"b2"};
    const auto report = predict_coarse(g, simple_costs());
    CHECK(report.path_cycles == 9 + 7);
    CHECK(report.critical_path == std::vector<std::string>{"A", "B", "D", "A", "B"});
  }

  TEST_CASE("energy is the sum of IP energies plus the host") {
    auto costs = simple_costs();
    costs = UnitCostLibrary(costs.technology(), costs.provenance(), costs.entries(), 0, HostOverhead{5e-9, 2e-9});
    const auto g = diamond(2, 5, 1, 2);
    const auto report = predict_coarse(g, costs);
    double sum = 0.0;
    for (const auto& node : g.nodes) sum += ip_estimate(node, costs, "test").energy_j;
    CHECK(report.energy_j == doctest::Approx(sum + 5e-9).epsilon(1e-12));
    CHECK(report.host_cycles == 2);
    CHECK(report.latency_cycles == 11);
    CHECK(report.latency_seconds == doctest::Approx(11e-9).epsilon(1e-12));
  }

  TEST_CASE("slower IPs are timed at the global clock") {
    auto g = diamond(2, 5, 1, 2);
    g.nodes[1].freq_mhz = 500.0;  // 5 ns per MAC
    g.clock_mhz = 1000.0;
    const auto report = predict_coarse(g, simple_costs(1e-9));
    // l_mac is in seconds, so the IP clock does not change the wall time
    CHECK(report.latency_cycles == 9);
    CHECK(report.ip("B")->latency_cycles == 3);
  }

  TEST_CASE("resource usage") {
    auto costs = simple_costs();
    auto g = bare({memory_node("m", 128 * 1024), compute_node("c", 9), path_node("p", 32)});
    auto r = resource_usage(g, costs);
    CHECK(r.onchip_mem_bits == 131072);
    CHECK(r.mul_count == 9);
    CHECK(r.mul_decode_count == 0);
    CHECK(r.datapath_bits == 32);

    auto off = memory_node("dram", 1 << 20);
    std::get<MemoryAttrs>(off.attrs).off_chip = true;
    g.nodes.push_back(off);
    costs = UnitCostLibrary(costs.technology(), costs.provenance(), costs.entries(), 3);
    r = resource_usage(g, costs);
    CHECK(r.onchip_mem_bits == 131072);
    CHECK(r.mem_bits_by_impl.at("mem") == 131072 + (1u << 20));
    CHECK(r.mul_decode_count == 6);
    CHECK(r.mul_count == 15);
  }

  TEST_CASE("3x3 systolic array") {
    const auto costs = data_costs("unit.json");
    const auto report = predict_coarse(data_graph("systolic_3x3.json", costs), costs);
    CHECK(report.latency_cycles == 15);
    CHECK(report.critical_path ==
          std::vector<std::string>{"mac_0_0", "mac_1_0", "mac_2_0", "mac_2_1", "mac_2_2"});
  }

  TEST_CASE("cycle conversion") {
    CHECK(seconds_to_cycles(3e-9, 1000.0) == 3);
    CHECK(seconds_to_cycles(0.3e-9 * 10, 1000.0) == 3);
    CHECK(seconds_to_cycles(1.5e-9, 1000.0) == 2);
    CHECK(seconds_to_cycles(0.0, 1000.0) == 0);
    CHECK(seconds_to_cycles(1e-6, 200.0) == 200);
    CHECK(state_cycles(StateCost{0.0, 0.0}, 1000.0) == 1);
    CHECK(state_cycles(StateCost{2.2e-9, 0.0}, 1000.0) == 3);
  }

  TEST_CASE("state cost formulas") {
    IpCostParams p;
    p.e_control = 2e-12;
    p.l_control = 3e-9;
    p.e_mac = 1e-12;
    p.l_mac = 2e-9;
    p.e_bit = 0.5e-12;
    p.l_bit = 1e-9;
    const auto c = state_cost(compute_node("c", 4), state({}, {}, 10), p);
    CHECK(c.seconds == doctest::Approx(6e-9));
    CHECK(c.energy_j == doctest::Approx(2e-12 + 12e-12));
    const auto d = state_cost(path_node("d", 4), state({}, {}, 10), p);
    CHECK(d.seconds == doctest::Approx(3e-9 + 3e-9));
    CHECK(d.energy_j == doctest::Approx(2e-12 + 5e-12));
    const auto m = state_cost(memory_node("m"), state({}, {}, 10), p);
    CHECK(m.seconds == doctest::Approx(3e-9 + 10e-9));
  }

  TEST_CASE("matches the exhaustive path oracle") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 300; ++i) {
      const auto rc = random_case(rng);
      CAPTURE(i);
      CHECK(predict_coarse(rc.graph, rc.costs).latency_cycles == oracle_coarse_cycles(rc.graph, rc.costs));
    }
  }

  TEST_CASE("json and csv reports") {
    const auto costs = data_costs("unit.json");
    const auto report = predict_coarse(data_graph("systolic_3x3.json", costs), costs);
    const auto doc = nlohmann::json::parse(report_to_json(report));
    CHECK(doc["mode"] == "coarse");
    CHECK(doc["latency_cycles"] == 15);
    CHECK(doc["per_ip"].size() == 17);
    const auto csv = report_to_csv(report);
    CHECK(csv.rfind("scope,node,energy_j,latency_cycles,latency_seconds\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 17 + 1);
  }
}
