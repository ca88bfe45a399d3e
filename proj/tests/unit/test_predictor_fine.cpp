#include <doctest.h>

#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "dnnchip/predictor_coarse.hpp"
#include "dnnchip/predictor_fine.hpp"
#include "oracle.hpp"
#include "random_graph.hpp"
#include "test_util.hpp"

using namespace dnnchip;
using namespace dnnchip::testing;

namespace {

// P feeds C through `split` chunks of `work / split` MACs each.
AccelGraph producer_consumer(std::uint64_t work, int split) {
  AccelGraph g;
  g.name = "pc";
  g.technology = "test";
  g.nodes = {memory_node("src"), compute_node("P"), compute_node("C"), memory_node("dst")};
  g.edges = {{"src", "P"}, {"P", "C"}, {"C", "dst"}};
  g.primary_inputs = {"x"};
  for (int k = 0; k < split; ++k) {
    const auto p = "p" + std::to_string(k);
    const auto y = "y" + std::to_string(k);
    g.nodes[1].states.push_back(state(k == 0 ? std::vector<std::string>{"x"} : std::vector<std::string>{}, {p},
                                      work / static_cast<std::uint64_t>(split)));
    g.nodes[2].states.push_back(state({p}, {y}, work / static_cast<std::uint64_t>(split)));
    if (k + 1 == split) g.final_outputs = {y};
  }
  return g;
}

}  // namespace

TEST_SUITE("predictor_fine") {
  TEST_CASE("3x3 systolic array overlaps to 7 cycles") {
    const auto costs = data_costs("unit.json");
    const auto r = simulate(data_graph("systolic_3x3.json", costs), costs);
    CHECK(r.total_cycles == 7);
    // Every MAC is busy 3 of 7 cycles; the tie goes to the smallest id.
    CHECK(r.idle_cycles.at("mac_1_1") == 4);
    CHECK(r.bottleneck == "mac_0_0");
    CHECK(r.idle_cycles.at("in_mem") == 7);
  }

  TEST_CASE("single state") {
    auto g = producer_consumer(3, 1);
    g.nodes[2].states.clear();
    g.nodes[1].states[0].produces = {"y0"};
    g.final_outputs = {"y0"};
    const auto r = simulate(g, simple_costs());
    CHECK(r.total_cycles == 3);
    CHECK(r.idle_cycles.at("P") == 0);
    CHECK(r.busy_cycles.at("C") == 0);
    CHECK(r.bottleneck == "P");
  }

  TEST_CASE("pipelining a producer and consumer") {
    CHECK(simulate(producer_consumer(6, 1), simple_costs()).total_cycles == 12);
    CHECK(simulate(producer_consumer(6, 3), simple_costs()).total_cycles == 8);
    CHECK(simulate(producer_consumer(6, 6), simple_costs()).total_cycles == 7);
  }

  TEST_CASE("warm-up delays the first state only") {
    const auto r = simulate(producer_consumer(6, 3), simple_costs(1e-9, 1e-9, 2e-9));
    // P ends chunks at 4, 6, 8; C runs 4..8 with its warm-up, then 8..10, 10..12
    CHECK(r.total_cycles == 12);
    CHECK(r.busy_cycles.at("P") == 8);
  }

  TEST_CASE("global clock is the fastest node") {
    auto g = producer_consumer(6, 1);
    for (auto& n : g.nodes) n.freq_mhz = 250.0;
    g.nodes[2].freq_mhz = 500.0;
    const auto r = simulate(g, simple_costs());
    CHECK(r.clock_mhz == 500.0);
    CHECK(r.total_cycles == 6);
    CHECK(r.latency_seconds == doctest::Approx(12e-9).epsilon(1e-12));
  }

  TEST_CASE("bottleneck ties break by id") {
    SimResult r;
    r.idle_cycles = {{"b", 3}, {"a", 3}, {"c", 5}};
    CHECK(bottleneck(r) == "a");
    r.idle_cycles["c"] = 1;
    CHECK(bottleneck(r) == "c");
  }

  TEST_CASE("trace of one state") {
    auto g = producer_consumer(3, 1);
    g.nodes[2].states.clear();
    g.nodes[1].states[0].produces = {"y0"};
    g.final_outputs = {"y0"};
    SimLimits limits;
    limits.trace_enabled = true;
    const auto r = simulate(g, simple_costs(), limits);
    REQUIRE(r.trace.has_value());
    REQUIRE(r.trace->size() == 2);
    CHECK((*r.trace)[0] == TraceRecord{0, "P", "idle", "s0"});
    CHECK((*r.trace)[1] == TraceRecord{3, "P", "s0", "idle"});
    CHECK(export_trace(r) == "cycle,node,from_state,to_state\n0,P,idle,s0\n3,P,s0,idle\n");
    CHECK(category_of([&] { export_trace(simulate(g, simple_costs())); }) == ErrorCategory::Simulation);
  }

  TEST_CASE("systolic trace is consistent with the busy counts") {
    const auto costs = data_costs("unit.json");
    const auto g = data_graph("systolic_3x3.json", costs);
    SimLimits limits;
    limits.trace_enabled = true;
    const auto r = simulate(g, costs, limits);
    std::map<std::string, std::uint64_t> started;
    std::map<std::string, std::uint64_t> busy;
    std::uint64_t last = 0;
    for (const auto& rec : *r.trace) {
      CHECK(rec.cycle >= last);
      last = rec.cycle;
      if (rec.from == "idle") {
        started[rec.node] = rec.cycle;
      } else {
        CHECK(rec.to == "idle");
        busy[rec.node] += rec.cycle - started[rec.node];
      }
    }
    for (const auto& [id, b] : r.busy_cycles) CHECK(busy[id] == b);
    CHECK(r.trace->size() == 9 * 3 * 2);
    CHECK(export_trace(simulate(g, costs, limits)) == export_trace(r));
  }

  TEST_CASE("deadlock is reported") {
    AccelGraph g;
    g.name = "dead";
    g.technology = "test";
    g.nodes = {compute_node("A"), compute_node("B")};
    g.edges = {{"A", "B"}, {"B", "A"}};
    g.nodes[0].states = {state({"b"}, {"a"}, 1)};
    g.nodes[1].states = {state({"a"}, {"b"}, 1)};
    CHECK(category_of([&] { simulate(g, simple_costs()); }) == ErrorCategory::Simulation);
    const auto msg = message_of([&] { simulate(g, simple_costs()); });
    CHECK(msg.find("deadlock") != std::string::npos);
    CHECK(msg.find("a, b") != std::string::npos);
  }

  TEST_CASE("cycle limit") {
    SimLimits limits;
    limits.max_cycles = 11;
    CHECK(category_of([&] { simulate(producer_consumer(6, 1), simple_costs(), limits); }) == ErrorCategory::Simulation);
    limits.max_cycles = 12;
    CHECK(simulate(producer_consumer(6, 1), simple_costs(), limits).total_cycles == 12);
  }

  TEST_CASE("agrees with the per-cycle oracle") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 300; ++i) {
      const auto rc = random_case(rng);
      CAPTURE(i);
      const auto r = simulate(rc.graph, rc.costs);
      const auto o = oracle_simulate(rc.graph, rc.costs);
      REQUIRE_FALSE(o.deadlock);
      CHECK(r.total_cycles == o.total_cycles);
      CHECK(r.busy_cycles == o.busy);
      CHECK(r.energy_j == doctest::Approx(o.energy_j).epsilon(1e-12));
    }
  }

  TEST_CASE("never slower than the coarse estimate") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
      const auto rc = random_case(rng);
      const auto fine = simulate(rc.graph, rc.costs);
      const auto coarse = predict_coarse(rc.graph, rc.costs);
      CHECK(fine.total_cycles + fine.host_cycles <= coarse.latency_cycles);
      CHECK(fine.energy_j == coarse.energy_j);
    }
  }

  TEST_CASE("json report") {
    const auto doc = nlohmann::json::parse(sim_to_json(simulate(producer_consumer(6, 3), simple_costs())));
    CHECK(doc["mode"] == "fine");
    CHECK(doc["total_cycles"] == 8);
    CHECK(doc["per_ip"].size() == 4);
    CHECK(doc["bottleneck"] == "C");
  }
}
