#include <doctest.h>

#include <algorithm>
#include <memory>
#include <set>

#include "dnnchip/explorer.hpp"
#include "random_graph.hpp"
#include "test_util.hpp"

using namespace dnnchip;
using namespace dnnchip::testing;

namespace {

AppSpec loose_spec() {
  AppSpec spec;
  spec.objective = Objective::MinEdp;
  spec.throughput_fps_min = 1e-3;
  spec.power_budget_w = 1e3;
  spec.budget = ResourceBudget{1u << 20, std::uint64_t{1} << 40, std::nullopt};
  return spec;
}

std::shared_ptr<const DnnModel> model_ptr(const std::string& file) {
  return std::make_shared<const DnnModel>(data_model("models/" + file));
}

TemplateSpec tmpl(TemplateKind kind, std::map<std::string, std::vector<std::int64_t>> grid) {
  return TemplateSpec{kind, std::move(grid)};
}

// Independent recount of multipliers: unrolls plus one decoder block per memory.
std::uint64_t count_multipliers(const AccelGraph& g, const UnitCostLibrary& costs) {
  std::uint64_t total = 0;
  for (const auto& n : g.nodes) {
    if (n.kind == IpKind::Computation) total += static_cast<std::uint64_t>(n.compute().unroll);
    if (n.kind == IpKind::Memory) total += costs.mul_per_decode();
  }
  return total;
}

std::uint64_t count_onchip_bits(const AccelGraph& g) {
  std::uint64_t total = 0;
  for (const auto& n : g.nodes) {
    if (n.kind == IpKind::Memory && !n.memory().off_chip) total += n.memory().volume_bits;
  }
  return total;
}

// A compute IP with nothing to pipeline against.
AccelGraph lone_ip(std::uint64_t work_per_state) {
  AccelGraph g;
  g.name = "lone";
  g.technology = "test";
  g.nodes = {memory_node("src"), compute_node("C", 2), memory_node("dst")};
  g.edges = {{"src", "C"}, {"C", "dst"}};
  g.nodes[1].states = {state({"x"}, {"y0"}, work_per_state), state({}, {"y"}, work_per_state)};
  g.primary_inputs = {"x"};
  g.final_outputs = {"y"};
  return g;
}

AccelGraph producer_consumer() {
  AccelGraph g;
  g.name = "pc";
  g.technology = "test";
  g.nodes = {memory_node("src"), compute_node("P"), compute_node("C"), memory_node("dst")};
  g.edges = {{"src", "P"}, {"P", "C"}, {"C", "dst"}};
  g.nodes[1].states = {state({"x"}, {"p"}, 8)};
  g.nodes[2].states = {state({"p"}, {"y"}, 8)};
  g.primary_inputs = {"x"};
  g.final_outputs = {"y"};
  return g;
}

const UnitCostLibrary& generic_costs() {
  static const auto lib = data_costs("generic-28nm.json");
  return lib;
}

}  // namespace

TEST_SUITE("explorer") {
  TEST_CASE("two systolic sizes give two points") {
    const auto& costs = generic_costs();
    const auto space = enumerate_stage1(model_ptr("conv_single.json"), loose_spec(),
                                        {tmpl(TemplateKind::SystolicArray, {{"dim", {4, 8}}})}, {}, costs,
                                        "generic-28nm");
    CHECK(space.n1 == 2);
    CHECK(space.points[0].params.at("dim") == 4);
    CHECK(space.points[1].id() == "SystolicArray-0001");
  }

  TEST_CASE("space size is the product of the grids and schedules") {
    const auto& costs = generic_costs();
    const std::vector<TemplateSpec> pool{
        tmpl(TemplateKind::AdderTreeSpatial, {{"unroll", {64, 256}}, {"buffer_kbits", {512, 2048}}}),
        tmpl(TemplateKind::HeteroDwConv, {{"dw_unroll", {8, 16, 32}}, {"conv_unroll", {64, 128}}}),
        tmpl(TemplateKind::SystolicArray, {{"dim", {2, 3}}}),
    };
    const auto model = model_ptr("conv_single.json");
    CHECK(enumerate_stage1(model, loose_spec(), pool, {}, costs, "generic-28nm").n1 == 4 + 6 + 2);
    CHECK(enumerate_stage1(model, loose_spec(), pool, {{0, 0}, {8, 4}}, costs, "generic-28nm").n1 == 24);
    std::set<std::string> ids;
    for (const auto& p : enumerate_stage1(model, loose_spec(), pool, {}, costs, "generic-28nm").points) {
      ids.insert(p.id());
    }
    CHECK(ids.size() == 12);
  }

  TEST_CASE("templates missing a layer kind are dropped") {
    const auto& costs = generic_costs();
    const auto model = model_ptr("skynet14.json");
    const auto space = enumerate_stage1(
        model, loose_spec(),
        {tmpl(TemplateKind::SystolicArray, {{"dim", {4}}}), tmpl(TemplateKind::AdderTreeSpatial, {{"unroll", {64}}})},
        {}, costs, "generic-28nm");
    REQUIRE(space.n1 == 1);
    CHECK(space.points[0].kind == TemplateKind::AdderTreeSpatial);
    CHECK(message_of([&] {
            enumerate_stage1(model, loose_spec(), {tmpl(TemplateKind::SystolicArray, {{"dim", {4}}})}, {}, costs,
                             "generic-28nm");
          }).find("no feasible template") != std::string::npos);
  }

  TEST_CASE("budget below every template floor") {
    const auto& costs = generic_costs();
    auto spec = loose_spec();
    spec.budget.mul = 10;
    const auto model = model_ptr("conv_single.json");
    CHECK(category_of([&] {
            enumerate_stage1(model, spec, {tmpl(TemplateKind::AdderTreeSpatial, {{"unroll", {64, 128}}})}, {}, costs,
                             "generic-28nm");
          }) == ErrorCategory::Validation);
    spec.budget.mul = 1u << 20;
    spec.budget.mem_bits = 1000;
    CHECK(message_of([&] {
            enumerate_stage1(model, spec, {tmpl(TemplateKind::AdderTreeSpatial, {})}, {}, costs, "generic-28nm");
          }).find("no feasible template") != std::string::npos);
  }

  TEST_CASE("multiplier violations never survive") {
    const auto& costs = generic_costs();
    auto spec = loose_spec();
    spec.budget.mul = 300;
    const auto model = model_ptr("conv_single.json");
    const auto space = enumerate_stage1(model, spec, {tmpl(TemplateKind::AdderTreeSpatial, {{"unroll", {64, 256, 1024}}})},
                                        {}, costs, "generic-28nm");
    CHECK(space.n1 == 3);
    const auto result = prune_stage1(space, spec, costs, 10);
    CHECK(result.survivors.n2 == 2);
    CHECK_FALSE(result.evaluations[2].feasible);
    CHECK(result.evaluations[2].reason.find("multipliers") != std::string::npos);
    for (const auto& eval : result.ranked) CHECK(eval.resources.mul_count <= 300);
  }

  TEST_CASE("survivors are ranked and capped") {
    const auto& costs = generic_costs();
    const auto model = model_ptr("conv_single.json");
    auto spec = loose_spec();
    spec.objective = Objective::MinEnergy;
    const auto space = enumerate_stage1(
        model, spec, {tmpl(TemplateKind::AdderTreeSpatial, {{"unroll", {16, 64, 256}}, {"buffer_kbits", {512, 4096}}})},
        {{0, 0}, {8, 0}}, costs, "generic-28nm");
    const auto all = prune_stage1(space, spec, costs, 100);
    REQUIRE(all.ranked.size() == 12);
    for (std::size_t i = 1; i < all.ranked.size(); ++i) {
      CHECK(all.ranked[i - 1].energy_j <= all.ranked[i].energy_j);
      CHECK(all.ranked[i].objective == all.ranked[i].energy_j);
    }
    const auto top = prune_stage1(space, spec, costs, 3);
    REQUIRE(top.survivors.points.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(top.survivors.points[i].index == all.ranked[i].point.index);
    CHECK(top.evaluations.size() == 12);
  }

  TEST_CASE("pruning matches a brute-force recheck") {
    const auto& costs = generic_costs();
    const auto model = model_ptr("skynet14.json");
    auto spec = loose_spec();
    spec.budget = ResourceBudget{600, 6u << 20, 4096};
    spec.throughput_fps_min = 20;
    const std::vector<TemplateSpec> pool{
        tmpl(TemplateKind::AdderTreeSpatial, {{"unroll", {64, 256, 1024}}, {"buffer_kbits", {512, 2048, 8192}}}),
        tmpl(TemplateKind::RowStationaryNoC, {{"dim", {4, 8}}, {"pe_unroll", {1, 8}}, {"buffer_kbits", {2048, 8192}}}),
    };
    const auto space = enumerate_stage1(model, spec, pool, {{16, 0}, {0, 8}}, costs, "generic-28nm");
    const auto result = prune_stage1(space, spec, costs, 7, 3);

    struct Expect {
      double objective;
      std::size_t index;
    };
    std::vector<Expect> expected;
    for (const auto& point : space.points) {
      AccelGraph g;
      try {
        g = realize(point, *model, costs, "generic-28nm");
      } catch (const Error&) {
        continue;
      }
      const auto report = predict_coarse(g, costs);
      const double e = report.energy_j;
      const double l = report.latency_seconds;
      bool ok = count_multipliers(g, costs) <= 600 && count_onchip_bits(g) <= (6u << 20);
      std::uint64_t widths = 0;
      for (const auto& n : g.nodes) {
        if (n.kind == IpKind::DataPath) widths += static_cast<std::uint64_t>(n.datapath().port_width_bits);
      }
      ok = ok && widths <= 4096 && l <= 1.0 / 20 && e / l <= 1e3;
      if (ok) expected.push_back({e * l, point.index});
    }
    std::sort(expected.begin(), expected.end(), [](const Expect& a, const Expect& b) {
      return a.objective != b.objective ? a.objective < b.objective : a.index < b.index;
    });
    REQUIRE(!expected.empty());
    if (expected.size() > 7) expected.resize(7);
    REQUIRE(result.survivors.points.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(result.survivors.points[i].index == expected[i].index);

    const auto serial = prune_stage1(space, spec, costs, 7, 1);
    for (std::size_t i = 0; i < serial.evaluations.size(); ++i) {
      CHECK(serial.evaluations[i].objective == result.evaluations[i].objective);
      CHECK(serial.evaluations[i].reason == result.evaluations[i].reason);
    }
  }

  TEST_CASE("budget violations in priority order") {
    AppSpec spec = loose_spec();
    spec.budget = ResourceBudget{100, 1000, 64};
    ResourceReport r;
    r.mul_count = 50;
    r.onchip_mem_bits = 500;
    r.datapath_bits = 32;
    CHECK(budget_violation(r, 1e-3, 1e-3, spec).empty());
    r.datapath_bits = 65;
    CHECK(budget_violation(r, 1e-3, 1e-3, spec).find("data-path") != std::string::npos);
    r.mul_count = 101;
    CHECK(budget_violation(r, 1e-3, 1e-3, spec).find("multipliers") != std::string::npos);
    r = ResourceReport{};
    CHECK(budget_violation(r, 1e-3, 2e3, spec).find("fps") != std::string::npos);
    CHECK(budget_violation(r, 10.0, 1e-3, spec).find("power") != std::string::npos);
  }

  TEST_CASE("subsampling keeps enumeration order and is seeded") {
    const auto& costs = generic_costs();
    const auto space = enumerate_stage1(
        model_ptr("conv_single.json"), loose_spec(),
        {tmpl(TemplateKind::AdderTreeSpatial, {{"unroll", {8, 16, 32, 64, 128}}, {"buffer_kbits", {512, 1024, 2048, 4096}}})},
        {}, costs, "generic-28nm");
    auto a = space;
    auto b = space;
    auto c = space;
    subsample(a, 7, 42);
    subsample(b, 7, 42);
    subsample(c, 7, 43);
    REQUIRE(a.points.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(a.points[i].index == b.points[i].index);
    for (std::size_t i = 1; i < 7; ++i) CHECK(a.points[i - 1].index < a.points[i].index);
    bool differs = false;
    for (std::size_t i = 0; i < 7; ++i) differs = differs || a.points[i].index != c.points[i].index;
    CHECK(differs);
    auto d = space;
    subsample(d, 100, 1);
    CHECK(d.points.size() == space.points.size());
  }

  TEST_CASE("optimization pipelines a producer and consumer") {
    const auto lib = simple_costs();
    const auto result = optimize_graph(producer_consumer(), ResourceBudget{2, 1u << 20, std::nullopt}, lib, {});
    CHECK(result.initial.total_cycles == 16);
    CHECK(result.final.total_cycles < 16);
    CHECK(result.accepted_steps >= 1);
    REQUIRE_FALSE(result.log.empty());
    CHECK(result.log.front().action == "pipeline_into");  // C wins the idle tie and is the sink
    CHECK(result.log.front().accepted);
    CHECK(simulate(result.graph, lib).total_cycles == result.final.total_cycles);
    CHECK(validate_graph(result.graph).empty());
  }

  TEST_CASE("converged graph is left alone") {
    const auto lib = simple_costs();
    const auto g = lone_ip(1);
    // At the multiplier cap nothing can change.
    const auto frozen = optimize_graph(g, ResourceBudget{2, 1u << 20, std::nullopt}, lib, {});
    CHECK(frozen.accepted_steps == 0);
    CHECK(frozen.graph == g);
    CHECK(frozen.frozen);
    CHECK(frozen.stop_reason == "budget saturated at 'C'");
    // With room to grow, a wider unroll does not help one-MAC states.
    const auto stuck = optimize_graph(g, ResourceBudget{64, 1u << 20, std::nullopt}, lib, {});
    CHECK(stuck.accepted_steps == 0);
    CHECK(stuck.graph == g);
    CHECK_FALSE(stuck.frozen);
    CHECK(stuck.stop_reason == "no improving action at 'C'");
  }

  TEST_CASE("small gains count towards convergence") {
    const auto lib = simple_costs();
    ConvergenceRule rule;
    rule.rel_improvement = 0.9;
    rule.patience = 1;
    const auto result = optimize_graph(lone_ip(64), ResourceBudget{1024, 1u << 20, std::nullopt}, lib, rule);
    CHECK(result.accepted_steps == 1);
    CHECK(result.stop_reason == "converged");
    rule.max_iterations = 0;
    CHECK(optimize_graph(lone_ip(64), ResourceBudget{1024, 1u << 20, std::nullopt}, lib, rule).stop_reason ==
          "max iterations");
  }

  TEST_CASE("stage two ranks candidates by the fine objective") {
    const auto& costs = generic_costs();
    const auto model = model_ptr("conv_single.json");
    auto spec = loose_spec();
    spec.budget.mul = 4096;
    const auto space = enumerate_stage1(
        model, spec, {tmpl(TemplateKind::AdderTreeSpatial, {{"unroll", {16, 64, 256}}})}, {{8, 0}}, costs,
        "generic-28nm");
    const auto s1 = prune_stage1(space, spec, costs, 2);
    ConvergenceRule rule;
    rule.max_iterations = 5;
    const auto s2 = optimize_stage2(s1, costs, spec, rule, 3, 2, 2);
    CHECK(s2.n3 >= 2);
    CHECK(s2.n3 <= 4);
    REQUIRE(s2.ranked.size() == std::min<std::size_t>(3, s2.n3));
    for (std::size_t i = 1; i < s2.ranked.size(); ++i) CHECK(s2.ranked[i - 1].objective <= s2.ranked[i].objective);
    for (const auto& c : s2.ranked) {
      CHECK(c.objective == doctest::Approx(c.energy_j * c.latency_s).epsilon(1e-12));
      CHECK(c.optimization.final.total_cycles <= c.optimization.initial.total_cycles);
      CHECK(c.id() == c.point.id() + "/v" + std::to_string(c.variant));
      CHECK((c.variant == 0) == c.variant_ip.empty());
    }
    const auto again = optimize_stage2(s1, costs, spec, rule, 3, 2, 1);
    REQUIRE(again.ranked.size() == s2.ranked.size());
    for (std::size_t i = 0; i < s2.ranked.size(); ++i) {
      CHECK(again.ranked[i].id() == s2.ranked[i].id());
      CHECK(again.ranked[i].objective == s2.ranked[i].objective);
    }
  }
}
