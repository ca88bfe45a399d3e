#include <doctest.h>

#include <set>

#include "dnnchip/binding.hpp"
#include "dnnchip/templates.hpp"
#include "test_util.hpp"

using namespace dnnchip;
using namespace dnnchip::testing;

namespace {

AccelGraph template_graph(TemplateKind kind, const TemplateParams& params = {}) {
  return build_graph(instantiate_template(kind, params, "generic-28nm"), data_costs("generic-28nm.json"));
}

std::uint64_t compute_work(const AccelGraph& g) {
  std::uint64_t total = 0;
  for (const auto& n : g.nodes) {
    if (n.kind != IpKind::Computation) continue;
    for (const auto& s : n.states) total += s.work;
  }
  return total;
}

std::uint64_t model_macs(const DnnModel& m) {
  std::uint64_t total = 0;
  for (const auto& l : m.layers) total += layer_workload(l, m.precision).mac_count;
  return total;
}

}  // namespace

TEST_SUITE("binding") {
  TEST_CASE("single conv on the adder tree conserves MACs") {
    const auto model = data_model("models/conv_single.json");
    const auto g = bind_mapping(template_graph(TemplateKind::AdderTreeSpatial), model, {});
    // 32 output channels x 16 input channels x 3x3 taps x 16x16 positions
    CHECK(compute_work(g) == 32u * 16 * 9 * 256);
    CHECK(compute_work(g) == model_macs(model));
    CHECK(validate_graph(g).empty());
    CHECK(g.primary_inputs == std::vector<std::string>{input_token("conv")});
    for (const auto& n : g.nodes) {
      for (const auto& s : n.states) CHECK(s.round == 0);
    }
    CHECK(g.find("engine")->states.size() == 1);
    CHECK(g.find("dram")->states.empty());
  }

  TEST_CASE("tiles become states") {
    const auto model = data_model("models/conv_single.json");
    const auto g = bind_mapping(template_graph(TemplateKind::AdderTreeSpatial), model, {8, 6});
    // 32/8 channel tiles x ceil(16/6) row tiles
    CHECK(g.find("engine")->states.size() == 4 * 3);
    CHECK(compute_work(g) == model_macs(model));
    CHECK(validate_graph(g).empty());
  }

  TEST_CASE("bundled model binds on every template that supports it") {
    const auto model = data_model("models/skynet14.json");
    for (auto kind : {TemplateKind::AdderTreeSpatial, TemplateKind::HeteroDwConv, TemplateKind::RowStationaryNoC}) {
      CAPTURE(to_string(kind));
      const auto g = bind_mapping(template_graph(kind, {{"buffer_kbits", 8192}}), model, {16, 0});
      CHECK(validate_graph(g).empty());
      CHECK(compute_work(g) == model_macs(model));
      std::set<std::int64_t> rounds;
      for (const auto& n : g.nodes) {
        for (const auto& s : n.states) rounds.insert(s.round);
      }
      CHECK(rounds.size() == model.layers.size());
    }
  }

  TEST_CASE("depthwise layers go to the depthwise engine") {
    const auto model = data_model("models/skynet14.json");
    const auto g = bind_mapping(template_graph(TemplateKind::HeteroDwConv, {{"buffer_kbits", 8192}}), model, {});
    for (const auto& s : g.find("dw_engine")->states) CHECK(model.find(s.layer)->kind == LayerKind::DwConv);
    for (const auto& s : g.find("conv_engine")->states) CHECK(model.find(s.layer)->kind != LayerKind::DwConv);
  }

  TEST_CASE("empty model leaves every IP stateless") {
    DnnModel empty;
    empty.name = "empty";
    const auto g = bind_mapping(template_graph(TemplateKind::SystolicArray), empty, {});
    for (const auto& n : g.nodes) CHECK(n.states.empty());
    CHECK(g.primary_inputs.empty());
    CHECK(g.final_outputs.empty());
  }

  TEST_CASE("binding errors") {
    const auto model = data_model("models/skynet14.json");
    const auto systolic = template_graph(TemplateKind::SystolicArray);
    CHECK(message_of([&] { bind_mapping(systolic, model, {}); }).find("unsupported layer kind") != std::string::npos);

    const auto conv = data_model("models/conv_single.json");
    const auto tiny = template_graph(TemplateKind::AdderTreeSpatial, {{"buffer_kbits", 1}});
    CHECK(category_of([&] { bind_mapping(tiny, conv, {}); }) == ErrorCategory::Validation);
    CHECK(message_of([&] { bind_mapping(tiny, conv, {}); }).find("in_buf") != std::string::npos);

    const auto adder = template_graph(TemplateKind::AdderTreeSpatial);
    CHECK(category_of([&] { bind_mapping(adder, conv, {-1, 0}); }) == ErrorCategory::Validation);
  }

  TEST_CASE("binding replaces existing states") {
    const auto conv = data_model("models/conv_single.json");
    const auto g = template_graph(TemplateKind::AdderTreeSpatial);
    const auto once = bind_mapping(g, conv, {8, 0});
    CHECK(bind_mapping(once, conv, {8, 0}) == once);
  }
}
