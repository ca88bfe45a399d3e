#include <doctest.h>

#include <algorithm>

#include <nlohmann/json.hpp>

#include "dnnchip/explore_io.hpp"
#include "test_util.hpp"

using namespace dnnchip;
using namespace dnnchip::testing;
using nlohmann::json;

namespace {

json demo_doc() { return json::parse(data_text("demo/explore.json")); }

ExploreConfig demo_config(const json& doc) { return parse_explore_config(doc.dump(), data_path("demo")); }

ExploreRun run_doc(const json& doc, unsigned threads = 1) {
  const auto config = demo_config(doc);
  return run_explore(config, parse_model(read_text_file(config.model)), load_library(read_text_file(config.costs)),
                     threads);
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("explore_io") {
  TEST_CASE("demo config parses") {
    const auto config = load_explore_config(data_path("demo/explore.json"));
    CHECK(config.model == data_path("demo") / "../models/skynet14.json");
    CHECK(config.app.objective == Objective::MinEdp);
    CHECK(config.app.budget.mul == 512);
    CHECK(config.app.budget.bus_bits == std::optional<std::uint64_t>{2048});
    CHECK(config.templates.size() == 4);
    CHECK(config.templates[1].grid.at("conv_unroll") == std::vector<std::int64_t>{64, 256});
    CHECK(config.schedules.size() == 2);
    CHECK(config.keep == 6);
    CHECK(config.n_opt == 3);
    CHECK(config.variants_per_point == 2);
    CHECK(config.convergence.max_iterations == 20);
    CHECK(config.seed == 7);
    CHECK_FALSE(config.max_stage1_points.has_value());
  }

  TEST_CASE("config errors") {
    auto expect = [](json doc, ErrorCategory cat, std::string_view needle) {
      const auto msg = message_of([&] { demo_config(doc); });
      CHECK(category_of([&] { demo_config(doc); }) == cat);
      CHECK_MESSAGE(msg.find(needle) != std::string::npos, msg);
    };
    auto doc = demo_doc();
    doc["colour"] = 1;
    expect(doc, ErrorCategory::Parse, "colour");
    doc = demo_doc();
    doc["version"] = 2;
    expect(doc, ErrorCategory::Parse, "version");
    doc = demo_doc();
    doc["templates"][0]["kind"] = "Toroidal";
    expect(doc, ErrorCategory::Parse, "Toroidal");
    doc = demo_doc();
    doc["templates"][0]["params"]["unroll"] = {0};
    expect(doc, ErrorCategory::Validation, "out-of-range");
    doc = demo_doc();
    doc["templates"][2]["params"]["unroll"] = {4};
    expect(doc, ErrorCategory::Validation, "unknown parameter");
    doc = demo_doc();
    doc["templates"] = json::array();
    expect(doc, ErrorCategory::Parse, "templates");
    doc = demo_doc();
    doc["keep"] = 0;
    expect(doc, ErrorCategory::Validation, "keep");
    doc = demo_doc();
    doc["convergence"]["rel_improvement"] = 1.5;
    expect(doc, ErrorCategory::Validation, "rel_improvement");
    doc = demo_doc();
    doc["app"]["resource_budget"]["mul"] = 0;
    expect(doc, ErrorCategory::Validation, "mul");
    doc = demo_doc();
    doc["app"]["objective"] = "fastest";
    expect(doc, ErrorCategory::Parse, "fastest");
    doc = demo_doc();
    doc["app"].erase("power_budget_w");
    expect(doc, ErrorCategory::Parse, "power_budget_w");
    doc = demo_doc();
    doc["app"]["throughput_fps_min"] = -1.0;
    expect(doc, ErrorCategory::Validation, "throughput");
    CHECK(category_of([] { load_explore_config(data_path("demo/missing.json")); }) == ErrorCategory::Io);
  }

  TEST_CASE("demo exploration counts") {
    const auto run = run_doc(demo_doc());
    // 9 + 8 + 8 grid points for the three templates that run every layer, two schedules each
    CHECK(run.space.n1 == 50);
    CHECK(run.stage1.evaluations.size() == 50);
    CHECK(run.stage1.survivors.n2 <= 6);
    CHECK(run.stage1.survivors.n2 < run.space.n1);
    CHECK(run.stage2.ranked.size() == std::min<std::size_t>(3, run.stage2.n3));
    const auto m = json::parse(manifest_json(run));
    CHECK(m["status"] == "ok");
    CHECK(m["counters"]["n1"] == 50);
    CHECK(m["counters"]["n2"] == run.stage1.survivors.n2);
    CHECK(m["stage1"].size() == 50);
    CHECK(m["survivors"].size() == run.stage1.survivors.n2);
    CHECK(m["candidates"][0]["rank"] == 1);
    CHECK_FALSE(m.contains("stage1_seconds"));
  }

  TEST_CASE("top candidate beats its coarse estimate") {
    const auto run = run_doc(demo_doc());
    REQUIRE_FALSE(run.stage2.ranked.empty());
    const auto& top = run.stage2.ranked.front();
    CHECK(top.latency_s < top.coarse.latency_s);
    // Golden values of the bundled demo, frozen from the first run.
    CHECK(top.id() == "AdderTreeSpatial-0006/v0");
    CHECK(top.coarse.latency_s == doctest::Approx(0.004699055).epsilon(1e-9));
    CHECK(top.latency_s == doctest::Approx(0.00028761).epsilon(1e-9));
  }

  TEST_CASE("manifest is deterministic and independent of the thread count") {
    const auto a = manifest_json(run_doc(demo_doc(), 1));
    const auto b = manifest_json(run_doc(demo_doc(), 1));
    CHECK(a == b);
    auto ja = json::parse(a);
    auto jc = json::parse(manifest_json(run_doc(demo_doc(), 3)));
    CHECK(jc["threads"] == 3);
    ja.erase("threads");
    jc.erase("threads");
    CHECK(ja == jc);
  }

  TEST_CASE("manifest round-trips losslessly") {
    const auto text = manifest_json(run_doc(demo_doc()));
    const auto parsed = nlohmann::ordered_json::parse(text);
    CHECK(parsed.dump(2) + "\n" == text);
  }

  TEST_CASE("subsampling is recorded") {
    auto doc = demo_doc();
    doc["max_stage1_points"] = 10;
    const auto m = json::parse(manifest_json(run_doc(doc)));
    CHECK(m["counters"]["n1"] == 50);
    CHECK(m["counters"]["evaluated"] == 10);
    CHECK(m["stage1"].size() == 10);
  }

  TEST_CASE("infeasible application yields an empty but valid manifest") {
    auto doc = demo_doc();
    doc["app"]["throughput_fps_min"] = 1e9;
    const auto run = run_doc(doc);
    const auto text = manifest_json(run);
    const auto m = json::parse(text);
    CHECK(m["status"] == "no feasible design");
    CHECK(m["counters"]["n2"] == 0);
    CHECK(m["candidates"].empty());
    CHECK(format_report(text, "csv") == "rank,id,template,stage,variant,energy_j,latency_s,objective,bottleneck,frozen\n");
    CHECK(lines(pareto_csv(run)) == 1);
  }

  TEST_CASE("report rows") {
    const auto run = run_doc(demo_doc());
    const auto text = manifest_json(run);
    const auto csv = format_report(text, "csv");
    const auto tsv = format_report(text, "tsv");
    CHECK(lines(csv) == 1 + run.stage2.ranked.size());
    CHECK(lines(tsv) == lines(csv));
    auto as_tabs = csv;
    std::replace(as_tabs.begin(), as_tabs.end(), ',', '\t');
    CHECK(as_tabs == tsv);
    const auto second = csv.substr(csv.find('\n') + 1);
    CHECK(second.rfind("1," + run.stage2.ranked[0].id() + ",", 0) == 0);
    CHECK(category_of([&] { format_report(text, "xml"); }) == ErrorCategory::Validation);
    CHECK(category_of([] { format_report("{}", "csv"); }) == ErrorCategory::Parse);
  }

  TEST_CASE("pareto rows and timing") {
    const auto run = run_doc(demo_doc());
    const auto csv = pareto_csv(run);
    std::size_t feasible = 0;
    for (const auto& e : run.stage1.evaluations) feasible += e.feasible ? 1 : 0;
    CHECK(lines(csv) == 1 + feasible + run.stage2.ranked.size());
    CHECK(csv.find("fine," + run.stage2.ranked[0].id()) != std::string::npos);
    const auto t = json::parse(timing_json(run));
    CHECK(t["total_seconds"].get<double>() >= t["stage1_seconds"].get<double>());
  }
}
