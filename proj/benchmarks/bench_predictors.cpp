#include <benchmark/benchmark.h>

#include <map>
#include <string>

#include "dnnchip/binding.hpp"
#include "dnnchip/io.hpp"
#include "dnnchip/predictor_coarse.hpp"
#include "dnnchip/predictor_fine.hpp"
#include "dnnchip/templates.hpp"

using namespace dnnchip;

namespace {

std::string data(const std::string& relative) { return std::string(DNNCHIP_BENCH_DATA_DIR) + "/" + relative; }

struct Fixture {
  UnitCostLibrary costs;
  DnnModel model;
  AccelGraph arch;
};

const Fixture& fixture(TemplateKind kind, std::int64_t dim) {
  static const auto costs = load_library(read_text_file(data("costs/generic-28nm.json")));
  static const auto model = parse_model(read_text_file(data("models/skynet14.json")));
  static std::map<std::pair<TemplateKind, std::int64_t>, Fixture> cache;
  auto [it, inserted] = cache.try_emplace({kind, dim});
  if (inserted) {
    TemplateParams params{{"buffer_kbits", 8192}};
    if (kind == TemplateKind::RowStationaryNoC) params["dim"] = dim;
    it->second = {costs, model, build_graph(instantiate_template(kind, params, "generic-28nm"), costs)};
  }
  return it->second;
}

AccelGraph bound(TemplateKind kind, std::int64_t dim, std::int64_t tile_m) {
  const auto& f = fixture(kind, dim);
  return bind_mapping(f.arch, f.model, {tile_m, 0});
}

// Args: tile_m. Smaller tiles give more states per IP.
void BM_PredictCoarseNoC(benchmark::State& state) {
  const auto& f = fixture(TemplateKind::RowStationaryNoC, 5);
  const auto graph = bound(TemplateKind::RowStationaryNoC, 5, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(predict_coarse(graph, f.costs));
  state.counters["states"] = static_cast<double>(graph.state_count());
}
BENCHMARK(BM_PredictCoarseNoC)->Arg(16)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_PredictCoarseAdder(benchmark::State& state) {
  const auto& f = fixture(TemplateKind::AdderTreeSpatial, 0);
  const auto graph = bound(TemplateKind::AdderTreeSpatial, 0, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(predict_coarse(graph, f.costs));
  state.counters["states"] = static_cast<double>(graph.state_count());
}
BENCHMARK(BM_PredictCoarseAdder)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_SimulateNoC(benchmark::State& state) {
  const auto& f = fixture(TemplateKind::RowStationaryNoC, 5);
  const auto graph = bound(TemplateKind::RowStationaryNoC, 5, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(graph, f.costs));
  state.counters["states"] = static_cast<double>(graph.state_count());
}
BENCHMARK(BM_SimulateNoC)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_BindNoC(benchmark::State& state) {
  const auto& f = fixture(TemplateKind::RowStationaryNoC, 5);
  for (auto _ : state) benchmark::DoNotOptimize(bind_mapping(f.arch, f.model, {state.range(0), 0}));
}
BENCHMARK(BM_BindNoC)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
