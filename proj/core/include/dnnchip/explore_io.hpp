#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnnchip/app_spec.hpp"
#include "dnnchip/binding.hpp"
#include "dnnchip/cost_library.hpp"
#include "dnnchip/dnn_ir.hpp"
#include "dnnchip/explorer.hpp"

namespace dnnchip {

struct ExploreConfig {
  std::filesystem::path model;  // resolved against the config's directory
  std::filesystem::path costs;
  AppSpec app;
  std::vector<TemplateSpec> templates;
  std::vector<DataSchedule> schedules{DataSchedule{}};
  std::size_t keep = 8;
  std::size_t n_opt = 3;
  std::size_t variants_per_point = 1;
  ConvergenceRule convergence;
  std::uint64_t seed = 0;
  std::optional<std::size_t> max_stage1_points;
};

ExploreConfig parse_explore_config(std::string_view document, const std::filesystem::path& base_dir);
ExploreConfig load_explore_config(const std::filesystem::path& file);

struct ExploreRun {
  ExploreConfig config;
  std::string model_name;
  std::string technology;
  DesignSpace space;  // after subsampling
  Stage1Result stage1;
  Stage2Result stage2;
  unsigned threads = 1;
  double stage1_seconds = 0.0;
  double stage2_seconds = 0.0;
};

// Same config, seed and thread count give the same manifest.
ExploreRun run_explore(const ExploreConfig& config, const DnnModel& model, const UnitCostLibrary& costs,
                       unsigned threads = 1);

// Deterministic: wall-clock durations go to timing_json instead.
std::string manifest_json(const ExploreRun& run);
std::string timing_json(const ExploreRun& run);
// Columns: stage,id,template,energy_j,latency_s,pareto
std::string pareto_csv(const ExploreRun& run);

// Ranked candidates of a manifest as "csv" or "tsv"; other formats throw
// Validation.
std::string format_report(std::string_view manifest, std::string_view format);

}  // namespace dnnchip
