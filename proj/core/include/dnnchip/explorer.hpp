#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dnnchip/accel_graph.hpp"
#include "dnnchip/app_spec.hpp"
#include "dnnchip/binding.hpp"
#include "dnnchip/cost_library.hpp"
#include "dnnchip/dnn_ir.hpp"
#include "dnnchip/predictor_coarse.hpp"
#include "dnnchip/predictor_fine.hpp"
#include "dnnchip/templates.hpp"

namespace dnnchip {

struct TemplateSpec {
  TemplateKind kind = TemplateKind::AdderTreeSpatial;
  std::map<std::string, std::vector<std::int64_t>> grid;  // parameter -> candidate values
};

struct DesignPoint {
  std::size_t index = 0;  // position in the Stage-1 enumeration
  TemplateKind kind = TemplateKind::AdderTreeSpatial;
  TemplateParams params;
  DataSchedule schedule;
  std::string id() const;
};

struct DesignSpace {
  std::shared_ptr<const DnnModel> model;
  std::string technology;
  std::vector<DesignPoint> points;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::size_t n3 = 0;
  std::size_t n_opt = 0;
};

// Builds the bound graph of a point.
AccelGraph realize(const DesignPoint& point, const DnnModel& model, const UnitCostLibrary& costs,
                   std::string_view technology);

// Cartesian product of every template grid with every schedule. Templates
// that cannot run some layer of the model, or whose cheapest grid point
// already exceeds the budget, are dropped whole. Throws Validation
// ("no feasible template") when nothing is left.
DesignSpace enumerate_stage1(std::shared_ptr<const DnnModel> model, const AppSpec& spec,
                             const std::vector<TemplateSpec>& pool, const std::vector<DataSchedule>& schedules,
                             const UnitCostLibrary& costs, std::string_view technology);

// Keeps `limit` points chosen by a seeded shuffle (order preserved).
void subsample(DesignSpace& space, std::size_t limit, std::uint64_t seed);

struct Stage1Eval {
  DesignPoint point;
  bool feasible = false;
  std::string reason;  // why an infeasible point was dropped
  double energy_j = 0.0;
  double latency_s = 0.0;
  std::uint64_t latency_cycles = 0;
  ResourceReport resources;
  double objective = 0.0;
};

// Empty when the point meets every budget; otherwise the first violation.
std::string budget_violation(const ResourceReport& resources, double energy_j, double latency_s, const AppSpec& spec);

struct Stage1Result {
  DesignSpace survivors;               // ranked, at most `keep`
  std::vector<Stage1Eval> ranked;      // same order as survivors.points
  std::vector<Stage1Eval> evaluations; // every point, enumeration order
};

Stage1Result prune_stage1(const DesignSpace& space, const AppSpec& spec, const UnitCostLibrary& costs,
                          std::size_t keep, unsigned threads = 1);

struct ConvergenceRule {
  double rel_improvement = 0.01;
  std::size_t patience = 2;
  std::size_t max_iterations = 50;
};

struct OptimizationStep {
  std::size_t iteration = 0;
  std::string bottleneck;
  std::string action;  // pipeline, pipeline_into, reallocate, deepen
  std::string target;
  std::uint64_t latency_cycles = 0;  // after the action
  bool accepted = false;
  std::string note;
};

struct OptimizationResult {
  AccelGraph graph;
  SimResult initial;
  SimResult final;
  std::vector<OptimizationStep> log;
  std::size_t accepted_steps = 0;
  bool frozen = false;  // stopped because the budget left nothing to reallocate
  std::string stop_reason;
};

// Bottleneck-driven loop: pipeline the bottleneck with its neighbour, or
// give it more resource once it is pipelined. A step is kept only if the
// simulated latency strictly drops.
OptimizationResult optimize_graph(const AccelGraph& graph, const ResourceBudget& budget, const UnitCostLibrary& costs,
                                  const ConvergenceRule& rule);

struct Candidate {
  DesignPoint point;
  std::size_t variant = 0;  // 0: as bound; k: pipelined at the k-th busiest IP
  std::string variant_ip;
  Stage1Eval coarse;
  OptimizationResult optimization;
  double energy_j = 0.0;   // fine
  double latency_s = 0.0;  // fine
  double objective = 0.0;
  std::string id() const;
};

struct Stage2Result {
  std::vector<Candidate> ranked;  // at most n_opt
  std::size_t n3 = 0;
};

Stage2Result optimize_stage2(const Stage1Result& stage1, const UnitCostLibrary& costs, const AppSpec& spec,
                             const ConvergenceRule& rule, std::size_t n_opt, std::size_t variants_per_point,
                             unsigned threads = 1);

}  // namespace dnnchip
