#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dnnchip/accel_graph.hpp"
#include "dnnchip/app_spec.hpp"
#include "dnnchip/cost_library.hpp"

namespace dnnchip {

// Result of a graph transformation. When `applied` is false the graph is the
// input unchanged and `note` says why.
struct GraphEdit {
  AccelGraph graph;
  bool applied = false;
  std::string note;
};

// IPs reading tokens produced by `ip`, and IPs producing tokens `ip` reads.
std::vector<std::string> consumers_of(const AccelGraph& graph, std::string_view ip);
std::vector<std::string> producers_of(const AccelGraph& graph, std::string_view ip);

// Splits every state of `ip` with work >= 2 into min(split, work) chunks and
// re-splits the states of its consumers so that each consumer chunk waits
// only for the matching prefix of producer chunks. Work and final outputs
// are conserved.
GraphEdit insert_pipeline(const AccelGraph& graph, std::string_view ip, int split = 2);

// Same, with `ip` as the consumer of every IP it reads from.
GraphEdit insert_pipeline_into(const AccelGraph& graph, std::string_view ip, int split = 2);

// Doubles a computation IP's unroll or a data path's port width, capped by
// what the budget still allows.
GraphEdit reallocate_resource(const AccelGraph& graph, std::string_view ip, const ResourceBudget& budget,
                              const UnitCostLibrary& costs);

}  // namespace dnnchip
