#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnnchip/accel_graph.hpp"
#include "dnnchip/cost_library.hpp"

namespace dnnchip {

struct SimLimits {
  std::uint64_t max_cycles = std::uint64_t{1} << 40;
  bool trace_enabled = false;
};

// `from`/`to` are "idle" or "s<k>" (state index within the IP).
struct TraceRecord {
  std::uint64_t cycle = 0;
  std::string node;
  std::string from;
  std::string to;
  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct SimResult {
  std::uint64_t total_cycles = 0;
  std::uint64_t host_cycles = 0;
  double clock_mhz = 0.0;
  double latency_seconds = 0.0;  // (total + host) cycles at the global clock
  double energy_j = 0.0;
  std::map<std::string, std::uint64_t> busy_cycles;
  std::map<std::string, std::uint64_t> idle_cycles;
  std::string bottleneck;
  std::optional<std::vector<TraceRecord>> trace;
};

// Cycle-level run of every state machine. A state starts in the first cycle
// its IP is idle and all its input tokens exist; its outputs become visible
// when it finishes. An IP is idle in every cycle it is not busy.
SimResult simulate(const AccelGraph& graph, const UnitCostLibrary& costs, const SimLimits& limits = {});

// IP with the fewest idle cycles; ties go to the smallest id.
std::string bottleneck(const SimResult& result);

// Line-oriented `cycle,node,from_state,to_state` records. Throws when the
// simulation ran without tracing.
std::string export_trace(const SimResult& result);

std::string sim_to_json(const SimResult& result);

}  // namespace dnnchip
