#include "dnnchip/predictor_fine.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "dependency.hpp"
#include "dnnchip/timing.hpp"
#include "json_util.hpp"

namespace dnnchip {

SimResult simulate(const AccelGraph& graph, const UnitCostLibrary& costs, const SimLimits& limits) {
  if (limits.max_cycles < 1) fail(ErrorCategory::Simulation, "max_cycles must be >= 1");
  SimResult result;
  const double clock = graph.global_clock_mhz();
  result.clock_mhz = clock;

  const auto index = detail::index_dependencies(graph);
  const auto n = graph.nodes.size();
  const auto total_states = index.state_count();

  std::vector<std::uint64_t> duration(total_states, 0);
  double energy = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& node = graph.nodes[i];
    const auto& params = costs.lookup(node.impl, graph.technology).params;
    double ip_energy = params.e_warmup;
    const auto warmup = seconds_to_cycles(params.l_warmup, clock);
    for (std::uint32_t k = 0; k < node.states.size(); ++k) {
      const auto cost = state_cost(node, node.states[k], params);
      ip_energy += cost.energy_j;
      duration[index.first_state[i] + k] = state_cycles(cost, clock) + (k == 0 ? warmup : 0);
    }
    energy += ip_energy;
  }

  // A state can start once its IP's previous state and the producers of all
  // its inputs have finished; settle start times in dependency order.
  std::vector<std::vector<std::uint32_t>> dependents(total_states);
  std::vector<std::uint32_t> pending(total_states, 0);
  std::vector<bool> starved(total_states, false);
  for (std::uint32_t s = 0; s < total_states; ++s) {
    if (index.local_index(s) > 0) {
      dependents[s - 1].push_back(s);
      ++pending[s];
    }
    for (auto p : index.producers(s)) {
      if (p == detail::kUnproduced) {
        starved[s] = true;
      } else if (p >= 0) {
        dependents[static_cast<std::uint32_t>(p)].push_back(s);
        ++pending[s];
      }
    }
  }
  std::vector<std::uint64_t> start(total_states, 0);
  std::vector<std::uint64_t> finish(total_states, 0);
  std::vector<bool> done(total_states, false);
  std::vector<std::uint32_t> ready;
  for (std::uint32_t s = 0; s < total_states; ++s) {
    if (pending[s] == 0 && !starved[s]) ready.push_back(s);
  }
  std::size_t completed = 0;
  while (!ready.empty()) {
    const auto s = ready.back();
    ready.pop_back();
    finish[s] = start[s] + duration[s];
    done[s] = true;
    ++completed;
    for (auto d : dependents[s]) {
      start[d] = std::max(start[d], finish[s]);
      if (--pending[d] == 0 && !starved[d]) ready.push_back(d);
    }
  }

  if (completed != total_states) {
    std::set<std::string> tokens;
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t k = 0; k < graph.nodes[i].states.size(); ++k) {
        const auto s = index.first_state[i] + k;
        if (done[s]) continue;
        if (k > 0 && !done[s - 1]) break;  // blocked behind its own earlier state
        for (std::size_t t = 0; t < index.producers(s).size(); ++t) {
          const auto p = index.producers(s)[t];
          if (p == detail::kUnproduced || (p >= 0 && !done[static_cast<std::uint32_t>(p)])) {
            tokens.insert(graph.nodes[i].states[k].needs[t]);
          }
        }
        break;
      }
    }
    std::string list;
    for (const auto& t : tokens) list += (list.empty() ? "" : ", ") + t;
    fail(ErrorCategory::Simulation, fmt::format("deadlock: {} of {} states never start; starved tokens: {}",
                                                total_states - completed, total_states, list));
  }

  std::uint64_t total = 0;
  for (auto f : finish) total = std::max(total, f);
  if (total > limits.max_cycles) {
    fail(ErrorCategory::Simulation,
         fmt::format("simulation needs {} cycles, more than max_cycles = {}", total, limits.max_cycles));
  }
  result.total_cycles = total;

  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint64_t busy = 0;
    for (auto s = index.first_state[i]; s < index.first_state[i + 1]; ++s) busy += duration[s];
    result.busy_cycles[graph.nodes[i].id] = busy;
    result.idle_cycles[graph.nodes[i].id] = total - busy;
  }
  result.bottleneck = bottleneck(result);
  result.energy_j = energy + costs.host().energy_j;
  result.host_cycles = seconds_to_cycles(costs.host().latency_s, clock);
  result.latency_seconds = static_cast<double>(total + result.host_cycles) / (clock * 1e6);

  if (limits.trace_enabled) {
    // (cycle, node, finish-before-start, state)
    std::vector<std::tuple<std::uint64_t, std::uint32_t, int, std::uint32_t>> events;
    events.reserve(total_states * 2);
    for (std::uint32_t s = 0; s < total_states; ++s) {
      events.emplace_back(start[s], index.node_of[s], 1, index.local_index(s));
      events.emplace_back(finish[s], index.node_of[s], 0, index.local_index(s));
    }
    std::sort(events.begin(), events.end());
    std::vector<TraceRecord> trace;
    trace.reserve(events.size());
    for (const auto& [cycle, node, is_start, k] : events) {
      const auto state = fmt::format("s{}", k);
      trace.push_back({cycle, graph.nodes[node].id, is_start ? "idle" : state, is_start ? state : "idle"});
    }
    result.trace = std::move(trace);
  }
  return result;
}

std::string bottleneck(const SimResult& result) {
  std::string best;
  std::uint64_t least = 0;
  for (const auto& [id, idle] : result.idle_cycles) {  // map order = id order
    if (best.empty() || idle < least) {
      best = id;
      least = idle;
    }
  }
  return best;
}

std::string export_trace(const SimResult& result) {
  if (!result.trace) fail(ErrorCategory::Simulation, "no trace recorded (tracing was disabled)");
  std::string out = "cycle,node,from_state,to_state\n";
  for (const auto& r : *result.trace) out += fmt::format("{},{},{},{}\n", r.cycle, r.node, r.from, r.to);
  return out;
}

std::string sim_to_json(const SimResult& result) {
  detail::ordered_json root;
  root["mode"] = "fine";
  root["total_cycles"] = result.total_cycles;
  root["host_cycles"] = result.host_cycles;
  root["clock_mhz"] = result.clock_mhz;
  root["latency_seconds"] = result.latency_seconds;
  root["energy_j"] = result.energy_j;
  root["bottleneck"] = result.bottleneck;
  auto per_ip = detail::ordered_json::array();
  for (const auto& [id, busy] : result.busy_cycles) {
    per_ip.push_back({{"node", id}, {"busy_cycles", busy}, {"idle_cycles", result.idle_cycles.at(id)}});
  }
  root["per_ip"] = std::move(per_ip);
  return root.dump(2) + "\n";
}

}  // namespace dnnchip
