#include "dnnchip/predictor_coarse.hpp"

#include <algorithm>

#include "dependency.hpp"
#include "dnnchip/timing.hpp"
#include "json_util.hpp"

namespace dnnchip {
namespace {

using detail::ordered_json;

struct RoundEdge {
  std::uint32_t round;
  std::uint32_t from;
  std::uint32_t to;
  auto operator<=>(const RoundEdge&) const = default;
};

}  // namespace

const IpEstimate* PredictionReport::ip(std::string_view id) const {
  for (const auto& [name, est] : per_ip) {
    if (name == id) return &est;
  }
  return nullptr;
}

IpEstimate ip_estimate(const IpNode& ip, const UnitCostLibrary& costs, std::string_view technology) {
  const auto& params = costs.lookup(ip.impl, technology).params;
  IpEstimate est;
  est.energy_j = params.e_warmup;
  est.latency_cycles = seconds_to_cycles(params.l_warmup, ip.freq_mhz);
  for (const auto& state : ip.states) {
    const auto cost = state_cost(ip, state, params);
    est.energy_j += cost.energy_j;
    est.latency_cycles += state_cycles(cost, ip.freq_mhz);
  }
  est.latency_seconds = static_cast<double>(est.latency_cycles) / (ip.freq_mhz * 1e6);
  return est;
}

ResourceReport resource_usage(const AccelGraph& graph, const UnitCostLibrary& costs) {
  ResourceReport r;
  std::uint64_t memories = 0;
  for (const auto& node : graph.nodes) {
    (void)costs.lookup(node.impl, graph.technology);
    switch (node.kind) {
      case IpKind::Memory:
        ++memories;
        r.mem_bits_by_impl[node.impl] += node.memory().volume_bits;
        if (!node.memory().off_chip) r.onchip_mem_bits += node.memory().volume_bits;
        break;
      case IpKind::Computation:
        r.mul_count += static_cast<std::uint64_t>(node.compute().unroll);
        break;
      case IpKind::DataPath:
        r.datapath_bits += static_cast<std::uint64_t>(node.datapath().port_width_bits);
        break;
    }
  }
  r.mul_decode_count = costs.mul_per_decode() * memories;
  r.mul_count += r.mul_decode_count;
  return r;
}

PredictionReport predict_coarse(const AccelGraph& graph, const UnitCostLibrary& costs) {
  PredictionReport report;
  const double clock = graph.global_clock_mhz();
  report.clock_mhz = clock;
  report.resources = resource_usage(graph, costs);

  const auto index = detail::index_dependencies(graph);
  const auto n = graph.nodes.size();

  std::vector<std::int64_t> rounds = detail::rounds_of(graph);
  if (rounds.empty()) rounds.push_back(0);
  std::int64_t last_round = rounds.front();
  std::uint32_t last_slot = 0;
  auto round_slot = [&](std::int64_t r) {
    if (r != last_round) {
      last_round = r;
      last_slot = static_cast<std::uint32_t>(std::lower_bound(rounds.begin(), rounds.end(), r) - rounds.begin());
    }
    return last_slot;
  };

  // weight[round][node]: cycles at the global clock, warm-up on the first state.
  std::vector<std::vector<std::uint64_t>> weight(rounds.size(), std::vector<std::uint64_t>(n, 0));
  std::vector<std::vector<bool>> member(rounds.size(), std::vector<bool>(n, false));
  std::vector<std::uint32_t> state_round(index.state_count(), 0);

  double energy = 0.0;
  report.per_ip.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& node = graph.nodes[i];
    const auto& params = costs.lookup(node.impl, graph.technology).params;
    IpEstimate est;
    est.energy_j = params.e_warmup;
    est.latency_cycles = seconds_to_cycles(params.l_warmup, node.freq_mhz);
    const auto warmup_global = seconds_to_cycles(params.l_warmup, clock);
    if (node.states.empty()) {
      member[0][i] = true;
      weight[0][i] = warmup_global;
    }
    for (std::uint32_t k = 0; k < node.states.size(); ++k) {
      const auto& state = node.states[k];
      const auto cost = state_cost(node, state, params);
      est.energy_j += cost.energy_j;
      est.latency_cycles += state_cycles(cost, node.freq_mhz);
      const auto slot = round_slot(state.round);
      state_round[index.first_state[i] + k] = slot;
      member[slot][i] = true;
      weight[slot][i] += state_cycles(cost, clock) + (k == 0 ? warmup_global : 0);
    }
    est.latency_seconds = static_cast<double>(est.latency_cycles) / (node.freq_mhz * 1e6);
    energy += est.energy_j;
    report.per_ip.emplace_back(node.id, est);
  }

  // Bucket states by round, keeping global order so the states of one IP stay
  // contiguous, then collect unique cross-IP edges per round.
  std::vector<std::uint32_t> round_start(rounds.size() + 1, 0);
  for (auto slot : state_round) ++round_start[slot + 1];
  for (std::size_t r = 0; r < rounds.size(); ++r) round_start[r + 1] += round_start[r];
  std::vector<std::uint32_t> by_round(index.state_count());
  {
    auto fill = round_start;
    for (std::uint32_t s = 0; s < index.state_count(); ++s) by_round[fill[state_round[s]]++] = s;
  }
  std::vector<RoundEdge> edges;
  std::vector<std::uint32_t> seen(n, 0);
  std::uint32_t stamp = 0;
  for (std::uint32_t r = 0; r < rounds.size(); ++r) {
    const auto first = edges.size();
    std::uint32_t current = static_cast<std::uint32_t>(n);
    for (auto i = round_start[r]; i < round_start[r + 1]; ++i) {
      const auto s = by_round[i];
      const auto to = index.node_of[s];
      if (to != current) {
        current = to;
        ++stamp;
      }
      for (auto p : index.producers(s)) {
        if (p < 0) continue;
        const auto ps = static_cast<std::uint32_t>(p);
        const auto from = index.node_of[ps];
        if (from == to || state_round[ps] != r || seen[from] == stamp) continue;
        seen[from] = stamp;
        edges.push_back({r, from, to});
      }
    }
    std::sort(edges.begin() + static_cast<std::ptrdiff_t>(first), edges.end());
  }

  std::vector<std::vector<std::uint32_t>> out(n);
  std::vector<std::uint32_t> indegree(n);
  std::vector<std::uint64_t> dist(n);
  std::vector<std::int64_t> via(n);
  std::size_t e = 0;
  for (std::uint32_t r = 0; r < rounds.size(); ++r) {
    for (auto& o : out) o.clear();
    std::fill(indegree.begin(), indegree.end(), 0);
    for (; e < edges.size() && edges[e].round == r; ++e) {
      out[edges[e].from].push_back(edges[e].to);
      ++indegree[edges[e].to];
    }
    std::vector<std::uint32_t> ready;
    std::size_t members = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (!member[r][i]) continue;
      ++members;
      dist[i] = weight[r][i];
      via[i] = -1;
      if (indegree[i] == 0) ready.push_back(i);
    }
    std::size_t done = 0;
    std::int64_t best = -1;
    while (!ready.empty()) {
      const auto v = ready.back();
      ready.pop_back();
      ++done;
      if (best < 0 || dist[v] > dist[static_cast<std::size_t>(best)] ||
          (dist[v] == dist[static_cast<std::size_t>(best)] && v < best)) {
        best = v;
      }
      for (auto w : out[v]) {
        const auto candidate = dist[v] + weight[r][w];
        if (via[w] < 0 || candidate > dist[w]) {
          dist[w] = candidate;
          via[w] = v;
        }
        if (--indegree[w] == 0) ready.push_back(w);
      }
    }
    if (done != members) {
      fail(ErrorCategory::Validation, fmt::format("dependency cycle between IPs in round {}", rounds[r]));
    }
    if (best < 0) continue;
    report.path_cycles += dist[static_cast<std::size_t>(best)];
    std::vector<std::string> path;
    for (auto v = best; v >= 0; v = via[static_cast<std::size_t>(v)]) path.push_back(graph.nodes[v].id);
    report.critical_path.insert(report.critical_path.end(), path.rbegin(), path.rend());
  }

  report.energy_j = energy + costs.host().energy_j;
  report.host_cycles = seconds_to_cycles(costs.host().latency_s, clock);
  report.latency_cycles = report.path_cycles + report.host_cycles;
  report.latency_seconds = static_cast<double>(report.latency_cycles) / (clock * 1e6);
  return report;
}

std::string report_to_json(const PredictionReport& report) {
  ordered_json root;
  root["mode"] = "coarse";
  root["energy_j"] = report.energy_j;
  root["clock_mhz"] = report.clock_mhz;
  root["path_cycles"] = report.path_cycles;
  root["host_cycles"] = report.host_cycles;
  root["latency_cycles"] = report.latency_cycles;
  root["latency_seconds"] = report.latency_seconds;
  root["critical_path"] = report.critical_path;
  const auto& r = report.resources;
  ordered_json mem;
  for (const auto& [impl, bits] : r.mem_bits_by_impl) mem[impl] = bits;
  root["resources"] = {{"mem_bits_by_impl", mem},
                       {"onchip_mem_bits", r.onchip_mem_bits},
                       {"mul_count", r.mul_count},
                       {"mul_decode_count", r.mul_decode_count},
                       {"datapath_bits", r.datapath_bits}};
  auto per_ip = ordered_json::array();
  for (const auto& [id, est] : report.per_ip) {
    per_ip.push_back({{"node", id},
                      {"energy_j", est.energy_j},
                      {"latency_cycles", est.latency_cycles},
                      {"latency_seconds", est.latency_seconds}});
  }
  root["per_ip"] = std::move(per_ip);
  return root.dump(2) + "\n";
}

std::string report_to_csv(const PredictionReport& report) {
  std::string out = "scope,node,energy_j,latency_cycles,latency_seconds\n";
  for (const auto& [id, est] : report.per_ip) {
    out += fmt::format("ip,{},{},{},{}\n", id, est.energy_j, est.latency_cycles, est.latency_seconds);
  }
  out += fmt::format("total,,{},{},{}\n", report.energy_j, report.latency_cycles, report.latency_seconds);
  return out;
}

}  // namespace dnnchip
