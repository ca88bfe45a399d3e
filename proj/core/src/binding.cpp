#include "dnnchip/binding.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <unordered_map>

#include <fmt/format.h>

#include "dnnchip/error.hpp"

namespace dnnchip {
namespace {

enum class Role { None, Ingress, Engine, Intra, Egress };

// How one layer kind is routed through the graph.
struct Route {
  std::vector<Role> role;
  std::vector<int> depth;                      // hops from the engine group
  std::vector<std::vector<std::size_t>> upstream;  // nearest stateful nodes feeding each node
  std::vector<std::size_t> engines;
  std::vector<std::size_t> stateful;  // node order
  std::vector<std::size_t> sources;
  std::vector<std::size_t> sinks;
  std::vector<std::size_t> memories;  // on-chip memories on the route
};

struct Topology {
  std::vector<std::vector<std::size_t>> preds;
  std::vector<std::vector<std::size_t>> succs;
};

bool is_off_chip(const IpNode& node) { return node.kind == IpKind::Memory && node.memory().off_chip; }

bool upstream_allowed(Role consumer, Role producer) {
  switch (consumer) {
    case Role::Ingress: return producer == Role::Ingress;
    case Role::Engine: return producer == Role::Ingress || producer == Role::Engine || producer == Role::Intra;
    case Role::Intra: return producer == Role::Engine || producer == Role::Intra;
    case Role::Egress: return producer == Role::Engine || producer == Role::Intra || producer == Role::Egress;
    case Role::None: return false;
  }
  return false;
}

Route classify(const AccelGraph& graph, const Topology& topo, LayerKind kind) {
  const auto n = graph.nodes.size();
  Route route;
  route.role.assign(n, Role::None);
  route.depth.assign(n, -1);
  route.upstream.assign(n, {});
  std::vector<bool> in_group(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = graph.nodes[i];
    if (node.kind == IpKind::Computation && node.compute().supports_kind(kind)) {
      in_group[i] = true;
      route.role[i] = Role::Engine;
      route.depth[i] = 0;
      route.engines.push_back(i);
    }
  }
  if (route.engines.empty()) return route;

  std::vector<bool> from_group(n, false);
  std::vector<bool> to_group(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto p : topo.preds[i]) from_group[i] = from_group[i] || in_group[p];
    for (auto s : topo.succs[i]) to_group[i] = to_group[i] || in_group[s];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (graph.nodes[i].kind == IpKind::DataPath && from_group[i] && to_group[i]) {
      route.role[i] = Role::Intra;
      route.depth[i] = 0;
    }
  }

  std::vector<bool> on_route_memory(n, false);
  auto sweep = [&](bool backward) {
    std::deque<std::size_t> queue(route.engines.begin(), route.engines.end());
    std::vector<bool> visited(in_group);
    while (!queue.empty()) {
      auto v = queue.front();
      queue.pop_front();
      for (auto w : backward ? topo.preds[v] : topo.succs[v]) {
        if (visited[w]) continue;
        const auto& node = graph.nodes[w];
        if (node.kind == IpKind::Computation || is_off_chip(node)) continue;
        if (node.kind == IpKind::DataPath) {
          if (backward ? from_group[w] : to_group[w]) continue;
          if (route.role[w] != Role::None) continue;
          route.role[w] = backward ? Role::Ingress : Role::Egress;
        } else {
          on_route_memory[w] = true;
        }
        visited[w] = true;
        route.depth[w] = route.depth[v] + 1;
        queue.push_back(w);
      }
    }
  };
  sweep(true);
  sweep(false);
  for (std::size_t i = 0; i < n; ++i) {
    if (on_route_memory[i]) route.memories.push_back(i);
  }

  std::vector<bool> has_downstream(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (route.role[i] == Role::None) continue;
    route.stateful.push_back(i);
    std::vector<bool> visited(n, false);
    std::vector<std::size_t> stack{i};
    visited[i] = true;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto p : topo.preds[v]) {
        if (visited[p]) continue;
        visited[p] = true;
        if (upstream_allowed(route.role[i], route.role[p])) {
          route.upstream[i].push_back(p);
          has_downstream[p] = true;
        } else if (on_route_memory[p]) {
          stack.push_back(p);
        }
      }
    }
    std::sort(route.upstream[i].begin(), route.upstream[i].end());
  }
  for (auto i : route.stateful) {
    if (route.upstream[i].empty()) route.sources.push_back(i);
  }
  for (auto i : route.stateful) {
    if (!has_downstream[i]) route.sinks.push_back(i);
  }
  return route;
}

// Splits `total` evenly over `parts`, the remainder going to the first part.
std::uint64_t share(std::uint64_t total, std::size_t parts, std::size_t index) {
  const auto base = total / parts;
  return index == 0 ? base + total % parts : base;
}

std::uint64_t memory_footprint(const MemoryAttrs& memory, const TileWorkload& tile) {
  auto holds = [&](DataType t) {
    return memory.data_types.empty() ||
           std::find(memory.data_types.begin(), memory.data_types.end(), t) != memory.data_types.end();
  };
  std::uint64_t bits = 0;
  if (holds(DataType::Inputs)) bits += tile.input_bits;
  if (holds(DataType::Weights)) bits += tile.weight_bits;
  if (holds(DataType::PartialSums)) bits += tile.psum_bits;
  return bits;
}

struct Tile {
  std::int64_t channels;
  std::int64_t rows;
};

std::vector<Tile> make_tiles(const LayerSpec& layer, const DataSchedule& schedule) {
  const auto m_total = layer.output_shape.channels;
  const auto r_total = layer.output_shape.height;
  const auto m = schedule.tile_m > 0 ? std::min(schedule.tile_m, m_total) : m_total;
  const auto r = schedule.tile_rows > 0 ? std::min(schedule.tile_rows, r_total) : r_total;
  std::vector<Tile> tiles;
  for (std::int64_t c0 = 0; c0 < m_total; c0 += m) {
    for (std::int64_t r0 = 0; r0 < r_total; r0 += r) {
      tiles.push_back({std::min(m, m_total - c0), std::min(r, r_total - r0)});
    }
  }
  return tiles;
}

}  // namespace

std::string tile_token(std::string_view layer, std::size_t tile, std::string_view node) {
  return fmt::format("{}.t{}.{}", layer, tile, node);
}

std::string input_token(std::string_view layer) { return fmt::format("input:{}", layer); }

AccelGraph bind_mapping(const AccelGraph& graph, const DnnModel& model, const DataSchedule& schedule) {
  if (schedule.tile_m < 0 || schedule.tile_rows < 0) {
    fail(ErrorCategory::Validation, "data schedule tile sizes must be >= 0");
  }
  AccelGraph bound = graph;
  bound.primary_inputs.clear();
  bound.final_outputs.clear();
  bound.pipelined.clear();
  for (auto& node : bound.nodes) node.states.clear();
  if (model.layers.empty()) return bound;

  const auto n = graph.nodes.size();
  std::unordered_map<std::string_view, std::size_t> ids;
  for (std::size_t i = 0; i < n; ++i) ids.emplace(graph.nodes[i].id, i);
  Topology topo;
  topo.preds.assign(n, {});
  topo.succs.assign(n, {});
  for (const auto& e : graph.edges) {
    auto a = ids.find(e.start);
    auto b = ids.find(e.end);
    if (a == ids.end() || b == ids.end()) {
      fail(ErrorCategory::Validation, fmt::format("edge {}->{}: dangling endpoint", e.start, e.end));
    }
    topo.succs[a->second].push_back(b->second);
    topo.preds[b->second].push_back(a->second);
  }

  // Nodes whose tokens each node may consume (direct or through memories).
  std::vector<std::vector<bool>> feeders(n, std::vector<bool>(n, false));
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<bool> visited(n, false);
    std::vector<std::size_t> stack{c};
    visited[c] = true;
    feeders[c][c] = true;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto p : topo.preds[v]) {
        feeders[c][p] = true;
        if (!visited[p] && graph.nodes[p].kind == IpKind::Memory) {
          visited[p] = true;
          stack.push_back(p);
        }
      }
    }
  }

  std::map<LayerKind, Route> routes;
  // Final tokens of each bound layer with the node producing them.
  std::map<std::string, std::vector<std::pair<std::size_t, std::string>>> layer_outputs;
  std::map<std::string, bool> has_successor;
  for (const auto& layer : model.layers) {
    for (const auto& p : layer.predecessors) has_successor[p] = true;
  }

  const auto order = topological_layer_order(model);
  for (std::size_t round = 0; round < order.size(); ++round) {
    const auto& layer = model.layers[order[round]];
    auto it = routes.find(layer.kind);
    if (it == routes.end()) it = routes.emplace(layer.kind, classify(graph, topo, layer.kind)).first;
    const auto& route = it->second;
    if (route.engines.empty()) {
      fail(ErrorCategory::Validation,
           fmt::format("layer '{}': unsupported layer kind {} (no computation IP of '{}' supports it)", layer.id,
                       to_string(layer.kind), graph.name));
    }

    const auto tiles = make_tiles(layer, schedule);
    const auto largest = tile_workload(layer, model.precision, tiles.front().channels, tiles.front().rows);
    for (auto m : route.memories) {
      const auto& mem = graph.nodes[m].memory();
      const auto need = memory_footprint(mem, largest);
      if (need > mem.volume_bits) {
        fail(ErrorCategory::Validation,
             fmt::format("layer '{}': tile of {} channels x {} rows needs {} bits in memory '{}' (volume {})",
                         layer.id, tiles.front().channels, tiles.front().rows, need, graph.nodes[m].id,
                         mem.volume_bits));
      }
    }

    // Barrier on the predecessor layers, visible to each source node.
    std::vector<std::vector<std::string>> source_needs(n);
    for (auto s : route.sources) {
      if (layer.predecessors.empty()) {
        source_needs[s].push_back(input_token(layer.id));
        continue;
      }
      for (const auto& pred : layer.predecessors) {
        for (const auto& [producer, token] : layer_outputs[pred]) {
          if (feeders[s][producer]) source_needs[s].push_back(token);
        }
      }
    }
    if (layer.predecessors.empty()) bound.primary_inputs.push_back(input_token(layer.id));

    // Group data paths by role and depth for volume splitting.
    std::map<std::pair<Role, int>, std::vector<std::size_t>> groups;
    for (auto i : route.stateful) {
      if (route.role[i] == Role::Ingress || route.role[i] == Role::Egress) {
        groups[{route.role[i], route.depth[i]}].push_back(i);
      }
    }

    for (std::size_t t = 0; t < tiles.size(); ++t) {
      const auto tw = tile_workload(layer, model.precision, tiles[t].channels, tiles[t].rows);
      std::vector<std::uint64_t> work(n, 0);
      for (std::size_t e = 0; e < route.engines.size(); ++e) {
        work[route.engines[e]] = share(tw.mac_count, route.engines.size(), e);
      }
      for (const auto& [key, members] : groups) {
        if (key.first == Role::Egress) {
          for (std::size_t k = 0; k < members.size(); ++k) work[members[k]] = share(tw.output_bits, members.size(), k);
          continue;
        }
        for (auto [type, volume] : {std::pair{DataType::Inputs, tw.input_bits}, {DataType::Weights, tw.weight_bits}}) {
          std::vector<std::size_t> carriers;
          for (auto m : members) {
            if (graph.nodes[m].datapath().carries(type)) carriers.push_back(m);
          }
          for (std::size_t k = 0; k < carriers.size(); ++k) work[carriers[k]] += share(volume, carriers.size(), k);
        }
      }
      for (auto i : route.stateful) {
        if (route.role[i] == Role::Intra) work[i] = (tw.input_bits + tw.weight_bits) / route.engines.size();
      }

      for (auto i : route.stateful) {
        IpState state;
        state.round = static_cast<std::int64_t>(round);
        state.layer = layer.id;
        state.work = work[i];
        if (t == 0) state.needs = source_needs[i];
        for (auto u : route.upstream[i]) state.needs.push_back(tile_token(layer.id, t, graph.nodes[u].id));
        state.produces.push_back(tile_token(layer.id, t, graph.nodes[i].id));
        bound.nodes[i].states.push_back(std::move(state));
      }
    }

    auto& outputs = layer_outputs[layer.id];
    for (auto s : route.sinks) outputs.emplace_back(s, tile_token(layer.id, tiles.size() - 1, graph.nodes[s].id));
    if (!has_successor[layer.id]) {
      for (const auto& [_, token] : outputs) bound.final_outputs.push_back(token);
    }
  }
  return bound;
}

}  // namespace dnnchip
