#include "dnnchip/accel_graph.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "dependency.hpp"
#include "dnnchip/error.hpp"

namespace dnnchip {
namespace {

using detail::DependencyIndex;

// Kahn's algorithm over `n` vertices; returns true when acyclic.
bool is_acyclic(std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
  std::vector<std::vector<std::uint32_t>> out(n);
  std::vector<std::size_t> indegree(n, 0);
  for (auto [a, b] : edges) {
    out[a].push_back(b);
    ++indegree[b];
  }
  std::vector<std::uint32_t> ready;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    auto v = ready.back();
    ready.pop_back();
    ++seen;
    for (auto w : out[v]) {
      if (--indegree[w] == 0) ready.push_back(w);
    }
  }
  return seen == n;
}

class Validator {
 public:
  explicit Validator(const AccelGraph& graph) : g_(graph) {}

  std::vector<Diagnostic> run() {
    check_nodes();
    check_edges();
    if (!structural_ok_) return std::move(out_);
    check_connectivity();
    check_tokens();
    return std::move(out_);
  }

 private:
  void report(std::string_view rule, std::string subject, std::string message) {
    out_.push_back({std::string(rule), std::move(subject), std::move(message)});
  }

  void check_nodes() {
    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      const auto& node = g_.nodes[i];
      if (!ids_.emplace(node.id, i).second) {
        report(rules::kDuplicateNode, node.id, fmt::format("node id '{}' declared more than once", node.id));
        structural_ok_ = false;
      }
      if (!(node.freq_mhz > 0.0)) {
        report(rules::kBadAttribute, node.id, fmt::format("node '{}': freq_mhz must be > 0", node.id));
      }
      const bool attrs_match = (node.kind == IpKind::Memory && std::holds_alternative<MemoryAttrs>(node.attrs)) ||
                               (node.kind == IpKind::Computation && std::holds_alternative<ComputeAttrs>(node.attrs)) ||
                               (node.kind == IpKind::DataPath && std::holds_alternative<DataPathAttrs>(node.attrs));
      if (!attrs_match) {
        report(rules::kBadAttribute, node.id, fmt::format("node '{}': attributes do not match its kind", node.id));
        structural_ok_ = false;
        continue;
      }
      if (node.kind == IpKind::Memory && node.memory().volume_bits == 0) {
        report(rules::kBadAttribute, node.id, fmt::format("memory '{}': volume_bits must be > 0", node.id));
      }
      if (node.kind == IpKind::Computation && node.compute().unroll < 1) {
        report(rules::kBadAttribute, node.id, fmt::format("computation '{}': unroll must be >= 1", node.id));
      }
      if (node.kind == IpKind::DataPath && node.datapath().port_width_bits < 1) {
        report(rules::kBadAttribute, node.id, fmt::format("data path '{}': port_width_bits must be >= 1", node.id));
      }
    }
  }

  void check_edges() {
    preds_.assign(g_.nodes.size(), {});
    succs_.assign(g_.nodes.size(), {});
    for (const auto& e : g_.edges) {
      const auto label = fmt::format("{}->{}", e.start, e.end);
      auto a = ids_.find(e.start);
      auto b = ids_.find(e.end);
      if (a == ids_.end() || b == ids_.end()) {
        const auto& missing = a == ids_.end() ? e.start : e.end;
        report(rules::kDanglingEndpoint, label, fmt::format("edge {}: dangling endpoint '{}'", label, missing));
        continue;
      }
      if (a->second == b->second) {
        report(rules::kSelfLoop, label, fmt::format("edge {}: self loop", label));
        continue;
      }
      succs_[a->second].push_back(b->second);
      preds_[b->second].push_back(a->second);
    }
    for (const auto& [p, c] : g_.pipelined) {
      if (!ids_.contains(p) || !ids_.contains(c)) {
        report(rules::kUnknownPipelinePair, fmt::format("{}->{}", p, c),
               fmt::format("pipelined pair ({}, {}) names an unknown node", p, c));
      }
    }
  }

  void check_connectivity() {
    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      const auto& node = g_.nodes[i];
      if (node.kind != IpKind::Computation) continue;
      if (preds_[i].empty() || succs_[i].empty()) {
        report(rules::kComputeEdges, node.id,
               fmt::format("computation '{}' needs at least one incoming and one outgoing edge", node.id));
      }
    }
    if (g_.nodes.empty()) return;
    std::vector<bool> seen(g_.nodes.size(), false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (const auto* list : {&preds_[v], &succs_[v]}) {
        for (auto w : *list) {
          if (!seen[w]) {
            seen[w] = true;
            stack.push_back(w);
          }
        }
      }
    }
    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      if (!seen[i]) {
        report(rules::kDisconnected, g_.nodes[i].id,
               fmt::format("node '{}' is not connected to '{}'", g_.nodes[i].id, g_.nodes[0].id));
      }
    }
  }

  // Nodes whose tokens `consumer` may read: direct predecessors and nodes
  // reaching it through passive memories only.
  std::vector<bool> feeders_of(std::size_t consumer) const {
    std::vector<bool> ok(g_.nodes.size(), false);
    std::vector<bool> visited(g_.nodes.size(), false);
    std::vector<std::size_t> stack{consumer};
    visited[consumer] = true;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto p : preds_[v]) {
        ok[p] = true;
        if (!visited[p] && g_.nodes[p].kind == IpKind::Memory) {
          visited[p] = true;
          stack.push_back(p);
        }
      }
    }
    return ok;
  }

  void check_tokens() {
    const auto index = detail::index_dependencies(g_);
    for (const auto& [token, state] : index.duplicates) {
      const auto first = index.produced_by.at(token);
      report(rules::kDuplicateProducer, std::string(token),
             fmt::format("token '{}' produced by both '{}' state {} and '{}' state {}", token,
                         g_.nodes[index.node_of[first]].id, index.local_index(first),
                         g_.nodes[index.node_of[state]].id, index.local_index(state)));
    }

    for (std::uint32_t n = 0; n < g_.nodes.size(); ++n) {
      const auto& node = g_.nodes[n];
      if (node.states.empty()) continue;
      const auto feeders = feeders_of(n);
      for (std::uint32_t k = 0; k < node.states.size(); ++k) {
        const auto& state = node.states[k];
        const auto s = index.first_state[n] + k;
        if (state.produces.empty() && k + 1 < node.states.size()) {
          report(rules::kEmptyOutputs, node.id,
                 fmt::format("'{}' state {} produces nothing but is not the last state", node.id, k));
        }
        if (k > 0 && state.round < node.states[k - 1].round) {
          report(rules::kRoundOrder, node.id,
                 fmt::format("'{}' state {} runs in round {} after a round-{} state", node.id, k, state.round,
                             node.states[k - 1].round));
        }
        for (std::size_t t = 0; t < state.needs.size(); ++t) {
          const auto& token = state.needs[t];
          const auto p = index.producers(s)[t];
          if (p == detail::kUnproduced) {
            report(rules::kOrphanToken, token,
                   fmt::format("token '{}' needed by '{}' state {} is never produced", token, node.id, k));
            continue;
          }
          if (p == detail::kPrimaryInput) continue;
          const auto pn = index.node_of[static_cast<std::uint32_t>(p)];
          const auto& producer = g_.nodes[pn].states[index.local_index(static_cast<std::uint32_t>(p))];
          if (pn != n && !feeders[pn]) {
            report(rules::kNonAdjacentProducer, token,
                   fmt::format("'{}' needs token '{}' from '{}', which is not an upstream neighbour", node.id, token,
                               g_.nodes[pn].id));
          }
          if (producer.round > state.round) {
            report(rules::kBackwardRound, token,
                   fmt::format("'{}' (round {}) needs token '{}' produced in later round {}", node.id, state.round,
                               token, producer.round));
          }
        }
      }
    }

    for (auto round : detail::rounds_of(g_)) {
      if (!is_acyclic(g_.nodes.size(), detail::round_edges(g_, index, round))) {
        report(rules::kRoundCycle, fmt::format("round {}", round),
               fmt::format("token dependencies of round {} form a cycle between IPs", round));
      }
    }

    // State-level order: a state waits for its IP's previous state and for
    // the producers of its inputs. A cycle here can never be scheduled.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> state_edges;
    for (std::uint32_t s = 0; s < index.state_count(); ++s) {
      if (index.local_index(s) > 0) state_edges.emplace_back(s - 1, s);
      for (auto p : index.producers(s)) {
        if (p >= 0) state_edges.emplace_back(static_cast<std::uint32_t>(p), s);
      }
    }
    if (!is_acyclic(index.state_count(), state_edges)) {
      report(rules::kStateOrder, g_.name.empty() ? "graph" : g_.name,
             "state machines wait on each other in a cycle (a state needs a token its own IP produces later)");
    }

    std::vector<bool> grounded(index.state_count(), false);
    std::unordered_set<std::string_view> primary(g_.primary_inputs.begin(), g_.primary_inputs.end());
    // Producer indices can point forward, so iterate to a fixed point.
    for (bool changed = true; changed;) {
      changed = false;
      for (std::uint32_t s = 0; s < index.state_count(); ++s) {
        if (grounded[s]) continue;
        bool g = index.local_index(s) > 0 && grounded[s - 1];
        for (auto p : index.producers(s)) {
          if (p == detail::kPrimaryInput || (p >= 0 && grounded[static_cast<std::uint32_t>(p)])) g = true;
        }
        if (g) {
          grounded[s] = true;
          changed = true;
        }
      }
    }
    for (const auto& token : g_.final_outputs) {
      auto it = index.produced_by.find(token);
      if (it == index.produced_by.end()) {
        if (!primary.contains(token)) {
          report(rules::kMissingFinalOutput, token, fmt::format("final output '{}' is never produced", token));
        }
      } else if (!grounded[it->second]) {
        report(rules::kUngroundedOutput, token,
               fmt::format("final output '{}' is not reachable from any primary input", token));
      }
    }
  }

  const AccelGraph& g_;
  std::vector<Diagnostic> out_;
  std::unordered_map<std::string_view, std::size_t> ids_;
  std::vector<std::vector<std::size_t>> preds_;
  std::vector<std::vector<std::size_t>> succs_;
  bool structural_ok_ = true;
};

void enumerate_paths(const std::vector<std::vector<std::uint32_t>>& out, std::uint32_t v,
                     std::vector<std::uint32_t>& prefix, std::vector<std::vector<std::uint32_t>>& paths,
                     std::size_t max_paths) {
  prefix.push_back(v);
  if (out[v].empty()) {
    if (paths.size() >= max_paths) {
      fail(ErrorCategory::Validation, fmt::format("more than {} dependency paths", max_paths));
    }
    paths.push_back(prefix);
  } else {
    for (auto w : out[v]) enumerate_paths(out, w, prefix, paths, max_paths);
  }
  prefix.pop_back();
}

}  // namespace

std::string_view to_string(DataType type) {
  switch (type) {
    case DataType::Weights: return "weights";
    case DataType::Inputs: return "inputs";
    case DataType::PartialSums: return "psums";
  }
  return "?";
}

std::optional<DataType> parse_data_type(std::string_view name) {
  if (name == "weights") return DataType::Weights;
  if (name == "inputs") return DataType::Inputs;
  if (name == "psums") return DataType::PartialSums;
  return std::nullopt;
}

bool ComputeAttrs::supports_kind(LayerKind kind) const {
  return supports.empty() || std::find(supports.begin(), supports.end(), kind) != supports.end();
}

bool DataPathAttrs::carries(DataType type) const {
  return data_types.empty() || std::find(data_types.begin(), data_types.end(), type) != data_types.end();
}

std::optional<std::size_t> AccelGraph::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  return std::nullopt;
}

const IpNode* AccelGraph::find(std::string_view id) const {
  auto i = index_of(id);
  return i ? &nodes[*i] : nullptr;
}

IpNode* AccelGraph::find(std::string_view id) {
  auto i = index_of(id);
  return i ? &nodes[*i] : nullptr;
}

double AccelGraph::global_clock_mhz() const {
  if (clock_mhz > 0.0) return clock_mhz;
  double fastest = 0.0;
  for (const auto& node : nodes) fastest = std::max(fastest, node.freq_mhz);
  return fastest > 0.0 ? fastest : 1.0;
}

std::size_t AccelGraph::state_count() const {
  std::size_t total = 0;
  for (const auto& node : nodes) total += node.states.size();
  return total;
}

AccelGraph build_graph(const ArchDescription& arch, const UnitCostLibrary& costs) {
  AccelGraph graph;
  graph.name = arch.name;
  graph.technology = arch.technology.empty() ? costs.technology() : arch.technology;
  graph.clock_mhz = arch.clock_mhz;
  graph.nodes = arch.nodes;
  graph.edges = arch.edges;
  graph.primary_inputs = arch.primary_inputs;
  graph.pipelined.insert(arch.pipelined.begin(), arch.pipelined.end());

  std::unordered_set<std::string_view> ids;
  for (const auto& node : graph.nodes) {
    if (!ids.insert(node.id).second) {
      fail(ErrorCategory::Validation, fmt::format("duplicate node id '{}'", node.id));
    }
    const auto* entry = costs.find(node.impl, graph.technology);
    if (entry == nullptr) {
      fail(ErrorCategory::Validation, fmt::format("node '{}': unknown implementation '{}' for technology '{}'",
                                                  node.id, node.impl, graph.technology));
    }
    if (entry->kind != node.kind) {
      fail(ErrorCategory::Validation, fmt::format("node '{}' is a {} IP but implementation '{}' is a {} entry", node.id,
                                                  to_string(node.kind), node.impl, to_string(entry->kind)));
    }
  }
  for (const auto& e : graph.edges) {
    for (const auto* end : {&e.start, &e.end}) {
      if (!ids.contains(*end)) {
        fail(ErrorCategory::Validation, fmt::format("edge {}->{}: dangling endpoint '{}'", e.start, e.end, *end));
      }
    }
  }

  if (arch.final_outputs) {
    graph.final_outputs = *arch.final_outputs;
  } else {
    std::unordered_set<std::string_view> consumed;
    for (const auto& node : graph.nodes) {
      for (const auto& state : node.states) consumed.insert(state.needs.begin(), state.needs.end());
    }
    for (const auto& node : graph.nodes) {
      for (const auto& state : node.states) {
        for (const auto& token : state.produces) {
          if (!consumed.contains(token)) graph.final_outputs.push_back(token);
        }
      }
    }
  }
  return graph;
}

std::vector<Diagnostic> validate_graph(const AccelGraph& graph) { return Validator(graph).run(); }

std::vector<std::vector<std::string>> critical_paths(const AccelGraph& graph, std::size_t max_paths) {
  const auto n = graph.nodes.size();
  std::unordered_map<std::string_view, std::uint32_t> ids;
  for (std::uint32_t i = 0; i < n; ++i) ids.emplace(graph.nodes[i].id, i);

  // One DAG per round (a single physical DAG when unbound).
  std::vector<std::pair<std::vector<bool>, std::vector<std::pair<std::uint32_t, std::uint32_t>>>> dags;
  if (graph.state_count() == 0) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (const auto& e : graph.edges) {
      auto a = ids.find(e.start);
      auto b = ids.find(e.end);
      if (a == ids.end() || b == ids.end()) {
        fail(ErrorCategory::Validation, fmt::format("edge {}->{}: dangling endpoint", e.start, e.end));
      }
      edges.emplace_back(a->second, b->second);
    }
    dags.emplace_back(std::vector<bool>(n, true), std::move(edges));
  } else {
    const auto index = detail::index_dependencies(graph);
    for (auto round : detail::rounds_of(graph)) {
      std::vector<bool> members(n, false);
      for (std::uint32_t i = 0; i < n; ++i) {
        for (const auto& s : graph.nodes[i].states) {
          if (s.round == round) members[i] = true;
        }
      }
      dags.emplace_back(std::move(members), detail::round_edges(graph, index, round));
    }
  }

  std::vector<std::vector<std::string>> result;
  std::set<std::vector<std::uint32_t>> seen;
  for (auto& [members, edges] : dags) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    if (!is_acyclic(n, edges)) fail(ErrorCategory::Validation, "cycle detected in the dependency structure");
    std::vector<std::vector<std::uint32_t>> out(n);
    std::vector<bool> has_pred(n, false);
    for (auto [a, b] : edges) {
      out[a].push_back(b);
      has_pred[b] = true;
    }
    std::vector<std::vector<std::uint32_t>> paths;
    std::vector<std::uint32_t> prefix;
    for (std::uint32_t v = 0; v < n; ++v) {
      if (members[v] && !has_pred[v]) enumerate_paths(out, v, prefix, paths, max_paths);
    }
    for (auto& p : paths) {
      if (!seen.insert(p).second) continue;
      std::vector<std::string> named;
      for (auto v : p) named.push_back(graph.nodes[v].id);
      result.push_back(std::move(named));
    }
  }
  return result;
}

}  // namespace dnnchip
