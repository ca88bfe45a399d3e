#include "dnnchip/pipeline.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include <fmt/format.h>

#include "dnnchip/error.hpp"
#include "dnnchip/predictor_coarse.hpp"

namespace dnnchip {
namespace {

class TokenNamer {
 public:
  explicit TokenNamer(const AccelGraph& graph) {
    for (const auto& node : graph.nodes) {
      for (const auto& s : node.states) {
        used_.insert(s.produces.begin(), s.produces.end());
        used_.insert(s.needs.begin(), s.needs.end());
      }
    }
    used_.insert(graph.primary_inputs.begin(), graph.primary_inputs.end());
  }

  std::string fresh(const std::string& base, std::size_t chunk) {
    auto name = fmt::format("{}~{}", base, chunk);
    while (used_.contains(name)) name += '\'';
    used_.insert(name);
    return name;
  }

 private:
  std::unordered_set<std::string> used_;
};

std::uint64_t chunk_work(std::uint64_t work, std::size_t chunks, std::size_t j) {
  const auto base = work / chunks;
  return j + 1 == chunks ? work - base * (chunks - 1) : base;
}

std::vector<std::size_t> consumers_of(const AccelGraph& graph, std::size_t producer) {
  std::unordered_set<std::string_view> made;
  for (const auto& s : graph.nodes[producer].states) made.insert(s.produces.begin(), s.produces.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    if (i == producer) continue;
    bool reads = false;
    for (const auto& s : graph.nodes[i].states) {
      for (const auto& t : s.needs) reads = reads || made.contains(t);
    }
    if (reads) out.push_back(i);
  }
  return out;
}

// Splits `producer` and re-splits each consumer; returns false when no
// producer state could be split.
bool split_pair(AccelGraph& g, std::size_t producer, const std::vector<std::size_t>& consumers, std::size_t k) {
  TokenNamer namer(g);
  std::map<std::string, std::vector<std::string>> chunks_of;  // final token -> chunk tokens in order

  std::vector<IpState> split_states;
  bool any = false;
  for (const auto& state : g.nodes[producer].states) {
    if (state.work < 2 || state.produces.empty()) {
      split_states.push_back(state);
      continue;
    }
    any = true;
    const auto c = static_cast<std::size_t>(std::min<std::uint64_t>(k, state.work));
    std::vector<std::vector<std::string>> produced(c);
    for (const auto& token : state.produces) {
      auto& seq = chunks_of[token];
      for (std::size_t j = 0; j + 1 < c; ++j) seq.push_back(namer.fresh(token, j));
      seq.push_back(token);
      for (std::size_t j = 0; j < c; ++j) produced[j].push_back(seq[j]);
    }
    for (std::size_t j = 0; j < c; ++j) {
      IpState chunk;
      if (j == 0) chunk.needs = state.needs;
      chunk.produces = std::move(produced[j]);
      chunk.work = chunk_work(state.work, c, j);
      chunk.round = state.round;
      chunk.layer = state.layer;
      split_states.push_back(std::move(chunk));
    }
  }
  if (!any) return false;
  g.nodes[producer].states = std::move(split_states);

  for (auto ci : consumers) {
    std::vector<IpState> rebuilt;
    for (const auto& state : g.nodes[ci].states) {
      std::vector<std::string> plain;
      std::vector<const std::vector<std::string>*> piped;
      for (const auto& t : state.needs) {
        auto it = chunks_of.find(t);
        if (it == chunks_of.end()) {
          plain.push_back(t);
        } else {
          piped.push_back(&it->second);
        }
      }
      if (piped.empty() || state.work < 2 || state.produces.empty()) {
        rebuilt.push_back(state);
        continue;
      }
      const auto c = static_cast<std::size_t>(std::min<std::uint64_t>(k, state.work));
      std::vector<std::vector<std::string>> produced(c);
      for (const auto& token : state.produces) {
        for (std::size_t j = 0; j + 1 < c; ++j) produced[j].push_back(namer.fresh(token, j));
        produced[c - 1].push_back(token);
      }
      for (std::size_t j = 0; j < c; ++j) {
        IpState chunk;
        if (j == 0) chunk.needs = plain;
        for (const auto* seq : piped) {
          // Prefix of producer chunks covering the first (j+1)/c of the data.
          const auto upto = ((j + 1) * seq->size() + c - 1) / c - 1;
          chunk.needs.push_back((*seq)[upto]);
        }
        chunk.produces = std::move(produced[j]);
        chunk.work = chunk_work(state.work, c, j);
        chunk.round = state.round;
        chunk.layer = state.layer;
        rebuilt.push_back(std::move(chunk));
      }
    }
    g.nodes[ci].states = std::move(rebuilt);
    g.pipelined.emplace(g.nodes[producer].id, g.nodes[ci].id);
  }
  return true;
}

std::size_t require_node(const AccelGraph& graph, std::string_view ip) {
  auto i = graph.index_of(ip);
  if (!i) fail(ErrorCategory::Validation, fmt::format("unknown IP '{}'", ip));
  return *i;
}

}  // namespace

std::vector<std::string> consumers_of(const AccelGraph& graph, std::string_view ip) {
  std::vector<std::string> out;
  for (auto i : consumers_of(graph, require_node(graph, ip))) out.push_back(graph.nodes[i].id);
  return out;
}

std::vector<std::string> producers_of(const AccelGraph& graph, std::string_view ip) {
  const auto c = require_node(graph, ip);
  std::vector<std::string> out;
  for (std::size_t p = 0; p < graph.nodes.size(); ++p) {
    if (p == c) continue;
    const auto consumers = consumers_of(graph, p);
    if (std::find(consumers.begin(), consumers.end(), c) != consumers.end()) out.push_back(graph.nodes[p].id);
  }
  return out;
}

GraphEdit insert_pipeline(const AccelGraph& graph, std::string_view ip, int split) {
  GraphEdit edit{graph, false, {}};
  const auto p = require_node(graph, ip);
  if (split <= 1) {
    edit.note = fmt::format("split factor {} leaves '{}' unchanged", split, ip);
    return edit;
  }
  const auto consumers = consumers_of(graph, p);
  if (consumers.empty()) {
    edit.note = fmt::format("'{}' has no consumer to pipeline with", ip);
    return edit;
  }
  if (!split_pair(edit.graph, p, consumers, static_cast<std::size_t>(split))) {
    edit.graph = graph;
    edit.note = fmt::format("states of '{}' cannot be split (work < 2)", ip);
    return edit;
  }
  edit.applied = true;
  return edit;
}

GraphEdit insert_pipeline_into(const AccelGraph& graph, std::string_view ip, int split) {
  GraphEdit edit{graph, false, {}};
  const auto c = require_node(graph, ip);
  if (split <= 1) {
    edit.note = fmt::format("split factor {} leaves '{}' unchanged", split, ip);
    return edit;
  }
  bool any = false;
  for (std::size_t p = 0; p < graph.nodes.size(); ++p) {
    if (p == c) continue;
    const auto consumers = consumers_of(edit.graph, p);
    if (std::find(consumers.begin(), consumers.end(), c) == consumers.end()) continue;
    any = split_pair(edit.graph, p, {c}, static_cast<std::size_t>(split)) || any;
  }
  if (!any) {
    edit.graph = graph;
    edit.note = fmt::format("no producer of '{}' can be split", ip);
    return edit;
  }
  edit.applied = true;
  return edit;
}

GraphEdit reallocate_resource(const AccelGraph& graph, std::string_view ip, const ResourceBudget& budget,
                              const UnitCostLibrary& costs) {
  GraphEdit edit{graph, false, {}};
  const auto i = require_node(graph, ip);
  auto& node = edit.graph.nodes[i];
  const auto usage = resource_usage(graph, costs);
  switch (node.kind) {
    case IpKind::Computation: {
      const auto u = static_cast<std::uint64_t>(node.compute().unroll);
      const auto others = usage.mul_count - u;
      const auto room = budget.mul > others ? budget.mul - others : 0;
      const auto target = std::min(2 * u, room);
      if (target <= u) {
        edit.note = fmt::format("'{}' is at the multiplier budget ({} of {})", ip, usage.mul_count, budget.mul);
        return edit;
      }
      node.compute().unroll = static_cast<std::int64_t>(target);
      break;
    }
    case IpKind::DataPath: {
      if (!budget.bus_bits) {
        edit.note = fmt::format("no data-path budget to widen '{}'", ip);
        return edit;
      }
      const auto w = static_cast<std::uint64_t>(node.datapath().port_width_bits);
      const auto others = usage.datapath_bits - w;
      const auto room = *budget.bus_bits > others ? *budget.bus_bits - others : 0;
      const auto target = std::min(2 * w, room);
      if (target <= w) {
        edit.note = fmt::format("'{}' is at the data-path budget ({} of {} bits)", ip, usage.datapath_bits,
                                *budget.bus_bits);
        return edit;
      }
      node.datapath().port_width_bits = static_cast<std::int64_t>(target);
      break;
    }
    case IpKind::Memory:
      edit.note = fmt::format("memory '{}' has no resource to reallocate", ip);
      return edit;
  }
  edit.applied = true;
  return edit;
}

}  // namespace dnnchip
