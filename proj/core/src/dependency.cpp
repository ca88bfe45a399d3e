#include "dependency.hpp"

#include <algorithm>
#include <unordered_set>

namespace dnnchip::detail {

DependencyIndex index_dependencies(const AccelGraph& graph) {
  DependencyIndex index;
  index.first_state.reserve(graph.nodes.size() + 1);
  std::uint32_t total = 0;
  for (std::uint32_t n = 0; n < graph.nodes.size(); ++n) {
    index.first_state.push_back(total);
    total += static_cast<std::uint32_t>(graph.nodes[n].states.size());
  }
  index.first_state.push_back(total);
  index.node_of.resize(total);
  index.produced_by.reserve(total);
  std::size_t needs = 0;

  for (std::uint32_t n = 0; n < graph.nodes.size(); ++n) {
    const auto& states = graph.nodes[n].states;
    for (std::uint32_t k = 0; k < states.size(); ++k) {
      const auto s = index.first_state[n] + k;
      index.node_of[s] = n;
      needs += states[k].needs.size();
      for (const auto& token : states[k].produces) {
        auto [it, inserted] = index.produced_by.emplace(token, s);
        if (!inserted) index.duplicates.emplace_back(token, s);
      }
    }
  }

  std::unordered_set<std::string_view> primary(graph.primary_inputs.begin(), graph.primary_inputs.end());
  index.producer_offsets.reserve(total + 1);
  index.producer_offsets.push_back(0);
  index.producer_list.reserve(needs);
  auto& out = index.producer_list;
  for (const auto& node : graph.nodes) {
    for (const auto& state : node.states) {
      for (const auto& token : state.needs) {
        if (auto it = index.produced_by.find(token); it != index.produced_by.end()) {
          out.push_back(static_cast<std::int32_t>(it->second));
        } else if (primary.contains(token)) {
          out.push_back(kPrimaryInput);
        } else {
          out.push_back(kUnproduced);
        }
      }
      index.producer_offsets.push_back(static_cast<std::uint32_t>(out.size()));
    }
  }
  return index;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> round_edges(const AccelGraph& graph, const DependencyIndex& index,
                                                                 std::int64_t round) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t s = 0; s < index.state_count(); ++s) {
    const auto n = index.node_of[s];
    const auto& state = graph.nodes[n].states[index.local_index(s)];
    if (state.round != round) continue;
    for (auto p : index.producers(s)) {
      if (p < 0) continue;
      const auto pn = index.node_of[static_cast<std::uint32_t>(p)];
      if (pn == n) continue;
      const auto& producer = graph.nodes[pn].states[index.local_index(static_cast<std::uint32_t>(p))];
      if (producer.round == round) edges.emplace_back(pn, n);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::int64_t> rounds_of(const AccelGraph& graph) {
  std::vector<std::int64_t> rounds;
  for (const auto& node : graph.nodes) {
    for (const auto& state : node.states) {
      if (rounds.empty() || rounds.back() != state.round) rounds.push_back(state.round);
    }
  }
  std::sort(rounds.begin(), rounds.end());
  rounds.erase(std::unique(rounds.begin(), rounds.end()), rounds.end());
  return rounds;
}

}  // namespace dnnchip::detail
