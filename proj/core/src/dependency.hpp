#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "dnnchip/accel_graph.hpp"

namespace dnnchip::detail {

inline constexpr std::int32_t kPrimaryInput = -1;
inline constexpr std::int32_t kUnproduced = -2;

// Token-level view of a bound graph with states numbered globally in node
// order. String views point into the graph, which must outlive the index.
struct DependencyIndex {
  std::vector<std::uint32_t> first_state;  // per node, plus a trailing total
  std::vector<std::uint32_t> node_of;      // per global state
  // Per global state, one entry per needed token: the producing state,
  // kPrimaryInput or kUnproduced.
  std::vector<std::uint32_t> producer_offsets;  // per global state, plus a trailing total
  std::vector<std::int32_t> producer_list;
  absl::flat_hash_map<std::string_view, std::uint32_t> produced_by;
  std::vector<std::pair<std::string_view, std::uint32_t>> duplicates;  // token, later producer

  std::size_t state_count() const { return node_of.size(); }
  std::span<const std::int32_t> producers(std::uint32_t state) const {
    return {producer_list.data() + producer_offsets[state], producer_list.data() + producer_offsets[state + 1]};
  }
  std::uint32_t local_index(std::uint32_t state) const { return state - first_state[node_of[state]]; }
};

DependencyIndex index_dependencies(const AccelGraph& graph);

// Node-level dependency edges (producer node, consumer node) restricted to
// tokens produced and consumed in the same round. Sorted, unique.
std::vector<std::pair<std::uint32_t, std::uint32_t>> round_edges(const AccelGraph& graph, const DependencyIndex& index,
                                                                 std::int64_t round);

// Distinct rounds used by any state, ascending.
std::vector<std::int64_t> rounds_of(const AccelGraph& graph);

}  // namespace dnnchip::detail
