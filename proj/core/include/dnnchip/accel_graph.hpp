#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dnnchip/cost_library.hpp"
#include "dnnchip/dnn_ir.hpp"
#include "dnnchip/ip_kind.hpp"

namespace dnnchip {

enum class DataType { Weights, Inputs, PartialSums };

std::string_view to_string(DataType type);
std::optional<DataType> parse_data_type(std::string_view name);

struct MemoryAttrs {
  std::uint64_t volume_bits = 0;
  std::vector<DataType> data_types;  // held data; empty means any
  bool off_chip = false;             // DRAM level: not counted in on-chip memory, ends a route
  friend bool operator==(const MemoryAttrs&, const MemoryAttrs&) = default;
};

struct ComputeAttrs {
  std::int64_t unroll = 1;
  std::vector<LayerKind> supports;  // empty means every layer kind
  bool supports_kind(LayerKind kind) const;
  friend bool operator==(const ComputeAttrs&, const ComputeAttrs&) = default;
};

struct DataPathAttrs {
  std::int64_t port_width_bits = 1;
  std::vector<DataType> data_types;  // carried data; empty means any
  bool carries(DataType type) const;
  friend bool operator==(const DataPathAttrs&, const DataPathAttrs&) = default;
};

using IpAttrs = std::variant<MemoryAttrs, ComputeAttrs, DataPathAttrs>;

// `work` is MACs for computation IPs and bits moved for data paths and memories.
struct IpState {
  std::vector<std::string> needs;
  std::vector<std::string> produces;
  std::uint64_t work = 0;
  std::int64_t round = 0;
  std::string layer;
  friend bool operator==(const IpState&, const IpState&) = default;
};

struct IpNode {
  std::string id;
  IpKind kind = IpKind::Computation;
  std::string impl;
  double freq_mhz = 100.0;
  int precision = 8;
  IpAttrs attrs = ComputeAttrs{};
  std::vector<IpState> states;

  const MemoryAttrs& memory() const { return std::get<MemoryAttrs>(attrs); }
  const ComputeAttrs& compute() const { return std::get<ComputeAttrs>(attrs); }
  const DataPathAttrs& datapath() const { return std::get<DataPathAttrs>(attrs); }
  ComputeAttrs& compute() { return std::get<ComputeAttrs>(attrs); }
  DataPathAttrs& datapath() { return std::get<DataPathAttrs>(attrs); }
  friend bool operator==(const IpNode&, const IpNode&) = default;
};

struct Edge {
  std::string start;
  std::string end;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// Parsed but not yet checked against a cost library.
struct ArchDescription {
  std::string name;
  std::string technology;
  double clock_mhz = 0.0;  // 0: fastest node clock
  std::vector<IpNode> nodes;
  std::vector<Edge> edges;
  std::vector<std::string> primary_inputs;
  std::optional<std::vector<std::string>> final_outputs;  // default: produced, never consumed
  std::vector<std::pair<std::string, std::string>> pipelined;
};

struct AccelGraph {
  std::string name;
  std::string technology;
  double clock_mhz = 0.0;
  std::vector<IpNode> nodes;
  std::vector<Edge> edges;
  std::vector<std::string> primary_inputs;
  std::vector<std::string> final_outputs;
  std::set<std::pair<std::string, std::string>> pipelined;  // (producer, consumer) IP pairs

  std::optional<std::size_t> index_of(std::string_view id) const;
  const IpNode* find(std::string_view id) const;
  IpNode* find(std::string_view id);
  // Global clock used for cycle accounting.
  double global_clock_mhz() const;
  std::size_t state_count() const;
  friend bool operator==(const AccelGraph&, const AccelGraph&) = default;
};

// Checks endpoints, ids and implementation keys; states carried by the
// description are kept as-is.
AccelGraph build_graph(const ArchDescription& arch, const UnitCostLibrary& costs);

ArchDescription parse_arch(std::string_view document);
std::string serialize_arch(const AccelGraph& graph);
std::string to_dot(const AccelGraph& graph);

struct Diagnostic {
  std::string rule;
  std::string subject;  // node, edge or token the rule was violated on
  std::string message;
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

// Diagnostic rule names.
namespace rules {
inline constexpr std::string_view kDuplicateNode = "duplicate node";
inline constexpr std::string_view kDanglingEndpoint = "dangling endpoint";
inline constexpr std::string_view kSelfLoop = "self loop";
inline constexpr std::string_view kBadAttribute = "bad attribute";
inline constexpr std::string_view kComputeEdges = "computation edges";
inline constexpr std::string_view kDisconnected = "disconnected graph";
inline constexpr std::string_view kDuplicateProducer = "duplicate producer";
inline constexpr std::string_view kOrphanToken = "orphan token";
inline constexpr std::string_view kNonAdjacentProducer = "non-adjacent producer";
inline constexpr std::string_view kEmptyOutputs = "empty outputs";
inline constexpr std::string_view kRoundOrder = "round order";
inline constexpr std::string_view kBackwardRound = "backward round";
inline constexpr std::string_view kRoundCycle = "round dependency cycle";
inline constexpr std::string_view kStateOrder = "state order";
inline constexpr std::string_view kMissingFinalOutput = "unproduced final output";
inline constexpr std::string_view kUngroundedOutput = "ungrounded final output";
inline constexpr std::string_view kUnknownPipelinePair = "unknown pipeline pair";
}  // namespace rules

std::vector<Diagnostic> validate_graph(const AccelGraph& graph);

// All maximal source-to-sink node paths of the node-level dependency DAG
// (token dependencies when bound, physical edges otherwise). Throws on a
// cycle or when more than `max_paths` paths exist.
std::vector<std::vector<std::string>> critical_paths(const AccelGraph& graph, std::size_t max_paths = 100000);

}  // namespace dnnchip
