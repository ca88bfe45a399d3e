#include <sstream>

#include "dnnchip/accel_graph.hpp"
#include "json_util.hpp"

namespace dnnchip {
namespace {

using detail::json;
using detail::ordered_json;

constexpr std::int64_t kArchVersion = 1;

std::vector<std::string> string_list(const json& value, std::string_view key, std::string_view context) {
  if (!value.is_array()) fail(ErrorCategory::Parse, fmt::format("{}: field '{}' must be an array", context, key));
  std::vector<std::string> out;
  for (const auto& v : value) {
    if (!v.is_string()) fail(ErrorCategory::Parse, fmt::format("{}: field '{}' must hold strings", context, key));
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<DataType> data_types(const json& object, std::string_view context) {
  std::vector<DataType> out;
  auto it = object.find("data_types");
  if (it == object.end()) return out;
  for (const auto& name : string_list(*it, "data_types", context)) {
    auto t = parse_data_type(name);
    if (!t) fail(ErrorCategory::Parse, fmt::format("{}: unknown data type '{}'", context, name));
    out.push_back(*t);
  }
  return out;
}

std::uint64_t non_negative(const json& object, std::string_view key, std::string_view context) {
  auto v = detail::get_int(object, key, context);
  if (v < 0) fail(ErrorCategory::Parse, fmt::format("{}: field '{}' must be >= 0", context, key));
  return static_cast<std::uint64_t>(v);
}

IpState parse_state(const json& object, std::string_view context) {
  detail::require_object(object, context);
  detail::reject_unknown_fields(object, {"needs", "produces", "work", "round", "layer"}, context);
  IpState state;
  state.needs = string_list(detail::require_field(object, "needs", context), "needs", context);
  state.produces = string_list(detail::require_field(object, "produces", context), "produces", context);
  state.work = non_negative(object, "work", context);
  if (object.contains("round")) state.round = detail::get_int(object, "round", context);
  if (object.contains("layer")) state.layer = detail::get_string(object, "layer", context);
  return state;
}

IpNode parse_node(const json& object, std::size_t index) {
  auto context = fmt::format("nodes[{}]", index);
  detail::require_object(object, context);
  IpNode node;
  node.id = detail::get_string(object, "id", context);
  context = fmt::format("node '{}'", node.id);
  const auto kind_name = detail::get_string(object, "kind", context);
  auto kind = parse_ip_kind(kind_name);
  if (!kind) fail(ErrorCategory::Parse, fmt::format("{}: field 'kind' has unknown value '{}'", context, kind_name));
  node.kind = *kind;
  node.impl = detail::get_string(object, "impl", context);
  node.freq_mhz = detail::get_number(object, "freq_mhz", context);
  node.precision = static_cast<int>(detail::get_int(object, "precision", context));

  switch (node.kind) {
    case IpKind::Memory: {
      detail::reject_unknown_fields(
          object, {"id", "kind", "impl", "freq_mhz", "precision", "states", "volume_bits", "data_types", "off_chip"},
          context);
      MemoryAttrs attrs;
      attrs.volume_bits = non_negative(object, "volume_bits", context);
      attrs.data_types = data_types(object, context);
      if (auto it = object.find("off_chip"); it != object.end()) {
        if (!it->is_boolean()) fail(ErrorCategory::Parse, fmt::format("{}: field 'off_chip' must be a boolean", context));
        attrs.off_chip = it->get<bool>();
      }
      node.attrs = attrs;
      break;
    }
    case IpKind::Computation: {
      detail::reject_unknown_fields(object, {"id", "kind", "impl", "freq_mhz", "precision", "states", "unroll", "supports"},
                                    context);
      ComputeAttrs attrs;
      attrs.unroll = detail::get_int(object, "unroll", context);
      if (auto it = object.find("supports"); it != object.end()) {
        for (const auto& name : string_list(*it, "supports", context)) {
          auto k = parse_layer_kind(name);
          if (!k) fail(ErrorCategory::Parse, fmt::format("{}: unknown layer kind '{}'", context, name));
          attrs.supports.push_back(*k);
        }
      }
      node.attrs = attrs;
      break;
    }
    case IpKind::DataPath: {
      detail::reject_unknown_fields(
          object, {"id", "kind", "impl", "freq_mhz", "precision", "states", "port_width_bits", "data_types"}, context);
      DataPathAttrs attrs;
      attrs.port_width_bits = detail::get_int(object, "port_width_bits", context);
      attrs.data_types = data_types(object, context);
      node.attrs = attrs;
      break;
    }
  }
  if (auto it = object.find("states"); it != object.end()) {
    if (!it->is_array()) fail(ErrorCategory::Parse, fmt::format("{}: field 'states' must be an array", context));
    for (std::size_t k = 0; k < it->size(); ++k) {
      node.states.push_back(parse_state((*it)[k], fmt::format("{} state {}", context, k)));
    }
  }
  return node;
}

ordered_json types_json(const std::vector<DataType>& types) {
  auto out = ordered_json::array();
  for (auto t : types) out.push_back(std::string(to_string(t)));
  return out;
}

}  // namespace

ArchDescription parse_arch(std::string_view document) {
  const auto root = detail::parse_json(document, "architecture");
  detail::require_object(root, "architecture");
  detail::reject_unknown_fields(
      root, {"version", "name", "technology", "clock_mhz", "nodes", "edges", "primary_inputs", "final_outputs", "pipelined"},
      "architecture");
  detail::require_version(root, kArchVersion, "architecture");

  ArchDescription arch;
  arch.name = detail::get_string(root, "name", "architecture");
  if (root.contains("technology")) arch.technology = detail::get_string(root, "technology", "architecture");
  if (root.contains("clock_mhz")) arch.clock_mhz = detail::get_number(root, "clock_mhz", "architecture");

  const auto& nodes = detail::require_field(root, "nodes", "architecture");
  if (!nodes.is_array()) fail(ErrorCategory::Parse, "architecture: field 'nodes' must be an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) arch.nodes.push_back(parse_node(nodes[i], i));

  const auto& edges = detail::require_field(root, "edges", "architecture");
  if (!edges.is_array()) fail(ErrorCategory::Parse, "architecture: field 'edges' must be an array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto context = fmt::format("edges[{}]", i);
    detail::require_object(edges[i], context);
    detail::reject_unknown_fields(edges[i], {"start", "end"}, context);
    arch.edges.push_back({detail::get_string(edges[i], "start", context), detail::get_string(edges[i], "end", context)});
  }
  if (auto it = root.find("primary_inputs"); it != root.end()) {
    arch.primary_inputs = string_list(*it, "primary_inputs", "architecture");
  }
  if (auto it = root.find("final_outputs"); it != root.end()) {
    arch.final_outputs = string_list(*it, "final_outputs", "architecture");
  }
  if (auto it = root.find("pipelined"); it != root.end()) {
    if (!it->is_array()) fail(ErrorCategory::Parse, "architecture: field 'pipelined' must be an array");
    for (const auto& pair : *it) {
      auto names = string_list(pair, "pipelined", "architecture");
      if (names.size() != 2) fail(ErrorCategory::Parse, "architecture: 'pipelined' entries must be [producer, consumer]");
      arch.pipelined.emplace_back(names[0], names[1]);
    }
  }
  return arch;
}

std::string serialize_arch(const AccelGraph& graph) {
  ordered_json root;
  root["version"] = kArchVersion;
  root["name"] = graph.name;
  root["technology"] = graph.technology;
  if (graph.clock_mhz > 0.0) root["clock_mhz"] = graph.clock_mhz;
  auto nodes = ordered_json::array();
  for (const auto& node : graph.nodes) {
    ordered_json o;
    o["id"] = node.id;
    o["kind"] = std::string(to_string(node.kind));
    o["impl"] = node.impl;
    o["freq_mhz"] = node.freq_mhz;
    o["precision"] = node.precision;
    switch (node.kind) {
      case IpKind::Memory:
        o["volume_bits"] = node.memory().volume_bits;
        o["data_types"] = types_json(node.memory().data_types);
        o["off_chip"] = node.memory().off_chip;
        break;
      case IpKind::Computation: {
        o["unroll"] = node.compute().unroll;
        auto supports = ordered_json::array();
        for (auto k : node.compute().supports) supports.push_back(std::string(to_string(k)));
        o["supports"] = std::move(supports);
        break;
      }
      case IpKind::DataPath:
        o["port_width_bits"] = node.datapath().port_width_bits;
        o["data_types"] = types_json(node.datapath().data_types);
        break;
    }
    if (!node.states.empty()) {
      auto states = ordered_json::array();
      for (const auto& s : node.states) {
        ordered_json so;
        so["needs"] = s.needs;
        so["produces"] = s.produces;
        so["work"] = s.work;
        so["round"] = s.round;
        if (!s.layer.empty()) so["layer"] = s.layer;
        states.push_back(std::move(so));
      }
      o["states"] = std::move(states);
    }
    nodes.push_back(std::move(o));
  }
  root["nodes"] = std::move(nodes);
  auto edges = ordered_json::array();
  for (const auto& e : graph.edges) edges.push_back({{"start", e.start}, {"end", e.end}});
  root["edges"] = std::move(edges);
  root["primary_inputs"] = graph.primary_inputs;
  root["final_outputs"] = graph.final_outputs;
  auto pipelined = ordered_json::array();
  for (const auto& [p, c] : graph.pipelined) pipelined.push_back({p, c});
  root["pipelined"] = std::move(pipelined);
  return root.dump(2) + "\n";
}

std::string to_dot(const AccelGraph& graph) {
  auto quote = [](std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::ostringstream out;
  out << "digraph " << quote(graph.name.empty() ? "accel" : graph.name) << " {\n  rankdir=LR;\n";
  for (const auto& node : graph.nodes) {
    std::string shape = "box";
    std::string detail;
    switch (node.kind) {
      case IpKind::Memory:
        shape = "cylinder";
        detail = fmt::format("{} bits", node.memory().volume_bits);
        break;
      case IpKind::Computation:
        shape = "box";
        detail = fmt::format("U={}", node.compute().unroll);
        break;
      case IpKind::DataPath:
        shape = "cds";
        detail = fmt::format("{}b port", node.datapath().port_width_bits);
        break;
    }
    out << "  " << quote(node.id) << " [shape=" << shape << ", label="
        << quote(fmt::format("{}\\n{} {}\\n{} states", node.id, node.impl, detail, node.states.size())) << "];\n";
  }
  for (const auto& e : graph.edges) {
    const bool piped = graph.pipelined.contains({e.start, e.end});
    out << "  " << quote(e.start) << " -> " << quote(e.end) << (piped ? " [style=bold]" : "") << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace dnnchip
