#include "dnnchip/templates.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "dnnchip/error.hpp"

namespace dnnchip {
namespace {

constexpr std::int64_t kMaxUnroll = 1 << 16;

std::vector<ParamRange> with_common(std::vector<ParamRange> specific) {
  std::vector<ParamRange> all{
      {"freq_mhz", 1, 5000, 200},     {"precision", 1, 64, 16},     {"port_width", 1, 4096, 64},
      {"buffer_kbits", 1, 1 << 20, 512}, {"in_buf_pct", 5, 95, 50}, {"dram_mbits", 1, 1 << 20, 4096},
  };
  all.insert(all.end(), specific.begin(), specific.end());
  return all;
}

const std::vector<LayerKind> kAllKinds{LayerKind::Conv,           LayerKind::DwConv, LayerKind::Pool,
                                       LayerKind::ReLU,           LayerKind::Reorg,  LayerKind::FullyConnected,
                                       LayerKind::Add,            LayerKind::Concat};

std::vector<LayerKind> all_but_dw() {
  std::vector<LayerKind> out;
  for (auto k : kAllKinds) {
    if (k != LayerKind::DwConv) out.push_back(k);
  }
  return out;
}

class Builder {
 public:
  Builder(TemplateKind kind, const TemplateParams& params, std::string_view technology) {
    arch_.name = std::string(to_string(kind));
    arch_.technology = std::string(technology);
    const auto& ranges = template_parameters(kind);
    for (const auto& [name, value] : params) {
      auto it = std::find_if(ranges.begin(), ranges.end(), [&](const ParamRange& r) { return r.name == name; });
      if (it == ranges.end()) {
        fail(ErrorCategory::Validation, fmt::format("{}: unknown parameter '{}'", to_string(kind), name));
      }
      if (value < it->min || value > it->max) {
        fail(ErrorCategory::Validation, fmt::format("{}: out-of-range parameter {} = {} (allowed [{}, {}])",
                                                    to_string(kind), name, value, it->min, it->max));
      }
    }
    for (const auto& r : ranges) {
      auto it = params.find(r.name);
      values_[r.name] = it == params.end() ? r.fallback : it->second;
    }
  }

  std::int64_t operator[](const std::string& name) const { return values_.at(name); }

  std::uint64_t buffer_bits() const { return static_cast<std::uint64_t>((*this)["buffer_kbits"]) * 1024; }
  std::uint64_t input_share_bits() const {
    return buffer_bits() * static_cast<std::uint64_t>((*this)["in_buf_pct"]) / 100;
  }

  void memory(std::string id, std::string impl, std::uint64_t bits, std::vector<DataType> types, bool off_chip = false) {
    IpNode node = base(std::move(id), IpKind::Memory, std::move(impl));
    node.attrs = MemoryAttrs{bits, std::move(types), off_chip};
    arch_.nodes.push_back(std::move(node));
  }

  void datapath(std::string id, std::string impl, std::vector<DataType> types) {
    IpNode node = base(std::move(id), IpKind::DataPath, std::move(impl));
    node.attrs = DataPathAttrs{(*this)["port_width"], std::move(types)};
    arch_.nodes.push_back(std::move(node));
  }

  void compute(std::string id, std::string impl, std::int64_t unroll, std::vector<LayerKind> supports) {
    IpNode node = base(std::move(id), IpKind::Computation, std::move(impl));
    node.attrs = ComputeAttrs{unroll, std::move(supports)};
    arch_.nodes.push_back(std::move(node));
  }

  void dram() {
    memory("dram", "dram", static_cast<std::uint64_t>((*this)["dram_mbits"]) << 20, {}, true);
  }

  void edge(std::string a, std::string b) { arch_.edges.push_back({std::move(a), std::move(b)}); }

  void chain(std::initializer_list<std::string> ids) {
    const std::string* prev = nullptr;
    for (const auto& id : ids) {
      if (prev != nullptr) edge(*prev, id);
      prev = &id;
    }
  }

  ArchDescription take() { return std::move(arch_); }

 private:
  IpNode base(std::string id, IpKind kind, std::string impl) const {
    IpNode node;
    node.id = std::move(id);
    node.kind = kind;
    node.impl = std::move(impl);
    node.freq_mhz = static_cast<double>((*this)["freq_mhz"]);
    node.precision = static_cast<int>((*this)["precision"]);
    return node;
  }

  ArchDescription arch_;
  std::map<std::string, std::int64_t> values_;
};

const std::vector<DataType> kInWeights{DataType::Inputs, DataType::Weights};
const std::vector<DataType> kPsums{DataType::PartialSums};

ArchDescription adder_tree(Builder& b) {
  b.dram();
  b.datapath("ld_bus", "axi_bus", kInWeights);
  b.memory("in_buf", "sram", b.input_share_bits(), kInWeights);
  b.datapath("ld_path", "local_path", kInWeights);
  b.compute("engine", "adder_tree", b["unroll"], {});
  b.datapath("st_path", "local_path", kPsums);
  b.memory("out_buf", "sram", b.buffer_bits() - b.input_share_bits(), kPsums);
  b.datapath("st_bus", "axi_bus", kPsums);
  b.chain({"dram", "ld_bus", "in_buf", "ld_path", "engine", "st_path", "out_buf", "st_bus", "dram"});
  return b.take();
}

ArchDescription hetero(Builder& b) {
  b.dram();
  b.datapath("ld_bus", "axi_bus", kInWeights);
  b.memory("in_buf", "sram", b.input_share_bits(), kInWeights);
  b.datapath("dw_path", "local_path", kInWeights);
  b.compute("dw_engine", "dw_engine", b["dw_unroll"], {LayerKind::DwConv});
  b.datapath("mid_path", "local_path", {DataType::Inputs});
  b.datapath("conv_path", "local_path", kInWeights);
  b.compute("conv_engine", "adder_tree", b["conv_unroll"], all_but_dw());
  b.datapath("st_path", "local_path", kPsums);
  b.memory("out_buf", "sram", b.buffer_bits() - b.input_share_bits(), kPsums);
  b.datapath("st_bus", "axi_bus", kPsums);
  b.chain({"dram", "ld_bus", "in_buf", "dw_path", "dw_engine", "mid_path", "conv_engine", "st_path", "out_buf",
           "st_bus", "dram"});
  b.chain({"in_buf", "conv_path", "conv_engine"});
  return b.take();
}

std::string pe(std::int64_t i, std::int64_t j) { return fmt::format("pe_{}_{}", i, j); }

ArchDescription systolic(Builder& b) {
  const auto n = b["dim"];
  const auto half = b.input_share_bits() / 2;
  b.dram();
  b.datapath("ld_bus", "axi_bus", kInWeights);
  b.memory("in_buf", "sram", half, {DataType::Inputs});
  b.memory("w_buf", "sram", b.input_share_bits() - half, {DataType::Weights});
  for (std::int64_t i = 0; i < n; ++i) b.datapath(fmt::format("row_feed_{}", i), "local_path", {DataType::Inputs});
  for (std::int64_t j = 0; j < n; ++j) b.datapath(fmt::format("col_feed_{}", j), "local_path", {DataType::Weights});
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) b.compute(pe(i, j), "pe_mac", b["pe_unroll"], all_but_dw());
  }
  for (std::int64_t j = 0; j < n; ++j) b.datapath(fmt::format("drain_{}", j), "local_path", kPsums);
  b.memory("out_buf", "sram", b.buffer_bits() - b.input_share_bits(), kPsums);
  b.datapath("st_bus", "axi_bus", kPsums);

  b.chain({"dram", "ld_bus", "in_buf"});
  b.edge("ld_bus", "w_buf");
  for (std::int64_t i = 0; i < n; ++i) b.chain({"in_buf", fmt::format("row_feed_{}", i), pe(i, 0)});
  for (std::int64_t j = 0; j < n; ++j) b.chain({"w_buf", fmt::format("col_feed_{}", j), pe(0, j)});
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      if (j + 1 < n) b.edge(pe(i, j), pe(i, j + 1));
      if (i + 1 < n) b.edge(pe(i, j), pe(i + 1, j));
    }
  }
  for (std::int64_t j = 0; j < n; ++j) b.chain({pe(n - 1, j), fmt::format("drain_{}", j), "out_buf"});
  b.chain({"out_buf", "st_bus", "dram"});
  return b.take();
}

ArchDescription row_stationary(Builder& b) {
  const auto n = b["dim"];
  b.dram();
  b.datapath("ld_bus", "axi_bus", kInWeights);
  b.memory("glb", "sram", b.buffer_bits(), {});
  for (std::int64_t i = 0; i < n; ++i) b.datapath(fmt::format("mcast_{}", i), "local_path", kInWeights);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) b.compute(pe(i, j), "pe_mac", b["pe_unroll"], kAllKinds);
  }
  // Horizontal links run left to right, vertical links bottom to top.
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j + 1 < n; ++j) b.datapath(fmt::format("h_{}_{}", i, j), "noc_link", {DataType::Inputs});
  }
  for (std::int64_t i = 1; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) b.datapath(fmt::format("v_{}_{}", i, j), "noc_link", kPsums);
  }
  for (std::int64_t j = 0; j < n; ++j) b.datapath(fmt::format("gather_{}", j), "local_path", kPsums);
  b.datapath("st_bus", "axi_bus", kPsums);

  b.chain({"dram", "ld_bus", "glb"});
  for (std::int64_t i = 0; i < n; ++i) {
    b.edge("glb", fmt::format("mcast_{}", i));
    for (std::int64_t j = 0; j < n; ++j) b.edge(fmt::format("mcast_{}", i), pe(i, j));
  }
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j + 1 < n; ++j) b.chain({pe(i, j), fmt::format("h_{}_{}", i, j), pe(i, j + 1)});
  }
  for (std::int64_t i = 1; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) b.chain({pe(i, j), fmt::format("v_{}_{}", i, j), pe(i - 1, j)});
  }
  for (std::int64_t j = 0; j < n; ++j) b.chain({pe(0, j), fmt::format("gather_{}", j), "glb"});
  b.chain({"glb", "st_bus", "dram"});
  return b.take();
}

}  // namespace

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::AdderTreeSpatial: return "AdderTreeSpatial";
    case TemplateKind::HeteroDwConv: return "HeteroDwConv";
    case TemplateKind::SystolicArray: return "SystolicArray";
    case TemplateKind::RowStationaryNoC: return "RowStationaryNoC";
  }
  return "?";
}

std::optional<TemplateKind> parse_template_kind(std::string_view name) {
  for (auto k : {TemplateKind::AdderTreeSpatial, TemplateKind::HeteroDwConv, TemplateKind::SystolicArray,
                 TemplateKind::RowStationaryNoC}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

const std::vector<ParamRange>& template_parameters(TemplateKind kind) {
  static const auto adder = with_common({{"unroll", 1, kMaxUnroll, 64}});
  static const auto hetero = with_common({{"dw_unroll", 1, kMaxUnroll, 16}, {"conv_unroll", 1, kMaxUnroll, 64}});
  static const auto systolic = with_common({{"dim", 1, 16, 4}, {"pe_unroll", 1, 1024, 1}});
  static const auto noc = with_common({{"dim", 1, 16, 4}, {"pe_unroll", 1, 1024, 1}});
  switch (kind) {
    case TemplateKind::AdderTreeSpatial: return adder;
    case TemplateKind::HeteroDwConv: return hetero;
    case TemplateKind::SystolicArray: return systolic;
    case TemplateKind::RowStationaryNoC: return noc;
  }
  return adder;
}

std::vector<LayerKind> template_layer_support(TemplateKind kind) {
  return kind == TemplateKind::SystolicArray ? all_but_dw() : kAllKinds;
}

bool template_is_flattened(TemplateKind kind) { return kind == TemplateKind::HeteroDwConv; }

ArchDescription instantiate_template(TemplateKind kind, const TemplateParams& params, std::string_view technology) {
  Builder b(kind, params, technology);
  switch (kind) {
    case TemplateKind::AdderTreeSpatial: return adder_tree(b);
    case TemplateKind::HeteroDwConv: return hetero(b);
    case TemplateKind::SystolicArray: return systolic(b);
    case TemplateKind::RowStationaryNoC: return row_stationary(b);
  }
  return b.take();
}

}  // namespace dnnchip
