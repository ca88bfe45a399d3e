#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnnchip/accel_graph.hpp"

namespace dnnchip {

enum class TemplateKind { AdderTreeSpatial, HeteroDwConv, SystolicArray, RowStationaryNoC };

std::string_view to_string(TemplateKind kind);
std::optional<TemplateKind> parse_template_kind(std::string_view name);

using TemplateParams = std::map<std::string, std::int64_t>;

struct ParamRange {
  std::string name;
  std::int64_t min = 0;
  std::int64_t max = 0;
  std::int64_t fallback = 0;  // value used when the parameter is not given
};

// Every parameter a template accepts, common ones first.
const std::vector<ParamRange>& template_parameters(TemplateKind kind);

// Layer kinds the template can execute.
std::vector<LayerKind> template_layer_support(TemplateKind kind);

// Flattened templates dedicate an engine per layer type instead of folding
// every layer onto one engine.
bool template_is_flattened(TemplateKind kind);

// Throws Validation for unknown or out-of-range parameters.
ArchDescription instantiate_template(TemplateKind kind, const TemplateParams& params, std::string_view technology);

}  // namespace dnnchip
