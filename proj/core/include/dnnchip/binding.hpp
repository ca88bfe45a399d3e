#pragma once

#include <cstdint>
#include <string>

#include "dnnchip/accel_graph.hpp"
#include "dnnchip/dnn_ir.hpp"

namespace dnnchip {

// Tile of output channels x output rows processed per state. 0 = whole layer.
struct DataSchedule {
  std::int64_t tile_m = 0;
  std::int64_t tile_rows = 0;
  friend bool operator==(const DataSchedule&, const DataSchedule&) = default;
};

// Returns a copy of `graph` whose state machines execute `model` layer by
// layer (one round per layer, in topological order). Existing states are
// discarded. Throws Validation for unsupported layer kinds and tiles that
// overflow an on-chip memory on the route.
AccelGraph bind_mapping(const AccelGraph& graph, const DnnModel& model, const DataSchedule& schedule);

// Token naming used by the binder.
std::string tile_token(std::string_view layer, std::size_t tile, std::string_view node);
std::string input_token(std::string_view layer);

}  // namespace dnnchip
