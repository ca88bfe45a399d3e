#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dnnchip {

enum class LayerKind { Conv, DwConv, Pool, ReLU, Reorg, FullyConnected, Add, Concat };

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view name);

struct TensorShape {
  std::int64_t channels = 1;
  std::int64_t height = 1;
  std::int64_t width = 1;

  std::int64_t elements() const { return channels * height * width; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

struct KernelSize {
  std::int64_t height = 1;
  std::int64_t width = 1;
  friend bool operator==(const KernelSize&, const KernelSize&) = default;
};

// "same" keeps ceil(in / stride) outputs; otherwise `amount` zeros per border.
struct Padding {
  bool same = true;
  std::int64_t amount = 0;
  friend bool operator==(const Padding&, const Padding&) = default;
};

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::Conv;
  TensorShape input_shape;
  TensorShape output_shape;
  std::optional<KernelSize> kernel;  // Conv, DwConv and Pool only
  std::int64_t stride = 1;           // 1 or 2
  Padding padding;
  std::vector<std::string> predecessors;

  bool has_weights() const;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Bit widths of weights, activations and accumulators (B_W, B_A, B_Acc).
struct Precision {
  int weights = 8;
  int activations = 8;
  int accumulation = 32;
  friend bool operator==(const Precision&, const Precision&) = default;
};

struct DnnModel {
  std::string name;
  std::vector<LayerSpec> layers;  // document order
  Precision precision;

  const LayerSpec* find(std::string_view id) const;
  friend bool operator==(const DnnModel&, const DnnModel&) = default;
};

struct Workload {
  std::uint64_t mac_count = 0;
  std::uint64_t input_volume = 0;   // bits
  std::uint64_t weight_volume = 0;  // bits
  std::uint64_t output_volume = 0;  // bits
  friend bool operator==(const Workload&, const Workload&) = default;
};

// Work of one tile: a block of output channels x output rows of a layer.
struct TileWorkload {
  std::uint64_t mac_count = 0;
  std::uint64_t input_bits = 0;
  std::uint64_t weight_bits = 0;
  std::uint64_t output_bits = 0;
  std::uint64_t psum_bits = 0;  // outputs at accumulator precision
};

// Parses the versioned model-interchange document. Schema violations raise
// ErrorCategory::Parse; structural problems (unknown predecessor, cycles,
// shape mismatches) raise ErrorCategory::Validation.
DnnModel parse_model(std::string_view document);
std::string serialize_model(const DnnModel& model);

// Empty when the model satisfies every structural invariant.
std::vector<std::string> validate_model(const DnnModel& model);

// Layer indices in a stable topological order (document order among ready
// layers). Throws on cycles or unknown predecessors.
std::vector<std::size_t> topological_layer_order(const DnnModel& model);

Workload layer_workload(const LayerSpec& layer, const Precision& precision);
std::uint64_t total_macs(const DnnModel& model);

// Work of a block of `channels` output channels by `rows` output rows.
TileWorkload tile_workload(const LayerSpec& layer, const Precision& precision,
                           std::int64_t channels, std::int64_t rows);

}  // namespace dnnchip
