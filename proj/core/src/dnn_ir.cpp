#include "dnnchip/dnn_ir.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <queue>
#include <set>
#include <utility>

#include "json_util.hpp"

namespace dnnchip {
namespace {

using detail::json;
using detail::ordered_json;

constexpr std::int64_t kModelVersion = 1;

constexpr std::array<std::pair<LayerKind, std::string_view>, 8> kKindNames{{
    {LayerKind::Conv, "Conv"},
    {LayerKind::DwConv, "DwConv"},
    {LayerKind::Pool, "Pool"},
    {LayerKind::ReLU, "ReLU"},
    {LayerKind::Reorg, "Reorg"},
    {LayerKind::FullyConnected, "FullyConnected"},
    {LayerKind::Add, "Add"},
    {LayerKind::Concat, "Concat"},
}};

bool is_windowed(LayerKind kind) {
  return kind == LayerKind::Conv || kind == LayerKind::DwConv || kind == LayerKind::Pool;
}

bool is_merge(LayerKind kind) { return kind == LayerKind::Add || kind == LayerKind::Concat; }

std::uint64_t u64(std::int64_t v) { return static_cast<std::uint64_t>(v); }

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t expected_spatial(std::int64_t in, std::int64_t kernel, std::int64_t stride,
                              const Padding& padding) {
  if (padding.same) return ceil_div(in, stride);
  return (in + 2 * padding.amount - kernel) / stride + 1;
}

TensorShape parse_shape(const json& value, std::string_view key, std::string_view context) {
  if (!value.is_array() || value.size() != 3) {
    fail(ErrorCategory::Parse,
         fmt::format("{}: field '{}' must be [channels, height, width]", context, key));
  }
  return {detail::as_int(value[0], key, context), detail::as_int(value[1], key, context),
          detail::as_int(value[2], key, context)};
}

LayerSpec parse_layer(const json& object, std::size_t index) {
  const auto context = fmt::format("layers[{}]", index);
  detail::require_object(object, context);
  detail::reject_unknown_fields(object, {"id", "kind", "in_shape", "out_shape", "kernel", "stride", "pad", "preds"},
                                context);
  LayerSpec layer;
  layer.id = detail::get_string(object, "id", context);
  const auto kind_name = detail::get_string(object, "kind", context);
  auto kind = parse_layer_kind(kind_name);
  if (!kind) fail(ErrorCategory::Parse, fmt::format("{}: field 'kind' has unknown value '{}'", context, kind_name));
  layer.kind = *kind;
  layer.input_shape = parse_shape(detail::require_field(object, "in_shape", context), "in_shape", context);
  layer.output_shape = parse_shape(detail::require_field(object, "out_shape", context), "out_shape", context);

  if (auto it = object.find("kernel"); it != object.end()) {
    if (!it->is_array() || it->size() != 2) {
      fail(ErrorCategory::Parse, fmt::format("{}: field 'kernel' must be [height, width]", context));
    }
    layer.kernel = KernelSize{detail::as_int((*it)[0], "kernel", context), detail::as_int((*it)[1], "kernel", context)};
  }
  if (auto it = object.find("stride"); it != object.end()) {
    layer.stride = detail::as_int(*it, "stride", context);
  }
  if (auto it = object.find("pad"); it != object.end()) {
    if (it->is_string() && it->get<std::string>() == "same") {
      layer.padding = Padding{};
    } else if (it->is_number_integer()) {
      layer.padding = Padding{false, it->get<std::int64_t>()};
    } else {
      fail(ErrorCategory::Parse, fmt::format("{}: field 'pad' must be \"same\" or an integer", context));
    }
  }
  const auto& preds = detail::require_field(object, "preds", context);
  if (!preds.is_array()) fail(ErrorCategory::Parse, fmt::format("{}: field 'preds' must be an array", context));
  for (const auto& p : preds) {
    if (!p.is_string()) fail(ErrorCategory::Parse, fmt::format("{}: field 'preds' must hold strings", context));
    layer.predecessors.push_back(p.get<std::string>());
  }
  return layer;
}

void check_layer_shape(const LayerSpec& layer, const DnnModel& model, std::vector<std::string>& out) {
  const auto& in = layer.input_shape;
  const auto& o = layer.output_shape;
  auto report = [&](const std::string& what) { out.push_back(fmt::format("layer '{}': {}", layer.id, what)); };

  for (const auto* shape : {&in, &o}) {
    if (shape->channels < 1 || shape->height < 1 || shape->width < 1) {
      report("tensor dimensions must be >= 1");
      return;
    }
  }
  if (layer.stride != 1 && layer.stride != 2) {
    report(fmt::format("unsupported stride {} (only 1 and 2 are modeled)", layer.stride));
    return;
  }
  if (layer.stride != 1 && !is_windowed(layer.kind) && layer.kind != LayerKind::Reorg) {
    report("stride is only meaningful for Conv, DwConv, Pool and Reorg");
  }
  if (is_windowed(layer.kind)) {
    if (!layer.kernel) {
      report("missing kernel");
      return;
    }
    if (layer.kernel->height < 1 || layer.kernel->width < 1) {
      report("kernel dimensions must be >= 1");
      return;
    }
    if (!layer.padding.same && layer.padding.amount < 0) report("negative padding");
    const auto eh = expected_spatial(in.height, layer.kernel->height, layer.stride, layer.padding);
    const auto ew = expected_spatial(in.width, layer.kernel->width, layer.stride, layer.padding);
    if (o.height != eh || o.width != ew) {
      report(fmt::format("shape mismatch: output spatial {}x{} inconsistent with input/kernel/stride (expected {}x{})",
                         o.height, o.width, eh, ew));
    }
    if (layer.kind != LayerKind::Conv && o.channels != in.channels) {
      report("shape mismatch: channel count must be preserved");
    }
  } else if (layer.kernel) {
    report("kernel given for a layer kind without a window");
  }

  switch (layer.kind) {
    case LayerKind::ReLU:
      if (o != in) report("shape mismatch: ReLU output must equal its input");
      break;
    case LayerKind::Reorg: {
      const auto s = layer.stride;
      if (in.height % s != 0 || in.width % s != 0) {
        report("Reorg input spatial dims must be divisible by the stride");
      } else if (o != TensorShape{in.channels * s * s, in.height / s, in.width / s}) {
        report("shape mismatch: Reorg output must be (C*s*s, H/s, W/s)");
      }
      break;
    }
    case LayerKind::FullyConnected:
      if (o.height != 1 || o.width != 1) report("shape mismatch: FullyConnected output must be (M, 1, 1)");
      break;
    case LayerKind::Add:
    case LayerKind::Concat:
      if (o != in) report("shape mismatch: merge layer output must equal its in_shape");
      break;
    default:
      break;
  }

  // Connection consistency.
  std::vector<const LayerSpec*> preds;
  for (const auto& p : layer.predecessors) {
    if (const auto* pl = model.find(p)) preds.push_back(pl);
  }
  if (preds.size() != layer.predecessors.size()) return;  // unknown predecessor reported elsewhere
  if (is_merge(layer.kind)) {
    if (preds.size() < 2) {
      report("merge layer needs at least two predecessors");
      return;
    }
    if (layer.kind == LayerKind::Add) {
      for (const auto* p : preds) {
        if (p->output_shape != in) report(fmt::format("shape mismatch with predecessor '{}'", p->id));
      }
    } else {
      std::int64_t channels = 0;
      for (const auto* p : preds) {
        channels += p->output_shape.channels;
        if (p->output_shape.height != in.height || p->output_shape.width != in.width) {
          report(fmt::format("shape mismatch with predecessor '{}'", p->id));
        }
      }
      if (channels != in.channels) report("shape mismatch: concatenated channels do not sum to in_shape");
    }
  } else {
    if (preds.size() > 1) {
      report("only Add and Concat layers may have more than one predecessor");
    } else if (preds.size() == 1 && preds.front()->output_shape != in) {
      report(fmt::format("shape mismatch with predecessor '{}'", preds.front()->id));
    }
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<LayerKind> parse_layer_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

bool LayerSpec::has_weights() const {
  return kind == LayerKind::Conv || kind == LayerKind::DwConv || kind == LayerKind::FullyConnected;
}

const LayerSpec* DnnModel::find(std::string_view id) const {
  for (const auto& layer : layers) {
    if (layer.id == id) return &layer;
  }
  return nullptr;
}

std::vector<std::string> validate_model(const DnnModel& model) {
  std::vector<std::string> out;
  const auto& p = model.precision;
  for (int bits : {p.weights, p.activations, p.accumulation}) {
    if (bits < 1 || bits > 64) {
      out.push_back(fmt::format("precision bits must lie in [1, 64], got {}", bits));
    }
  }

  std::set<std::string> seen;
  for (const auto& layer : model.layers) {
    if (layer.id.empty()) out.push_back("layer with empty id");
    if (!seen.insert(layer.id).second) out.push_back(fmt::format("duplicate layer id '{}'", layer.id));
  }
  for (const auto& layer : model.layers) {
    for (const auto& pred : layer.predecessors) {
      if (pred == layer.id) {
        out.push_back(fmt::format("layer '{}': cyclic layer graph (self loop)", layer.id));
      } else if (!seen.contains(pred)) {
        out.push_back(fmt::format("layer '{}': unknown predecessor '{}'", layer.id, pred));
      }
    }
  }
  if (!out.empty()) return out;

  try {
    (void)topological_layer_order(model);
  } catch (const Error& e) {
    out.emplace_back(e.what());
    return out;
  }
  for (const auto& layer : model.layers) check_layer_shape(layer, model, out);
  return out;
}

std::vector<std::size_t> topological_layer_order(const DnnModel& model) {
  std::map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < model.layers.size(); ++i) index.emplace(model.layers[i].id, i);

  std::vector<std::size_t> indegree(model.layers.size(), 0);
  std::vector<std::vector<std::size_t>> successors(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    for (const auto& pred : model.layers[i].predecessors) {
      auto it = index.find(pred);
      if (it == index.end()) {
        fail(ErrorCategory::Validation,
             fmt::format("layer '{}': unknown predecessor '{}'", model.layers[i].id, pred));
      }
      successors[it->second].push_back(i);
      ++indegree[i];
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < indegree.size(); ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(model.layers.size());
  while (!ready.empty()) {
    auto i = ready.top();
    ready.pop();
    order.push_back(i);
    for (auto s : successors[i]) {
      if (--indegree[s] == 0) ready.push(s);
    }
  }
  if (order.size() != model.layers.size()) {
    fail(ErrorCategory::Validation, "cyclic layer graph");
  }
  return order;
}

DnnModel parse_model(std::string_view document) {
  const auto root = detail::parse_json(document, "model");
  detail::require_object(root, "model");
  detail::reject_unknown_fields(root, {"version", "name", "precision", "layers"}, "model");
  detail::require_version(root, kModelVersion, "model");

  DnnModel model;
  model.name = detail::get_string(root, "name", "model");

  const auto& precision = detail::require_field(root, "precision", "model");
  detail::require_object(precision, "model.precision");
  detail::reject_unknown_fields(precision, {"w", "a", "acc"}, "model.precision");
  model.precision.weights = static_cast<int>(detail::get_int(precision, "w", "model.precision"));
  model.precision.activations = static_cast<int>(detail::get_int(precision, "a", "model.precision"));
  model.precision.accumulation = static_cast<int>(detail::get_int(precision, "acc", "model.precision"));

  const auto& layers = detail::require_field(root, "layers", "model");
  if (!layers.is_array()) fail(ErrorCategory::Parse, "model: field 'layers' must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) model.layers.push_back(parse_layer(layers[i], i));

  if (auto problems = validate_model(model); !problems.empty()) {
    std::string message = "model '" + model.name + "' is invalid:";
    for (const auto& p : problems) message += "\n  " + p;
    fail(ErrorCategory::Validation, message);
  }
  return model;
}

std::string serialize_model(const DnnModel& model) {
  ordered_json root;
  root["version"] = kModelVersion;
  root["name"] = model.name;
  root["precision"] = {{"w", model.precision.weights},
                       {"a", model.precision.activations},
                       {"acc", model.precision.accumulation}};
  auto layers = ordered_json::array();
  for (const auto& layer : model.layers) {
    ordered_json l;
    l["id"] = layer.id;
    l["kind"] = std::string(to_string(layer.kind));
    l["in_shape"] = {layer.input_shape.channels, layer.input_shape.height, layer.input_shape.width};
    l["out_shape"] = {layer.output_shape.channels, layer.output_shape.height, layer.output_shape.width};
    if (layer.kernel) l["kernel"] = {layer.kernel->height, layer.kernel->width};
    l["stride"] = layer.stride;
    if (layer.padding.same) {
      l["pad"] = "same";
    } else {
      l["pad"] = layer.padding.amount;
    }
    l["preds"] = layer.predecessors;
    layers.push_back(std::move(l));
  }
  root["layers"] = std::move(layers);
  return root.dump(2) + "\n";
}

Workload layer_workload(const LayerSpec& layer, const Precision& precision) {
  const auto& in = layer.input_shape;
  const auto& o = layer.output_shape;
  const auto kernel_taps = layer.kernel ? layer.kernel->height * layer.kernel->width : 1;
  const auto b_w = u64(precision.weights);
  const auto b_a = u64(precision.activations);

  Workload w;
  switch (layer.kind) {
    case LayerKind::Conv:
      w.mac_count = u64(o.channels * in.channels * kernel_taps * o.height * o.width);
      w.weight_volume = u64(o.channels * in.channels * kernel_taps) * b_w;
      break;
    case LayerKind::DwConv:
      w.mac_count = u64(in.channels * kernel_taps * o.height * o.width);
      w.weight_volume = u64(in.channels * kernel_taps) * b_w;
      break;
    case LayerKind::FullyConnected:
      w.mac_count = u64(o.channels * in.elements());
      w.weight_volume = u64(o.channels * in.elements()) * b_w;
      break;
    default:
      break;
  }
  const auto input_tensors = layer.kind == LayerKind::Add ? std::max<std::size_t>(1, layer.predecessors.size()) : 1;
  w.input_volume = u64(in.elements()) * b_a * input_tensors;
  w.output_volume = u64(o.elements()) * b_a;
  return w;
}

std::uint64_t total_macs(const DnnModel& model) {
  std::uint64_t total = 0;
  for (const auto& layer : model.layers) total += layer_workload(layer, model.precision).mac_count;
  return total;
}

TileWorkload tile_workload(const LayerSpec& layer, const Precision& precision, std::int64_t channels,
                           std::int64_t rows) {
  const auto& in = layer.input_shape;
  const auto& o = layer.output_shape;
  const auto kh = layer.kernel ? layer.kernel->height : 1;
  const auto kw = layer.kernel ? layer.kernel->width : 1;
  const auto b_w = u64(precision.weights);
  const auto b_a = u64(precision.activations);
  const auto b_acc = u64(precision.accumulation);
  // Input rows touched by `rows` output rows of a sliding window.
  const auto window_rows = std::min(in.height, (rows - 1) * layer.stride + kh);

  TileWorkload t;
  t.output_bits = u64(channels * rows * o.width) * b_a;
  t.psum_bits = u64(channels * rows * o.width) * b_acc;
  switch (layer.kind) {
    case LayerKind::Conv:
      t.mac_count = u64(channels * in.channels * kh * kw * rows * o.width);
      t.weight_bits = u64(channels * in.channels * kh * kw) * b_w;
      t.input_bits = u64(in.channels * window_rows * in.width) * b_a;
      break;
    case LayerKind::DwConv:
      t.mac_count = u64(channels * kh * kw * rows * o.width);
      t.weight_bits = u64(channels * kh * kw) * b_w;
      t.input_bits = u64(channels * window_rows * in.width) * b_a;
      break;
    case LayerKind::Pool:
      t.input_bits = u64(channels * window_rows * in.width) * b_a;
      break;
    case LayerKind::FullyConnected:
      t.mac_count = u64(channels * in.elements());
      t.weight_bits = u64(channels * in.elements()) * b_w;
      t.input_bits = u64(in.elements()) * b_a;
      break;
    case LayerKind::Add:
      t.input_bits = t.output_bits * std::max<std::size_t>(1, layer.predecessors.size());
      break;
    case LayerKind::ReLU:
    case LayerKind::Reorg:
    case LayerKind::Concat:
      t.input_bits = t.output_bits;
      break;
  }
  return t;
}

}  // namespace dnnchip
