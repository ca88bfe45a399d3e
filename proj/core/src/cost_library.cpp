#include "dnnchip/cost_library.hpp"

#include <cmath>
#include <utility>

#include "json_util.hpp"

namespace dnnchip {
namespace {

using detail::json;
using detail::ordered_json;

constexpr std::int64_t kLibraryVersion = 1;

struct ParamField {
  std::string_view name;
  double IpCostParams::*member;
};

constexpr ParamField kFields[] = {
    {"e_warmup", &IpCostParams::e_warmup}, {"l_warmup", &IpCostParams::l_warmup},
    {"e_control", &IpCostParams::e_control}, {"l_control", &IpCostParams::l_control},
    {"e_mac", &IpCostParams::e_mac},       {"l_mac", &IpCostParams::l_mac},
    {"e_bit", &IpCostParams::e_bit},       {"l_bit", &IpCostParams::l_bit},
};

bool allowed_for(IpKind kind, std::string_view field) {
  if (kind == IpKind::Computation) return field != "l_control" && field != "e_bit" && field != "l_bit";
  return field != "e_mac" && field != "l_mac";
}

bool required_for(IpKind kind, std::string_view field) {
  if (kind == IpKind::Computation) return field == "e_mac" || field == "l_mac";
  return field == "e_bit" || field == "l_bit";
}

CostEntry parse_entry(const json& object, std::size_t index, const std::string& default_tech) {
  const auto context = fmt::format("entries[{}]", index);
  detail::require_object(object, context);
  CostEntry entry;
  entry.impl = detail::get_string(object, "impl", context);
  const auto kind_name = detail::get_string(object, "kind", context);
  auto kind = parse_ip_kind(kind_name);
  if (!kind) fail(ErrorCategory::Parse, fmt::format("{}: field 'kind' has unknown value '{}'", context, kind_name));
  entry.kind = *kind;
  entry.technology = default_tech;

  for (const auto& [key, value] : object.items()) {
    if (key == "impl" || key == "kind") continue;
    if (key == "technology") {
      if (!value.is_string()) fail(ErrorCategory::Parse, fmt::format("{}: field 'technology' must be a string", context));
      entry.technology = value.get<std::string>();
      continue;
    }
    const ParamField* field = nullptr;
    for (const auto& f : kFields) {
      if (f.name == key) field = &f;
    }
    if (field == nullptr || !allowed_for(entry.kind, key)) {
      fail(ErrorCategory::Parse, fmt::format("{} ('{}'): unknown field '{}'", context, entry.impl, key));
    }
    entry.params.*(field->member) = detail::as_number(value, key, context);
  }
  for (const auto& f : kFields) {
    if (required_for(entry.kind, f.name) && !object.contains(std::string(f.name))) {
      fail(ErrorCategory::Parse, fmt::format("{} ('{}'): missing field '{}'", context, entry.impl, f.name));
    }
  }
  return entry;
}

}  // namespace

std::string_view to_string(IpKind kind) {
  switch (kind) {
    case IpKind::Memory: return "memory";
    case IpKind::Computation: return "computation";
    case IpKind::DataPath: return "datapath";
  }
  return "?";
}

std::optional<IpKind> parse_ip_kind(std::string_view name) {
  if (name == "memory") return IpKind::Memory;
  if (name == "computation") return IpKind::Computation;
  if (name == "datapath") return IpKind::DataPath;
  return std::nullopt;
}

UnitCostLibrary::UnitCostLibrary(std::string technology, std::string provenance, std::vector<CostEntry> entries,
                                 std::uint64_t mul_per_decode, HostOverhead host)
    : technology_(std::move(technology)),
      provenance_(std::move(provenance)),
      entries_(std::move(entries)),
      mul_per_decode_(mul_per_decode),
      host_(host) {
  auto check = [](double v, std::string_view what, std::string_view impl) {
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorCategory::Validation, fmt::format("cost entry '{}': negative cost in '{}'", impl, what));
    }
  };
  check(host_.energy_j, "host.energy_j", "host");
  check(host_.latency_s, "host.latency_s", "host");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.impl.empty()) fail(ErrorCategory::Validation, "cost entry with empty impl key");
    for (const auto& f : kFields) check(e.params.*(f.member), f.name, e.impl);
    for (std::size_t j = 0; j < i; ++j) {
      if (entries_[j].impl == e.impl && entries_[j].technology == e.technology) {
        fail(ErrorCategory::Validation,
             fmt::format("duplicate cost entry '{}' for technology '{}'", e.impl, e.technology));
      }
    }
  }
}

const CostEntry* UnitCostLibrary::find(std::string_view impl, std::string_view technology) const {
  for (const auto& e : entries_) {
    if (e.impl == impl && e.technology == technology) return &e;
  }
  return nullptr;
}

const CostEntry& UnitCostLibrary::lookup(std::string_view impl, std::string_view technology) const {
  if (const auto* e = find(impl, technology)) return *e;
  fail(ErrorCategory::Validation, fmt::format("unknown implementation '{}' for technology '{}'", impl, technology));
}

UnitCostLibrary load_library(std::string_view document) {
  const auto root = detail::parse_json(document, "cost library");
  detail::require_object(root, "cost library");
  detail::reject_unknown_fields(root, {"version", "technology", "provenance", "mul_per_decode", "host", "entries"},
                                "cost library");
  detail::require_version(root, kLibraryVersion, "cost library");
  auto technology = detail::get_string(root, "technology", "cost library");
  auto provenance = detail::get_string(root, "provenance", "cost library");

  std::uint64_t mul_per_decode = 0;
  if (root.contains("mul_per_decode")) {
    auto v = detail::get_int(root, "mul_per_decode", "cost library");
    if (v < 0) fail(ErrorCategory::Validation, "cost library: negative cost in 'mul_per_decode'");
    mul_per_decode = static_cast<std::uint64_t>(v);
  }
  HostOverhead host;
  if (auto it = root.find("host"); it != root.end()) {
    detail::require_object(*it, "cost library.host");
    detail::reject_unknown_fields(*it, {"energy_j", "latency_s"}, "cost library.host");
    if (it->contains("energy_j")) host.energy_j = detail::get_number(*it, "energy_j", "cost library.host");
    if (it->contains("latency_s")) host.latency_s = detail::get_number(*it, "latency_s", "cost library.host");
  }

  const auto& entries = detail::require_field(root, "entries", "cost library");
  if (!entries.is_array()) fail(ErrorCategory::Parse, "cost library: field 'entries' must be an array");
  std::vector<CostEntry> parsed;
  for (std::size_t i = 0; i < entries.size(); ++i) parsed.push_back(parse_entry(entries[i], i, technology));
  return UnitCostLibrary(std::move(technology), std::move(provenance), std::move(parsed), mul_per_decode, host);
}

std::string serialize_library(const UnitCostLibrary& library) {
  ordered_json root;
  root["version"] = kLibraryVersion;
  root["technology"] = library.technology();
  root["provenance"] = library.provenance();
  root["mul_per_decode"] = library.mul_per_decode();
  root["host"] = {{"energy_j", library.host().energy_j}, {"latency_s", library.host().latency_s}};
  auto entries = ordered_json::array();
  for (const auto& e : library.entries()) {
    ordered_json o;
    o["impl"] = e.impl;
    o["kind"] = std::string(to_string(e.kind));
    if (e.technology != library.technology()) o["technology"] = e.technology;
    for (const auto& f : kFields) {
      if (allowed_for(e.kind, f.name)) o[std::string(f.name)] = e.params.*(f.member);
    }
    entries.push_back(std::move(o));
  }
  root["entries"] = std::move(entries);
  return root.dump(2) + "\n";
}

}  // namespace dnnchip
