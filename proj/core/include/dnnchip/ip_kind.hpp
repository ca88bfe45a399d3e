#pragma once

#include <optional>
#include <string_view>

namespace dnnchip {

enum class IpKind { Memory, Computation, DataPath };

std::string_view to_string(IpKind kind);
std::optional<IpKind> parse_ip_kind(std::string_view name);

}  // namespace dnnchip
