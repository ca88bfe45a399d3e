#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dnnchip {

// Both throw Io on failure.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace dnnchip
