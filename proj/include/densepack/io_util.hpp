#pragma once

#include <filesystem>
#include <string>

namespace densepack {

std::string read_text_file(const std::filesystem::path& path);

// Write-to-temp then atomic rename; the target never holds partial output.
void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace densepack
