#pragma once

// Internal pixel I/O helpers (OpenCV-backed); not part of the public API.

#include <filesystem>
#include <vector>

#include "densepack/box.hpp"

namespace densepack::img {

// Missing, zero-byte or undecodable files are "broken".
bool broken(const std::filesystem::path& path);

struct CropJob {
  int x = 0, y = 0, w = 0, h = 0;
  std::filesystem::path dst;
};

// Decodes src once, checks it against the expected size, and writes one
// pixel-exact crop per job (format chosen by the destination extension).
void write_crops(const std::filesystem::path& src, const ImageSize& expected,
                 const std::vector<CropJob>& jobs);

}  // namespace densepack::img
