#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "densepack/box.hpp"
#include "densepack/coco.hpp"

namespace densepack {

struct TileSpec {
  int tile_index = 0;  // row-major within the plan
  int row = 0;
  int col = 0;
  BBox rect;  // integer-aligned, in frame coordinates

  double offset_x() const { return rect.x_min; }
  double offset_y() const { return rect.y_min; }
  int width() const { return static_cast<int>(rect.width()); }
  int height() const { return static_cast<int>(rect.height()); }
};

struct TilePlan {
  std::int64_t image_id = 0;
  int rows = 0;
  int cols = 0;
  double overlap_fraction = 0.0;
  std::vector<TileSpec> tiles;
};

// Whether overlap_fraction measures a fraction of the tile extent or of the
// full image extent.
enum class OverlapBasis { tile, image };

// Deterministic overlap tiling: tile extents solved so the grid exactly
// covers the frame, origins evenly spaced with the last tile flush with the
// far edge.
TilePlan plan_tiles(const ImageSize& size, int rows, int cols,
                    double overlap_fraction,
                    OverlapBasis basis = OverlapBasis::tile);

// One plan per dataset image, in dataset order.
std::vector<TilePlan> plan_tiles_for(const Dataset& d, int rows, int cols,
                                     double overlap_fraction,
                                     OverlapBasis basis = OverlapBasis::tile);

struct ResidualPolicy {
  // A clipped ground-truth box survives in a tile iff
  // clipped_area / original_area >= min_residual_fraction.
  double min_residual_fraction = 0.20;
};

struct TileManifestEntry {
  std::int64_t tile_image_id = 0;
  std::string tile_file;
  std::int64_t frame_image_id = 0;
  double offset_x = 0.0;
  double offset_y = 0.0;
  int tile_w = 0;
  int tile_h = 0;
};

void save_manifest(const std::vector<TileManifestEntry>& manifest,
                   const std::filesystem::path& path);
std::vector<TileManifestEntry> load_manifest(const std::filesystem::path& path);

struct TiledDataset {
  Dataset dataset;  // images are tiles, named {stem}_r{row}c{col}{ext}
  std::vector<TileManifestEntry> manifest;
};

// Projects ground truth onto tiles: boxes are intersected with each tile
// rect, translated to tile-local coordinates, and kept iff the clipped area
// is at least policy.min_residual_fraction of the box's original full-frame
// area. Annotation and tile-image ids are freshly assigned.
TiledDataset project_annotations(const Dataset& d,
                                 const std::vector<TilePlan>& plans,
                                 const ResidualPolicy& policy = {});

// Pixel-exact crops, one image file per tile, written under out_root. The
// returned manifest is identical to the one project_annotations builds for
// the same frames and plans.
std::vector<TileManifestEntry> crop_tiles(
    const std::filesystem::path& image_root, const Dataset& frames,
    const std::vector<TilePlan>& plans, const std::filesystem::path& out_root,
    unsigned threads = 1);

// Translates tile-coordinate detections back to frame coordinates and
// rewrites image ids to the frame id. Scores are untouched and no
// deduplication happens here.
std::vector<Detection> backproject_detections(
    const std::vector<Detection>& dets,
    const std::vector<TileManifestEntry>& manifest);

}  // namespace densepack
