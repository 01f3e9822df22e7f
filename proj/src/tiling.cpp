#include "densepack/tiling.hpp"

#include <cmath>
#include <unordered_map>

#include "json.hpp"

#include "densepack/errors.hpp"
#include "densepack/io_util.hpp"
#include "densepack/parallel.hpp"
#include "image_io.hpp"

namespace densepack {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ceil with a small slack so quotients that are integral up to floating
// error stay exact (2 - 0.2 is slightly below 1.8 in IEEE doubles, which
// would otherwise push 2448/1.8 just past 1360).
int ceil_px(double v) { return static_cast<int>(std::ceil(v - 1e-7)); }

struct Axis {
  int extent = 0;                // tile extent in px
  std::vector<int> origins;
};

Axis solve_axis(int image_extent, int n, double overlap, OverlapBasis basis) {
  Axis axis;
  if (basis == OverlapBasis::tile) {
    // n*t - (n-1)*overlap*t covers the image
    axis.extent = ceil_px(image_extent / (n - (n - 1) * overlap));
  } else {
    // overlap measured as a fraction of the image extent
    axis.extent = ceil_px(image_extent * (1.0 + (n - 1) * overlap) / n);
  }
  if (axis.extent > image_extent) {
    throw ValidationError("degenerate tiling: tile extent " +
                          std::to_string(axis.extent) + " exceeds image extent " +
                          std::to_string(image_extent));
  }
  axis.origins.reserve(n);
  const double span = image_extent - axis.extent;
  for (int i = 0; i < n; ++i) {
    axis.origins.push_back(
        n == 1 ? 0 : static_cast<int>(std::llround(i * span / (n - 1))));
  }
  return axis;
}

std::string tile_file_name(const std::string& frame_file, int row, int col) {
  const fs::path p(frame_file);
  const fs::path name = p.stem().string() + "_r" + std::to_string(row) + "c" +
                        std::to_string(col) + p.extension().string();
  return p.has_parent_path() ? (p.parent_path() / name).string() : name.string();
}

struct TileRef {
  const ImageRecord* frame;
  const TileSpec* tile;
  std::int64_t tile_image_id;
  std::string file_name;
};

// Deterministic tile enumeration shared by projection and cropping so both
// assign identical ids and file names: frames in dataset order, tiles
// row-major, ids sequential from 1.
std::vector<TileRef> enumerate_tiles(const Dataset& frames,
                                     const std::vector<TilePlan>& plans) {
  std::unordered_map<std::int64_t, const TilePlan*> by_image;
  for (const auto& plan : plans) by_image.emplace(plan.image_id, &plan);

  std::vector<TileRef> refs;
  std::int64_t next_id = 1;
  for (const auto& frame : frames.images) {
    const auto it = by_image.find(frame.id);
    if (it == by_image.end()) {
      throw ValidationError("no tile plan for image id " +
                            std::to_string(frame.id));
    }
    for (const auto& tile : it->second->tiles) {
      refs.push_back({&frame, &tile, next_id++,
                      tile_file_name(frame.file_name, tile.row, tile.col)});
    }
  }
  return refs;
}

TileManifestEntry manifest_entry(const TileRef& ref) {
  return {ref.tile_image_id, ref.file_name,     ref.frame->id,
          ref.tile->offset_x(), ref.tile->offset_y(), ref.tile->width(),
          ref.tile->height()};
}

}  // namespace

TilePlan plan_tiles(const ImageSize& size, int rows, int cols,
                    double overlap_fraction, OverlapBasis basis) {
  if (!size.valid()) throw ValidationError("invalid image size");
  if (rows < 1 || cols < 1) {
    throw ValidationError("tile grid must be at least 1x1");
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw ValidationError("overlap fraction must be in [0, 1)");
  }

  const Axis x = solve_axis(size.width, cols, overlap_fraction, basis);
  const Axis y = solve_axis(size.height, rows, overlap_fraction, basis);

  TilePlan plan;
  plan.rows = rows;
  plan.cols = cols;
  plan.overlap_fraction = overlap_fraction;
  plan.tiles.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      TileSpec tile;
      tile.tile_index = r * cols + c;
      tile.row = r;
      tile.col = c;
      tile.rect = {static_cast<double>(x.origins[c]),
                   static_cast<double>(y.origins[r]),
                   static_cast<double>(x.origins[c] + x.extent),
                   static_cast<double>(y.origins[r] + y.extent)};
      plan.tiles.push_back(tile);
    }
  }
  return plan;
}

std::vector<TilePlan> plan_tiles_for(const Dataset& d, int rows, int cols,
                                     double overlap_fraction,
                                     OverlapBasis basis) {
  std::vector<TilePlan> plans;
  plans.reserve(d.images.size());
  for (const auto& im : d.images) {
    TilePlan plan = plan_tiles(im.size, rows, cols, overlap_fraction, basis);
    plan.image_id = im.id;
    plans.push_back(std::move(plan));
  }
  return plans;
}

TiledDataset project_annotations(const Dataset& d,
                                 const std::vector<TilePlan>& plans,
                                 const ResidualPolicy& policy) {
  if (!(policy.min_residual_fraction > 0.0 &&
        policy.min_residual_fraction <= 1.0)) {
    throw ValidationError("min residual fraction must be in (0, 1]");
  }

  std::unordered_map<std::int64_t, std::vector<const Annotation*>> by_image;
  for (const auto& ann : d.annotations) by_image[ann.image_id].push_back(&ann);

  TiledDataset out;
  out.dataset.categories = d.categories;

  std::int64_t next_ann_id = 1;
  for (const auto& ref : enumerate_tiles(d, plans)) {
    out.dataset.images.push_back(
        {ref.tile_image_id, ref.file_name,
         {ref.tile->width(), ref.tile->height()}});
    out.manifest.push_back(manifest_entry(ref));

    const auto anns = by_image.find(ref.frame->id);
    if (anns == by_image.end()) continue;
    for (const Annotation* ann : anns->second) {
      const double original_area = ann->box.area();
      if (original_area <= 0.0) continue;
      const auto clipped = intersect(ann->box, ref.tile->rect);
      if (!clipped) continue;
      if (clipped->area() / original_area < policy.min_residual_fraction)
        continue;
      Annotation projected;
      projected.id = next_ann_id++;
      projected.image_id = ref.tile_image_id;
      projected.category_id = ann->category_id;
      projected.box =
          translate(*clipped, -ref.tile->offset_x(), -ref.tile->offset_y());
      projected.area = projected.box.area();
      projected.iscrowd = ann->iscrowd;
      out.dataset.annotations.push_back(projected);
    }
  }
  return out;
}

std::vector<TileManifestEntry> crop_tiles(const fs::path& image_root,
                                          const Dataset& frames,
                                          const std::vector<TilePlan>& plans,
                                          const fs::path& out_root,
                                          unsigned threads) {
  const std::vector<TileRef> refs = enumerate_tiles(frames, plans);

  // group jobs per frame so each source image is decoded once
  std::vector<std::pair<const ImageRecord*, std::vector<img::CropJob>>> work;
  std::unordered_map<std::int64_t, std::size_t> slot;
  for (const auto& ref : refs) {
    auto [it, inserted] = slot.emplace(ref.frame->id, work.size());
    if (inserted) work.push_back({ref.frame, {}});
    work[it->second].second.push_back(
        {static_cast<int>(ref.tile->rect.x_min),
         static_cast<int>(ref.tile->rect.y_min), ref.tile->width(),
         ref.tile->height(), out_root / ref.file_name});
  }

  parallel_for(work.size(), threads, [&](std::size_t i) {
    const auto& [frame, jobs] = work[i];
    img::write_crops(image_root / frame->file_name, frame->size, jobs);
  });

  std::vector<TileManifestEntry> manifest;
  manifest.reserve(refs.size());
  for (const auto& ref : refs) manifest.push_back(manifest_entry(ref));
  return manifest;
}

std::vector<Detection> backproject_detections(
    const std::vector<Detection>& dets,
    const std::vector<TileManifestEntry>& manifest) {
  std::unordered_map<std::int64_t, const TileManifestEntry*> tiles;
  tiles.reserve(manifest.size());
  for (const auto& entry : manifest) tiles.emplace(entry.tile_image_id, &entry);

  std::vector<Detection> out;
  out.reserve(dets.size());
  for (const auto& det : dets) {
    const auto it = tiles.find(det.image_id);
    if (it == tiles.end()) {
      throw ValidationError("detection references unknown tile image id " +
                            std::to_string(det.image_id));
    }
    Detection moved = det;
    moved.box = translate(det.box, it->second->offset_x, it->second->offset_y);
    moved.image_id = it->second->frame_image_id;
    out.push_back(moved);
  }
  return out;
}

void save_manifest(const std::vector<TileManifestEntry>& manifest,
                   const fs::path& path) {
  json root = json::array();
  for (const auto& e : manifest) {
    root.push_back({{"tile_image_id", e.tile_image_id},
                    {"tile_file", e.tile_file},
                    {"frame_image_id", e.frame_image_id},
                    {"offset_x", e.offset_x},
                    {"offset_y", e.offset_y},
                    {"tile_w", e.tile_w},
                    {"tile_h", e.tile_h}});
  }
  atomic_write_text(path, root.dump());
}

std::vector<TileManifestEntry> load_manifest(const fs::path& path) {
  const std::string text = read_text_file(path);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("parse error in " + path.string() + ": " + e.what());
  }
  if (!root.is_array()) {
    throw ValidationError("schema error: " + path.string() +
                          " must be a JSON array of tile entries");
  }
  std::vector<TileManifestEntry> manifest;
  manifest.reserve(root.size());
  for (const auto& r : root) {
    const std::string ctx = "tile entry #" + std::to_string(manifest.size());
    auto get_int = [&](const char* f) -> std::int64_t {
      if (!r.contains(f) || !r[f].is_number()) {
        throw ValidationError("schema error: missing numeric '" +
                              std::string(f) + "' in " + ctx);
      }
      return r[f].get<std::int64_t>();
    };
    auto get_num = [&](const char* f) -> double {
      if (!r.contains(f) || !r[f].is_number()) {
        throw ValidationError("schema error: missing numeric '" +
                              std::string(f) + "' in " + ctx);
      }
      return r[f].get<double>();
    };
    if (!r.contains("tile_file") || !r["tile_file"].is_string()) {
      throw ValidationError("schema error: missing 'tile_file' in " + ctx);
    }
    manifest.push_back({get_int("tile_image_id"),
                        r["tile_file"].get<std::string>(),
                        get_int("frame_image_id"), get_num("offset_x"),
                        get_num("offset_y"), static_cast<int>(get_int("tile_w")),
                        static_cast<int>(get_int("tile_h"))});
  }
  return manifest;
}

}  // namespace densepack
