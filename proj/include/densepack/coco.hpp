#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "densepack/box.hpp"

namespace densepack {

struct Category {
  std::int64_t id = 0;
  std::string name;
};

struct ImageRecord {
  std::int64_t id = 0;
  std::string file_name;
  ImageSize size;
};

struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  BBox box;
  double area = 0.0;
  bool iscrowd = false;
};

struct Detection {
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  BBox box;
  double score = 0.0;
};

// COCO-shaped dataset. Boxes are kept in corner form internally; the
// on-disk [x, y, w, h] convention is converted exactly once at load/save.
struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;
};

std::unordered_map<std::int64_t, const ImageRecord*> image_index(const Dataset& d);
std::unordered_map<std::int64_t, const Category*> category_index(const Dataset& d);

enum class BoundsPolicy { clamp, strict };

struct LoadOptions {
  BoundsPolicy bounds = BoundsPolicy::clamp;
  // Raw mode keeps duplicate ids, dangling references and out-of-bounds
  // boxes so the validator can report them. Schema checks still apply.
  bool raw = false;
};

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& opts = {});
void save_dataset(const Dataset& d, const std::filesystem::path& path);

// Detection results file: JSON array of {image_id, category_id,
// bbox:[x,y,w,h], score}. Scores must be finite and in [0,1]; image ids must
// resolve against `reference`.
std::vector<Detection> load_detections(const std::filesystem::path& path,
                                       const Dataset& reference);
void save_detections(const std::vector<Detection>& dets,
                     const std::filesystem::path& path);

struct Finding {
  std::string kind;
  std::string message;
  std::int64_t image_id = -1;
  std::int64_t annotation_id = -1;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool empty() const { return findings.empty(); }
  std::size_t count(const std::string& kind) const;
  std::string to_text() const;
  std::string to_json() const;
};

// Reports duplicate ids, dangling references, out-of-bounds boxes, zero-area
// boxes, and (when image_root is given) missing, zero-byte or undecodable
// image files. Problems are report entries, never exceptions.
ValidationReport validate_dataset(
    const Dataset& d,
    const std::optional<std::filesystem::path>& image_root = std::nullopt,
    unsigned threads = 1);

// Cleaned copy: broken images (with their annotations) and zero-area boxes
// dropped, out-of-bounds boxes clamped, duplicate ids and dangling references
// resolved keeping first occurrences. Validating the result again yields an
// empty report, so the operation is idempotent.
Dataset apply_exclusions(const Dataset& d, const ValidationReport& report);

}  // namespace densepack
