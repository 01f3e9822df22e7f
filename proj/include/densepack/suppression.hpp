#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "densepack/coco.hpp"
#include "densepack/tiling.hpp"

namespace densepack {

enum class NmsMethod { hard_nms, soft_nms_linear, soft_nms_gaussian };

enum class ScoreSource { confidence, normalized_area };

// Normalization basis when scoring by box area.
enum class AreaBasis { image, max_box };

struct SuppressionConfig {
  NmsMethod method = NmsMethod::hard_nms;
  double iou_threshold = 0.5;
  double sigma = 0.5;           // Gaussian decay scale
  double score_floor = 1e-3;    // decayed scores below this are dropped
  ScoreSource scoring = ScoreSource::confidence;
  AreaBasis area_basis = AreaBasis::image;
  std::optional<std::size_t> max_output;

  bool valid() const {
    return iou_threshold >= 0.0 && iou_threshold <= 1.0 && sigma > 0.0 &&
           score_floor >= 0.0 && score_floor < 1.0;
  }
};

// Greedy suppression over one image and one category (the caller groups).
// hard_nms drops rivals with IoU > threshold; soft_nms_linear decays their
// scores by (1 - iou) when iou > threshold; soft_nms_gaussian decays every
// rival by exp(-iou^2 / sigma). The running maximum is re-selected after
// each decay. Box geometry is never altered. With scoring=normalized_area
// the effective score is box_area / basis and is also the output score;
// image_area is then required for AreaBasis::image.
std::vector<Detection> suppress(const std::vector<Detection>& dets,
                                const SuppressionConfig& cfg,
                                std::optional<double> image_area = std::nullopt);

// Tile-combine merging: detections still in tile coordinates (image_id found
// in the manifest) are back-projected first, then all detections are grouped
// per frame image and category and suppressed. frame_sizes is only needed for
// scoring=normalized_area with AreaBasis::image.
std::vector<Detection> merge_tiled(
    const std::vector<Detection>& dets,
    const std::vector<TileManifestEntry>& manifest,
    const SuppressionConfig& cfg,
    const std::unordered_map<std::int64_t, ImageSize>* frame_sizes = nullptr);

}  // namespace densepack
