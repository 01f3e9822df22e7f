#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "densepack/box.hpp"
#include "densepack/coco.hpp"

namespace densepack {

// Dense anchor grid scheme: one pyramid level per stride, anchor base size
// per level = stride * scale. For aspect ratio r the anchor keeps the base
// area: h = base * sqrt(r), w = base / sqrt(r).
struct AnchorScheme {
  std::vector<int> strides{4, 8, 16, 32, 64};
  double scale = 8.0;
  std::vector<double> aspect_ratios{0.5, 1.0, 2.0};

  bool valid() const;
};

// [(stride * scale)^2 for each stride]
std::vector<double> anchor_areas(const AnchorScheme& s);

// Lazy per-level anchor stream: anchors are centered on a stride-spaced grid
// (cell centers at (i + 0.5) * stride) and computed on demand, never
// materialized. Iteration order is row-major cells with ratios innermost.
class AnchorLevel {
 public:
  AnchorLevel(int stride, double base_size, std::vector<double> ratios,
              const ImageSize& image);

  int stride() const { return stride_; }
  double base_size() const { return base_size_; }
  int grid_width() const { return grid_w_; }
  int grid_height() const { return grid_h_; }
  std::int64_t count() const {
    return static_cast<std::int64_t>(grid_w_) * grid_h_ *
           static_cast<std::int64_t>(ratios_.size());
  }

  BBox anchor(std::int64_t index) const;
  BBox anchor_at(int cell_x, int cell_y, std::size_t ratio_index) const;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (int y = 0; y < grid_h_; ++y)
      for (int x = 0; x < grid_w_; ++x)
        for (std::size_t r = 0; r < ratios_.size(); ++r)
          fn(anchor_at(x, y, r));
  }

  // Exact max IoU of `box` against every anchor of this level. Only anchors
  // whose rects can overlap the box are visited; all others have IoU 0.
  double max_iou(const BBox& box) const;

 private:
  int stride_;
  double base_size_;
  std::vector<double> ratios_;
  int grid_w_;
  int grid_h_;
  std::vector<double> half_w_;  // per ratio
  std::vector<double> half_h_;
};

std::vector<AnchorLevel> anchor_levels(const ImageSize& image,
                                       const AnchorScheme& s);

struct CoverageReport {
  std::int64_t gt_count = 0;
  std::vector<double> max_ious;          // per GT, dataset annotation order
  double fraction_at_050 = 0.0;          // share of GT with max IoU >= 0.5
  double fraction_at_070 = 0.0;
  std::vector<std::int64_t> anchors_per_level;   // summed over images
  std::vector<std::int64_t> best_level_histogram;
  bool vacuous = false;  // no ground truth; fractions are meaningless
};

// Matches every GT box against the scheme's anchor grid (exact max IoU, not
// sampled). When resize is given, boxes and grids live in the keep-ratio
// resized space of each image.
CoverageReport coverage(const Dataset& d, const AnchorScheme& s,
                        const std::optional<ResizeSpec>& resize = std::nullopt,
                        unsigned threads = 1);

}  // namespace densepack
