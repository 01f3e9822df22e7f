#include "densepack/anchors.hpp"

#include <algorithm>
#include <cmath>

#include "densepack/errors.hpp"
#include "densepack/parallel.hpp"

namespace densepack {

bool AnchorScheme::valid() const {
  if (strides.empty() || aspect_ratios.empty() || !(scale > 0.0)) return false;
  for (std::size_t i = 0; i < strides.size(); ++i) {
    if (strides[i] < 1) return false;
    if (i > 0 && strides[i] <= strides[i - 1]) return false;
  }
  return std::all_of(aspect_ratios.begin(), aspect_ratios.end(),
                     [](double r) { return r > 0.0 && std::isfinite(r); });
}

std::vector<double> anchor_areas(const AnchorScheme& s) {
  if (!s.valid()) throw ValidationError("invalid anchor scheme");
  std::vector<double> areas;
  areas.reserve(s.strides.size());
  for (const int stride : s.strides) {
    const double base = stride * s.scale;
    areas.push_back(base * base);
  }
  return areas;
}

AnchorLevel::AnchorLevel(int stride, double base_size,
                         std::vector<double> ratios, const ImageSize& image)
    : stride_(stride),
      base_size_(base_size),
      ratios_(std::move(ratios)),
      grid_w_((image.width + stride - 1) / stride),
      grid_h_((image.height + stride - 1) / stride) {
  half_w_.reserve(ratios_.size());
  half_h_.reserve(ratios_.size());
  for (const double r : ratios_) {
    const double root = std::sqrt(r);
    half_w_.push_back(base_size_ / root / 2.0);  // h/w = r, area = base^2
    half_h_.push_back(base_size_ * root / 2.0);
  }
}

BBox AnchorLevel::anchor_at(int cell_x, int cell_y,
                            std::size_t ratio_index) const {
  const double cx = (cell_x + 0.5) * stride_;
  const double cy = (cell_y + 0.5) * stride_;
  return {cx - half_w_[ratio_index], cy - half_h_[ratio_index],
          cx + half_w_[ratio_index], cy + half_h_[ratio_index]};
}

BBox AnchorLevel::anchor(std::int64_t index) const {
  const auto ratios = static_cast<std::int64_t>(ratios_.size());
  const std::size_t ri = static_cast<std::size_t>(index % ratios);
  const std::int64_t cell = index / ratios;
  const int x = static_cast<int>(cell % grid_w_);
  const int y = static_cast<int>(cell / grid_w_);
  return anchor_at(x, y, ri);
}

double AnchorLevel::max_iou(const BBox& box) const {
  double best = 0.0;
  for (std::size_t ri = 0; ri < ratios_.size(); ++ri) {
    // only cells whose anchor rect can touch the box; everything else is 0
    const double lo_x = (box.x_min - half_w_[ri]) / stride_ - 0.5;
    const double hi_x = (box.x_max + half_w_[ri]) / stride_ - 0.5;
    const double lo_y = (box.y_min - half_h_[ri]) / stride_ - 0.5;
    const double hi_y = (box.y_max + half_h_[ri]) / stride_ - 0.5;
    const int x0 = std::max(0, static_cast<int>(std::floor(lo_x)) - 1);
    const int x1 = std::min(grid_w_ - 1, static_cast<int>(std::ceil(hi_x)) + 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(lo_y)) - 1);
    const int y1 = std::min(grid_h_ - 1, static_cast<int>(std::ceil(hi_y)) + 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        best = std::max(best, iou(anchor_at(x, y, ri), box));
      }
    }
  }
  return best;
}

std::vector<AnchorLevel> anchor_levels(const ImageSize& image,
                                       const AnchorScheme& s) {
  if (!image.valid()) throw ValidationError("invalid image size");
  if (!s.valid()) throw ValidationError("invalid anchor scheme");
  std::vector<AnchorLevel> levels;
  levels.reserve(s.strides.size());
  for (const int stride : s.strides) {
    levels.emplace_back(stride, stride * s.scale, s.aspect_ratios, image);
  }
  return levels;
}

CoverageReport coverage(const Dataset& d, const AnchorScheme& s,
                        const std::optional<ResizeSpec>& resize,
                        unsigned threads) {
  if (!s.valid()) throw ValidationError("invalid anchor scheme");
  if (resize && !resize->valid()) throw ValidationError("invalid resize spec");

  struct PerAnnotation {
    double max_iou = 0.0;
    int best_level = 0;
  };

  std::unordered_map<std::int64_t, std::vector<std::size_t>> anns_by_image;
  for (std::size_t i = 0; i < d.annotations.size(); ++i) {
    anns_by_image[d.annotations[i].image_id].push_back(i);
  }

  std::vector<PerAnnotation> per_ann(d.annotations.size());
  std::vector<std::vector<std::int64_t>> level_counts(
      d.images.size(), std::vector<std::int64_t>(s.strides.size(), 0));

  parallel_for(d.images.size(), threads, [&](std::size_t img_i) {
    const ImageRecord& im = d.images[img_i];
    double factor = 1.0;
    ImageSize effective = im.size;
    if (resize) {
      factor = keep_ratio_scale(im.size, *resize);
      effective = scaled_size(im.size, factor);
      effective.width = std::max(1, effective.width);
      effective.height = std::max(1, effective.height);
    }
    const auto levels = anchor_levels(effective, s);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      level_counts[img_i][l] = levels[l].count();
    }
    const auto anns = anns_by_image.find(im.id);
    if (anns == anns_by_image.end()) return;
    for (const std::size_t ann_i : anns->second) {
      const BBox box = scale(d.annotations[ann_i].box, factor);
      PerAnnotation result;
      for (std::size_t l = 0; l < levels.size(); ++l) {
        const double v = levels[l].max_iou(box);
        if (v > result.max_iou) {
          result.max_iou = v;
          result.best_level = static_cast<int>(l);
        }
      }
      per_ann[ann_i] = result;
    }
  });

  CoverageReport report;
  report.gt_count = static_cast<std::int64_t>(d.annotations.size());
  report.anchors_per_level.assign(s.strides.size(), 0);
  report.best_level_histogram.assign(s.strides.size(), 0);
  for (const auto& counts : level_counts) {
    for (std::size_t l = 0; l < counts.size(); ++l) {
      report.anchors_per_level[l] += counts[l];
    }
  }
  report.max_ious.reserve(per_ann.size());
  std::int64_t hits_050 = 0, hits_070 = 0;
  for (const auto& r : per_ann) {
    report.max_ious.push_back(r.max_iou);
    report.best_level_histogram[static_cast<std::size_t>(r.best_level)] += 1;
    if (r.max_iou >= 0.5) ++hits_050;
    if (r.max_iou >= 0.7) ++hits_070;
  }
  if (report.gt_count == 0) {
    report.vacuous = true;
    report.best_level_histogram.assign(s.strides.size(), 0);
  } else {
    report.fraction_at_050 = static_cast<double>(hits_050) / report.gt_count;
    report.fraction_at_070 = static_cast<double>(hits_070) / report.gt_count;
  }
  return report;
}

}  // namespace densepack
