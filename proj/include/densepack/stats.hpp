#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "densepack/box.hpp"
#include "densepack/coco.hpp"

namespace densepack {

enum class BoxMetric { aspect_ratio, area, width, height };

struct HistogramSpec {
  BoxMetric metric = BoxMetric::area;
  int bins = 50;
  double q_low = 0.01;
  double q_high = 0.99;

  bool valid() const {
    return bins >= 1 && q_low >= 0.0 && q_low < q_high && q_high <= 1.0;
  }
};

struct Histogram {
  std::vector<double> edges;        // bins + 1 monotone edges
  std::vector<std::int64_t> counts;
  double clip_low = 0.0;
  double clip_high = 0.0;
  std::int64_t total = 0;    // values considered
  std::int64_t clipped = 0;  // values outside the quantile clip, excluded
};

// Linear-interpolation quantile between order statistics (the common
// "type 7" estimator). `values` need not be sorted.
double quantile_type7(std::vector<double> values, double p);

// Quantile-clipped equal-width histogram of a box metric over the dataset's
// ground truth. Out-of-clip values are excluded entirely, not winsorized.
Histogram histogram(const Dataset& d, const HistogramSpec& spec);

struct SizeBucketReport {
  std::int64_t small_count = 0;   // area < 32^2
  std::int64_t medium_count = 0;  // 32^2 <= area < 96^2
  std::int64_t large_count = 0;   // area >= 96^2
  double small_pct = 0.0;
  double medium_pct = 0.0;
  double large_pct = 0.0;
  std::optional<ResizeSpec> resize;
  std::optional<double> fixed_scale;
};

// COCO size-bucket distribution. With a resize spec, each annotation's area
// is multiplied by s^2 where s is that image's keep-ratio scale; with
// fixed_scale, one global s is used instead.
SizeBucketReport size_buckets(
    const Dataset& d, const std::optional<ResizeSpec>& resize = std::nullopt,
    const std::optional<double>& fixed_scale = std::nullopt);

// Exact (width, height) -> count map, sorted by count descending (ties by
// ascending width then height).
std::vector<std::pair<ImageSize, std::int64_t>> image_size_census(
    const Dataset& d);

}  // namespace densepack
