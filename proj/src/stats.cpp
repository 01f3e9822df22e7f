#include "densepack/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "densepack/errors.hpp"

namespace densepack {

namespace {

double metric_value(const Annotation& ann, BoxMetric metric) {
  switch (metric) {
    case BoxMetric::aspect_ratio:
      return ann.box.width() / ann.box.height();
    case BoxMetric::area:
      return ann.box.area();
    case BoxMetric::width:
      return ann.box.width();
    case BoxMetric::height:
      return ann.box.height();
  }
  return 0.0;
}

constexpr double kSmallMax = 32.0 * 32.0;
constexpr double kMediumMax = 96.0 * 96.0;

}  // namespace

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile p outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Histogram histogram(const Dataset& d, const HistogramSpec& spec) {
  if (!spec.valid()) throw ValidationError("invalid histogram spec");

  std::vector<double> values;
  values.reserve(d.annotations.size());
  for (const auto& ann : d.annotations) {
    const double v = metric_value(ann, spec.metric);
    if (std::isfinite(v)) values.push_back(v);
  }
  if (values.empty()) {
    throw ValidationError("dataset has no annotations for the requested metric");
  }

  Histogram h;
  h.total = static_cast<std::int64_t>(values.size());
  h.clip_low = quantile_type7(values, spec.q_low);
  h.clip_high = quantile_type7(values, spec.q_high);

  std::vector<double> clipped;
  clipped.reserve(values.size());
  for (const double v : values) {
    if (v >= h.clip_low && v <= h.clip_high) clipped.push_back(v);
  }
  h.clipped = h.total - static_cast<std::int64_t>(clipped.size());

  const int bins = h.clip_high > h.clip_low ? spec.bins : 1;
  h.edges.resize(bins + 1);
  const double span = h.clip_high - h.clip_low;
  for (int i = 0; i <= bins; ++i) {
    h.edges[i] = h.clip_low + span * i / bins;
  }
  h.counts.assign(bins, 0);
  for (const double v : clipped) {
    int idx = span > 0.0
                  ? static_cast<int>((v - h.clip_low) / span * bins)
                  : 0;
    idx = std::clamp(idx, 0, bins - 1);  // top edge lands in the last bin
    ++h.counts[idx];
  }
  return h;
}

SizeBucketReport size_buckets(const Dataset& d,
                              const std::optional<ResizeSpec>& resize,
                              const std::optional<double>& fixed_scale) {
  if (resize && !resize->valid()) throw ValidationError("invalid resize spec");
  if (fixed_scale && !(*fixed_scale > 0.0)) {
    throw ValidationError("fixed scale must be positive");
  }

  SizeBucketReport report;
  report.resize = resize;
  report.fixed_scale = fixed_scale;

  std::unordered_map<std::int64_t, double> factor_by_image;
  if (resize && !fixed_scale) {
    for (const auto& im : d.images) {
      factor_by_image.emplace(im.id, keep_ratio_scale(im.size, *resize));
    }
  }

  for (const auto& ann : d.annotations) {
    double s = 1.0;
    if (fixed_scale) {
      s = *fixed_scale;
    } else if (resize) {
      const auto it = factor_by_image.find(ann.image_id);
      if (it == factor_by_image.end()) {
        throw ValidationError("annotation " + std::to_string(ann.id) +
                              " references missing image id " +
                              std::to_string(ann.image_id));
      }
      s = it->second;
    }
    const double area = ann.area * s * s;
    if (area < kSmallMax) {
      ++report.small_count;
    } else if (area < kMediumMax) {
      ++report.medium_count;
    } else {
      ++report.large_count;
    }
  }

  const double total = static_cast<double>(report.small_count +
                                           report.medium_count +
                                           report.large_count);
  if (total > 0) {
    report.small_pct = 100.0 * report.small_count / total;
    report.medium_pct = 100.0 * report.medium_count / total;
    report.large_pct = 100.0 * report.large_count / total;
  }
  return report;
}

std::vector<std::pair<ImageSize, std::int64_t>> image_size_census(
    const Dataset& d) {
  std::map<std::pair<int, int>, std::int64_t> counts;
  for (const auto& im : d.images) {
    ++counts[{im.size.width, im.size.height}];
  }
  std::vector<std::pair<ImageSize, std::int64_t>> census;
  census.reserve(counts.size());
  for (const auto& [size, n] : counts) {
    census.push_back({{size.first, size.second}, n});
  }
  std::stable_sort(census.begin(), census.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return census;
}

}  // namespace densepack
