#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

namespace densepack {

// Axis-aligned box in corner form, continuous pixel coordinates,
// x/y increasing right/down. Zero-area boxes are permitted; negative
// extents are not (see valid()).
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  bool valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) &&
           std::isfinite(x_max) && std::isfinite(y_max) &&
           x_max >= x_min && y_max >= y_min;
  }

  static BBox from_xywh(double x, double y, double w, double h) {
    return {x, y, x + w, y + h};
  }

  bool operator==(const BBox&) const = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;

  bool valid() const { return width >= 1 && height >= 1; }
  double area() const { return static_cast<double>(width) * height; }

  bool operator==(const ImageSize&) const = default;
};

// Target of a keep-ratio max-scale resize: neither output side may exceed
// the matching spec side.
struct ResizeSpec {
  int long_side = 0;
  int short_side = 0;

  bool valid() const { return short_side >= 1 && long_side >= short_side; }
};

inline double intersection_area(const BBox& a, const BBox& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

// Overlap rectangle; shared edges count as no overlap.
inline std::optional<BBox> intersect(const BBox& a, const BBox& b) {
  const BBox r{std::max(a.x_min, b.x_min), std::max(a.y_min, b.y_min),
               std::min(a.x_max, b.x_max), std::min(a.y_max, b.y_max)};
  if (r.x_max <= r.x_min || r.y_max <= r.y_min) return std::nullopt;
  return r;
}

inline double iou(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline BBox translate(const BBox& b, double dx, double dy) {
  return {b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy};
}

inline BBox scale(const BBox& b, double s) {
  return {b.x_min * s, b.y_min * s, b.x_max * s, b.y_max * s};
}

inline BBox clamp_to_image(const BBox& b, const ImageSize& size) {
  const double w = size.width, h = size.height;
  return {std::clamp(b.x_min, 0.0, w), std::clamp(b.y_min, 0.0, h),
          std::clamp(b.x_max, 0.0, w), std::clamp(b.y_max, 0.0, h)};
}

inline bool inside_image(const BBox& b, const ImageSize& size) {
  return b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_max <= size.width &&
         b.y_max <= size.height;
}

// s = min(long/max_side, short/min_side). May exceed 1 for images smaller
// than the spec; callers that want a pure downscale clamp it themselves.
inline double keep_ratio_scale(const ImageSize& src, const ResizeSpec& spec) {
  const double long_ratio =
      static_cast<double>(spec.long_side) / std::max(src.width, src.height);
  const double short_ratio =
      static_cast<double>(spec.short_side) / std::min(src.width, src.height);
  return std::min(long_ratio, short_ratio);
}

// The one place pixel rounding happens: half away from zero.
inline int round_px(double v) { return static_cast<int>(std::lround(v)); }

inline ImageSize scaled_size(const ImageSize& src, double s) {
  return {round_px(src.width * s), round_px(src.height * s)};
}

}  // namespace densepack
