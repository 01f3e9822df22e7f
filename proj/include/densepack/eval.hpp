#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "densepack/coco.hpp"

namespace densepack {

std::vector<double> default_iou_thresholds();  // 0.50, 0.55, ..., 0.95

// COCO-protocol evaluation parameters. Area ranges are the COCO constants:
// all [0, 1e10], small [0, 32^2], medium [32^2, 96^2], large [96^2, 1e10].
struct EvalConfig {
  std::vector<double> iou_thresholds = default_iou_thresholds();
  int recall_points = 101;  // recall grid 0, 0.01, ..., 1
  std::vector<int> max_dets{1, 10, 300};

  bool valid() const;
};

struct EvalResult {
  double map = 0.0;   // AP averaged over IoU thresholds
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ap_small = 0.0;
  double ap_medium = 0.0;
  double ap_large = 0.0;
  std::vector<int> max_dets;
  std::vector<double> ar_at_max_dets;  // parallel to max_dets

  // Interpolated precision over the recall grid, area=all, maxDets=last,
  // averaged over categories; one curve per IoU threshold.
  std::vector<double> pr_iou_thresholds;
  std::vector<std::vector<double>> pr_curves;

  // Slices with no ground truth are reported as 0 with a note here.
  std::vector<std::string> warnings;

  std::string to_json() const;
  std::string to_table() const;
};

// Greedy score-descending matching per image/category/threshold with crowd
// ground truth as ignore regions, 101-point interpolated precision, AR@k
// from per-image detection caps. Detections must reference images and
// categories of `gt`.
EvalResult evaluate(const Dataset& gt, const std::vector<Detection>& dets,
                    const EvalConfig& cfg = {}, unsigned threads = 1);

EvalResult evaluate_files(const std::filesystem::path& gt_path,
                          const std::filesystem::path& det_path,
                          const EvalConfig& cfg = {}, unsigned threads = 1);

}  // namespace densepack
