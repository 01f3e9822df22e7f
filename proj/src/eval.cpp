#include "densepack/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "densepack/errors.hpp"
#include "densepack/parallel.hpp"

namespace densepack {

using nlohmann::json;

std::vector<double> default_iou_thresholds() {
  std::vector<double> thrs;
  for (int i = 0; i < 10; ++i) thrs.push_back(0.5 + 0.05 * i);
  return thrs;
}

bool EvalConfig::valid() const {
  if (iou_thresholds.empty() || recall_points < 2 || max_dets.empty())
    return false;
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) return false;
    if (i > 0 && t <= iou_thresholds[i - 1]) return false;
  }
  for (std::size_t i = 0; i < max_dets.size(); ++i) {
    if (max_dets[i] < 1) return false;
    if (i > 0 && max_dets[i] <= max_dets[i - 1]) return false;
  }
  return true;
}

namespace {

constexpr double kEps = 2.220446049250313e-16;

struct AreaRange {
  double lo, hi;
};
constexpr std::array<AreaRange, 4> kAreaRanges{
    {{0.0, 1e10}, {0.0, 1024.0}, {1024.0, 9216.0}, {9216.0, 1e10}}};
constexpr int kAreaAll = 0, kAreaSmall = 1, kAreaMedium = 2, kAreaLarge = 3;

struct GtItem {
  BBox box;
  double area;
  bool iscrowd;
};

struct DtItem {
  BBox box;
  double area;
  double score;
};

// Matching outcome for one (image, category) pair at maxDets = max.
struct CellEval {
  std::vector<double> dt_scores;  // descending, truncated
  // flat [t * D + d] per area range
  std::array<std::vector<char>, 4> dt_matched;
  std::array<std::vector<char>, 4> dt_ignored;
  std::array<std::vector<char>, 4> gt_ignored;  // size G
  bool used = false;
};

double iou_det_gt(const DtItem& dt, const GtItem& gt) {
  const double inter = intersection_area(dt.box, gt.box);
  // crowd ground truth acts as an ignore region: union is the detection alone
  const double uni =
      gt.iscrowd ? dt.area : dt.area + gt.area - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

void evaluate_cell(const std::vector<GtItem>& gts, std::vector<DtItem> dts,
                   const std::vector<double>& thresholds, int max_det,
                   CellEval& out) {
  if (gts.empty() && dts.empty()) return;
  out.used = true;

  std::stable_sort(dts.begin(), dts.end(),
                   [](const DtItem& a, const DtItem& b) { return a.score > b.score; });
  if (static_cast<int>(dts.size()) > max_det) dts.resize(max_det);

  const std::size_t g_n = gts.size();
  const std::size_t d_n = dts.size();
  const std::size_t t_n = thresholds.size();

  std::vector<double> ious(d_n * g_n);
  for (std::size_t d = 0; d < d_n; ++d)
    for (std::size_t g = 0; g < g_n; ++g)
      ious[d * g_n + g] = iou_det_gt(dts[d], gts[g]);

  out.dt_scores.reserve(d_n);
  for (const auto& dt : dts) out.dt_scores.push_back(dt.score);

  for (int a = 0; a < 4; ++a) {
    const AreaRange range = kAreaRanges[a];
    auto& gt_ig = out.gt_ignored[a];
    gt_ig.resize(g_n);
    for (std::size_t g = 0; g < g_n; ++g) {
      gt_ig[g] = gts[g].iscrowd || gts[g].area < range.lo ||
                 gts[g].area > range.hi;
    }

    // match against non-ignored ground truth first, ignored last
    std::vector<std::size_t> order;
    order.reserve(g_n);
    for (std::size_t g = 0; g < g_n; ++g)
      if (!gt_ig[g]) order.push_back(g);
    for (std::size_t g = 0; g < g_n; ++g)
      if (gt_ig[g]) order.push_back(g);

    auto& matched = out.dt_matched[a];
    auto& ignored = out.dt_ignored[a];
    matched.assign(t_n * d_n, 0);
    ignored.assign(t_n * d_n, 0);

    std::vector<char> gt_taken(g_n);
    for (std::size_t t = 0; t < t_n; ++t) {
      std::fill(gt_taken.begin(), gt_taken.end(), 0);
      for (std::size_t d = 0; d < d_n; ++d) {
        double best = std::min(thresholds[t], 1.0 - 1e-10);
        std::ptrdiff_t m = -1;
        for (const std::size_t g : order) {
          if (gt_taken[g] && !gts[g].iscrowd) continue;
          // a real match is already in hand; ignored candidates cannot improve
          if (m > -1 && !gt_ig[static_cast<std::size_t>(m)] && gt_ig[g]) break;
          if (ious[d * g_n + g] < best) continue;
          best = ious[d * g_n + g];
          m = static_cast<std::ptrdiff_t>(g);
        }
        if (m == -1) continue;
        gt_taken[static_cast<std::size_t>(m)] = 1;
        matched[t * d_n + d] = 1;
        ignored[t * d_n + d] = gt_ig[static_cast<std::size_t>(m)];
      }
      // unmatched detections outside the area range do not count as FP
      for (std::size_t d = 0; d < d_n; ++d) {
        if (!matched[t * d_n + d] &&
            (dts[d].area < range.lo || dts[d].area > range.hi)) {
          ignored[t * d_n + d] = 1;
        }
      }
    }
  }
}

std::vector<std::size_t> argsort_desc_stable(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&v](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

double mean_defined(const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const double v : values) {
    if (v != -1.0) {
      sum += v;
      ++n;
    }
  }
  return n == 0 ? -1.0 : sum / static_cast<double>(n);
}

std::string fmt3(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

EvalResult evaluate(const Dataset& gt, const std::vector<Detection>& dets,
                    const EvalConfig& cfg, unsigned threads) {
  if (!cfg.valid()) throw ValidationError("invalid evaluation config");

  std::vector<std::int64_t> image_ids;
  image_ids.reserve(gt.images.size());
  for (const auto& im : gt.images) image_ids.push_back(im.id);
  std::sort(image_ids.begin(), image_ids.end());
  image_ids.erase(std::unique(image_ids.begin(), image_ids.end()),
                  image_ids.end());

  std::vector<std::int64_t> cat_ids;
  cat_ids.reserve(gt.categories.size());
  for (const auto& c : gt.categories) cat_ids.push_back(c.id);
  std::sort(cat_ids.begin(), cat_ids.end());
  cat_ids.erase(std::unique(cat_ids.begin(), cat_ids.end()), cat_ids.end());

  std::unordered_map<std::int64_t, std::size_t> img_slot, cat_slot;
  for (std::size_t i = 0; i < image_ids.size(); ++i) img_slot[image_ids[i]] = i;
  for (std::size_t k = 0; k < cat_ids.size(); ++k) cat_slot[cat_ids[k]] = k;

  const std::size_t n_img = image_ids.size();
  const std::size_t n_cat = cat_ids.size();

  std::vector<std::vector<GtItem>> gt_cells(n_img * n_cat);
  std::vector<std::vector<DtItem>> dt_cells(n_img * n_cat);
  for (const auto& ann : gt.annotations) {
    const auto im = img_slot.find(ann.image_id);
    const auto ct = cat_slot.find(ann.category_id);
    if (im == img_slot.end() || ct == cat_slot.end()) {
      throw ValidationError("annotation " + std::to_string(ann.id) +
                            " references an unknown image or category");
    }
    gt_cells[im->second * n_cat + ct->second].push_back(
        {ann.box, ann.area, ann.iscrowd});
  }
  for (const auto& det : dets) {
    const auto im = img_slot.find(det.image_id);
    if (im == img_slot.end()) {
      throw ValidationError("detection references unknown image id " +
                            std::to_string(det.image_id));
    }
    const auto ct = cat_slot.find(det.category_id);
    if (ct == cat_slot.end()) {
      throw ValidationError("detection references unknown category id " +
                            std::to_string(det.category_id));
    }
    if (!std::isfinite(det.score)) {
      throw ValidationError("detection score is not finite");
    }
    dt_cells[im->second * n_cat + ct->second].push_back(
        {det.box, det.box.area(), det.score});
  }

  const int max_det_cap = cfg.max_dets.back();
  std::vector<CellEval> cells(n_img * n_cat);
  parallel_for(n_img, threads, [&](std::size_t i) {
    for (std::size_t k = 0; k < n_cat; ++k) {
      const std::size_t cell = i * n_cat + k;
      evaluate_cell(gt_cells[cell], std::move(dt_cells[cell]),
                    cfg.iou_thresholds, max_det_cap, cells[cell]);
    }
  });

  const std::size_t t_n = cfg.iou_thresholds.size();
  const std::size_t r_n = static_cast<std::size_t>(cfg.recall_points);
  const std::size_t m_n = cfg.max_dets.size();
  std::vector<double> recall_grid(r_n);
  for (std::size_t r = 0; r < r_n; ++r) {
    recall_grid[r] = static_cast<double>(r) / static_cast<double>(r_n - 1);
  }

  // precision[t][r][k][a][m], recall[t][k][a][m]; -1 marks undefined slices
  auto p_idx = [&](std::size_t t, std::size_t r, std::size_t k, std::size_t a,
                   std::size_t m) {
    return (((t * r_n + r) * n_cat + k) * 4 + a) * m_n + m;
  };
  auto r_idx = [&](std::size_t t, std::size_t k, std::size_t a, std::size_t m) {
    return ((t * n_cat + k) * 4 + a) * m_n + m;
  };
  std::vector<double> precision(t_n * r_n * n_cat * 4 * m_n, -1.0);
  std::vector<double> recall(t_n * n_cat * 4 * m_n, -1.0);

  for (std::size_t k = 0; k < n_cat; ++k) {
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t m = 0; m < m_n; ++m) {
        const std::size_t cap = static_cast<std::size_t>(cfg.max_dets[m]);

        std::vector<double> scores;
        std::vector<std::vector<char>> matched(t_n), ignored(t_n);
        std::int64_t npig = 0;
        for (std::size_t i = 0; i < n_img; ++i) {
          const CellEval& cell = cells[i * n_cat + k];
          if (!cell.used) continue;
          for (const char ig : cell.gt_ignored[a]) npig += ig ? 0 : 1;
          const std::size_t d_n = cell.dt_scores.size();
          const std::size_t take = std::min(cap, d_n);
          for (std::size_t d = 0; d < take; ++d) {
            scores.push_back(cell.dt_scores[d]);
          }
          for (std::size_t t = 0; t < t_n; ++t) {
            for (std::size_t d = 0; d < take; ++d) {
              matched[t].push_back(cell.dt_matched[a][t * d_n + d]);
              ignored[t].push_back(cell.dt_ignored[a][t * d_n + d]);
            }
          }
        }
        if (npig == 0) continue;

        const auto order = argsort_desc_stable(scores);
        const std::size_t nd = order.size();
        for (std::size_t t = 0; t < t_n; ++t) {
          std::vector<double> rc(nd), pr(nd);
          double tp = 0.0, fp = 0.0;
          for (std::size_t j = 0; j < nd; ++j) {
            const std::size_t src = order[j];
            if (matched[t][src] && !ignored[t][src]) tp += 1.0;
            if (!matched[t][src] && !ignored[t][src]) fp += 1.0;
            rc[j] = tp / static_cast<double>(npig);
            pr[j] = tp / (tp + fp + kEps);
          }
          recall[r_idx(t, k, a, m)] = nd > 0 ? rc.back() : 0.0;

          for (std::size_t j = nd; j-- > 1;) {
            if (pr[j] > pr[j - 1]) pr[j - 1] = pr[j];
          }
          for (std::size_t r = 0; r < r_n; ++r) {
            const auto it =
                std::lower_bound(rc.begin(), rc.end(), recall_grid[r]);
            const std::size_t pos = static_cast<std::size_t>(it - rc.begin());
            precision[p_idx(t, r, k, a, m)] = pos < nd ? pr[pos] : 0.0;
          }
        }
      }
    }
  }

  EvalResult result;
  result.max_dets = cfg.max_dets;
  const std::size_t m_last = m_n - 1;

  auto ap_over = [&](std::ptrdiff_t t_only, std::size_t a) {
    std::vector<double> s;
    for (std::size_t t = 0; t < t_n; ++t) {
      if (t_only >= 0 && t != static_cast<std::size_t>(t_only)) continue;
      for (std::size_t r = 0; r < r_n; ++r)
        for (std::size_t k = 0; k < n_cat; ++k)
          s.push_back(precision[p_idx(t, r, k, a, m_last)]);
    }
    return mean_defined(s);
  };
  auto ar_over = [&](std::size_t a, std::size_t m) {
    std::vector<double> s;
    for (std::size_t t = 0; t < t_n; ++t)
      for (std::size_t k = 0; k < n_cat; ++k)
        s.push_back(recall[r_idx(t, k, a, m)]);
    return mean_defined(s);
  };
  auto threshold_index = [&](double thr) -> std::ptrdiff_t {
    for (std::size_t t = 0; t < t_n; ++t) {
      if (std::abs(cfg.iou_thresholds[t] - thr) < 1e-9)
        return static_cast<std::ptrdiff_t>(t);
    }
    return -1;
  };
  auto clamp_defined = [&result](double v, const std::string& what) {
    if (v == -1.0) {
      result.warnings.push_back(what + " is undefined (no ground truth in slice); reported as 0");
      return 0.0;
    }
    return v;
  };

  result.map = clamp_defined(ap_over(-1, kAreaAll), "mAP");
  const std::ptrdiff_t t50 = threshold_index(0.5);
  const std::ptrdiff_t t75 = threshold_index(0.75);
  result.ap50 = t50 < 0 ? 0.0 : clamp_defined(ap_over(t50, kAreaAll), "AP@0.5");
  result.ap75 = t75 < 0 ? 0.0 : clamp_defined(ap_over(t75, kAreaAll), "AP@0.75");
  if (t50 < 0) result.warnings.push_back("0.5 not among IoU thresholds; AP@0.5 reported as 0");
  if (t75 < 0) result.warnings.push_back("0.75 not among IoU thresholds; AP@0.75 reported as 0");
  result.ap_small = clamp_defined(ap_over(-1, kAreaSmall), "AP(small)");
  result.ap_medium = clamp_defined(ap_over(-1, kAreaMedium), "AP(medium)");
  result.ap_large = clamp_defined(ap_over(-1, kAreaLarge), "AP(large)");
  for (std::size_t m = 0; m < m_n; ++m) {
    result.ar_at_max_dets.push_back(clamp_defined(
        ar_over(kAreaAll, m), "AR@" + std::to_string(cfg.max_dets[m])));
  }

  result.pr_iou_thresholds = cfg.iou_thresholds;
  result.pr_curves.assign(t_n, std::vector<double>(r_n, 0.0));
  for (std::size_t t = 0; t < t_n; ++t) {
    for (std::size_t r = 0; r < r_n; ++r) {
      std::vector<double> s;
      for (std::size_t k = 0; k < n_cat; ++k) {
        s.push_back(precision[p_idx(t, r, k, kAreaAll, m_last)]);
      }
      const double v = mean_defined(s);
      result.pr_curves[t][r] = v == -1.0 ? 0.0 : v;
    }
  }
  return result;
}

EvalResult evaluate_files(const std::filesystem::path& gt_path,
                          const std::filesystem::path& det_path,
                          const EvalConfig& cfg, unsigned threads) {
  const Dataset gt = load_dataset(gt_path);
  const std::vector<Detection> dets = load_detections(det_path, gt);
  return evaluate(gt, dets, cfg, threads);
}

std::string EvalResult::to_json() const {
  json root;
  root["mAP"] = map;
  root["AP50"] = ap50;
  root["AP75"] = ap75;
  root["AP_small"] = ap_small;
  root["AP_medium"] = ap_medium;
  root["AP_large"] = ap_large;
  root["max_dets"] = max_dets;
  root["AR_at_max_dets"] = ar_at_max_dets;
  root["pr_iou_thresholds"] = pr_iou_thresholds;
  root["pr_curves"] = pr_curves;
  root["warnings"] = warnings;
  return root.dump();
}

std::string EvalResult::to_table() const {
  std::ostringstream out;
  out << "mAP     AP@0.5  AP@0.75";
  for (const int m : max_dets) out << "  AR@" << m << std::string(m < 10 ? 4 : m < 100 ? 3 : 2, ' ');
  out << "\n";
  out << fmt3(map) << "  " << fmt3(ap50) << "  " << fmt3(ap75) << " ";
  for (const double ar : ar_at_max_dets) out << "  " << fmt3(ar) << " ";
  out << "\n\n";
  out << "AP by size: small " << fmt3(ap_small) << "  medium "
      << fmt3(ap_medium) << "  large " << fmt3(ap_large) << "\n";
  for (const auto& w : warnings) out << "note: " << w << "\n";
  return out.str();
}

}  // namespace densepack
