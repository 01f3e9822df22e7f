#include "densepack/suppression.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "densepack/errors.hpp"

namespace densepack {

namespace {

struct Candidate {
  std::size_t input_index;
  double score;  // effective score, decayed in place
  double area;
  bool alive = true;
};

// Deterministic selection: (score, area, x_min, y_min, input index),
// lexicographic, larger tuple wins.
bool beats(const Candidate& a, const Candidate& b,
           const std::vector<Detection>& dets) {
  if (a.score != b.score) return a.score > b.score;
  if (a.area != b.area) return a.area > b.area;
  const BBox& ba = dets[a.input_index].box;
  const BBox& bb = dets[b.input_index].box;
  if (ba.x_min != bb.x_min) return ba.x_min > bb.x_min;
  if (ba.y_min != bb.y_min) return ba.y_min > bb.y_min;
  return a.input_index > b.input_index;
}

}  // namespace

std::vector<Detection> suppress(const std::vector<Detection>& dets,
                                const SuppressionConfig& cfg,
                                std::optional<double> image_area) {
  if (!cfg.valid()) throw ValidationError("invalid suppression config");
  if (dets.empty()) return {};

  for (const auto& det : dets) {
    if (det.image_id != dets.front().image_id) {
      throw ValidationError("suppress expects detections of a single image, "
                            "got ids " + std::to_string(dets.front().image_id) +
                            " and " + std::to_string(det.image_id));
    }
    if (det.category_id != dets.front().category_id) {
      throw ValidationError("suppress expects detections of a single category");
    }
  }

  std::vector<Candidate> cands;
  cands.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    cands.push_back({i, dets[i].score, dets[i].box.area()});
  }

  if (cfg.scoring == ScoreSource::normalized_area) {
    double basis = 0.0;
    if (cfg.area_basis == AreaBasis::image) {
      if (!image_area || *image_area <= 0.0) {
        throw ValidationError(
            "normalized-area scoring with image basis requires the image area");
      }
      basis = *image_area;
    } else {
      for (const auto& c : cands) basis = std::max(basis, c.area);
    }
    for (auto& c : cands) c.score = basis > 0.0 ? c.area / basis : 0.0;
  }

  std::vector<Detection> kept;
  for (;;) {
    std::ptrdiff_t best = -1;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (cands[i].alive && (best < 0 || beats(cands[i], cands[best], dets)))
        best = static_cast<std::ptrdiff_t>(i);
    }
    if (best < 0) break;

    Detection out = dets[cands[best].input_index];
    out.score = cands[best].score;
    kept.push_back(out);
    const std::size_t best_index = cands[best].input_index;
    cands[best].alive = false;
    if (cfg.max_output && kept.size() >= *cfg.max_output) break;

    for (auto& c : cands) {
      if (!c.alive) continue;
      const double o = iou(dets[best_index].box, dets[c.input_index].box);
      switch (cfg.method) {
        case NmsMethod::hard_nms:
          if (o > cfg.iou_threshold) c.alive = false;
          break;
        case NmsMethod::soft_nms_linear:
          if (o > cfg.iou_threshold) {
            c.score *= 1.0 - o;
            if (c.score < cfg.score_floor) c.alive = false;
          }
          break;
        case NmsMethod::soft_nms_gaussian:
          c.score *= std::exp(-(o * o) / cfg.sigma);
          if (c.score < cfg.score_floor) c.alive = false;
          break;
      }
    }
  }
  return kept;
}

std::vector<Detection> merge_tiled(
    const std::vector<Detection>& dets,
    const std::vector<TileManifestEntry>& manifest,
    const SuppressionConfig& cfg,
    const std::unordered_map<std::int64_t, ImageSize>* frame_sizes) {
  std::unordered_map<std::int64_t, const TileManifestEntry*> tiles;
  tiles.reserve(manifest.size());
  for (const auto& e : manifest) tiles.emplace(e.tile_image_id, &e);

  // tile-coordinate detections are recognized by their image id and
  // back-projected; anything else is taken to be in frame coordinates already
  std::vector<Detection> frame_dets;
  frame_dets.reserve(dets.size());
  for (const auto& det : dets) {
    const auto it = tiles.find(det.image_id);
    if (it == tiles.end()) {
      frame_dets.push_back(det);
    } else {
      Detection moved = det;
      moved.box = translate(det.box, it->second->offset_x, it->second->offset_y);
      moved.image_id = it->second->frame_image_id;
      frame_dets.push_back(moved);
    }
  }

  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<Detection>> groups;
  for (const auto& det : frame_dets) {
    groups[{det.image_id, det.category_id}].push_back(det);
  }

  std::vector<Detection> merged;
  for (const auto& [key, group] : groups) {
    std::optional<double> image_area;
    if (cfg.scoring == ScoreSource::normalized_area &&
        cfg.area_basis == AreaBasis::image) {
      if (!frame_sizes || !frame_sizes->contains(key.first)) {
        throw ValidationError(
            "normalized-area scoring needs frame sizes for image id " +
            std::to_string(key.first));
      }
      image_area = frame_sizes->at(key.first).area();
    }
    const auto kept = suppress(group, cfg, image_area);
    merged.insert(merged.end(), kept.begin(), kept.end());
  }
  return merged;
}

}  // namespace densepack
