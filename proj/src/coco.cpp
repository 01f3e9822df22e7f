#include "densepack/coco.hpp"

#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "densepack/errors.hpp"
#include "densepack/io_util.hpp"
#include "densepack/parallel.hpp"
#include "image_io.hpp"

namespace densepack {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const json& member(const json& obj, const char* field, const std::string& ctx) {
  const auto it = obj.find(field);
  if (it == obj.end()) {
    throw ValidationError("schema error: missing field '" + std::string(field) +
                          "' in " + ctx);
  }
  return *it;
}

std::int64_t int_field(const json& obj, const char* field,
                       const std::string& ctx) {
  const json& v = member(obj, field, ctx);
  if (!v.is_number_integer()) {
    throw ValidationError("schema error: field '" + std::string(field) +
                          "' in " + ctx + " must be an integer");
  }
  return v.get<std::int64_t>();
}

double num_field(const json& obj, const char* field, const std::string& ctx) {
  const json& v = member(obj, field, ctx);
  if (!v.is_number()) {
    throw ValidationError("schema error: field '" + std::string(field) +
                          "' in " + ctx + " must be a number");
  }
  return v.get<double>();
}

std::string str_field(const json& obj, const char* field,
                      const std::string& ctx) {
  const json& v = member(obj, field, ctx);
  if (!v.is_string()) {
    throw ValidationError("schema error: field '" + std::string(field) +
                          "' in " + ctx + " must be a string");
  }
  return v.get<std::string>();
}

BBox bbox_field(const json& obj, const std::string& ctx) {
  const json& v = member(obj, "bbox", ctx);
  if (!v.is_array() || v.size() != 4 || !v[0].is_number() ||
      !v[1].is_number() || !v[2].is_number() || !v[3].is_number()) {
    throw ValidationError("schema error: 'bbox' in " + ctx +
                          " must be [x, y, w, h]");
  }
  const double x = v[0].get<double>(), y = v[1].get<double>();
  const double w = v[2].get<double>(), h = v[3].get<double>();
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) ||
      !std::isfinite(h) || w < 0.0 || h < 0.0) {
    throw ValidationError("invalid bbox in " + ctx +
                          " (coordinates must be finite, extents >= 0)");
  }
  return BBox::from_xywh(x, y, w, h);
}

json parse_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("parse error in " + path.string() + ": " + e.what());
  }
}

json bbox_to_json(const BBox& b) {
  return json::array({b.x_min, b.y_min, b.width(), b.height()});
}

template <typename T>
void check_unique_ids(const std::vector<T>& items, const char* what) {
  std::unordered_set<std::int64_t> seen;
  for (const auto& item : items) {
    if (!seen.insert(item.id).second) {
      throw ValidationError(std::string("duplicate ") + what +
                            " id: " + std::to_string(item.id));
    }
  }
}

}  // namespace

std::unordered_map<std::int64_t, const ImageRecord*> image_index(
    const Dataset& d) {
  std::unordered_map<std::int64_t, const ImageRecord*> idx;
  idx.reserve(d.images.size());
  for (const auto& img : d.images) idx.emplace(img.id, &img);
  return idx;
}

std::unordered_map<std::int64_t, const Category*> category_index(
    const Dataset& d) {
  std::unordered_map<std::int64_t, const Category*> idx;
  idx.reserve(d.categories.size());
  for (const auto& cat : d.categories) idx.emplace(cat.id, &cat);
  return idx;
}

Dataset load_dataset(const fs::path& path, const LoadOptions& opts) {
  const json root = parse_file(path);
  if (!root.is_object()) {
    throw ValidationError("schema error: top level of " + path.string() +
                          " must be an object");
  }
  for (const char* field : {"images", "annotations", "categories"}) {
    if (!member(root, field, path.string()).is_array()) {
      throw ValidationError("schema error: '" + std::string(field) + "' in " +
                            path.string() + " must be an array");
    }
  }

  Dataset d;
  for (const auto& c : root["categories"]) {
    const std::string ctx = "category #" + std::to_string(d.categories.size());
    d.categories.push_back({int_field(c, "id", ctx), str_field(c, "name", ctx)});
  }
  for (const auto& im : root["images"]) {
    const std::string ctx = "image #" + std::to_string(d.images.size());
    ImageRecord rec;
    rec.id = int_field(im, "id", ctx);
    rec.file_name = str_field(im, "file_name", ctx);
    rec.size.width = static_cast<int>(int_field(im, "width", ctx));
    rec.size.height = static_cast<int>(int_field(im, "height", ctx));
    if (!rec.size.valid()) {
      throw ValidationError("image " + std::to_string(rec.id) +
                            " has non-positive size");
    }
    d.images.push_back(std::move(rec));
  }
  for (const auto& a : root["annotations"]) {
    const std::string ctx = "annotation #" + std::to_string(d.annotations.size());
    Annotation ann;
    ann.id = int_field(a, "id", ctx);
    ann.image_id = int_field(a, "image_id", ctx);
    ann.category_id = int_field(a, "category_id", ctx);
    ann.box = bbox_field(a, ctx);
    if (a.contains("iscrowd")) {
      const json& v = a["iscrowd"];
      ann.iscrowd = v.is_boolean() ? v.get<bool>() : num_field(a, "iscrowd", ctx) != 0.0;
    }
    ann.area = a.contains("area") ? num_field(a, "area", ctx) : ann.box.area();
    d.annotations.push_back(ann);
  }

  if (opts.raw) return d;

  check_unique_ids(d.images, "image");
  check_unique_ids(d.annotations, "annotation");
  check_unique_ids(d.categories, "category");

  const auto images = image_index(d);
  const auto cats = category_index(d);
  for (auto& ann : d.annotations) {
    const auto img = images.find(ann.image_id);
    if (img == images.end()) {
      throw ValidationError("annotation " + std::to_string(ann.id) +
                            " references missing image id " +
                            std::to_string(ann.image_id));
    }
    if (!cats.contains(ann.category_id)) {
      throw ValidationError("annotation " + std::to_string(ann.id) +
                            " references missing category id " +
                            std::to_string(ann.category_id));
    }
    if (!inside_image(ann.box, img->second->size)) {
      if (opts.bounds == BoundsPolicy::strict) {
        throw ValidationError("annotation " + std::to_string(ann.id) +
                              " box is outside image " +
                              std::to_string(ann.image_id));
      }
      ann.box = clamp_to_image(ann.box, img->second->size);
      ann.area = ann.box.area();
    }
    if (std::abs(ann.area - ann.box.area()) > 1.0) {
      ann.area = ann.box.area();
    }
  }
  return d;
}

void save_dataset(const Dataset& d, const fs::path& path) {
  json root;
  root["images"] = json::array();
  for (const auto& im : d.images) {
    root["images"].push_back({{"id", im.id},
                              {"file_name", im.file_name},
                              {"width", im.size.width},
                              {"height", im.size.height}});
  }
  root["annotations"] = json::array();
  for (const auto& a : d.annotations) {
    root["annotations"].push_back({{"id", a.id},
                                   {"image_id", a.image_id},
                                   {"category_id", a.category_id},
                                   {"bbox", bbox_to_json(a.box)},
                                   {"area", a.area},
                                   {"iscrowd", a.iscrowd ? 1 : 0}});
  }
  root["categories"] = json::array();
  for (const auto& c : d.categories) {
    root["categories"].push_back({{"id", c.id}, {"name", c.name}});
  }
  atomic_write_text(path, root.dump());
}

std::vector<Detection> load_detections(const fs::path& path,
                                       const Dataset& reference) {
  const json root = parse_file(path);
  if (!root.is_array()) {
    throw ValidationError("schema error: " + path.string() +
                          " must be a JSON array of detections");
  }
  const auto images = image_index(reference);
  std::vector<Detection> dets;
  dets.reserve(root.size());
  for (const auto& r : root) {
    const std::string ctx = "detection #" + std::to_string(dets.size());
    Detection det;
    det.image_id = int_field(r, "image_id", ctx);
    det.category_id = int_field(r, "category_id", ctx);
    det.box = bbox_field(r, ctx);
    det.score = num_field(r, "score", ctx);
    if (!std::isfinite(det.score) || det.score < 0.0 || det.score > 1.0) {
      throw ValidationError(ctx + " has score outside [0, 1]");
    }
    if (!images.contains(det.image_id)) {
      throw ValidationError(ctx + " references missing image id " +
                            std::to_string(det.image_id));
    }
    dets.push_back(det);
  }
  return dets;
}

void save_detections(const std::vector<Detection>& dets, const fs::path& path) {
  json root = json::array();
  for (const auto& det : dets) {
    root.push_back({{"image_id", det.image_id},
                    {"category_id", det.category_id},
                    {"bbox", bbox_to_json(det.box)},
                    {"score", det.score}});
  }
  atomic_write_text(path, root.dump());
}

std::size_t ValidationReport::count(const std::string& kind) const {
  std::size_t n = 0;
  for (const auto& f : findings)
    if (f.kind == kind) ++n;
  return n;
}

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  if (findings.empty()) {
    out << "no problems found\n";
    return out.str();
  }
  for (const auto& f : findings) out << f.kind << ": " << f.message << "\n";
  std::map<std::string, std::size_t> by_kind;
  for (const auto& f : findings) ++by_kind[f.kind];
  out << "total: " << findings.size() << " finding(s)";
  for (const auto& [kind, n] : by_kind) out << ", " << kind << "=" << n;
  out << "\n";
  return out.str();
}

std::string ValidationReport::to_json() const {
  json root;
  root["findings"] = json::array();
  for (const auto& f : findings) {
    json entry = {{"kind", f.kind}, {"message", f.message}};
    if (f.image_id >= 0) entry["image_id"] = f.image_id;
    if (f.annotation_id >= 0) entry["annotation_id"] = f.annotation_id;
    root["findings"].push_back(std::move(entry));
  }
  json counts = json::object();
  for (const auto& f : findings) {
    counts[f.kind] = counts.value(f.kind, 0) + 1;
  }
  root["counts"] = std::move(counts);
  return root.dump();
}

ValidationReport validate_dataset(const Dataset& d,
                                  const std::optional<fs::path>& image_root,
                                  unsigned threads) {
  ValidationReport report;
  auto add = [&report](std::string kind, std::string message,
                       std::int64_t image_id = -1,
                       std::int64_t annotation_id = -1) {
    report.findings.push_back(
        {std::move(kind), std::move(message), image_id, annotation_id});
  };

  std::unordered_set<std::int64_t> seen;
  for (const auto& im : d.images) {
    if (!seen.insert(im.id).second)
      add("duplicate_image_id", "image id " + std::to_string(im.id) +
          " appears more than once", im.id);
  }
  seen.clear();
  for (const auto& a : d.annotations) {
    if (!seen.insert(a.id).second)
      add("duplicate_annotation_id", "annotation id " + std::to_string(a.id) +
          " appears more than once", -1, a.id);
  }
  seen.clear();
  for (const auto& c : d.categories) {
    if (!seen.insert(c.id).second)
      add("duplicate_category_id",
          "category id " + std::to_string(c.id) + " appears more than once");
  }

  if (image_root) {
    std::vector<char> broken(d.images.size(), 0);
    parallel_for(d.images.size(), threads, [&](std::size_t i) {
      broken[i] = img::broken(*image_root / d.images[i].file_name) ? 1 : 0;
    });
    for (std::size_t i = 0; i < d.images.size(); ++i) {
      if (broken[i]) {
        add("broken_image",
            "image file " + d.images[i].file_name +
                " (id " + std::to_string(d.images[i].id) +
                ") is missing, zero-byte or undecodable",
            d.images[i].id);
      }
    }
  }

  const auto images = image_index(d);
  const auto cats = category_index(d);
  for (const auto& a : d.annotations) {
    const auto img = images.find(a.image_id);
    if (img == images.end()) {
      add("dangling_image_ref",
          "annotation " + std::to_string(a.id) + " references missing image id " +
              std::to_string(a.image_id),
          a.image_id, a.id);
      continue;
    }
    if (!cats.contains(a.category_id)) {
      add("dangling_category_ref",
          "annotation " + std::to_string(a.id) +
              " references missing category id " + std::to_string(a.category_id),
          a.image_id, a.id);
    }
    if (!inside_image(a.box, img->second->size)) {
      add("out_of_bounds_box",
          "annotation " + std::to_string(a.id) + " exceeds image " +
              std::to_string(a.image_id) + " bounds",
          a.image_id, a.id);
    }
    if (clamp_to_image(a.box, img->second->size).area() == 0.0) {
      add("zero_area_box",
          "annotation " + std::to_string(a.id) + " has zero area",
          a.image_id, a.id);
    }
  }
  return report;
}

Dataset apply_exclusions(const Dataset& d, const ValidationReport& report) {
  std::unordered_set<std::int64_t> broken_images;
  for (const auto& f : report.findings) {
    if (f.kind == "broken_image") broken_images.insert(f.image_id);
  }

  Dataset out;
  std::unordered_set<std::int64_t> seen;
  for (const auto& im : d.images) {
    if (broken_images.contains(im.id)) continue;
    if (!seen.insert(im.id).second) continue;
    out.images.push_back(im);
  }
  seen.clear();
  for (const auto& c : d.categories) {
    if (!seen.insert(c.id).second) continue;
    out.categories.push_back(c);
  }
  const auto images = image_index(out);
  const auto cats = category_index(out);
  seen.clear();
  for (const auto& a : d.annotations) {
    const auto img = images.find(a.image_id);
    if (img == images.end()) continue;
    if (!cats.contains(a.category_id)) continue;
    if (!seen.insert(a.id).second) continue;
    Annotation ann = a;
    ann.box = clamp_to_image(ann.box, img->second->size);
    ann.area = ann.box.area();
    if (ann.area == 0.0) continue;
    out.annotations.push_back(ann);
  }
  return out;
}

}  // namespace densepack
