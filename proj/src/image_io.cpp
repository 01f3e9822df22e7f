#include "image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <system_error>

#include "densepack/errors.hpp"

namespace densepack::img {

namespace fs = std::filesystem;

bool broken(const fs::path& path) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec || size == 0) return true;
  const cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  return m.empty();
}

void write_crops(const fs::path& src, const ImageSize& expected,
                 const std::vector<CropJob>& jobs) {
  const cv::Mat frame = cv::imread(src.string(), cv::IMREAD_UNCHANGED);
  if (frame.empty()) throw IoError("cannot decode image " + src.string());
  if (frame.cols != expected.width || frame.rows != expected.height) {
    throw ValidationError("image " + src.string() + " is " +
                          std::to_string(frame.cols) + "x" +
                          std::to_string(frame.rows) + ", dataset says " +
                          std::to_string(expected.width) + "x" +
                          std::to_string(expected.height));
  }
  for (const auto& job : jobs) {
    if (job.x < 0 || job.y < 0 || job.x + job.w > frame.cols ||
        job.y + job.h > frame.rows) {
      throw ValidationError("tile rect outside image " + src.string());
    }
    const cv::Mat tile = frame(cv::Rect(job.x, job.y, job.w, job.h)).clone();
    if (job.dst.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(job.dst.parent_path(), ec);
    }
    if (!cv::imwrite(job.dst.string(), tile)) {
      throw IoError("cannot write " + job.dst.string());
    }
  }
}

}  // namespace densepack::img
