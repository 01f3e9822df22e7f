#pragma once

#include <stdexcept>
#include <string>

namespace densepack {

// File access problems: missing files, unreadable images, failed writes.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input content or configuration: malformed JSON, schema violations,
// dangling ids, out-of-range values.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace densepack
