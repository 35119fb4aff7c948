#pragma once

#include <stdexcept>
#include <string>

namespace xview {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& msg) : std::runtime_error("generation error: " + msg) {}
};

struct EmptyRegionError : std::runtime_error {
  explicit EmptyRegionError(const std::string& msg) : std::runtime_error("empty region: " + msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

struct ContaminationError : std::runtime_error {
  explicit ContaminationError(const std::string& msg)
      : std::runtime_error("split contamination: " + msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

}  // namespace xview
