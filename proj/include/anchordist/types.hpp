// Copyright 2026 The anchordist Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace anchordist {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Image dimensions in pixels.
struct ImageSize {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Axis-aligned 2D box in pixels, stored as edges.
struct BBox2D {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  static BBox2D from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  double width() const { return right - left; }
  double height() const { return bottom - top; }
  double center_x() const { return 0.5 * (left + right); }
  double center_y() const { return 0.5 * (top + bottom); }
  double area() const { return width() * height(); }
  bool valid() const { return right > left && bottom > top; }
  bool contains(double u, double v) const {
    return u >= left && u <= right && v >= top && v <= bottom;
  }

  friend bool operator==(const BBox2D&, const BBox2D&) = default;
};

/// Box dimensions only (height, width) in pixels, as used by the anchor priors.
struct BoxDims {
  double h = 0.0;
  double w = 0.0;

  double area() const { return h * w; }
  friend bool operator==(const BoxDims&, const BoxDims&) = default;
};

inline BoxDims dims_of(const BBox2D& box) { return {box.height(), box.width()}; }

/// Raised when text input (labels, calibration, anchor files, checkpoints)
/// cannot be parsed. `line()` is 1-based, 0 when not line-specific.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        message_(what) {}

  int line() const { return line_; }
  /// The description without the line prefix.
  const std::string& message() const { return message_; }

 private:
  int line_;
  std::string message_;
};

/// Raised for invalid configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace anchordist
