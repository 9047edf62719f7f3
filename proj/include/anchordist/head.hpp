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

#include <anchordist/anchors.hpp>
#include <anchordist/types.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace anchordist {

/// Grid of predictors over the network input. Each cell owns `k` predictors.
struct GridSpec {
  ImageSize image{416, 416};
  int stride = 32;
  int k = 5;

  int cols() const { return image.width / stride; }
  int rows() const { return image.height / stride; }

  void validate() const {
    if (stride <= 0 || image.width <= 0 || image.height <= 0) throw std::domain_error("grid: empty image or stride");
    if (image.width % stride != 0 || image.height % stride != 0) {
      throw std::domain_error("grid: image dimensions must be divisible by the stride");
    }
    if (k < 1) throw std::domain_error("grid: k must be at least 1");
  }
};

struct Cell {
  int col = 0;
  int row = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Per-predictor network outputs, channel order (a, b, u, v, t):
/// a, b center offset logits; u height logit; v width logit; t distance logit.
struct RawOutput {
  double a = 0.0;
  double b = 0.0;
  double u = 0.0;
  double v = 0.0;
  double t = 0.0;

  static constexpr std::size_t kChannels = 5;
  std::array<double, kChannels> as_array() const { return {a, b, u, v, t}; }
  static RawOutput from_array(std::span<const double, kChannels> c) { return {c[0], c[1], c[2], c[3], c[4]}; }
};

/// Raw outputs for a whole grid stored flat in (row, col, predictor, channel)
/// order, the layout used by dump files.
class RawPrediction {
 public:
  RawPrediction() = default;
  RawPrediction(int rows, int cols, int k)
      : rows_(rows), cols_(cols), k_(k),
        data_(static_cast<std::size_t>(rows) * cols * k * RawOutput::kChannels, 0.0) {}
  explicit RawPrediction(const GridSpec& grid) : RawPrediction(grid.rows(), grid.cols(), grid.k) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int k() const { return k_; }

  std::size_t offset(int row, int col, int predictor) const {
    return ((static_cast<std::size_t>(row) * cols_ + col) * k_ + predictor) * RawOutput::kChannels;
  }
  RawOutput at(int row, int col, int predictor) const {
    return RawOutput::from_array(std::span<const double, RawOutput::kChannels>(data_.data() + offset(row, col, predictor),
                                                                                RawOutput::kChannels));
  }
  void set(int row, int col, int predictor, const RawOutput& out) {
    const auto arr = out.as_array();
    std::copy(arr.begin(), arr.end(), data_.begin() + static_cast<std::ptrdiff_t>(offset(row, col, predictor)));
  }
  std::span<double> cell(int row, int col) {
    return {data_.data() + offset(row, col, 0), static_cast<std::size_t>(k_) * RawOutput::kChannels};
  }
  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  int k_ = 0;
  std::vector<double> data_;
};

/// Header line "raw rows cols k 5" followed by one value per line.
inline std::string serialize_raw_prediction(const RawPrediction& raw) {
  std::string out = "raw " + std::to_string(raw.rows()) + " " + std::to_string(raw.cols()) + " " +
                    std::to_string(raw.k()) + " " + std::to_string(RawOutput::kChannels) + "\n";
  for (double v : raw.flat()) out += detail::fmt_double(v) + "\n";
  return out;
}

inline RawPrediction parse_raw_prediction(std::string_view text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError(1, "empty raw prediction");
  const auto h = detail::split_ws(lines[0]);
  if (h.size() != 5 || h[0] != "raw") throw ParseError(1, "bad raw prediction header");
  const auto rows = detail::to_int(h[1]);
  const auto cols = detail::to_int(h[2]);
  const auto k = detail::to_int(h[3]);
  if (!rows || !cols || !k || *rows <= 0 || *cols <= 0 || *k <= 0 || h[4] != "5") {
    throw ParseError(1, "bad raw prediction header");
  }
  RawPrediction raw(*rows, *cols, *k);
  auto flat = raw.flat();
  if (lines.size() != flat.size() + 1) throw ParseError(0, "raw prediction value count does not match header");
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const auto v = detail::to_double(detail::split_ws(lines[i + 1]).empty() ? "" : detail::split_ws(lines[i + 1])[0]);
    if (!v) throw ParseError(static_cast<int>(i) + 2, "not a number");
    flat[i] = *v;
  }
  return raw;
}

/// Decoded box (grid-input pixels) and distance (m) of one predictor.
struct Decoded {
  BBox2D box;
  double distance = 0.0;
};

/// Decoded predictions for a whole grid, same (row, col, predictor) order.
struct DecodedPrediction {
  int rows = 0;
  int cols = 0;
  int k = 0;
  std::vector<Decoded> entries;

  const Decoded& at(int row, int col, int predictor) const {
    return entries[(static_cast<std::size_t>(row) * cols + col) * k + predictor];
  }
  std::span<const Decoded> cell(int row, int col) const {
    return {entries.data() + (static_cast<std::size_t>(row) * cols + col) * k, static_cast<std::size_t>(k)};
  }
};

inline void check_compatible(const AnchorSet& anchors, const GridSpec& grid) {
  if (anchors.k() != static_cast<std::size_t>(grid.k)) throw std::domain_error("anchor set size does not match grid k");
}

/// d = d^a exp(t); h = h^m exp(u); w = w^m exp(v); center = cell origin +
/// sigmoid(a|b) * stride.
inline Decoded decode_entry(const RawOutput& raw, Cell cell, int predictor, const AnchorSet& anchors,
                            const GridSpec& grid) {
  const auto p = static_cast<std::size_t>(predictor);
  const double s = grid.stride;
  const double cx = (cell.col + sigmoid(raw.a)) * s;
  const double cy = (cell.row + sigmoid(raw.b)) * s;
  const double h = anchors.boxes[p].h * std::exp(raw.u);
  const double w = anchors.boxes[p].w * std::exp(raw.v);
  return {BBox2D::from_center(cx, cy, w, h), anchors.prior_distance(p) * std::exp(raw.t)};
}

inline DecodedPrediction decode(const RawPrediction& raw, const AnchorSet& anchors, const GridSpec& grid) {
  check_compatible(anchors, grid);
  if (raw.rows() != grid.rows() || raw.cols() != grid.cols() || raw.k() != grid.k) {
    throw std::domain_error("raw prediction shape does not match grid");
  }
  DecodedPrediction out{raw.rows(), raw.cols(), raw.k(), {}};
  out.entries.reserve(raw.flat().size() / RawOutput::kChannels);
  for (int r = 0; r < raw.rows(); ++r) {
    for (int c = 0; c < raw.cols(); ++c) {
      for (int p = 0; p < raw.k(); ++p) out.entries.push_back(decode_entry(raw.at(r, c, p), {c, r}, p, anchors, grid));
    }
  }
  return out;
}

/// Training target in grid-input pixels.
struct Target {
  BBox2D box;
  double distance = 0.0;
};

/// Exact inverse of decode_entry for a target whose center lies strictly
/// inside `cell`.
inline RawOutput encode(const Target& target, Cell cell, int predictor, const AnchorSet& anchors,
                        const GridSpec& grid) {
  check_compatible(anchors, grid);
  if (!(target.distance > 0.0) || !(target.box.width() > 0.0) || !(target.box.height() > 0.0)) {
    throw std::domain_error("encode: distance and box dimensions must be positive");
  }
  const auto p = static_cast<std::size_t>(predictor);
  const double fx = target.box.center_x() / grid.stride - cell.col;
  const double fy = target.box.center_y() / grid.stride - cell.row;
  if (fx < 0.0 || fx > 1.0 || fy < 0.0 || fy > 1.0) throw std::domain_error("encode: box center outside the assigned cell");
  if (fx == 0.0 || fx == 1.0 || fy == 0.0 || fy == 1.0) {
    throw std::domain_error("encode: box center on a cell edge has no finite offset logit");
  }
  return {logit(fx), logit(fy), std::log(target.box.height() / anchors.boxes[p].h),
          std::log(target.box.width() / anchors.boxes[p].w), std::log(target.distance / anchors.prior_distance(p))};
}

/// Nearest anchor distance in the set's own format; ties go to the lower index.
inline int assign_predictor(double target_distance, const AnchorSet& anchors) {
  const double x = to_format(anchors.format, target_distance);
  int best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < anchors.k(); ++i) {
    const double gap = std::abs(x - to_format(anchors.format, anchors.distances[i]));
    if (gap < best_gap) {
      best_gap = gap;
      best = static_cast<int>(i);
    }
  }
  return best;
}

/// Highest center-aligned IoU with an anchor box; ties go to the lower index.
inline int assign_predictor_by_box(const BoxDims& box, const AnchorSet& anchors) {
  int best = 0;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < anchors.k(); ++i) {
    const double iou = shape_iou(box, anchors.boxes[i]);
    if (iou > best_iou) {
      best_iou = iou;
      best = static_cast<int>(i);
    }
  }
  return best;
}

/// Predictor selection by the set's rule. Only anchors and the ground truth
/// are consulted, never the network's current estimates.
inline int assign_target(const Target& target, const AnchorSet& anchors) {
  return anchors.rule == AssignmentRule::NearestDistance ? assign_predictor(target.distance, anchors)
                                                         : assign_predictor_by_box(dims_of(target.box), anchors);
}

inline Cell responsible_cell(double cx, double cy, const GridSpec& grid) {
  if (!(cx >= 0.0 && cx <= grid.image.width && cy >= 0.0 && cy <= grid.image.height)) {
    throw std::domain_error("responsible_cell: center outside the image");
  }
  const int col = std::min(static_cast<int>(std::floor(cx / grid.stride)), grid.cols() - 1);
  const int row = std::min(static_cast<int>(std::floor(cy / grid.stride)), grid.rows() - 1);
  return {col, row};
}

struct SlotAssignment {
  std::size_t object = 0;
  Cell cell;
  int predictor = 0;
};

/// Target `dropped` lost its (cell, predictor) slot to the nearer `kept`.
struct AssignmentConflict {
  std::size_t dropped = 0;
  std::size_t kept = 0;
};

struct Assignment {
  std::vector<SlotAssignment> slots;  // in object order
  std::vector<AssignmentConflict> conflicts;
  std::vector<std::size_t> skipped;   // centers outside the grid
};

/// Maps each target to its responsible cell and predictor. When two targets
/// claim one slot the nearer keeps it; ties keep the earlier target.
inline Assignment assign_all(std::span<const Target> targets, const AnchorSet& anchors, const GridSpec& grid) {
  check_compatible(anchors, grid);
  Assignment out;
  std::vector<long> owner(static_cast<std::size_t>(grid.rows()) * grid.cols() * grid.k, -1);
  std::vector<SlotAssignment> provisional;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    const double cx = t.box.center_x();
    const double cy = t.box.center_y();
    if (!(cx >= 0.0 && cx <= grid.image.width && cy >= 0.0 && cy <= grid.image.height)) {
      out.skipped.push_back(i);
      continue;
    }
    const Cell cell = responsible_cell(cx, cy, grid);
    const int p = assign_target(t, anchors);
    const std::size_t slot = (static_cast<std::size_t>(cell.row) * grid.cols() + cell.col) * grid.k + p;
    if (owner[slot] < 0) {
      owner[slot] = static_cast<long>(i);
    } else {
      const auto prev = static_cast<std::size_t>(owner[slot]);
      if (t.distance < targets[prev].distance) {
        out.conflicts.push_back({prev, i});
        owner[slot] = static_cast<long>(i);
      } else {
        out.conflicts.push_back({i, prev});
      }
    }
    provisional.push_back({i, cell, p});
  }
  for (const auto& s : provisional) {
    const std::size_t slot = (static_cast<std::size_t>(s.cell.row) * grid.cols() + s.cell.col) * grid.k + s.predictor;
    if (owner[slot] == static_cast<long>(s.object)) out.slots.push_back(s);
  }
  return out;
}

}  // namespace anchordist
