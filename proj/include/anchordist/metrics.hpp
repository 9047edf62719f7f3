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

#include <anchordist/data.hpp>
#include <anchordist/geometry.hpp>
#include <anchordist/head.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace anchordist {

/// Depth-evaluation statistics over matched (prediction, ground truth) pairs.
struct DepthMetrics {
  double delta1 = 0.0;  // fraction with max(p/g, g/p) < 1.25
  double delta2 = 0.0;  // fraction with max(p/g, g/p) < 1.25^2
  double abs_rel = 0.0;
  double sqr_rel = 0.0;
  double rmse = 0.0;      // meters
  double rmse_log = 0.0;
  std::size_t count = 0;
};

inline DepthMetrics compute_depth_metrics(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw std::domain_error("compute_depth_metrics: length mismatch");
  if (pred.empty()) throw std::domain_error("compute_depth_metrics: no pairs");
  constexpr double kT1 = 1.25;
  constexpr double kT2 = 1.25 * 1.25;
  DepthMetrics m;
  m.count = pred.size();
  double sq = 0.0, sq_log = 0.0;
  std::size_t in1 = 0, in2 = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    const double g = gt[i];
    if (!(p > 0.0) || !(g > 0.0)) throw std::domain_error("compute_depth_metrics: depths must be positive");
    const double ratio = std::max(p / g, g / p);
    if (ratio < kT1) ++in1;
    if (ratio < kT2) ++in2;
    const double e = p - g;
    m.abs_rel += std::abs(e) / g;
    m.sqr_rel += e * e / g;
    sq += e * e;
    const double el = std::log(p) - std::log(g);
    sq_log += el * el;
  }
  const auto n = static_cast<double>(pred.size());
  m.delta1 = static_cast<double>(in1) / n;
  m.delta2 = static_cast<double>(in2) / n;
  m.abs_rel /= n;
  m.sqr_rel /= n;
  m.rmse = std::sqrt(sq / n);
  m.rmse_log = std::sqrt(sq_log / n);
  return m;
}

/// Mean absolute x and z error of matched pairs binned by ground-truth
/// Euclidean distance. Bin i covers [edges[i], edges[i+1]); empty bins hold
/// no value.
struct ErrorBins {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::vector<std::optional<double>> mean_abs_x;
  std::vector<std::optional<double>> mean_abs_z;

  std::size_t size() const { return counts.size(); }
  /// Index of the bin starting at `lower`, if any.
  std::optional<std::size_t> bin_starting_at(double lower) const {
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      if (edges[i] == lower) return i;
    }
    return std::nullopt;
  }
};

inline std::vector<double> uniform_edges(double lo, double hi, double width) {
  std::vector<double> edges;
  for (double e = lo; e <= hi + 1e-9; e += width) edges.push_back(e);
  return edges;
}

inline ErrorBins bin_errors_by_distance(std::span<const Vec3> preds, std::span<const Vec3> gts,
                                        std::span<const double> edges) {
  if (preds.size() != gts.size()) throw std::domain_error("bin_errors_by_distance: length mismatch");
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::domain_error("bin_errors_by_distance: edges must be strictly ascending");
  }
  const std::size_t nb = edges.size() - 1;
  ErrorBins bins;
  bins.edges.assign(edges.begin(), edges.end());
  bins.counts.assign(nb, 0);
  std::vector<double> sx(nb, 0.0), sz(nb, 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = distance_of(gts[i]);
    const auto it = std::upper_bound(edges.begin(), edges.end(), d);
    if (it == edges.begin() || it == edges.end()) continue;
    const auto b = static_cast<std::size_t>(it - edges.begin() - 1);
    ++bins.counts[b];
    sx[b] += std::abs(preds[i].x() - gts[i].x());
    sz[b] += std::abs(preds[i].z() - gts[i].z());
  }
  bins.mean_abs_x.resize(nb);
  bins.mean_abs_z.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    if (bins.counts[b] == 0) continue;
    bins.mean_abs_x[b] = sx[b] / static_cast<double>(bins.counts[b]);
    bins.mean_abs_z[b] = sz[b] / static_cast<double>(bins.counts[b]);
  }
  return bins;
}

/// Predictor chosen for one ground-truth object and its back-projected location.
struct Selection {
  Cell cell;
  int predictor = 0;
  Vec3 location = Vec3::Zero();
  double error = 0.0;  // Euclidean distance to the ground-truth location
};

/// Back-projects a decoded entry: ray through the decoded box center (mapped
/// back to source pixels) times the decoded distance.
inline Vec3 back_project(const Decoded& dec, const CameraIntrinsics& intr, const Letterbox& lb) {
  const Vec2 px = lb.to_source(dec.box.center_x(), dec.box.center_y());
  return locate_object(pixel_to_ray(intr, px.x(), px.y()), dec.distance);
}

/// Among one cell's predictors, the one whose location is nearest the ground
/// truth; ties go to the lower index.
inline Selection select_in_cell(std::span<const Decoded> predictors, Cell cell, const Vec3& gt_location,
                                const CameraIntrinsics& intr, const Letterbox& lb) {
  Selection best;
  best.cell = cell;
  best.error = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < predictors.size(); ++p) {
    const Vec3 loc = back_project(predictors[p], intr, lb);
    const double err = (loc - gt_location).norm();
    if (err < best.error) {
      best.error = err;
      best.predictor = static_cast<int>(p);
      best.location = loc;
    }
  }
  return best;
}

/// GT-matched selection over the k predictors of the object's responsible
/// cell. Returns nullopt when the object's box center falls outside the grid.
inline std::optional<Selection> select_prediction_for_gt(const DecodedPrediction& decoded, const ObjectLabel& gt,
                                                         const GridSpec& grid, const CameraIntrinsics& intr,
                                                         const Letterbox& lb) {
  const BBox2D box = lb.to_canvas(gt.bbox);
  const double cx = box.center_x();
  const double cy = box.center_y();
  if (!(cx >= 0.0 && cx <= grid.image.width && cy >= 0.0 && cy <= grid.image.height)) return std::nullopt;
  const Cell cell = responsible_cell(cx, cy, grid);
  return select_in_cell(decoded.cell(cell.row, cell.col), cell, gt.location, intr, lb);
}

/// Depth-metric table, one row per method.
inline std::string format_metrics_table(std::span<const std::pair<std::string, DepthMetrics>> rows) {
  std::size_t width = 6;
  for (const auto& [name, m] : rows) width = std::max(width, name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "method" << std::right << std::setw(8) << "n"
     << std::setw(10) << "d<1.25" << std::setw(10) << "d<1.25^2" << std::setw(10) << "AbsRel" << std::setw(10)
     << "SqrRel" << std::setw(10) << "RMSE" << std::setw(10) << "RMSElog" << "\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& [name, m] : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << name << std::right << std::setw(8) << m.count
       << std::setw(10) << m.delta1 << std::setw(10) << m.delta2 << std::setw(10) << m.abs_rel << std::setw(10)
       << m.sqr_rel << std::setw(10) << m.rmse << std::setw(10) << m.rmse_log << "\n";
  }
  return os.str();
}

}  // namespace anchordist
