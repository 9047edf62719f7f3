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
#include <anchordist/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace anchordist {

/// Space in which distances are clustered and compared.
enum class DistanceFormat { Normal, LogScale, Squared };

inline double to_format(DistanceFormat f, double d) {
  switch (f) {
    case DistanceFormat::Normal: return d;
    case DistanceFormat::LogScale: return std::log(d);
    case DistanceFormat::Squared: return d * d;
  }
  return d;
}

inline double from_format(DistanceFormat f, double x) {
  switch (f) {
    case DistanceFormat::Normal: return x;
    case DistanceFormat::LogScale: return std::exp(x);
    case DistanceFormat::Squared: return std::sqrt(x);
  }
  return x;
}

inline std::string_view format_name(DistanceFormat f) {
  switch (f) {
    case DistanceFormat::Normal: return "normal";
    case DistanceFormat::LogScale: return "log";
    case DistanceFormat::Squared: return "squared";
  }
  return "normal";
}

inline DistanceFormat parse_format(std::string_view name) {
  if (name == "normal") return DistanceFormat::Normal;
  if (name == "log" || name == "log-scale" || name == "logscale") return DistanceFormat::LogScale;
  if (name == "squared") return DistanceFormat::Squared;
  throw ConfigError("unknown distance format '" + std::string(name) + "' (normal|log|squared)");
}

/// How training targets pick their predictor.
enum class AssignmentRule {
  NearestDistance,  // nearest anchor distance in the set's format
  BestBoxIoU,       // highest center-aligned IoU with the anchor box
};

/// Per-predictor priors: anchor distance plus average box, index-aligned and
/// ordered by distance.
struct AnchorSet {
  DistanceFormat format = DistanceFormat::Normal;
  std::vector<double> distances;
  std::vector<BoxDims> boxes;
  AssignmentRule rule = AssignmentRule::NearestDistance;
  bool distance_prior = true;

  std::size_t k() const { return distances.size(); }

  /// Multiplier applied to exp(t); 1 when the set carries no distance prior.
  double prior_distance(std::size_t i) const { return distance_prior ? distances[i] : 1.0; }

  void validate() const {
    if (distances.empty()) throw std::domain_error("anchor set is empty");
    if (boxes.size() != distances.size()) throw std::domain_error("anchor set: distances and boxes differ in length");
    for (std::size_t i = 0; i < distances.size(); ++i) {
      if (!(distances[i] > 0.0) || !std::isfinite(distances[i])) throw std::domain_error("anchor set: distances must be positive");
      if (!(boxes[i].h > 0.0 && boxes[i].w > 0.0)) throw std::domain_error("anchor set: boxes must be positive");
      if (i > 0) {
        const bool ok = rule == AssignmentRule::NearestDistance ? distances[i] > distances[i - 1]
                                                                : distances[i] >= distances[i - 1];
        if (!ok) throw std::domain_error("anchor set: distances must be ascending");
      }
    }
  }
};

/// Center-aligned IoU of two box shapes.
inline double shape_iou(const BoxDims& a, const BoxDims& b) {
  const double inter = std::min(a.h, b.h) * std::min(a.w, b.w);
  return inter / (a.area() + b.area() - inter);
}

struct KMeansOptions {
  std::uint64_t seed = 0;
  int restarts = 25;
  int max_iterations = 1000;
};

namespace detail {

template <typename Point>
struct LloydResult {
  std::vector<Point> centroids;
  std::vector<int> labels;
  double cost = std::numeric_limits<double>::infinity();
};

// Seeded k-means++ followed by Lloyd iterations until assignments are stable.
// `cost(p, c)` is the per-point objective; `mean(members)` the centroid update.
// An empty cluster is re-seeded with the point farthest from its centroid.
template <typename Point, typename CostFn, typename MeanFn>
LloydResult<Point> lloyd_once(std::span<const Point> points, int k, std::mt19937_64& rng, CostFn cost,
                              MeanFn mean, int max_iterations) {
  const std::size_t n = points.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LloydResult<Point> res;
  res.centroids.reserve(static_cast<std::size_t>(k));
  res.centroids.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = cost(points[i], res.centroids[0]);
  while (res.centroids.size() < static_cast<std::size_t>(k)) {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = unit(rng) * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= nearest[i];
        if (r < 0.0 && nearest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    res.centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], cost(points[i], res.centroids.back()));
  }

  res.labels.assign(n, -1);
  std::vector<Point> members;
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_cost = cost(points[i], res.centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double cc = cost(points[i], res.centroids[static_cast<std::size_t>(c)]);
        if (cc < best_cost) {
          best_cost = cc;
          best = c;
        }
      }
      if (res.labels[i] != best) {
        res.labels[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : res.labels) ++counts[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t far = 0;
      double far_cost = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(res.labels[i])] <= 1) continue;
        const double cc = cost(points[i], res.centroids[static_cast<std::size_t>(res.labels[i])]);
        if (cc > far_cost) {
          far_cost = cc;
          far = i;
        }
      }
      if (far_cost < 0.0) continue;
      --counts[static_cast<std::size_t>(res.labels[far])];
      res.labels[far] = c;
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      members.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (res.labels[i] == c) members.push_back(points[i]);
      }
      if (!members.empty()) res.centroids[static_cast<std::size_t>(c)] = mean(std::span<const Point>(members));
    }
  }

  res.cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) res.cost += cost(points[i], res.centroids[static_cast<std::size_t>(res.labels[i])]);
  return res;
}

struct NoRefinement {
  template <typename Point>
  void operator()(std::span<const Point>, LloydResult<Point>&) const {}
};

// Single-point transfers for squared-error k-means on scalars: a point moves
// when the exact change in total cost is negative. Stops at a local optimum
// under such moves, which is also a Lloyd fixed point.
inline void hartigan_refine(std::span<const double> x, LloydResult<double>& res) {
  const std::size_t k = res.centroids.size();
  std::vector<double> sum(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto c = static_cast<std::size_t>(res.labels[i]);
    sum[c] += x[i];
    ++count[c];
  }
  bool moved = true;
  for (int pass = 0; moved && pass < 1000; ++pass) {
    moved = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto from = static_cast<std::size_t>(res.labels[i]);
      if (count[from] <= 1) continue;
      const double nf = static_cast<double>(count[from]);
      const double df = x[i] - sum[from] / nf;
      const double removal = nf / (nf - 1.0) * df * df;
      std::size_t best = from;
      double best_gain = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        if (c == from) continue;
        const double nc = static_cast<double>(count[c]);
        const double dc = count[c] == 0 ? 0.0 : x[i] - sum[c] / nc;
        const double gain = removal - nc / (nc + 1.0) * dc * dc;
        if (gain > best_gain * (1.0 + 1e-12) + 1e-15 * removal) {
          best_gain = gain;
          best = c;
        }
      }
      if (best == from) continue;
      sum[from] -= x[i];
      --count[from];
      sum[best] += x[i];
      ++count[best];
      res.labels[i] = static_cast<int>(best);
      moved = true;
    }
  }
  // Exact two-pass cost on the final partition.
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] == 0) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (static_cast<std::size_t>(res.labels[i]) == c) s += x[i];
    }
    res.centroids[c] = s / static_cast<double>(count[c]);
  }
  res.cost = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - res.centroids[static_cast<std::size_t>(res.labels[i])];
    res.cost += d * d;
  }
}

// Best of `restarts` runs by total cost; ties keep the lowest restart index.
template <typename Point, typename CostFn, typename MeanFn, typename RefineFn = NoRefinement>
LloydResult<Point> kmeans_restarts(std::span<const Point> points, int k, const KMeansOptions& opts, CostFn cost,
                                   MeanFn mean, RefineFn refine = {}) {
  std::mt19937_64 rng(splitmix64(opts.seed));
  LloydResult<Point> best;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    auto run = lloyd_once<Point>(points, k, rng, cost, mean, opts.max_iterations);
    refine(points, run);
    if (run.cost < best.cost) best = std::move(run);
  }
  return best;
}

// Reorders clusters by `key` ascending and remaps labels accordingly.
template <typename Point, typename KeyFn>
void sort_clusters(LloydResult<Point>& res, KeyFn key) {
  const std::size_t k = res.centroids.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(res.centroids[a]) < key(res.centroids[b]); });
  std::vector<int> rank(k);
  std::vector<Point> sorted(k);
  for (std::size_t r = 0; r < k; ++r) {
    rank[order[r]] = static_cast<int>(r);
    sorted[r] = res.centroids[order[r]];
  }
  res.centroids = std::move(sorted);
  for (int& l : res.labels) l = rank[static_cast<std::size_t>(l)];
}

inline void check_cluster_inputs(std::size_t n, int k) {
  if (k < 1) throw std::domain_error("k-means: k must be at least 1");
  if (static_cast<std::size_t>(k) > n) throw std::domain_error("k-means: k exceeds the number of points");
}

}  // namespace detail

/// Result of clustering distances: anchors ascending (meters), per-input labels
/// indexing them, and the within-cluster sum of squares in the format's space.
struct DistanceClustering {
  DistanceFormat format = DistanceFormat::Normal;
  std::vector<double> anchors;
  std::vector<int> labels;
  double wcss = 0.0;
};

/// 1-D k-means over `to_format(distance)`, Lloyd iterations refined by
/// single-point transfers. Each anchor is the inverse-transformed centroid of
/// its cluster.
inline DistanceClustering kmeans_distances(std::span<const double> distances, int k, DistanceFormat format,
                                           const KMeansOptions& opts = {}) {
  detail::check_cluster_inputs(distances.size(), k);
  std::vector<double> values;
  values.reserve(distances.size());
  for (double d : distances) {
    if (!(d > 0.0) || !std::isfinite(d)) throw std::domain_error("kmeans_distances: distances must be positive");
    values.push_back(to_format(format, d));
  }
  auto cost = [](double x, double c) { return (x - c) * (x - c); };
  auto mean = [](std::span<const double> m) { return std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size()); };
  auto res = detail::kmeans_restarts<double>(std::span<const double>(values), k, opts, cost, mean,
                                            detail::hartigan_refine);
  detail::sort_clusters(res, [](double c) { return c; });

  DistanceClustering out;
  out.format = format;
  out.labels = std::move(res.labels);
  out.wcss = res.cost;
  for (double c : res.centroids) out.anchors.push_back(from_format(format, c));
  return out;
}

struct BoxClustering {
  std::vector<BoxDims> anchors;  // ascending area
  std::vector<int> labels;
  double cost = 0.0;             // sum of (1 - IoU)
};

/// k-means on box shapes with 1 - IoU of center-aligned boxes as the metric.
inline BoxClustering kmeans_boxes_iou(std::span<const BoxDims> boxes, int k, const KMeansOptions& opts = {}) {
  detail::check_cluster_inputs(boxes.size(), k);
  for (const auto& b : boxes) {
    if (!(b.h > 0.0 && b.w > 0.0)) throw std::domain_error("kmeans_boxes_iou: box dimensions must be positive");
  }
  auto cost = [](const BoxDims& p, const BoxDims& c) { return 1.0 - shape_iou(p, c); };
  auto mean = [](std::span<const BoxDims> m) {
    BoxDims acc;
    for (const auto& b : m) {
      acc.h += b.h;
      acc.w += b.w;
    }
    return BoxDims{acc.h / static_cast<double>(m.size()), acc.w / static_cast<double>(m.size())};
  };
  auto res = detail::kmeans_restarts<BoxDims>(boxes, k, opts, cost, mean);
  detail::sort_clusters(res, [](const BoxDims& b) { return b.area(); });
  return {std::move(res.centroids), std::move(res.labels), res.cost};
}

inline double average_distance(std::span<const double> cluster) {
  if (cluster.empty()) throw std::domain_error("average_distance: empty cluster");
  return std::accumulate(cluster.begin(), cluster.end(), 0.0) / static_cast<double>(cluster.size());
}

/// IoU-weighted average box: h^2 = sum(w h^2) / sum(w), w^2 = sum(h w^2) / sum(h).
inline BoxDims average_bbox(std::span<const BoxDims> cluster) {
  if (cluster.empty()) throw std::domain_error("average_bbox: empty cluster");
  double wh2 = 0.0, sw = 0.0, hw2 = 0.0, sh = 0.0;
  for (const auto& b : cluster) {
    if (!(b.h > 0.0 && b.w > 0.0)) throw std::domain_error("average_bbox: box dimensions must be positive");
    wh2 += b.w * b.h * b.h;
    sw += b.w;
    hw2 += b.h * b.w * b.w;
    sh += b.h;
  }
  return {std::sqrt(wh2 / sw), std::sqrt(hw2 / sh)};
}

/// Range used as the regression target: Euclidean distance or z-depth.
enum class DistanceTarget { Euclidean, Depth };

inline double target_distance(const ObjectLabel& label, DistanceTarget target = DistanceTarget::Euclidean) {
  return target == DistanceTarget::Euclidean ? distance_of(label.location) : depth_of(label.location);
}

/// Anchor distances from distance clustering, with the IoU-weighted average box of
/// each cluster. `boxes` is index-aligned with `distances`.
inline AnchorSet make_distance_anchor_set(std::span<const double> distances, std::span<const BoxDims> boxes, int k,
                                          DistanceFormat format, const KMeansOptions& opts = {}) {
  if (boxes.size() != distances.size()) throw std::domain_error("make_distance_anchor_set: size mismatch");
  const auto clusters = kmeans_distances(distances, k, format, opts);
  AnchorSet set;
  set.format = format;
  set.distances = clusters.anchors;
  set.rule = AssignmentRule::NearestDistance;
  for (int c = 0; c < k; ++c) {
    std::vector<BoxDims> members;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (clusters.labels[i] == c) members.push_back(boxes[i]);
    }
    set.boxes.push_back(average_bbox(members));
  }
  set.validate();
  return set;
}

/// Conventional anchor boxes from IoU clustering, with the arithmetic-mean
/// distance of each box cluster as its distance prior (or no prior). Ordered
/// by average distance.
inline AnchorSet make_box_anchor_set(std::span<const double> distances, std::span<const BoxDims> boxes, int k,
                                     bool distance_prior, const KMeansOptions& opts = {}) {
  if (boxes.size() != distances.size()) throw std::domain_error("make_box_anchor_set: size mismatch");
  const auto clusters = kmeans_boxes_iou(boxes, k, opts);
  std::vector<std::pair<double, BoxDims>> groups;
  for (int c = 0; c < k; ++c) {
    std::vector<double> members;
    for (std::size_t i = 0; i < distances.size(); ++i) {
      if (clusters.labels[i] == c) members.push_back(distances[i]);
    }
    groups.emplace_back(average_distance(members), clusters.anchors[static_cast<std::size_t>(c)]);
  }
  std::stable_sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  AnchorSet set;
  set.format = DistanceFormat::Normal;
  set.rule = AssignmentRule::BestBoxIoU;
  set.distance_prior = distance_prior;
  for (const auto& [d, box] : groups) {
    set.distances.push_back(d);
    set.boxes.push_back(box);
  }
  set.validate();
  return set;
}

// ---------------------------------------------------------------------------
// Variance reports

enum class Grouping { ByBBox, ByDistance };

struct ClusterReport {
  struct Group {
    std::size_t count = 0;
    double mean = 0.0;      // meters
    double variance = 0.0;  // m^2, population variance
  };
  Grouping grouping = Grouping::ByDistance;
  DistanceFormat format = DistanceFormat::Normal;
  std::vector<Group> groups;  // ascending mean distance

  double total_within_variance() const {
    double s = 0.0;
    for (const auto& g : groups) s += g.variance * static_cast<double>(g.count);
    return s;
  }
};

/// Mean and population variance of each labelled group.
inline std::vector<ClusterReport::Group> group_statistics(std::span<const double> values, std::span<const int> labels,
                                                         int k) {
  std::vector<ClusterReport::Group> groups(static_cast<std::size_t>(k));
  std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    ++groups[c].count;
    sums[c] += values[i];
  }
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].count > 0) groups[c].mean = sums[c] / static_cast<double>(groups[c].count);
  }
  std::vector<double> sq(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    const double d = values[i] - groups[c].mean;
    sq[c] += d * d;
  }
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].count > 0) groups[c].variance = sq[c] / static_cast<double>(groups[c].count);
  }
  return groups;
}

/// Groups objects by 2D box shape (IoU k-means) or by distance (k-means in
/// `format`), then reports the raw distance spread of each group.
inline ClusterReport cluster_variance_report(std::span<const ObjectLabel> labels, int k, Grouping grouping,
                                             DistanceFormat format = DistanceFormat::Normal,
                                             const KMeansOptions& opts = {},
                                             DistanceTarget target = DistanceTarget::Euclidean) {
  detail::check_cluster_inputs(labels.size(), k);
  std::vector<double> distances;
  std::vector<BoxDims> boxes;
  for (const auto& l : labels) {
    distances.push_back(target_distance(l, target));
    boxes.push_back(dims_of(l.bbox));
  }
  std::vector<int> membership;
  if (grouping == Grouping::ByDistance) {
    membership = kmeans_distances(distances, k, format, opts).labels;
  } else {
    membership = kmeans_boxes_iou(boxes, k, opts).labels;
  }
  ClusterReport report;
  report.grouping = grouping;
  report.format = format;
  report.groups = group_statistics(distances, membership, k);
  std::stable_sort(report.groups.begin(), report.groups.end(),
                   [](const auto& a, const auto& b) { return a.mean < b.mean; });
  return report;
}

// ---------------------------------------------------------------------------
// Anchor file

inline std::string_view rule_name(AssignmentRule r) {
  return r == AssignmentRule::NearestDistance ? "distance" : "box-iou";
}

/// Plain-text anchor configuration, one `anchor` line per predictor:
/// index, distance (m), box height and width (px).
inline std::string serialize_anchor_set(const AnchorSet& set) {
  using detail::fmt_double;
  std::string out = "# anchordist anchor set\n";
  out += "format " + std::string(format_name(set.format)) + "\n";
  out += "assignment " + std::string(rule_name(set.rule)) + "\n";
  out += "distance_prior " + std::string(set.distance_prior ? "1" : "0") + "\n";
  out += "k " + std::to_string(set.k()) + "\n";
  for (std::size_t i = 0; i < set.k(); ++i) {
    out += "anchor " + std::to_string(i) + " " + fmt_double(set.distances[i]) + " " + fmt_double(set.boxes[i].h) +
           " " + fmt_double(set.boxes[i].w) + "\n";
  }
  return out;
}

inline AnchorSet parse_anchor_set(std::string_view text) {
  AnchorSet set;
  long declared_k = -1;
  const auto lines = detail::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const int line_no = static_cast<int>(n) + 1;
    const auto f = detail::split_ws(lines[n]);
    if (f.empty() || f[0].front() == '#') continue;
    auto need = [&](std::size_t count) {
      if (f.size() != count) throw ParseError(line_no, "malformed '" + std::string(f[0]) + "' entry");
    };
    if (f[0] == "format") {
      need(2);
      try {
        set.format = parse_format(f[1]);
      } catch (const ConfigError& e) {
        throw ParseError(line_no, e.what());
      }
    } else if (f[0] == "assignment") {
      need(2);
      if (f[1] == "distance") set.rule = AssignmentRule::NearestDistance;
      else if (f[1] == "box-iou") set.rule = AssignmentRule::BestBoxIoU;
      else throw ParseError(line_no, "unknown assignment rule");
    } else if (f[0] == "distance_prior") {
      need(2);
      set.distance_prior = f[1] != "0";
    } else if (f[0] == "k") {
      need(2);
      const auto v = detail::to_int(f[1]);
      if (!v || *v < 1) throw ParseError(line_no, "bad k");
      declared_k = *v;
    } else if (f[0] == "anchor") {
      need(5);
      const auto idx = detail::to_int(f[1]);
      const auto d = detail::to_double(f[2]);
      const auto h = detail::to_double(f[3]);
      const auto w = detail::to_double(f[4]);
      if (!idx || !d || !h || !w || *idx != static_cast<int>(set.distances.size())) {
        throw ParseError(line_no, "bad anchor entry");
      }
      set.distances.push_back(*d);
      set.boxes.push_back({*h, *w});
    } else {
      throw ParseError(line_no, "unknown key '" + std::string(f[0]) + "'");
    }
  }
  if (declared_k != static_cast<long>(set.distances.size())) throw ParseError(0, "anchor count does not match k");
  try {
    set.validate();
  } catch (const std::domain_error& e) {
    throw ParseError(0, e.what());
  }
  return set;
}

}  // namespace anchordist
