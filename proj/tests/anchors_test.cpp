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

#include "oracles.hpp"

#include <anchordist/anchors.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace anchordist;

namespace {

// Best 2-partition of {1,2,10,11} in a format, returned as anchors.
std::vector<double> brute_force_anchors(const std::vector<double>& d, int k, DistanceFormat f) {
  double best = 1e300;
  std::vector<double> anchors;
  oracle::for_each_partition(d.size(), k, [&](const std::vector<int>& labels) {
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0), n(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      sum[static_cast<std::size_t>(labels[i])] += to_format(f, d[i]);
      n[static_cast<std::size_t>(labels[i])] += 1;
    }
    double cost = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double m = sum[static_cast<std::size_t>(labels[i])] / n[static_cast<std::size_t>(labels[i])];
      cost += std::pow(to_format(f, d[i]) - m, 2);
    }
    if (cost < best) {
      best = cost;
      anchors.clear();
      for (int c = 0; c < k; ++c) anchors.push_back(from_format(f, sum[static_cast<std::size_t>(c)] / n[static_cast<std::size_t>(c)]));
      std::sort(anchors.begin(), anchors.end());
    }
  });
  return anchors;
}

std::vector<ObjectLabel> synthetic_objects(std::uint64_t seed, std::size_t frames) {
  std::vector<ObjectLabel> out;
  for (const auto& f : generate_synthetic_dataset(seed, frames, SynthConfig{})) {
    out.insert(out.end(), f.scene.objects.begin(), f.scene.objects.end());
  }
  return out;
}

}  // namespace

TEST(DistanceFormat, TransformsInvert) {
  for (auto f : {DistanceFormat::Normal, DistanceFormat::LogScale, DistanceFormat::Squared}) {
    for (double d : {0.01, 1.0, 17.49, 88.8}) EXPECT_NEAR(from_format(f, to_format(f, d)), d, 1e-12 * d);
    EXPECT_EQ(parse_format(format_name(f)), f);
  }
  EXPECT_THROW(parse_format("cubic"), ConfigError);
}

TEST(KMeansDistances, NormalTwoClusters) {
  const std::vector<double> d{1, 2, 10, 11};
  const auto res = kmeans_distances(d, 2, DistanceFormat::Normal);
  ASSERT_EQ(res.anchors.size(), 2u);
  const auto want = brute_force_anchors(d, 2, DistanceFormat::Normal);
  EXPECT_NEAR(res.anchors[0], 1.5, 1e-12);
  EXPECT_NEAR(res.anchors[1], 10.5, 1e-12);
  EXPECT_NEAR(res.anchors[0], want[0], 1e-12);
  EXPECT_NEAR(res.anchors[1], want[1], 1e-12);
  EXPECT_EQ(res.labels, (std::vector<int>{0, 0, 1, 1}));
  EXPECT_NEAR(res.wcss, 1.0, 1e-12);
}

TEST(KMeansDistances, SquaredTwoClusters) {
  const std::vector<double> d{1, 2, 10, 11};
  const auto res = kmeans_distances(d, 2, DistanceFormat::Squared);
  const auto want = brute_force_anchors(d, 2, DistanceFormat::Squared);
  EXPECT_NEAR(res.anchors[0], std::sqrt(2.5), 1e-12);
  EXPECT_NEAR(res.anchors[1], std::sqrt(110.5), 1e-12);
  EXPECT_NEAR(res.anchors[0], 1.5811, 1e-4);
  EXPECT_NEAR(res.anchors[1], 10.5119, 1e-4);
  EXPECT_NEAR(res.anchors[0], want[0], 1e-12);
  EXPECT_NEAR(res.anchors[1], want[1], 1e-12);
}

TEST(KMeansDistances, BruteForceOnSmallRandomSets) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(1, 80);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> d(7);
    for (auto& x : d) x = u(rng);
    for (auto f : {DistanceFormat::Normal, DistanceFormat::LogScale, DistanceFormat::Squared}) {
      const auto want = brute_force_anchors(d, 3, f);
      const auto got = kmeans_distances(d, 3, f).anchors;
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(got[c], want[c], 1e-9 * want[c]);
    }
  }
}

TEST(KMeansDistances, Errors) {
  const std::vector<double> d{1, 2, 3};
  EXPECT_THROW(kmeans_distances(d, 4, DistanceFormat::Normal), std::domain_error);
  EXPECT_THROW(kmeans_distances(d, 0, DistanceFormat::Normal), std::domain_error);
  const std::vector<double> bad{1, 0, 3};
  EXPECT_THROW(kmeans_distances(bad, 2, DistanceFormat::Normal), std::domain_error);
  const std::vector<double> neg{1, -2, 3};
  EXPECT_THROW(kmeans_distances(neg, 2, DistanceFormat::LogScale), std::domain_error);
}

TEST(KMeansDistances, DeterministicAndAscending) {
  const auto objs = synthetic_objects(4, 80);
  std::vector<double> d;
  for (const auto& o : objs) d.push_back(distance_of(o.location));
  const auto a = kmeans_distances(d, 5, DistanceFormat::Squared, {3});
  const auto b = kmeans_distances(d, 5, DistanceFormat::Squared, {3});
  EXPECT_EQ(a.anchors, b.anchors);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE(std::is_sorted(a.anchors.begin(), a.anchors.end()));
}

TEST(KMeansDistances, MatchesDynamicProgrammingOracle) {
  std::mt19937_64 rng(2718);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + rng() % 181;
    const int k = 1 + static_cast<int>(rng() % 5);
    std::vector<double> d(n);
    std::uniform_real_distribution<double> u(2, 90);
    for (auto& x : d) x = u(rng);
    const auto res = kmeans_distances(d, k, DistanceFormat::Normal, {static_cast<std::uint64_t>(trial)});
    const double opt = oracle::dp_kmeans_1d(d, k);
    EXPECT_LE(std::abs(res.wcss - opt), 1e-9 * std::max(1.0, opt)) << "n=" << n << " k=" << k;
  }
}

TEST(KMeansDistances, SingleClusterIsFormatMean) {
  const std::vector<double> d{4, 9, 16, 25};
  EXPECT_NEAR(kmeans_distances(d, 1, DistanceFormat::Normal).anchors[0], 13.5, 1e-12);
  EXPECT_NEAR(kmeans_distances(d, 1, DistanceFormat::Squared).anchors[0], std::sqrt((16 + 81 + 256 + 625) / 4.0), 1e-12);
  EXPECT_NEAR(kmeans_distances(d, 1, DistanceFormat::LogScale).anchors[0], std::pow(4.0 * 9 * 16 * 25, 0.25), 1e-9);
}

TEST(KMeansDistances, DuplicatePointsRepairEmptyClusters) {
  const std::vector<double> d{5, 5, 5, 5, 30};
  const auto res = kmeans_distances(d, 2, DistanceFormat::Normal);
  EXPECT_NEAR(res.anchors[0], 5, 1e-12);
  EXPECT_NEAR(res.anchors[1], 30, 1e-12);
  const std::vector<double> same{7, 7, 7};
  const auto degenerate = kmeans_distances(same, 2, DistanceFormat::Normal);
  EXPECT_EQ(degenerate.anchors.size(), 2u);
  EXPECT_NEAR(degenerate.wcss, 0.0, 1e-12);
}

TEST(KMeansBoxes, IdenticalBoxes) {
  const std::vector<BoxDims> boxes(6, BoxDims{50, 80});
  const auto res = kmeans_boxes_iou(boxes, 1);
  ASSERT_EQ(res.anchors.size(), 1u);
  EXPECT_NEAR(res.anchors[0].h, 50, 1e-12);
  EXPECT_NEAR(res.anchors[0].w, 80, 1e-12);
}

TEST(KMeansBoxes, TwoScales) {
  const std::vector<BoxDims> boxes{{10, 10}, {12, 12}, {100, 100}, {110, 110}};
  const auto res = kmeans_boxes_iou(boxes, 2);
  EXPECT_NEAR(res.anchors[0].h, 11, 1e-12);
  EXPECT_NEAR(res.anchors[0].w, 11, 1e-12);
  EXPECT_NEAR(res.anchors[1].h, 105, 1e-12);
  EXPECT_NEAR(res.anchors[1].w, 105, 1e-12);
  // Brute force over partitions with mean-shape centroids.
  double best = 1e300;
  oracle::for_each_partition(boxes.size(), 2, [&](const std::vector<int>& labels) {
    double cost = 0.0;
    for (int c = 0; c < 2; ++c) {
      double h = 0, w = 0, n = 0;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (labels[i] == c) h += boxes[i].h, w += boxes[i].w, n += 1;
      }
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (labels[i] == c) cost += 1.0 - shape_iou(boxes[i], {h / n, w / n});
      }
    }
    best = std::min(best, cost);
  });
  EXPECT_NEAR(res.cost, best, 1e-12);
}

TEST(KMeansBoxes, SortedByArea) {
  const auto objs = synthetic_objects(9, 60);
  std::vector<BoxDims> boxes;
  for (const auto& o : objs) boxes.push_back(dims_of(o.bbox));
  const auto res = kmeans_boxes_iou(boxes, 5);
  for (std::size_t i = 1; i < res.anchors.size(); ++i) EXPECT_LE(res.anchors[i - 1].area(), res.anchors[i].area());
  EXPECT_THROW(kmeans_boxes_iou(std::vector<BoxDims>{{1, 1}}, 2), std::domain_error);
  EXPECT_THROW(kmeans_boxes_iou(std::vector<BoxDims>{{0, 1}}, 1), std::domain_error);
}

TEST(AverageDistance, Examples) {
  EXPECT_DOUBLE_EQ(average_distance(std::vector<double>{10}), 10);
  EXPECT_DOUBLE_EQ(average_distance(std::vector<double>{10, 20}), 15);
  EXPECT_THROW(average_distance(std::vector<double>{}), std::domain_error);
}

TEST(AverageBBox, Examples) {
  const auto one = average_bbox(std::vector<BoxDims>{{2, 1}});
  EXPECT_DOUBLE_EQ(one.h, 2);
  EXPECT_DOUBLE_EQ(one.w, 1);
  const auto two = average_bbox(std::vector<BoxDims>{{2, 1}, {4, 3}});
  EXPECT_NEAR(two.h, std::sqrt(13.0), 1e-12);
  EXPECT_NEAR(two.w, std::sqrt(38.0 / 6.0), 1e-12);
  EXPECT_NEAR(two.h, 3.6056, 1e-4);
  EXPECT_NEAR(two.w, 2.5166, 1e-4);
  const auto same = average_bbox(std::vector<BoxDims>(9, BoxDims{33, 47}));
  EXPECT_NEAR(same.h, 33, 1e-12);
  EXPECT_NEAR(same.w, 47, 1e-12);
  EXPECT_THROW(average_bbox(std::vector<BoxDims>{}), std::domain_error);
}

TEST(AverageBBoxProperty, WithinMemberRange) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(1, 300);
  for (int t = 0; t < 500; ++t) {
    std::vector<BoxDims> c(1 + rng() % 20);
    for (auto& b : c) b = {u(rng), u(rng)};
    const auto m = average_bbox(c);
    const auto [hmin, hmax] = std::minmax_element(c.begin(), c.end(), [](auto& a, auto& b) { return a.h < b.h; });
    const auto [wmin, wmax] = std::minmax_element(c.begin(), c.end(), [](auto& a, auto& b) { return a.w < b.w; });
    EXPECT_GE(m.h, hmin->h - 1e-9);
    EXPECT_LE(m.h, hmax->h + 1e-9);
    EXPECT_GE(m.w, wmin->w - 1e-9);
    EXPECT_LE(m.w, wmax->w + 1e-9);
  }
}

TEST(FormatProperty, PowerMeanOrderingOnFixedMembership) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(1, 90);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> c(1 + rng() % 30);
    for (auto& d : c) d = u(rng);
    double s = 0, s2 = 0, sl = 0;
    for (double d : c) s += d, s2 += d * d, sl += std::log(d);
    const double n = static_cast<double>(c.size());
    EXPECT_GE(std::sqrt(s2 / n), s / n - 1e-12);
    EXPECT_GE(s / n, std::exp(sl / n) - 1e-12);
    EXPECT_NEAR(kmeans_distances(c, 1, DistanceFormat::Squared).anchors[0], std::sqrt(s2 / n), 1e-9);
    EXPECT_NEAR(kmeans_distances(c, 1, DistanceFormat::LogScale).anchors[0], std::exp(sl / n), 1e-9);
  }
}

TEST(AnchorSets, DistanceSetUsesClusterAverageBoxes) {
  const std::vector<double> d{10, 11, 40, 42};
  const std::vector<BoxDims> b{{100, 200}, {90, 180}, {25, 50}, {24, 48}};
  const AnchorSet s = make_distance_anchor_set(d, b, 2, DistanceFormat::Normal);
  EXPECT_EQ(s.rule, AssignmentRule::NearestDistance);
  EXPECT_NEAR(s.distances[0], 10.5, 1e-12);
  EXPECT_NEAR(s.distances[1], 41, 1e-12);
  const auto near_box = average_bbox(std::vector<BoxDims>{{100, 200}, {90, 180}});
  EXPECT_NEAR(s.boxes[0].h, near_box.h, 1e-12);
  EXPECT_NEAR(s.boxes[0].w, near_box.w, 1e-12);
}

TEST(AnchorSets, BoxSetOrderedByAverageDistance) {
  const std::vector<double> d{10, 11, 40, 42};
  const std::vector<BoxDims> b{{100, 200}, {90, 180}, {25, 50}, {24, 48}};
  const AnchorSet s = make_box_anchor_set(d, b, 2, true);
  EXPECT_EQ(s.rule, AssignmentRule::BestBoxIoU);
  EXPECT_NEAR(s.distances[0], 10.5, 1e-12);
  EXPECT_NEAR(s.distances[1], 41, 1e-12);
  EXPECT_NEAR(s.boxes[0].h, 95, 1e-12);
  EXPECT_NEAR(s.boxes[1].w, 49, 1e-12);
  EXPECT_DOUBLE_EQ(s.prior_distance(1), 41);
  const AnchorSet none = make_box_anchor_set(d, b, 2, false);
  EXPECT_DOUBLE_EQ(none.prior_distance(1), 1.0);
}

TEST(AnchorFile, RoundTrip) {
  AnchorSet s = testutil::reference_anchors();
  const AnchorSet back = parse_anchor_set(serialize_anchor_set(s));
  EXPECT_EQ(back.format, s.format);
  EXPECT_EQ(back.distances, s.distances);
  EXPECT_EQ(back.boxes, s.boxes);
  EXPECT_EQ(back.rule, s.rule);
  s.rule = AssignmentRule::BestBoxIoU;
  s.distance_prior = false;
  const AnchorSet back2 = parse_anchor_set(serialize_anchor_set(s));
  EXPECT_EQ(back2.rule, AssignmentRule::BestBoxIoU);
  EXPECT_FALSE(back2.distance_prior);
}

TEST(AnchorFile, Errors) {
  EXPECT_THROW(parse_anchor_set("format normal\nk 2\nanchor 0 10 1 1\n"), ParseError);
  EXPECT_THROW(parse_anchor_set("format cubic\nk 1\nanchor 0 10 1 1\n"), ParseError);
  EXPECT_THROW(parse_anchor_set("format normal\nk 2\nanchor 0 10 1 1\nanchor 1 5 1 1\n"), ParseError);
  EXPECT_THROW(parse_anchor_set("format normal\nk 1\nanchor 0 -3 1 1\n"), ParseError);
  EXPECT_THROW(parse_anchor_set("format normal\nk 1\nbanana\n"), ParseError);
}

TEST(VarianceReport, IdenticalDistancesHaveZeroVariance) {
  std::vector<ObjectLabel> objs;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 40; ++i) {
    ObjectLabel o;
    o.location = Vec3(0, 0, 20);
    o.bbox = {0, 0, 10 + 90 * u(rng), 10 + 50 * u(rng)};
    objs.push_back(o);
  }
  for (auto g : {Grouping::ByBBox, Grouping::ByDistance}) {
    const auto r = cluster_variance_report(objs, 3, g);
    std::size_t total = 0;
    for (const auto& grp : r.groups) {
      EXPECT_NEAR(grp.variance, 0.0, 1e-12);
      total += grp.count;
    }
    EXPECT_EQ(total, objs.size());
  }
}

TEST(VarianceReportProperty, DistanceGroupingMinimizesWithinVariance) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto objs = synthetic_objects(seed, 120);
    for (int k : {2, 3, 5}) {
      const auto by_d = cluster_variance_report(objs, k, Grouping::ByDistance);
      const auto by_b = cluster_variance_report(objs, k, Grouping::ByBBox);
      EXPECT_LE(by_d.total_within_variance(), by_b.total_within_variance() + 1e-9);
      for (std::size_t i = 1; i < by_d.groups.size(); ++i) EXPECT_LE(by_d.groups[i - 1].mean, by_d.groups[i].mean);
      std::size_t nd = 0, nb = 0;
      for (const auto& g : by_d.groups) nd += g.count;
      for (const auto& g : by_b.groups) nb += g.count;
      EXPECT_EQ(nd, objs.size());
      EXPECT_EQ(nb, objs.size());
    }
  }
}

TEST(VarianceReport, MatchesHandComputedGroups) {
  std::vector<ObjectLabel> objs;
  for (double z : {10.0, 12.0, 50.0, 54.0, 58.0}) {
    ObjectLabel o;
    o.location = Vec3(0, 0, z);
    o.bbox = {0, 0, 500 / z, 300 / z};
    objs.push_back(o);
  }
  const auto r = cluster_variance_report(objs, 2, Grouping::ByDistance);
  EXPECT_EQ(r.groups[0].count, 2u);
  EXPECT_NEAR(r.groups[0].mean, 11, 1e-12);
  EXPECT_NEAR(r.groups[0].variance, 1, 1e-12);
  EXPECT_NEAR(r.groups[1].variance, 32.0 / 3.0, 1e-12);
}
