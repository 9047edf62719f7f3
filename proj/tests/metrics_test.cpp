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

#include <anchordist/metrics.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace anchordist;

TEST(DepthMetrics, PerfectPredictions) {
  const std::vector<double> z{4, 17.49, 60};
  const DepthMetrics m = compute_depth_metrics(z, z);
  EXPECT_EQ(m.delta1, 1.0);
  EXPECT_EQ(m.delta2, 1.0);
  EXPECT_EQ(m.abs_rel, 0.0);
  EXPECT_EQ(m.sqr_rel, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.rmse_log, 0.0);
  const std::vector<double> one{17.49};
  EXPECT_EQ(compute_depth_metrics(one, one).rmse, 0.0);
}

TEST(DepthMetrics, HandExample) {
  const std::vector<double> pred{10, 20}, gt{10, 25};
  const DepthMetrics m = compute_depth_metrics(pred, gt);
  EXPECT_EQ(m.delta1, 0.5);
  EXPECT_EQ(m.delta2, 1.0);
  EXPECT_NEAR(m.abs_rel, 0.1, 1e-15);
  EXPECT_NEAR(m.sqr_rel, 0.5, 1e-15);
  EXPECT_NEAR(m.rmse, std::sqrt(12.5), 1e-15);
  EXPECT_NEAR(m.rmse_log, std::sqrt(0.5) * std::log(1.25), 1e-15);
  EXPECT_NEAR(m.rmse_log, 0.157786, 1e-6);
}

TEST(DepthMetrics, Errors) {
  const std::vector<double> a{1, 2}, b{1}, z{0, 1};
  EXPECT_THROW(compute_depth_metrics(a, b), std::domain_error);
  EXPECT_THROW(compute_depth_metrics(a, z), std::domain_error);
  EXPECT_THROW(compute_depth_metrics(std::vector<double>{}, std::vector<double>{}), std::domain_error);
}

TEST(DepthMetricsProperty, MatchesNaiveOracleAndIsPermutationInvariant) {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(1, 90), noise(0.6, 1.6);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<double> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = u(rng);
      p[i] = g[i] * noise(rng);
    }
    const DepthMetrics m = compute_depth_metrics(p, g);
    const auto want = oracle::naive_depth_metrics(p, g);
    const double got[] = {m.delta1, m.delta2, m.abs_rel, m.sqr_rel, m.rmse, m.rmse_log};
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(got[i], want[static_cast<std::size_t>(i)], 1e-12);
    EXPECT_LE(m.delta1, m.delta2);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<double> ps, gs;
    for (auto i : idx) ps.push_back(p[i]), gs.push_back(g[i]);
    const DepthMetrics s = compute_depth_metrics(ps, gs);
    EXPECT_EQ(s.delta1, m.delta1);
    EXPECT_NEAR(s.rmse, m.rmse, 1e-12);
    EXPECT_NEAR(s.abs_rel, m.abs_rel, 1e-12);
  }
}

TEST(ErrorBins, IdenticalPairsAreZero) {
  const std::vector<Vec3> loc{{0, 0, 12}, {3, 1, 44}, {-2, 1, 71}};
  const auto edges = uniform_edges(0, 80, 5);
  const ErrorBins b = bin_errors_by_distance(loc, loc, edges);
  EXPECT_EQ(b.size(), 16u);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b.counts[i] == 0) {
      EXPECT_FALSE(b.mean_abs_z[i].has_value());
    } else {
      EXPECT_EQ(*b.mean_abs_z[i], 0.0);
      EXPECT_EQ(*b.mean_abs_x[i], 0.0);
    }
  }
}

TEST(ErrorBins, SinglePairLandsInItsBin) {
  const std::vector<Vec3> gt{{0, 0, 30}}, pred{{0, 0, 32}};
  const std::vector<double> edges{25, 35};
  const ErrorBins b = bin_errors_by_distance(pred, gt, edges);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b.counts[0], 1u);
  EXPECT_DOUBLE_EQ(*b.mean_abs_z[0], 2.0);
  EXPECT_DOUBLE_EQ(*b.mean_abs_x[0], 0.0);
}

TEST(ErrorBins, ErrorProportionalToDistanceIncreases) {
  std::vector<Vec3> gt, pred;
  for (double z = 1; z < 80; z += 0.5) {
    gt.push_back({0, 0, z});
    pred.push_back({0.01 * z, 0, 1.05 * z});
  }
  const auto edges = uniform_edges(0, 80, 5);
  const ErrorBins b = bin_errors_by_distance(pred, gt, edges);
  for (std::size_t i = 1; i < b.size(); ++i) {
    EXPECT_GT(*b.mean_abs_z[i], *b.mean_abs_z[i - 1]);
    EXPECT_GT(*b.mean_abs_x[i], *b.mean_abs_x[i - 1]);
  }
  EXPECT_EQ(b.bin_starting_at(10.0), std::optional<std::size_t>(2));
}

TEST(ErrorBins, Errors) {
  const std::vector<Vec3> a{{0, 0, 1}};
  EXPECT_THROW(bin_errors_by_distance(a, {}, uniform_edges(0, 10, 5)), std::domain_error);
  EXPECT_THROW(bin_errors_by_distance(a, a, std::vector<double>{5}), std::domain_error);
  EXPECT_THROW(bin_errors_by_distance(a, a, std::vector<double>{5, 5}), std::domain_error);
}

TEST(SelectPrediction, SinglePredictor) {
  const CameraIntrinsics cam{700, 700, 208, 208};
  const Letterbox lb = Letterbox::fit({416, 416}, {416, 416});
  const std::vector<Decoded> cell{{BBox2D::from_center(208, 208, 20, 20), 33.0}};
  const Selection s = select_in_cell(cell, {6, 6}, {0, 0, 30}, cam, lb);
  EXPECT_EQ(s.predictor, 0);
  EXPECT_NEAR(s.location.z(), 33.0, 1e-12);
  EXPECT_NEAR(s.error, 3.0, 1e-12);
}

TEST(SelectPrediction, NearestLocationOnAxis) {
  const CameraIntrinsics cam{700, 700, 208, 208};
  const Letterbox lb = Letterbox::fit({416, 416}, {416, 416});
  std::vector<Decoded> cell;
  for (double d : {17.49, 29.9, 45.27, 57.41, 71.52}) cell.push_back({BBox2D::from_center(208, 208, 20, 20), d});
  EXPECT_EQ(select_in_cell(cell, {6, 6}, {0, 0, 30}, cam, lb).predictor, 1);
}

TEST(SelectPrediction, TieGoesToLowerIndex) {
  const CameraIntrinsics cam{700, 700, 208, 208};
  const Letterbox lb = Letterbox::fit({416, 416}, {416, 416});
  const std::vector<Decoded> cell{{BBox2D::from_center(208, 208, 20, 20), 28.0},
                                  {BBox2D::from_center(208, 208, 20, 20), 32.0}};
  EXPECT_EQ(select_in_cell(cell, {6, 6}, {0, 0, 30}, cam, lb).predictor, 0);
}

TEST(SelectPrediction, UsesTheResponsibleCellThroughTheLetterbox) {
  const GridSpec grid{{416, 416}, 32, 2};
  AnchorSet anchors;
  anchors.distances = {10, 40};
  anchors.boxes = {{20, 20}, {10, 10}};
  RawPrediction raw(grid);
  const DecodedPrediction dec = decode(raw, anchors, grid);
  const CameraIntrinsics cam{721.5, 721.5, 609.6, 172.9};
  const Letterbox lb = Letterbox::fit({1242, 375}, {416, 416});
  ObjectLabel gt;
  gt.location = {0, 0, 38};
  const Vec2 c = project_to_image(cam, gt.location);
  gt.bbox = BBox2D::from_center(c.x(), c.y(), 30, 20);
  const auto sel = select_prediction_for_gt(dec, gt, grid, cam, lb);
  ASSERT_TRUE(sel.has_value());
  const BBox2D canvas = lb.to_canvas(gt.bbox);
  EXPECT_EQ(sel->cell, responsible_cell(canvas.center_x(), canvas.center_y(), grid));
  EXPECT_EQ(sel->predictor, 1);
  EXPECT_NEAR(distance_of(sel->location), 40.0, 1e-9);
  gt.bbox = BBox2D::from_center(-50, c.y(), 30, 20);
  EXPECT_FALSE(select_prediction_for_gt(dec, gt, grid, cam, lb).has_value());
}

TEST(MetricsTable, HasOneRowPerMethod) {
  const std::vector<double> z{10, 20};
  const std::vector<std::pair<std::string, DepthMetrics>> rows{{"a", compute_depth_metrics(z, z)},
                                                               {"method-b", compute_depth_metrics(z, z)}};
  const std::string t = format_metrics_table(rows);
  EXPECT_NE(t.find("AbsRel"), std::string::npos);
  EXPECT_NE(t.find("method-b"), std::string::npos);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 3);
}
