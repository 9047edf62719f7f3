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

#include <anchordist/head.hpp>
#include <anchordist/types.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

namespace anchordist {

inline double iou(const BBox2D& a, const BBox2D& b) {
  const double ix = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double iy = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

/// Complete-IoU terms for a predicted box against ground truth, with the
/// gradient of the loss w.r.t. the predicted (cx, cy, w, h). The aspect
/// weight alpha is treated as a constant when differentiating.
struct CIoUTerms {
  double loss = 0.0;
  double iou = 0.0;
  double rho2 = 0.0;   // squared center distance
  double c2 = 0.0;     // squared diagonal of the enclosing box
  double v = 0.0;      // aspect-ratio consistency
  double alpha = 0.0;
  std::array<double, 4> grad{};  // d loss / d (cx, cy, w, h)
};

inline constexpr double kEnclosingEpsilon = 1e-9;
inline constexpr double kEdgeTieTolerance = 1e-12;

/// With `frozen_alpha` the aspect weight is fixed at that value instead of
/// being recomputed from the boxes.
inline CIoUTerms ciou_terms(const BBox2D& pred, const BBox2D& gt, std::optional<double> frozen_alpha = std::nullopt) {
  CIoUTerms out;
  const double w = pred.width();
  const double h = pred.height();

  // Intersection and its derivatives w.r.t. the predicted edges.
  const double ix = std::min(pred.right, gt.right) - std::max(pred.left, gt.left);
  const double iy = std::min(pred.bottom, gt.bottom) - std::max(pred.top, gt.top);
  double inter = 0.0;
  double di_l = 0.0, di_r = 0.0, di_t = 0.0, di_b = 0.0;
  // Edges coinciding to within rounding take the mean of the one-sided
  // derivatives, so an exact match has zero gradient.
  auto below = [](double a, double b) {
    if (std::abs(a - b) <= kEdgeTieTolerance * std::max({1.0, std::abs(a), std::abs(b)})) return 0.5;
    return a < b ? 1.0 : 0.0;
  };
  if (ix > 0.0 && iy > 0.0) {
    inter = ix * iy;
    di_r = below(pred.right, gt.right) * iy;
    di_l = -below(gt.left, pred.left) * iy;
    di_b = below(pred.bottom, gt.bottom) * ix;
    di_t = -below(gt.top, pred.top) * ix;
  }
  const double d_inter_cx = di_l + di_r;
  const double d_inter_cy = di_t + di_b;
  const double d_inter_w = 0.5 * (di_r - di_l);
  const double d_inter_h = 0.5 * (di_b - di_t);

  const double uni = w * h + gt.area() - inter;
  out.iou = uni > 0.0 ? inter / uni : 0.0;
  auto d_iou = [&](double d_inter, double d_area) {
    return uni > 0.0 ? (d_inter * uni - inter * (d_area - d_inter)) / (uni * uni) : 0.0;
  };
  const std::array<double, 4> g_iou{d_iou(d_inter_cx, 0.0), d_iou(d_inter_cy, 0.0), d_iou(d_inter_w, h),
                                    d_iou(d_inter_h, w)};

  // Normalized center distance.
  const double dx = pred.center_x() - gt.center_x();
  const double dy = pred.center_y() - gt.center_y();
  out.rho2 = dx * dx + dy * dy;
  const double ew = std::max(pred.right, gt.right) - std::min(pred.left, gt.left);
  const double eh = std::max(pred.bottom, gt.bottom) - std::min(pred.top, gt.top);
  out.c2 = ew * ew + eh * eh;
  const double c2 = std::max(out.c2, kEnclosingEpsilon);
  std::array<double, 4> g_dist{};
  if (out.c2 > kEnclosingEpsilon) {
    const double de_r = below(gt.right, pred.right) * 2.0 * ew;
    const double de_l = -below(pred.left, gt.left) * 2.0 * ew;
    const double de_b = below(gt.bottom, pred.bottom) * 2.0 * eh;
    const double de_t = -below(pred.top, gt.top) * 2.0 * eh;
    const std::array<double, 4> dc2{de_l + de_r, de_t + de_b, 0.5 * (de_r - de_l), 0.5 * (de_b - de_t)};
    const std::array<double, 4> drho2{2.0 * dx, 2.0 * dy, 0.0, 0.0};
    for (std::size_t i = 0; i < 4; ++i) g_dist[i] = (drho2[i] * c2 - out.rho2 * dc2[i]) / (c2 * c2);
  }

  // Aspect-ratio term.
  constexpr double kAspect = 4.0 / (std::numbers::pi * std::numbers::pi);
  const double delta = std::atan2(gt.width(), gt.height()) - std::atan2(w, h);
  out.v = kAspect * delta * delta;
  const double denom = (1.0 - out.iou) + out.v;
  out.alpha = frozen_alpha ? *frozen_alpha : (denom > 0.0 ? out.v / denom : 0.0);
  const double r2 = w * w + h * h;
  std::array<double, 4> g_v{};
  if (r2 > 0.0) g_v = {0.0, 0.0, -2.0 * kAspect * delta * h / r2, 2.0 * kAspect * delta * w / r2};

  out.loss = 1.0 - out.iou + out.rho2 / c2 + out.alpha * out.v;
  for (std::size_t i = 0; i < 4; ++i) out.grad[i] = -g_iou[i] + g_dist[i] + out.alpha * g_v[i];
  return out;
}

inline double ciou_loss(const BBox2D& pred, const BBox2D& gt) { return ciou_terms(pred, gt).loss; }

inline double distance_l2_loss(double pred_d, double gt_d) {
  const double e = pred_d - gt_d;
  return e * e;
}

/// Loss at one assigned (cell, predictor) slot. Gradients are w.r.t. the raw
/// channels in (a, b, u, v, t) order.
struct LossBreakdown {
  double ciou_loss = 0.0;
  double distance_loss = 0.0;  // m^2
  double total = 0.0;          // ciou_loss + lambda * distance_loss
  std::array<double, 5> ciou_grad{};
  std::array<double, 5> distance_grad{};  // of lambda * distance_loss
  std::array<double, 5> grad{};
  double alpha = 0.0;  // aspect weight used by the CIoU term
};

inline constexpr double kDefaultDistanceWeight = 0.1;

inline LossBreakdown loss_and_grad(const RawOutput& raw, Cell cell, int predictor, const Target& target,
                                   const AnchorSet& anchors, const GridSpec& grid,
                                   double lambda = kDefaultDistanceWeight,
                                   std::optional<double> frozen_alpha = std::nullopt) {
  const Decoded dec = decode_entry(raw, cell, predictor, anchors, grid);
  const CIoUTerms box = ciou_terms(dec.box, target.box, frozen_alpha);
  const double sa = sigmoid(raw.a);
  const double sb = sigmoid(raw.b);
  const double s = grid.stride;

  LossBreakdown out;
  out.ciou_loss = box.loss;
  out.alpha = box.alpha;
  out.ciou_grad = {box.grad[0] * s * sa * (1.0 - sa), box.grad[1] * s * sb * (1.0 - sb),
                   box.grad[3] * dec.box.height(), box.grad[2] * dec.box.width(), 0.0};
  out.distance_loss = distance_l2_loss(dec.distance, target.distance);
  out.distance_grad = {0.0, 0.0, 0.0, 0.0, lambda * 2.0 * (dec.distance - target.distance) * dec.distance};
  out.total = out.ciou_loss + lambda * out.distance_loss;
  for (std::size_t i = 0; i < 5; ++i) out.grad[i] = out.ciou_grad[i] + out.distance_grad[i];
  return out;
}

/// |analytic - numeric| / max(|analytic|, |numeric|, floor): relative where
/// the gradient is resolvable, absolute below `floor`.
inline double gradient_relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Worst relative error between analytic and central-difference gradients
/// over the five raw channels of the total loss. The perturbed losses keep
/// the aspect weight of the unperturbed point, matching the differentiated
/// function. The two loss terms are differenced separately so a large
/// distance loss does not swamp the box-channel differences in rounding.
inline double finite_diff_check(const RawOutput& raw, Cell cell, int predictor, const Target& target,
                                const AnchorSet& anchors, const GridSpec& grid,
                                double lambda = kDefaultDistanceWeight, double step = 1e-5) {
  const LossBreakdown base = loss_and_grad(raw, cell, predictor, target, anchors, grid, lambda);
  const auto& analytic = base.grad;
  double worst = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    auto plus = raw.as_array();
    auto minus = raw.as_array();
    plus[i] += step;
    minus[i] -= step;
    const LossBreakdown fp =
        loss_and_grad(RawOutput::from_array(plus), cell, predictor, target, anchors, grid, lambda, base.alpha);
    const LossBreakdown fm =
        loss_and_grad(RawOutput::from_array(minus), cell, predictor, target, anchors, grid, lambda, base.alpha);
    const double numeric = (fp.ciou_loss - fm.ciou_loss) / (2.0 * step) +
                           lambda * (fp.distance_loss - fm.distance_loss) / (2.0 * step);
    worst = std::max(worst, gradient_relative_error(analytic[i], numeric));
  }
  return worst;
}

}  // namespace anchordist
