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
#include <anchordist/data.hpp>
#include <anchordist/head.hpp>
#include <anchordist/losses.hpp>
#include <anchordist/metrics.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace anchordist {

/// Shared per-cell model: flattened stride x stride patch -> leaky-ReLU hidden
/// layer -> k x 5 raw outputs in (a, b, u, v, t) order per predictor.
struct TinyModel {
  Eigen::MatrixXd w1;  // hidden x patch_dim
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // (k * 5) x hidden
  Eigen::VectorXd b2;
  double slope = 0.1;

  static TinyModel zeros(int patch_dim, int hidden, int k) {
    TinyModel m;
    m.w1 = Eigen::MatrixXd::Zero(hidden, patch_dim);
    m.b1 = Eigen::VectorXd::Zero(hidden);
    m.w2 = Eigen::MatrixXd::Zero(k * 5, hidden);
    m.b2 = Eigen::VectorXd::Zero(k * 5);
    return m;
  }

  /// Weights and biases uniform in +-1/sqrt(fan_in).
  static TinyModel random(int patch_dim, int hidden, int k, std::uint64_t seed) {
    TinyModel m = zeros(patch_dim, hidden, k);
    std::mt19937_64 rng(detail::splitmix64(seed));
    auto fill = [&](auto& x, int fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = dist(rng);
    };
    fill(m.w1, patch_dim);
    fill(m.b1, patch_dim);
    fill(m.w2, hidden);
    fill(m.b2, hidden);
    return m;
  }

  int patch_dim() const { return static_cast<int>(w1.cols()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  int k() const { return static_cast<int>(w2.rows() / 5); }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
  }

  /// Visits every parameter block in a fixed order.
  template <typename Fn>
  void for_each_block(Fn&& fn) {
    fn(w1.data(), w1.size());
    fn(b1.data(), b1.size());
    fn(w2.data(), w2.size());
    fn(b2.data(), b2.size());
  }
};

inline Eigen::VectorXd extract_patch(const GrayImage& image, Cell cell, int stride) {
  Eigen::VectorXd patch(static_cast<Eigen::Index>(stride) * stride);
  const int x0 = cell.col * stride;
  const int y0 = cell.row * stride;
  for (int y = 0; y < stride; ++y) {
    for (int x = 0; x < stride; ++x) patch[y * stride + x] = image.at(x0 + x, y0 + y);
  }
  return patch;
}

/// Hidden pre-activations and outputs of one cell, kept for backpropagation.
struct CellActivation {
  Eigen::VectorXd pre;
  Eigen::VectorXd hidden;
  Eigen::VectorXd out;

  RawOutput predictor(int p) const {
    const auto i = static_cast<Eigen::Index>(p) * 5;
    return {out[i], out[i + 1], out[i + 2], out[i + 3], out[i + 4]};
  }
};

inline CellActivation forward_cell(const TinyModel& model, const Eigen::VectorXd& patch) {
  if (patch.size() != model.w1.cols()) throw std::domain_error("forward: patch size does not match the model");
  CellActivation act;
  act.pre = model.w1 * patch + model.b1;
  act.hidden = act.pre.unaryExpr([s = model.slope](double z) { return z > 0.0 ? z : s * z; });
  act.out = model.w2 * act.hidden + model.b2;
  return act;
}

inline void check_model_grid(const TinyModel& model, const GridSpec& grid) {
  grid.validate();
  if (model.patch_dim() != grid.stride * grid.stride) throw std::domain_error("model patch size does not match grid stride");
  if (model.k() != grid.k || model.w2.rows() != grid.k * 5) throw std::domain_error("model outputs do not match grid k");
}

/// Runs the shared model over every cell.
inline RawPrediction forward(const TinyModel& model, const GrayImage& image, const GridSpec& grid) {
  check_model_grid(model, grid);
  if (image.size() != grid.image) throw std::domain_error("forward: image size does not match grid");
  RawPrediction raw(grid);
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      const auto act = forward_cell(model, extract_patch(image, {c, r}, grid.stride));
      auto dst = raw.cell(r, c);
      std::copy(act.out.data(), act.out.data() + act.out.size(), dst.begin());
    }
  }
  return raw;
}

// ---------------------------------------------------------------------------
// Configuration

/// Which priors the predictors receive.
enum class PriorVariant {
  AnchorDistance,      // distance clustering, anchor distance, nearest-distance assignment
  BoxAverageDistance,  // IoU box clustering, average distance of each box group
  BoxNoPrior,          // IoU box clustering, d = exp(t)
};

inline std::string_view variant_name(PriorVariant v) {
  switch (v) {
    case PriorVariant::AnchorDistance: return "anchor-distance";
    case PriorVariant::BoxAverageDistance: return "box-avg-distance";
    case PriorVariant::BoxNoPrior: return "box-no-prior";
  }
  return "anchor-distance";
}

inline PriorVariant parse_variant(std::string_view s) {
  if (s == "anchor-distance" || s == "distance") return PriorVariant::AnchorDistance;
  if (s == "box-avg-distance" || s == "box-avg") return PriorVariant::BoxAverageDistance;
  if (s == "box-no-prior" || s == "no-prior") return PriorVariant::BoxNoPrior;
  throw ConfigError("unknown prior variant '" + std::string(s) + "'");
}

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;             // scenes per step
  double learning_rate = 1e-4;
  double lambda = kDefaultDistanceWeight;
  std::uint64_t seed = 0;
  DistanceFormat format = DistanceFormat::Squared;
  int k = 5;
  int stride = 32;
  ImageSize input{416, 416};
  int hidden = 64;
  PriorVariant variant = PriorVariant::AnchorDistance;
  DistanceTarget target = DistanceTarget::Euclidean;
  KMeansOptions kmeans{};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  GridSpec grid() const { return {input, stride, k}; }

  void validate() const {
    if (epochs < 0 || batch_size < 1 || !(learning_rate > 0.0) || lambda < 0.0 || k < 1 || stride < 1 || hidden < 1) {
      throw ConfigError("train config: values must be positive");
    }
    if (input.width <= 0 || input.height <= 0 || input.width % stride != 0 || input.height % stride != 0) {
      throw ConfigError("train config: input resolution must be divisible by the stride");
    }
  }
};

/// Anchor set for `variant` built from every object in `frames`, with boxes
/// expressed in network-input pixels.
inline AnchorSet build_anchor_set(const Dataset& frames, PriorVariant variant, int k, DistanceFormat format,
                                  ImageSize input, const KMeansOptions& opts = {},
                                  DistanceTarget target = DistanceTarget::Euclidean) {
  std::vector<double> distances;
  std::vector<BoxDims> boxes;
  for (const auto& f : frames) {
    const Letterbox lb = Letterbox::fit(f.scene.image_size, input);
    for (const auto& o : f.scene.objects) {
      distances.push_back(target_distance(o, target));
      boxes.push_back(dims_of(lb.to_canvas(o.bbox)));
    }
  }
  switch (variant) {
    case PriorVariant::AnchorDistance: return make_distance_anchor_set(distances, boxes, k, format, opts);
    case PriorVariant::BoxAverageDistance: return make_box_anchor_set(distances, boxes, k, true, opts);
    case PriorVariant::BoxNoPrior: return make_box_anchor_set(distances, boxes, k, false, opts);
  }
  throw ConfigError("unknown prior variant");
}

/// Rescales anchor boxes, e.g. from source-image to network-input pixels.
inline AnchorSet scale_anchor_boxes(AnchorSet set, double scale) {
  for (auto& b : set.boxes) b = {b.h * scale, b.w * scale};
  return set;
}

// ---------------------------------------------------------------------------
// Prepared training data

/// One assigned (cell, predictor) slot with its input patch.
struct TrainingSlot {
  Eigen::VectorXd patch;
  Cell cell;
  int predictor = 0;
  Target target;
  std::size_t object = 0;
};

struct PreparedFrame {
  std::vector<Target> targets;  // index-aligned with scene.objects
  Assignment assignment;
  std::vector<TrainingSlot> slots;
};

inline std::vector<Target> make_targets(const Scene& scene, ImageSize input, DistanceTarget target) {
  const Letterbox lb = Letterbox::fit(scene.image_size, input);
  std::vector<Target> targets;
  targets.reserve(scene.objects.size());
  for (const auto& o : scene.objects) targets.push_back({lb.to_canvas(o.bbox), target_distance(o, target)});
  return targets;
}

/// Renders each frame once and keeps only the patches of assigned slots.
inline std::vector<PreparedFrame> prepare_frames(const Dataset& frames, const AnchorSet& anchors,
                                                 const GridSpec& grid, DistanceTarget target) {
  std::vector<PreparedFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    PreparedFrame pf;
    pf.targets = make_targets(f.scene, grid.image, target);
    pf.assignment = assign_all(pf.targets, anchors, grid);
    if (!pf.assignment.slots.empty()) {
      const GrayImage image = render_scene(f.scene, grid.image);
      for (const auto& s : pf.assignment.slots) {
        pf.slots.push_back({extract_patch(image, s.cell, grid.stride), s.cell, s.predictor, pf.targets[s.object], s.object});
      }
    }
    out.push_back(std::move(pf));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradients and optimization

/// Gradient buffers shaped like a TinyModel.
struct ModelGradient {
  Eigen::MatrixXd w1, w2;
  Eigen::VectorXd b1, b2;

  explicit ModelGradient(const TinyModel& m)
      : w1(Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols())),
        w2(Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols())),
        b1(Eigen::VectorXd::Zero(m.b1.size())),
        b2(Eigen::VectorXd::Zero(m.b2.size())) {}

  template <typename Fn>
  void for_each_block(Fn&& fn) {
    fn(w1.data(), w1.size());
    fn(b1.data(), b1.size());
    fn(w2.data(), w2.size());
    fn(b2.data(), b2.size());
  }
};

/// Mean loss over a set of slots; `mean` reports the averaged breakdown.
struct BatchLoss {
  double total = 0.0;
  double ciou = 0.0;
  double distance = 0.0;
  std::size_t count = 0;
  std::vector<double> alphas;  // per-slot CIoU aspect weight
};

/// Mean loss over `slots` and its gradient w.r.t. every model parameter.
/// Summation follows slot order. `frozen_alpha`, when non-empty, fixes the
/// per-slot aspect weights.
inline BatchLoss batch_loss_and_gradient(const TinyModel& model, std::span<const TrainingSlot* const> slots,
                                         const AnchorSet& anchors, const GridSpec& grid, double lambda,
                                         ModelGradient* grad, std::span<const double> frozen_alpha = {}) {
  BatchLoss loss;
  loss.count = slots.size();
  if (slots.empty()) return loss;
  const double inv = 1.0 / static_cast<double>(slots.size());
  Eigen::VectorXd g_out(model.w2.rows());
  if (!frozen_alpha.empty() && frozen_alpha.size() != slots.size()) {
    throw std::domain_error("batch_loss_and_gradient: one frozen aspect weight per slot");
  }
  loss.alphas.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const TrainingSlot* s = slots[i];
    const CellActivation act = forward_cell(model, s->patch);
    std::optional<double> alpha;
    if (!frozen_alpha.empty()) alpha = frozen_alpha[i];
    const LossBreakdown lb =
        loss_and_grad(act.predictor(s->predictor), s->cell, s->predictor, s->target, anchors, grid, lambda, alpha);
    loss.alphas.push_back(lb.alpha);
    loss.total += lb.total * inv;
    loss.ciou += lb.ciou_loss * inv;
    loss.distance += lb.distance_loss * inv;
    if (grad == nullptr) continue;
    g_out.setZero();
    for (int c = 0; c < 5; ++c) g_out[s->predictor * 5 + c] = lb.grad[static_cast<std::size_t>(c)] * inv;
    const auto row0 = static_cast<Eigen::Index>(s->predictor) * 5;
    const Eigen::VectorXd g5 = g_out.segment(row0, 5);
    grad->w2.middleRows(row0, 5).noalias() += g5 * act.hidden.transpose();
    grad->b2.segment(row0, 5) += g5;
    Eigen::VectorXd g_hidden = model.w2.middleRows(row0, 5).transpose() * g5;
    for (Eigen::Index j = 0; j < g_hidden.size(); ++j) {
      if (!(act.pre[j] > 0.0)) g_hidden[j] *= model.slope;
    }
    grad->w1.noalias() += g_hidden * s->patch.transpose();
    grad->b1 += g_hidden;
  }
  return loss;
}

/// Adaptive-moment optimizer state.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(const TinyModel& model) : m(model.parameter_count(), 0.0), v(model.parameter_count(), 0.0) {}
};

inline void adam_update(TinyModel& model, ModelGradient& grad, AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::vector<double*> params;
  std::vector<Eigen::Index> sizes;
  model.for_each_block([&](double* p, Eigen::Index n) {
    params.push_back(p);
    sizes.push_back(n);
  });
  std::size_t offset = 0;
  std::size_t block = 0;
  grad.for_each_block([&](double* g, Eigen::Index n) {
    double* p = params[block++];
    for (Eigen::Index i = 0; i < n; ++i) {
      double& m = state.m[offset];
      double& v = state.v[offset];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g[i];
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g[i] * g[i];
      p[i] -= cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.adam_epsilon);
      ++offset;
    }
  });
}

/// One optimizer step on the slots of `batch`. A batch without assigned
/// objects leaves the model and optimizer state untouched.
inline BatchLoss backward_step(TinyModel& model, AdamState& state, std::span<const PreparedFrame* const> batch,
                               const AnchorSet& anchors, const GridSpec& grid, const TrainConfig& cfg) {
  std::vector<const TrainingSlot*> slots;
  for (const PreparedFrame* f : batch) {
    for (const auto& s : f->slots) slots.push_back(&s);
  }
  if (slots.empty()) return {};
  ModelGradient grad(model);
  const BatchLoss loss = batch_loss_and_gradient(model, slots, anchors, grid, cfg.lambda, &grad);
  adam_update(model, grad, state, cfg);
  return loss;
}

struct EpochRecord {
  int epoch = 0;
  double total = 0.0;
  double ciou = 0.0;
  double distance = 0.0;
  std::vector<std::size_t> assigned;  // per predictor
};

struct TrainResult {
  TinyModel model;
  AnchorSet anchors;
  GridSpec grid;
  DistanceTarget target = DistanceTarget::Euclidean;
  std::vector<EpochRecord> history;
};

/// Deterministic for a fixed config: scenes are shuffled each epoch from
/// `cfg.seed` and gradients are summed in slot order.
inline TrainResult train(const Dataset& frames, const TrainConfig& cfg, std::optional<AnchorSet> anchors = std::nullopt) {
  cfg.validate();
  if (frames.empty()) throw std::domain_error("train: empty dataset");
  TrainResult result;
  result.grid = cfg.grid();
  result.target = cfg.target;
  result.anchors = anchors ? *anchors
                           : build_anchor_set(frames, cfg.variant, cfg.k, cfg.format, cfg.input, cfg.kmeans, cfg.target);
  check_compatible(result.anchors, result.grid);
  result.model = TinyModel::random(cfg.stride * cfg.stride, cfg.hidden, cfg.k, cfg.seed);

  const auto prepared = prepare_frames(frames, result.anchors, result.grid, cfg.target);
  std::vector<std::size_t> assigned(static_cast<std::size_t>(cfg.k), 0);
  for (const auto& pf : prepared) {
    for (const auto& s : pf.slots) ++assigned[static_cast<std::size_t>(s.predictor)];
  }

  AdamState state(result.model);
  std::mt19937_64 rng(detail::splitmix64(cfg.seed ^ 0x5EEDull));
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const PreparedFrame*> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.assigned = assigned;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) batch.push_back(&prepared[order[i]]);
      const BatchLoss loss = backward_step(result.model, state, batch, result.anchors, result.grid, cfg);
      const auto n = static_cast<double>(loss.count);
      rec.total += loss.total * n;
      rec.ciou += loss.ciou * n;
      rec.distance += loss.distance * n;
      seen += loss.count;
    }
    if (seen > 0) {
      rec.total /= static_cast<double>(seen);
      rec.ciou /= static_cast<double>(seen);
      rec.distance /= static_cast<double>(seen);
    }
    result.history.push_back(std::move(rec));
  }
  return result;
}

inline std::string history_csv(std::span<const EpochRecord> history) {
  std::ostringstream os;
  os << "epoch,total,ciou,distance";
  const std::size_t k = history.empty() ? 0 : history.front().assigned.size();
  for (std::size_t p = 0; p < k; ++p) os << ",assigned_" << p;
  os << "\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << detail::fmt_double(r.total) << ',' << detail::fmt_double(r.ciou) << ','
       << detail::fmt_double(r.distance);
    for (auto c : r.assigned) os << ',' << c;
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Evaluation

/// One ground-truth object matched to its selected prediction.
struct EvalPair {
  std::size_t frame = 0;
  std::size_t object = 0;
  Vec3 gt = Vec3::Zero();
  Vec3 pred = Vec3::Zero();
  int predictor = 0;
};

/// GT-matched evaluation: each object's responsible cell is run through the
/// model and its best predictor kept. Objects whose box center leaves the
/// grid are skipped.
inline std::vector<EvalPair> evaluate(const TinyModel& model, const AnchorSet& anchors, const GridSpec& grid,
                                      const Dataset& frames) {
  check_model_grid(model, grid);
  check_compatible(anchors, grid);
  std::vector<EvalPair> pairs;
  std::vector<Decoded> decoded(static_cast<std::size_t>(grid.k));
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const Scene& scene = frames[fi].scene;
    if (scene.objects.empty()) continue;
    const GrayImage image = render_scene(scene, grid.image);
    const Letterbox lb = Letterbox::fit(scene.image_size, grid.image);
    for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
      const auto& obj = scene.objects[oi];
      const BBox2D box = lb.to_canvas(obj.bbox);
      if (!(box.center_x() >= 0.0 && box.center_x() <= grid.image.width && box.center_y() >= 0.0 &&
            box.center_y() <= grid.image.height)) {
        continue;
      }
      const Cell cell = responsible_cell(box.center_x(), box.center_y(), grid);
      const CellActivation act = forward_cell(model, extract_patch(image, cell, grid.stride));
      for (int p = 0; p < grid.k; ++p) decoded[static_cast<std::size_t>(p)] = decode_entry(act.predictor(p), cell, p, anchors, grid);
      const Selection sel = select_in_cell(decoded, cell, obj.location, scene.intrinsics, lb);
      pairs.push_back({fi, oi, obj.location, sel.location, sel.predictor});
    }
  }
  return pairs;
}

inline DepthMetrics depth_metrics_of(std::span<const EvalPair> pairs) {
  std::vector<double> pred, gt;
  for (const auto& p : pairs) {
    pred.push_back(p.pred.z());
    gt.push_back(p.gt.z());
  }
  return compute_depth_metrics(pred, gt);
}

inline ErrorBins error_bins_of(std::span<const EvalPair> pairs, std::span<const double> edges) {
  std::vector<Vec3> pred, gt;
  for (const auto& p : pairs) {
    pred.push_back(p.pred);
    gt.push_back(p.gt);
  }
  return bin_errors_by_distance(pred, gt, edges);
}

/// Per-predictor spread of assigned ground-truth distances and of the
/// distances that predictor estimates for them.
struct PredictorSpecialization {
  std::size_t count = 0;
  double assigned_mean = 0.0;
  double assigned_variance = 0.0;
  double predicted_mean = 0.0;
  double predicted_variance = 0.0;
};

/// Every object inside the grid is attributed to the predictor its assignment
/// rule selects (slot conflicts are not removed here).
inline std::vector<PredictorSpecialization> specialization_report(const TinyModel& model, const Dataset& frames,
                                                                  const AnchorSet& anchors, const GridSpec& grid,
                                                                  DistanceTarget target = DistanceTarget::Euclidean) {
  check_model_grid(model, grid);
  check_compatible(anchors, grid);
  std::vector<double> assigned, predicted;
  std::vector<int> labels;
  for (const auto& f : frames) {
    if (f.scene.objects.empty()) continue;
    const GrayImage image = render_scene(f.scene, grid.image);
    const auto targets = make_targets(f.scene, grid.image, target);
    for (const auto& t : targets) {
      const double cx = t.box.center_x();
      const double cy = t.box.center_y();
      if (!(cx >= 0.0 && cx <= grid.image.width && cy >= 0.0 && cy <= grid.image.height)) continue;
      const Cell cell = responsible_cell(cx, cy, grid);
      const int p = assign_target(t, anchors);
      const CellActivation act = forward_cell(model, extract_patch(image, cell, grid.stride));
      assigned.push_back(t.distance);
      predicted.push_back(decode_entry(act.predictor(p), cell, p, anchors, grid).distance);
      labels.push_back(p);
    }
  }
  const auto a = group_statistics(assigned, labels, grid.k);
  const auto b = group_statistics(predicted, labels, grid.k);
  std::vector<PredictorSpecialization> out(static_cast<std::size_t>(grid.k));
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = {a[p].count, a[p].mean, a[p].variance, b[p].mean, b[p].variance};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace detail {

inline void write_tensor(std::ostringstream& os, const char* name, const double* data, Eigen::Index rows,
                         Eigen::Index cols) {
  os << "tensor " << name << ' ' << rows << ' ' << cols << '\n';
  // Row-major values, one row per line.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (c) os << ' ';
      os << fmt_double(data[c * rows + r]);
    }
    os << '\n';
  }
}

}  // namespace detail

/// Versioned text checkpoint: header, the anchor set used by the head, then
/// each parameter tensor with its shape.
inline std::string serialize_checkpoint(const TrainResult& r) {
  std::ostringstream os;
  os << "anchordist-checkpoint 1\n";
  os << "input " << r.grid.image.width << ' ' << r.grid.image.height << '\n';
  os << "stride " << r.grid.stride << '\n';
  os << "target " << (r.target == DistanceTarget::Euclidean ? "euclidean" : "depth") << '\n';
  os << "slope " << detail::fmt_double(r.model.slope) << '\n';
  os << "anchors-begin\n" << serialize_anchor_set(r.anchors) << "anchors-end\n";
  detail::write_tensor(os, "w1", r.model.w1.data(), r.model.w1.rows(), r.model.w1.cols());
  detail::write_tensor(os, "b1", r.model.b1.data(), r.model.b1.size(), 1);
  detail::write_tensor(os, "w2", r.model.w2.data(), r.model.w2.rows(), r.model.w2.cols());
  detail::write_tensor(os, "b2", r.model.b2.data(), r.model.b2.size(), 1);
  return os.str();
}

inline TrainResult parse_checkpoint(std::string_view text) {
  const auto lines = detail::split_lines(text);
  std::size_t n = 0;
  auto fields = [&](std::size_t i) { return detail::split_ws(lines.at(i)); };
  auto fail = [&](const std::string& what) { return ParseError(static_cast<int>(n) + 1, what); };
  if (lines.empty() || lines[0] != "anchordist-checkpoint 1") throw ParseError(1, "not an anchordist checkpoint (version 1)");
  TrainResult r;
  std::string anchor_text;
  bool have_anchors = false;
  Eigen::Index hidden = -1, patch = -1, outputs = -1;
  for (n = 1; n < lines.size(); ++n) {
    const auto f = fields(n);
    if (f.empty()) continue;
    if (f[0] == "input" && f.size() == 3) {
      const auto w = detail::to_int(f[1]);
      const auto h = detail::to_int(f[2]);
      if (!w || !h) throw fail("bad input size");
      r.grid.image = {*w, *h};
    } else if (f[0] == "stride" && f.size() == 2) {
      const auto s = detail::to_int(f[1]);
      if (!s) throw fail("bad stride");
      r.grid.stride = *s;
    } else if (f[0] == "target" && f.size() == 2) {
      if (f[1] == "euclidean") r.target = DistanceTarget::Euclidean;
      else if (f[1] == "depth") r.target = DistanceTarget::Depth;
      else throw fail("bad target");
    } else if (f[0] == "slope" && f.size() == 2) {
      const auto s = detail::to_double(f[1]);
      if (!s) throw fail("bad slope");
      r.model.slope = *s;
    } else if (f[0] == "anchors-begin") {
      for (++n; n < lines.size() && lines[n] != "anchors-end"; ++n) anchor_text += std::string(lines[n]) + "\n";
      if (n == lines.size()) throw fail("unterminated anchor block");
      r.anchors = parse_anchor_set(anchor_text);
      have_anchors = true;
    } else if (f[0] == "tensor" && f.size() == 4) {
      const auto rows = detail::to_int(f[2]);
      const auto cols = detail::to_int(f[3]);
      if (!rows || !cols || *rows <= 0 || *cols <= 0) throw fail("bad tensor shape");
      Eigen::MatrixXd m(*rows, *cols);
      for (int rr = 0; rr < *rows; ++rr) {
        ++n;
        if (n >= lines.size()) throw fail("truncated tensor");
        const auto vals = fields(n);
        if (static_cast<int>(vals.size()) != *cols) throw fail("tensor row has the wrong length");
        for (int c = 0; c < *cols; ++c) {
          const auto v = detail::to_double(vals[static_cast<std::size_t>(c)]);
          if (!v) throw fail("tensor value is not a number");
          m(rr, c) = *v;
        }
      }
      if (f[1] == "w1") {
        r.model.w1 = m;
        hidden = m.rows();
        patch = m.cols();
      } else if (f[1] == "b1") {
        r.model.b1 = m.col(0);
      } else if (f[1] == "w2") {
        r.model.w2 = m;
        outputs = m.rows();
      } else if (f[1] == "b2") {
        r.model.b2 = m.col(0);
      } else {
        throw fail("unknown tensor");
      }
    } else {
      throw fail("unexpected line");
    }
  }
  if (!have_anchors || hidden < 0 || outputs < 0 || r.model.b1.size() != hidden || r.model.b2.size() != outputs ||
      r.model.w2.cols() != hidden || outputs % 5 != 0) {
    throw ParseError(0, "checkpoint is incomplete or inconsistent");
  }
  r.grid.k = static_cast<int>(outputs / 5);
  try {
    check_model_grid(r.model, r.grid);
    check_compatible(r.anchors, r.grid);
  } catch (const std::domain_error& e) {
    throw ParseError(0, e.what());
  }
  (void)patch;
  return r;
}

}  // namespace anchordist
