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

// Command-line front end. Kept header-only so tests can drive `run_cli`
// in-process.

#include <anchordist/anchordist.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace anchordist::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

/// Raised for flag combinations CLI11 cannot check on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataFlags {
  std::string labels;
  std::string calib;
  std::string frames;
  std::vector<std::string> categories{"Car"};
  bool all_categories = false;
  int image_width = 1242;
  int image_height = 375;

  void add_to(CLI::App& app, bool require_labels = true) {
    auto* opt = app.add_option("--labels", labels, "KITTI label directory (one <frame>.txt per frame)");
    if (require_labels) opt->required();
    app.add_option("--calib", calib, "KITTI calib directory; default intrinsics when omitted");
    app.add_option("--frames", frames, "file listing frame ids to use, one per line");
    app.add_option("--category", categories, "categories to keep (repeatable)")->capture_default_str();
    app.add_flag("--all-categories", all_categories, "keep every category except DontCare");
    app.add_option("--image-width", image_width, "source image width in pixels")->capture_default_str();
    app.add_option("--image-height", image_height, "source image height in pixels")->capture_default_str();
  }

  Dataset load() const {
    DatasetSource src;
    src.label_dir = labels;
    src.calib_dir = calib;
    if (!frames.empty()) src.frame_ids = read_frame_list(frames);
    src.categories = all_categories ? std::set<std::string>{} : std::set<std::string>(categories.begin(), categories.end());
    src.image_size = {image_width, image_height};
    Dataset ds = load_kitti_dataset(src);
    if (all_categories) {
      for (auto& f : ds) std::erase_if(f.scene.objects, [](const ObjectLabel& l) { return l.category == "DontCare"; });
    }
    return ds;
  }
};

inline std::vector<ObjectLabel> all_objects(const Dataset& ds) {
  std::vector<ObjectLabel> out;
  for (const auto& f : ds) out.insert(out.end(), f.scene.objects.begin(), f.scene.objects.end());
  return out;
}

inline void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    detail::write_file(path, content);
  }
}

inline std::string fixed(double v, int precision = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline DistanceTarget parse_target(const std::string& s) {
  if (s == "euclidean") return DistanceTarget::Euclidean;
  if (s == "depth") return DistanceTarget::Depth;
  throw UsageError("unknown --target '" + s + "' (euclidean|depth)");
}

// ---------------------------------------------------------------------------

struct AnchorsCmd {
  DataFlags data;
  int k = 5;
  std::string format = "squared";
  std::uint64_t seed = 0;
  int restarts = 25;
  std::string out;
  std::string report;
  std::string target = "euclidean";

  int run(std::ostream& os) const {
    const Dataset ds = data.load();
    const auto objects = all_objects(ds);
    if (objects.empty()) throw std::runtime_error("no labelled objects found");
    const DistanceTarget tgt = parse_target(target);
    const KMeansOptions opts{seed, restarts};
    std::vector<double> distances;
    std::vector<BoxDims> boxes;
    for (const auto& o : objects) {
      distances.push_back(target_distance(o, tgt));
      boxes.push_back(dims_of(o.bbox));
    }
    if (static_cast<std::size_t>(k) > objects.size()) throw std::runtime_error("k exceeds the number of objects");
    const DistanceFormat chosen = parse_format(format);

    std::ostringstream rep;
    rep << "# anchor distances, k=" << k << ", " << objects.size() << " objects (m)\n";
    rep << std::left << std::setw(24) << "order";
    for (int i = 1; i <= k; ++i) rep << std::right << std::setw(9) << i;
    rep << "\n";
    const AnchorSet box_set = make_box_anchor_set(distances, boxes, k, true, opts);
    rep << std::left << std::setw(24) << "anchor BBox(avr dist)";
    for (double d : box_set.distances) rep << std::right << std::setw(9) << fixed(d);
    rep << "\n";
    std::map<DistanceFormat, AnchorSet> sets;
    for (DistanceFormat f : {DistanceFormat::Normal, DistanceFormat::LogScale, DistanceFormat::Squared}) {
      sets[f] = make_distance_anchor_set(distances, boxes, k, f, opts);
      rep << std::left << std::setw(24) << ("anchor distance(" + std::string(format_name(f)) + ")");
      for (double d : sets[f].distances) rep << std::right << std::setw(9) << fixed(d);
      rep << "\n";
    }
    rep << "\n# 2D box dimensions h/w (px), ordered by distance\n";
    auto box_row = [&](const std::string& name, const AnchorSet& s) {
      rep << std::left << std::setw(24) << name;
      for (const auto& b : s.boxes) rep << std::right << std::setw(9) << (fixed(b.h, 0) + "/" + fixed(b.w, 0));
      rep << "\n";
    };
    box_row("anchor box(IoU)", box_set);
    for (DistanceFormat f : {DistanceFormat::LogScale, DistanceFormat::Normal, DistanceFormat::Squared}) {
      box_row("anchor dist(" + std::string(format_name(f)) + ")", sets[f]);
    }
    write_output(report, rep.str(), os);
    if (!out.empty()) detail::write_file(out, serialize_anchor_set(sets[chosen]));
    return kExitOk;
  }
};

struct VarianceCmd {
  DataFlags data;
  std::vector<int> ks{2, 3, 5};
  std::string format = "normal";
  std::uint64_t seed = 0;
  int restarts = 25;
  std::string out;

  int run(std::ostream& os) const {
    const Dataset ds = data.load();
    const auto objects = all_objects(ds);
    if (objects.empty()) throw std::runtime_error("no labelled objects found");
    const KMeansOptions opts{seed, restarts};
    const DistanceFormat f = parse_format(format);
    std::ostringstream rep;
    rep << "# variance of distance per group (m^2), " << objects.size() << " objects\n";
    rep << std::right << std::setw(4) << "k" << std::setw(7) << "order" << std::setw(16) << "bbox-grouping"
        << std::setw(19) << "distance-grouping" << "\n";
    for (int k : ks) {
      if (k < 1 || static_cast<std::size_t>(k) > objects.size()) throw std::runtime_error("k out of range for this dataset");
      const auto by_box = cluster_variance_report(objects, k, Grouping::ByBBox, f, opts);
      const auto by_dist = cluster_variance_report(objects, k, Grouping::ByDistance, f, opts);
      for (int i = 0; i < k; ++i) {
        rep << std::setw(4) << k << std::setw(7) << i + 1 << std::setw(16) << fixed(by_box.groups[static_cast<std::size_t>(i)].variance)
            << std::setw(19) << fixed(by_dist.groups[static_cast<std::size_t>(i)].variance) << "\n";
      }
    }
    write_output(out, rep.str(), os);
    return kExitOk;
  }
};

struct SynthCmd {
  std::string out;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  bool render = false;
  int canvas = 416;
  int min_objects = 2;
  int max_objects = 6;

  int run(std::ostream& os) const {
    SynthConfig cfg;
    cfg.min_objects = min_objects;
    cfg.max_objects = max_objects;
    const Dataset ds = generate_synthetic_dataset(seed, count, cfg);
    write_kitti_dataset(out, ds, render ? std::optional<ImageSize>(ImageSize{canvas, canvas}) : std::nullopt);
    std::size_t objects = 0;
    for (const auto& f : ds) objects += f.scene.objects.size();
    os << "wrote " << ds.size() << " frames, " << objects << " objects to " << out << "\n";
    return kExitOk;
  }
};

struct TrainCmd {
  DataFlags data;
  TrainConfig cfg;
  std::string format = "squared";
  std::string variant = "anchor-distance";
  std::string target = "euclidean";
  std::string anchors;
  int input = 416;
  std::string out;
  std::string history;

  int run(std::ostream& os) {
    const Dataset ds = data.load();
    if (ds.empty()) throw std::runtime_error("no frames found");
    cfg.format = parse_format(format);
    cfg.variant = parse_variant(variant);
    cfg.target = parse_target(target);
    cfg.input = {input, input};
    std::optional<AnchorSet> set;
    if (!anchors.empty()) {
      // Anchor files carry source-image pixels; the head works in input pixels.
      const double scale = Letterbox::fit(ds.front().scene.image_size, cfg.input).scale;
      set = scale_anchor_boxes(parse_anchor_set(detail::read_file(anchors)), scale);
      cfg.k = static_cast<int>(set->k());
    }
    const TrainResult result = train(ds, cfg, set);
    detail::write_file(out, serialize_checkpoint(result));
    detail::write_file(history.empty() ? out + ".history.csv" : history, history_csv(result.history));
    os << "trained " << variant_name(cfg.variant) << " k=" << cfg.k << " for " << cfg.epochs
       << " epochs; final mean loss " << (result.history.empty() ? 0.0 : result.history.back().total) << "\n";
    return kExitOk;
  }
};

/// Named checkpoint given as NAME=PATH (or PATH, named by file stem).
inline std::pair<std::string, std::string> split_named(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {std::filesystem::path(arg).stem().string(), arg};
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

/// Predicted locations read from KITTI-format label files matched to the
/// ground truth by frame and line order.
inline std::vector<EvalPair> pairs_from_prediction_labels(const Dataset& gt, const std::string& pred_dir) {
  std::vector<EvalPair> pairs;
  for (std::size_t fi = 0; fi < gt.size(); ++fi) {
    const auto path = std::filesystem::path(pred_dir) / (gt[fi].id + ".txt");
    const auto pred = parse_kitti_label(detail::read_file(path));
    std::vector<ObjectLabel> kept;
    for (const auto& p : pred) {
      if (p.category != "DontCare") kept.push_back(p);
    }
    const auto& objs = gt[fi].scene.objects;
    std::size_t j = 0;
    for (std::size_t oi = 0; oi < objs.size(); ++oi) {
      while (j < kept.size() && kept[j].category != objs[oi].category) ++j;
      if (j == kept.size()) throw std::runtime_error(path.string() + ": fewer predictions than ground-truth objects");
      pairs.push_back({fi, oi, objs[oi].location, kept[j].location, 0});
      ++j;
    }
  }
  return pairs;
}

struct EvalCmd {
  DataFlags data;
  std::vector<std::string> models;
  std::string pred_labels;
  std::string out;
  std::string bins_svg;
  double bin_width = 5.0;
  double bin_max = 80.0;
  std::string dump_raw;

  int run(std::ostream& os) const {
    if (models.empty() && pred_labels.empty()) throw UsageError("eval needs --model or --pred-labels");
    const Dataset ds = data.load();
    std::vector<std::pair<std::string, DepthMetrics>> rows;
    std::vector<std::pair<std::string, ErrorBins>> series;
    const auto edges = uniform_edges(0.0, bin_max, bin_width);
    auto add = [&](const std::string& name, const std::vector<EvalPair>& pairs) {
      if (pairs.empty()) throw std::runtime_error(name + ": no ground-truth objects to evaluate");
      rows.emplace_back(name, depth_metrics_of(pairs));
      series.emplace_back(name, error_bins_of(pairs, edges));
    };
    if (!pred_labels.empty()) add("predictions", pairs_from_prediction_labels(ds, pred_labels));
    for (const auto& arg : models) {
      const auto [name, path] = split_named(arg);
      const TrainResult ckpt = parse_checkpoint(detail::read_file(path));
      add(name + " k=" + std::to_string(ckpt.grid.k), evaluate(ckpt.model, ckpt.anchors, ckpt.grid, ds));
      if (!dump_raw.empty()) {
        for (const auto& f : ds) {
          const auto raw = forward(ckpt.model, render_scene(f.scene, ckpt.grid.image), ckpt.grid);
          detail::write_file(std::filesystem::path(dump_raw) / name / (f.id + ".raw"), serialize_raw_prediction(raw));
        }
      }
    }
    write_output(out, format_metrics_table(rows), os);
    if (!bins_svg.empty()) detail::write_file(bins_svg, render_error_bins_svg(series));
    return kExitOk;
  }
};

struct BevCmd {
  DataFlags data;
  std::string frame;
  std::string model;
  std::string pred_labels;
  std::string out;

  int run(std::ostream& os) const {
    if (model.empty() == pred_labels.empty()) throw UsageError("bev needs exactly one of --model or --pred-labels");
    Dataset ds = data.load();
    const auto it = std::find_if(ds.begin(), ds.end(), [&](const Frame& f) { return f.id == frame; });
    if (it == ds.end()) throw std::runtime_error("frame '" + frame + "' not found");
    Dataset one{*it};
    std::vector<EvalPair> pairs;
    if (!model.empty()) {
      const TrainResult ckpt = parse_checkpoint(detail::read_file(model));
      pairs = evaluate(ckpt.model, ckpt.anchors, ckpt.grid, one);
    } else {
      pairs = pairs_from_prediction_labels(one, pred_labels);
    }
    std::vector<Vec3> estimates;
    for (const auto& p : pairs) estimates.push_back(p.pred);
    write_output(out, render_bev_svg(one.front().scene.objects, estimates), os);
    return kExitOk;
  }
};

/// Reads `key = value` lines ('#' comments, blank lines ignored).
inline std::vector<std::pair<std::string, std::string>> read_key_values(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> out;
  const std::string text = detail::read_file(path);
  const auto lines = detail::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string line(lines[n]);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string x) {
      const auto b = x.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      return x.substr(b, x.find_last_not_of(" \t") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n + 1) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

/// Rewrites argv so that `--config FILE` entries become flags placed before
/// the explicit ones. Flags given on the command line win.
inline std::vector<std::string> with_config_overlay(CLI::App& app, int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::size_t sub_pos = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (app.get_subcommand_no_throw(args[i]) != nullptr) {
      sub_pos = i;
      break;
    }
  }
  std::string config;
  std::set<std::string> given;
  std::vector<std::string> rest;
  for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 == args.size()) throw CLI::ArgumentMismatch("--config needs a file");
      config = args[++i];
      continue;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      continue;
    }
    if (args[i].rfind("--", 0) == 0) given.insert(args[i].substr(2, args[i].find('=') - 2));
    rest.push_back(args[i]);
  }
  if (config.empty()) return {args.rbegin(), args.rend()};

  CLI::App* sub = app.get_subcommand(args[sub_pos]);
  std::vector<std::string> overlay;
  for (const auto& [key, value] : read_key_values(config)) {
    if (given.contains(key)) continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw CLI::ExtrasError({key + " (in " + config + ")"});
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1" || value.empty()) overlay.push_back("--" + key);
      continue;
    }
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      overlay.push_back("--" + key);
      overlay.push_back(item);
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1);
  out.insert(out.end(), overlay.begin(), overlay.end());
  out.insert(out.end(), rest.begin(), rest.end());
  return {out.rbegin(), out.rend()};  // CLI11 consumes a reversed vector
}

/// Parses argv and runs one subcommand. Exit codes: 0 success, 2 usage
/// error, 3 data error.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"anchordist: anchor-distance multi-object distance estimation", "anchordist"};
  app.require_subcommand(1);

  AnchorsCmd anchors;
  auto* a = app.add_subcommand("anchors", "cluster distances into anchor sets and report them");
  anchors.data.add_to(*a);
  a->add_option("--k", anchors.k, "predictors per cell")->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--format", anchors.format, "distance format of the written set: normal|log|squared")->capture_default_str();
  a->add_option("--seed", anchors.seed, "k-means seed")->capture_default_str();
  a->add_option("--restarts", anchors.restarts, "k-means++ restarts")->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--out", anchors.out, "anchor-set file to write");
  a->add_option("--report", anchors.report, "report file (default stdout)");
  a->add_option("--target", anchors.target, "euclidean|depth")->capture_default_str();

  VarianceCmd variance;
  auto* v = app.add_subcommand("variance", "distance variance of box groups vs distance groups");
  variance.data.add_to(*v);
  v->add_option("--k", variance.ks, "group counts (repeatable)")->capture_default_str();
  v->add_option("--format", variance.format, "distance format for distance grouping")->capture_default_str();
  v->add_option("--seed", variance.seed, "k-means seed")->capture_default_str();
  v->add_option("--restarts", variance.restarts, "k-means++ restarts")->capture_default_str();
  v->add_option("--out", variance.out, "report file (default stdout)");

  SynthCmd synth;
  auto* s = app.add_subcommand("synth", "write a synthetic KITTI-layout dataset");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--count", synth.count, "number of frames")->capture_default_str();
  s->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  s->add_flag("--render", synth.render, "also write image_2/<frame>.pgm");
  s->add_option("--canvas", synth.canvas, "rendered square canvas size")->capture_default_str();
  s->add_option("--min-objects", synth.min_objects, "objects per frame, lower bound")->capture_default_str();
  s->add_option("--max-objects", synth.max_objects, "objects per frame, upper bound")->capture_default_str();

  TrainCmd trainer;
  auto* t = app.add_subcommand("train", "train the per-cell model on labelled frames");
  trainer.data.add_to(*t);
  t->add_option("--out", trainer.out, "checkpoint path")->required();
  t->add_option("--history", trainer.history, "per-epoch CSV (default <out>.history.csv)");
  t->add_option("--anchors", trainer.anchors, "anchor-set file; built from the data when omitted");
  t->add_option("--k", trainer.cfg.k, "predictors per cell")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--format", trainer.format, "normal|log|squared")->capture_default_str();
  t->add_option("--variant", trainer.variant, "anchor-distance|box-avg-distance|box-no-prior")->capture_default_str();
  t->add_option("--target", trainer.target, "euclidean|depth")->capture_default_str();
  t->add_option("--seed", trainer.cfg.seed, "initialization and shuffling seed")->capture_default_str();
  t->add_option("--epochs", trainer.cfg.epochs, "epochs")->capture_default_str();
  t->add_option("--batch", trainer.cfg.batch_size, "scenes per step")->capture_default_str();
  t->add_option("--lr", trainer.cfg.learning_rate, "learning rate")->capture_default_str();
  t->add_option("--lambda", trainer.cfg.lambda, "distance-loss weight")->capture_default_str();
  t->add_option("--hidden", trainer.cfg.hidden, "hidden units")->capture_default_str();
  t->add_option("--stride", trainer.cfg.stride, "grid stride in pixels")->capture_default_str();
  t->add_option("--input", trainer.input, "square network input size")->capture_default_str();
  t->add_option("--restarts", trainer.cfg.kmeans.restarts, "k-means++ restarts")->capture_default_str();

  EvalCmd evaluator;
  auto* e = app.add_subcommand("eval", "depth metrics of checkpoints or predicted labels");
  evaluator.data.add_to(*e);
  e->add_option("--model", evaluator.models, "checkpoint as NAME=PATH or PATH (repeatable)");
  e->add_option("--pred-labels", evaluator.pred_labels, "KITTI-format predicted labels directory");
  e->add_option("--out", evaluator.out, "metrics table (default stdout)");
  e->add_option("--bins-svg", evaluator.bins_svg, "error-vs-distance plot");
  e->add_option("--bin-width", evaluator.bin_width, "bin width (m)")->capture_default_str();
  e->add_option("--bin-max", evaluator.bin_max, "upper edge of the last bin (m)")->capture_default_str();
  e->add_option("--dump-raw", evaluator.dump_raw, "directory for raw prediction dumps");

  BevCmd bev;
  auto* b = app.add_subcommand("bev", "bird-eye-view SVG of one frame");
  bev.data.add_to(*b);
  b->add_option("--frame", bev.frame, "frame id")->required();
  b->add_option("--model", bev.model, "checkpoint");
  b->add_option("--pred-labels", bev.pred_labels, "KITTI-format predicted labels directory");
  b->add_option("--out", bev.out, "SVG path (default stdout)");

  std::string config_path;
  for (CLI::App* sub : {a, v, s, t, e, b}) {
    sub->add_option("--config", config_path, "key=value file supplying flag defaults");
  }

  try {
    app.parse(with_config_overlay(app, argc, argv));
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const std::exception& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  }

  try {
    if (a->parsed()) return anchors.run(out);
    if (v->parsed()) return variance.run(out);
    if (s->parsed()) return synth.run(out);
    if (t->parsed()) return trainer.run(out);
    if (e->parsed()) return evaluator.run(out);
    if (b->parsed()) return bev.run(out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace anchordist::cli
