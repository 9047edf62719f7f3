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

#include "anchordist_cli.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace anchordist;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "anchordist");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_of(const std::string& text, const std::string& needle) {
  int n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

fs::path synth_dir(const std::string& name, int count, int seed) {
  const fs::path dir = testutil::temp_dir(name);
  const CliRun r = run({"synth", "--out", dir.string(), "--count", std::to_string(count), "--seed", std::to_string(seed)});
  EXPECT_EQ(r.code, 0) << r.err;
  return dir;
}

std::vector<double> all_distances(const fs::path& dir) {
  DatasetSource src;
  src.label_dir = dir / "label_2";
  src.calib_dir = dir / "calib";
  std::vector<double> d;
  for (const auto& f : load_kitti_dataset(src)) {
    for (const auto& o : f.scene.objects) d.push_back(distance_of(o.location));
  }
  return d;
}

}  // namespace

TEST(CliAnchors, SingleClusterIsTheFormatMean) {
  const fs::path dir = synth_dir("cli_k1", 30, 4);
  const auto d = all_distances(dir);
  double s1 = 0, sl = 0, s2 = 0;
  for (double x : d) {
    s1 += x;
    sl += std::log(x);
    s2 += x * x;
  }
  const double n = static_cast<double>(d.size());
  const std::pair<std::string, double> expected[] = {
      {"normal", s1 / n}, {"log", std::exp(sl / n)}, {"squared", std::sqrt(s2 / n)}};
  for (const auto& [format, mean] : expected) {
    const fs::path out = dir / ("a_" + format + ".txt");
    const CliRun r = run({"anchors", "--labels", (dir / "label_2").string(), "--calib", (dir / "calib").string(), "--k",
                       "1", "--format", format, "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const AnchorSet set = parse_anchor_set(slurp(out));
    ASSERT_EQ(set.distances.size(), 1u);
    EXPECT_NEAR(set.distances[0], mean, 1e-9 * mean) << format;
  }
}

TEST(CliAnchors, FormatsOrderAnchorsLogNormalSquared) {
  const fs::path dir = synth_dir("cli_order", 60, 5);
  std::map<std::string, AnchorSet> sets;
  for (const std::string format : {"normal", "log", "squared"}) {
    const fs::path out = dir / (format + ".txt");
    ASSERT_EQ(run({"anchors", "--labels", (dir / "label_2").string(), "--k", "3", "--format", format, "--out",
                   out.string()})
                  .code,
              0);
    sets[format] = parse_anchor_set(slurp(out));
  }
  // Outer anchors follow the power-mean order within the near and far groups.
  EXPECT_LT(sets["log"].distances.front(), sets["normal"].distances.front());
  EXPECT_LT(sets["normal"].distances.front(), sets["squared"].distances.front());
  EXPECT_LT(sets["log"].distances.back(), sets["normal"].distances.back());
  EXPECT_LT(sets["normal"].distances.back(), sets["squared"].distances.back());
}

TEST(CliAnchors, ReportListsEveryRow) {
  const fs::path dir = synth_dir("cli_report", 20, 6);
  const CliRun r = run({"anchors", "--labels", (dir / "label_2").string(), "--k", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* row : {"anchor BBox(avr dist)", "anchor distance(normal)", "anchor distance(log)",
                          "anchor distance(squared)", "anchor box(IoU)", "anchor dist(squared)"}) {
    EXPECT_NE(r.out.find(row), std::string::npos) << row;
  }
}

TEST(CliVariance, ConstantDistanceGivesZeroVariance) {
  const fs::path dir = testutil::temp_dir("cli_const");
  Dataset ds = generate_synthetic_dataset(8, 10, SynthConfig{});
  for (auto& f : ds) {
    for (auto& o : f.scene.objects) o.location = o.location.normalized() * 20.0;
  }
  write_kitti_dataset(dir, ds);
  const CliRun r = run({"variance", "--labels", (dir / "label_2").string(), "--k", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    int k = 0, order = 0;
    double bbox = -1, dist = -1;
    if (fields >> k >> order >> bbox >> dist) {
      ++rows;
      EXPECT_EQ(bbox, 0.0);
      EXPECT_EQ(dist, 0.0);
    }
  }
  EXPECT_EQ(rows, 2);
}

TEST(CliEval, GroundTruthAsPredictionsIsPerfect) {
  const fs::path dir = synth_dir("cli_eval", 15, 9);
  const fs::path out = dir / "metrics.txt";
  const CliRun r = run({"eval", "--labels", (dir / "label_2").string(), "--pred-labels", (dir / "label_2").string(),
                     "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(slurp(out));
  std::string header, row, name;
  std::getline(lines, header);
  std::getline(lines, row);
  std::istringstream fields(row);
  std::size_t n = 0;
  double d1, d2, absrel, sqrrel, rmse, rmselog;
  ASSERT_TRUE(fields >> name >> n >> d1 >> d2 >> absrel >> sqrrel >> rmse >> rmselog);
  EXPECT_EQ(n, all_distances(dir).size());
  EXPECT_EQ(d1, 1.0);
  EXPECT_EQ(d2, 1.0);
  EXPECT_EQ(absrel, 0.0);
  EXPECT_EQ(rmse, 0.0);
  EXPECT_EQ(rmselog, 0.0);
}

TEST(CliEval, TrainedCheckpointEvaluatesEveryObject) {
  const fs::path dir = synth_dir("cli_train", 20, 10);
  const fs::path ckpt = dir / "model.ckpt";
  const std::string labels = (dir / "label_2").string();
  CliRun r = run({"train", "--labels", labels, "--out", ckpt.string(), "--epochs", "2", "--hidden", "8", "--k", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(ckpt.string() + ".history.csv"));
  const fs::path svg = dir / "bins.svg";
  r = run({"eval", "--labels", labels, "--model", "tiny=" + ckpt.string(), "--bins-svg", svg.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("tiny"), std::string::npos);
  EXPECT_NE(slurp(svg).find("<svg"), std::string::npos);
}

TEST(CliBev, OneMarkerPerObjectAndEstimate) {
  const fs::path dir = testutil::temp_dir("cli_bev");
  SynthConfig sc;
  sc.min_objects = sc.max_objects = 3;
  write_kitti_dataset(dir, generate_synthetic_dataset(11, 2, sc));
  const CliRun r = run({"bev", "--labels", (dir / "label_2").string(), "--calib", (dir / "calib").string(), "--frame",
                     "000001", "--pred-labels", (dir / "label_2").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_of(r.out, "<rect class=\"gt\""), 3);
  EXPECT_EQ(count_of(r.out, "<circle class=\"est\""), 3);
}

TEST(CliExit, UsageAndDataErrors) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"anchors"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"anchors", "--labels", "x", "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"anchors", "--labels", "/nonexistent/dir"}).code, cli::kExitData);
  const fs::path dir = synth_dir("cli_exit", 3, 1);
  EXPECT_EQ(run({"eval", "--labels", (dir / "label_2").string()}).code, cli::kExitUsage);
  EXPECT_EQ(run({"anchors", "--labels", (dir / "label_2").string(), "--format", "cubic"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"anchors", "--help"}).code, cli::kExitOk);
  std::ofstream(dir / "label_2" / "000000.txt", std::ios::app) << "Car 0 0 bad\n";
  const CliRun bad = run({"anchors", "--labels", (dir / "label_2").string()});
  EXPECT_EQ(bad.code, cli::kExitData);
  EXPECT_NE(bad.err.find("000000.txt"), std::string::npos);
}

TEST(CliDeterminism, RerunsProduceIdenticalFiles) {
  const fs::path a = synth_dir("cli_det_a", 10, 12);
  const fs::path b = synth_dir("cli_det_b", 10, 12);
  EXPECT_EQ(slurp(a / "label_2" / "000004.txt"), slurp(b / "label_2" / "000004.txt"));
  const std::string labels = (a / "label_2").string();
  for (const fs::path& ckpt : {a / "m.ckpt", b / "m.ckpt"}) {
    ASSERT_EQ(run({"train", "--labels", labels, "--out", ckpt.string(), "--epochs", "1", "--hidden", "4"}).code, 0);
  }
  EXPECT_EQ(slurp(a / "m.ckpt"), slurp(b / "m.ckpt"));
  EXPECT_EQ(run({"anchors", "--labels", labels}).out, run({"anchors", "--labels", labels}).out);
}

TEST(CliConfig, FileSuppliesDefaultsAndFlagsOverride) {
  const fs::path dir = synth_dir("cli_cfg", 10, 13);
  const fs::path cfg = dir / "anchors.cfg";
  std::ofstream(cfg) << "# anchors\nlabels = " << (dir / "label_2").string() << "\nk = 1\nformat = log\nout = "
                     << (dir / "from_cfg.txt").string() << "\n";
  ASSERT_EQ(run({"anchors", "--config", cfg.string()}).code, 0);
  AnchorSet set = parse_anchor_set(slurp(dir / "from_cfg.txt"));
  EXPECT_EQ(set.distances.size(), 1u);
  EXPECT_EQ(set.format, DistanceFormat::LogScale);
  ASSERT_EQ(run({"anchors", "--config", cfg.string(), "--k", "2"}).code, 0);
  set = parse_anchor_set(slurp(dir / "from_cfg.txt"));
  EXPECT_EQ(set.distances.size(), 2u);
  std::ofstream(cfg, std::ios::app) << "colour = red\n";
  EXPECT_EQ(run({"anchors", "--config", cfg.string()}).code, cli::kExitUsage);
  EXPECT_EQ(run({"anchors", "--config", (dir / "missing.cfg").string()}).code, cli::kExitUsage);
}
