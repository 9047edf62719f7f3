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

#include <anchordist/geometry.hpp>
#include <anchordist/types.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace anchordist {

/// 3D object extent in meters, KITTI order.
struct Dimensions {
  double height = 0.0;
  double width = 0.0;
  double length = 0.0;

  friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

/// One annotated object.
///
/// `location` is the center of the 3D box in the camera frame. KITTI files
/// store the bottom-face center instead; the label reader and writer convert
/// between the two by half the object height along y.
struct ObjectLabel {
  std::string category;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  BBox2D bbox;
  Dimensions dims;
  Vec3 location = Vec3::Zero();
  double yaw = 0.0;
};

struct Scene {
  ImageSize image_size;
  CameraIntrinsics intrinsics;
  std::vector<ObjectLabel> objects;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::optional<double> to_double(std::string_view s) {
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::optional<int> to_int(std::string_view s) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Shortest representation that parses back to the same double.
inline std::string fmt_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// KITTI text formats

/// Parses a KITTI object label file. Blank lines are skipped; a 16th
/// (score) column is accepted and ignored.
inline std::vector<ObjectLabel> parse_kitti_label(std::string_view text) {
  std::vector<ObjectLabel> labels;
  const auto lines = detail::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const int line_no = static_cast<int>(n) + 1;
    const auto fields = detail::split_ws(lines[n]);
    if (fields.empty()) continue;
    if (fields.size() < 15) {
      throw ParseError(line_no, "expected at least 15 fields, got " + std::to_string(fields.size()));
    }
    std::array<double, 14> num{};
    for (std::size_t i = 1; i < 15; ++i) {
      if (i == 2) continue;
      const auto v = detail::to_double(fields[i]);
      if (!v) throw ParseError(line_no, "field " + std::to_string(i + 1) + " is not a number: '" + std::string(fields[i]) + "'");
      num[i - 1] = *v;
    }
    const auto occluded = detail::to_int(fields[2]);
    if (!occluded) throw ParseError(line_no, "occluded field is not an integer: '" + std::string(fields[2]) + "'");

    ObjectLabel label;
    label.category = std::string(fields[0]);
    label.truncated = num[0];
    label.occluded = *occluded;
    label.alpha = num[2];
    label.bbox = {num[3], num[4], num[5], num[6]};
    label.dims = {num[7], num[8], num[9]};
    label.location = Vec3(num[10], num[11] - 0.5 * num[7], num[12]);
    label.yaw = num[13];
    labels.push_back(std::move(label));
  }
  return labels;
}

inline std::string serialize_kitti_label(std::span<const ObjectLabel> labels) {
  using detail::fmt_double;
  std::string out;
  for (const auto& l : labels) {
    const double bottom_y = l.location.y() + 0.5 * l.dims.height;
    out += l.category;
    for (double v : {l.truncated}) out += ' ' + fmt_double(v);
    out += ' ' + std::to_string(l.occluded);
    for (double v : {l.alpha, l.bbox.left, l.bbox.top, l.bbox.right, l.bbox.bottom, l.dims.height,
                     l.dims.width, l.dims.length, l.location.x(), bottom_y, l.location.z(), l.yaw}) {
      out += ' ' + fmt_double(v);
    }
    out += '\n';
  }
  return out;
}

/// Reads fx, fy, cx, cy from the "P2:" projection matrix of a KITTI calib file.
inline CameraIntrinsics parse_kitti_calib(std::string_view text) {
  const auto lines = detail::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto fields = detail::split_ws(lines[n]);
    if (fields.empty() || fields[0] != "P2:") continue;
    const int line_no = static_cast<int>(n) + 1;
    if (fields.size() != 13) {
      throw ParseError(line_no, "P2 needs 12 numbers, got " + std::to_string(fields.size() - 1));
    }
    std::array<double, 12> p{};
    for (std::size_t i = 0; i < 12; ++i) {
      const auto v = detail::to_double(fields[i + 1]);
      if (!v) throw ParseError(line_no, "P2 entry is not a number: '" + std::string(fields[i + 1]) + "'");
      p[i] = *v;
    }
    CameraIntrinsics intr{p[0], p[5], p[2], p[6]};
    if (!intr.valid()) throw ParseError(line_no, "P2 focal lengths must be positive");
    return intr;
  }
  throw ParseError(0, "calibration has no P2 line");
}

inline std::string serialize_kitti_calib(const CameraIntrinsics& intr) {
  using detail::fmt_double;
  std::string p = fmt_double(intr.fx) + " 0 " + fmt_double(intr.cx) + " 0 0 " + fmt_double(intr.fy) +
                  " " + fmt_double(intr.cy) + " 0 0 0 1 0";
  return "P0: " + p + "\nP1: " + p + "\nP2: " + p + "\nP3: " + p + "\n";
}

// ---------------------------------------------------------------------------
// 3D box projection

/// The 8 corners of an object's 3D box in the camera frame.
inline std::array<Vec3, 8> box_corners(const Dimensions& dims, const Vec3& center, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  std::array<Vec3, 8> corners;
  int n = 0;
  for (int ix : {-1, 1}) {
    for (int iy : {-1, 1}) {
      for (int iz : {-1, 1}) {
        // Object frame: length along x, height along y, width along z.
        const double ox = 0.5 * dims.length * ix;
        const double oy = 0.5 * dims.height * iy;
        const double oz = 0.5 * dims.width * iz;
        corners[n++] = center + Vec3(c * ox + s * oz, oy, -s * ox + c * oz);
      }
    }
  }
  return corners;
}

/// Axis-aligned hull of the projected corners, not clipped to the image.
/// Requires every corner in front of the camera.
inline BBox2D project_box_hull(const CameraIntrinsics& intr, const Dimensions& dims,
                               const Vec3& center, double yaw) {
  BBox2D hull{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Vec3& corner : box_corners(dims, center, yaw)) {
    const Vec2 p = project_to_image(intr, corner);
    hull.left = std::min(hull.left, p.x());
    hull.right = std::max(hull.right, p.x());
    hull.top = std::min(hull.top, p.y());
    hull.bottom = std::max(hull.bottom, p.y());
  }
  return hull;
}

inline BBox2D clamp_box(const BBox2D& box, ImageSize size) {
  const auto w = static_cast<double>(size.width);
  const auto h = static_cast<double>(size.height);
  return {std::clamp(box.left, 0.0, w), std::clamp(box.top, 0.0, h),
          std::clamp(box.right, 0.0, w), std::clamp(box.bottom, 0.0, h)};
}

// ---------------------------------------------------------------------------
// Synthetic scenes

/// Sampling ranges for synthetic ground-plane scenes. Defaults follow KITTI
/// camera conventions.
struct SynthConfig {
  ImageSize image_size{1242, 375};
  CameraIntrinsics intrinsics{721.5, 721.5, 609.6, 172.9};
  double camera_height = 1.65;
  double z_min = 5.0;
  double z_max = 80.0;
  double x_min = -20.0;
  double x_max = 20.0;
  int min_objects = 2;
  int max_objects = 6;
  Dimensions mean_dims{1.5, 1.6, 3.9};
  double dims_sigma = 0.1;  // relative standard deviation
  double dims_clip = 0.3;   // relative clip around the mean
  std::string category = "Car";
  double min_box_pixels = 2.0;
  int max_attempts = 1000;

  void validate() const {
    if (!intrinsics.valid()) throw ConfigError("synthetic config: invalid intrinsics");
    if (image_size.width <= 0 || image_size.height <= 0) throw ConfigError("synthetic config: empty image size");
    if (!(z_min > 0.0) || !(z_max >= z_min)) throw ConfigError("synthetic config: z range must satisfy 0 < z_min <= z_max");
    if (!(x_max >= x_min)) throw ConfigError("synthetic config: empty x range");
    if (min_objects < 0 || max_objects < min_objects) throw ConfigError("synthetic config: empty object count range");
    if (!(mean_dims.height > 0.0 && mean_dims.width > 0.0 && mean_dims.length > 0.0)) {
      throw ConfigError("synthetic config: mean dimensions must be positive");
    }
    if (dims_sigma < 0.0 || dims_clip < 0.0 || dims_clip >= 1.0) throw ConfigError("synthetic config: bad dimension spread");
    if (max_attempts < 1) throw ConfigError("synthetic config: max_attempts must be positive");
  }
};

/// Deterministic for a fixed seed. Objects are rejected and resampled when any
/// corner is behind the camera, the projected 3D center leaves the image, the
/// clipped box is smaller than `min_box_pixels`, or the ground footprint
/// collides with an earlier object.
inline Scene generate_synthetic_scene(std::uint64_t seed, const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(detail::splitmix64(seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto sample_dim = [&](double mean) {
    const double rel = std::clamp(config.dims_sigma * normal(rng), -config.dims_clip, config.dims_clip);
    return mean * (1.0 + rel);
  };

  Scene scene;
  scene.image_size = config.image_size;
  scene.intrinsics = config.intrinsics;
  const auto count = static_cast<int>(
      std::uniform_int_distribution<int>(config.min_objects, config.max_objects)(rng));
  const auto& intr = config.intrinsics;

  for (int i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
      ObjectLabel obj;
      obj.category = config.category;
      obj.dims = {sample_dim(config.mean_dims.height), sample_dim(config.mean_dims.width),
                  sample_dim(config.mean_dims.length)};
      const double z = uniform(config.z_min, config.z_max);
      const double x = uniform(config.x_min, config.x_max);
      obj.location = Vec3(x, config.camera_height - 0.5 * obj.dims.height, z);
      obj.yaw = uniform(-std::numbers::pi, std::numbers::pi);

      const auto corners = box_corners(obj.dims, obj.location, obj.yaw);
      if (std::any_of(corners.begin(), corners.end(), [](const Vec3& c) { return c.z() <= 0.1; })) continue;
      const Vec2 center_px = project_to_image(intr, obj.location);
      if (center_px.x() < 0.0 || center_px.x() > config.image_size.width || center_px.y() < 0.0 ||
          center_px.y() > config.image_size.height) {
        continue;
      }
      const BBox2D hull = project_box_hull(intr, obj.dims, obj.location, obj.yaw);
      const BBox2D box = clamp_box(hull, config.image_size);
      if (box.width() < config.min_box_pixels || box.height() < config.min_box_pixels) continue;

      bool collides = false;
      for (const auto& other : scene.objects) {
        const double gap = 0.5 * (obj.dims.length + other.dims.length);
        if ((to_bev(obj.location) - to_bev(other.location)).norm() < gap) {
          collides = true;
          break;
        }
      }
      if (collides) continue;

      obj.bbox = box;
      obj.truncated = 1.0 - box.area() / hull.area();
      obj.alpha = std::remainder(obj.yaw - std::atan2(x, z), 2.0 * std::numbers::pi);
      scene.objects.push_back(std::move(obj));
      break;
    }
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Rendering

/// Uniform scale plus centering offset mapping source pixels onto a canvas.
struct Letterbox {
  double scale = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;

  static Letterbox fit(ImageSize source, ImageSize canvas) {
    Letterbox lb;
    lb.scale = std::min(static_cast<double>(canvas.width) / source.width,
                        static_cast<double>(canvas.height) / source.height);
    lb.offset_x = 0.5 * (canvas.width - source.width * lb.scale);
    lb.offset_y = 0.5 * (canvas.height - source.height * lb.scale);
    return lb;
  }

  Vec2 to_canvas(double u, double v) const { return {u * scale + offset_x, v * scale + offset_y}; }
  Vec2 to_source(double u, double v) const { return {(u - offset_x) / scale, (v - offset_y) / scale}; }
  BBox2D to_canvas(const BBox2D& b) const {
    const Vec2 tl = to_canvas(b.left, b.top);
    const Vec2 br = to_canvas(b.right, b.bottom);
    return {tl.x(), tl.y(), br.x(), br.y()};
  }
  BBox2D to_source(const BBox2D& b) const {
    const Vec2 tl = to_source(b.left, b.top);
    const Vec2 br = to_source(b.right, b.bottom);
    return {tl.x(), tl.y(), br.x(), br.y()};
  }
};

/// Row-major grayscale image with values in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height)
      : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height, 0.0f) {}

  int width() const { return width_; }
  int height() const { return height_; }
  ImageSize size() const { return {width_, height_}; }
  float& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const float> pixels() const { return pixels_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> pixels_;
};

/// Paints one filled, anti-aliased rectangle (canvas pixels) with `intensity`.
inline void fill_box(GrayImage& image, const BBox2D& box, double intensity) {
  const double l = std::max(box.left, 0.0);
  const double t = std::max(box.top, 0.0);
  const double r = std::min(box.right, static_cast<double>(image.width()));
  const double b = std::min(box.bottom, static_cast<double>(image.height()));
  if (!(r > l && b > t)) return;
  const int x0 = static_cast<int>(std::floor(l));
  const int x1 = std::min(static_cast<int>(std::ceil(r)), image.width());
  const int y0 = static_cast<int>(std::floor(t));
  const int y1 = std::min(static_cast<int>(std::ceil(b)), image.height());
  for (int y = y0; y < y1; ++y) {
    const double cy = std::min(b, y + 1.0) - std::max(t, static_cast<double>(y));
    for (int x = x0; x < x1; ++x) {
      const double cx = std::min(r, x + 1.0) - std::max(l, static_cast<double>(x));
      const double coverage = cx * cy;
      float& px = image.at(x, y);
      px = static_cast<float>(px * (1.0 - coverage) + coverage * intensity);
    }
  }
}

/// Draws every object's 2D box, letterboxed onto `canvas`, farthest first.
/// `intensities` is indexed like `scene.objects`; empty means 1.0 for all.
inline GrayImage render_scene(const Scene& scene, ImageSize canvas, std::span<const double> intensities = {}) {
  if (canvas.width <= 0 || canvas.height <= 0) throw std::domain_error("render_scene: empty canvas");
  if (!intensities.empty() && intensities.size() != scene.objects.size()) {
    throw std::domain_error("render_scene: one intensity per object required");
  }
  GrayImage image(canvas.width, canvas.height);
  const Letterbox lb = Letterbox::fit(scene.image_size, canvas);
  std::vector<std::size_t> order(scene.objects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scene.objects[a].location.z() > scene.objects[b].location.z();
  });
  for (std::size_t idx : order) {
    const double intensity = intensities.empty() ? 1.0 : std::clamp(intensities[idx], 0.0, 1.0);
    fill_box(image, lb.to_canvas(scene.objects[idx].bbox), intensity);
  }
  return image;
}

/// Binary 8-bit portable graymap.
inline std::string to_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  out.reserve(out.size() + image.pixels().size());
  for (float v : image.pixels()) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
  }
  return out;
}

inline GrayImage from_pgm(std::string_view data) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  if (next_token() != "P5") throw ParseError(0, "not a binary PGM");
  const auto w = detail::to_int(next_token());
  const auto h = detail::to_int(next_token());
  const auto maxval = detail::to_int(next_token());
  if (!w || !h || !maxval || *w <= 0 || *h <= 0 || *maxval <= 0 || *maxval > 255) {
    throw ParseError(0, "bad PGM header");
  }
  ++pos;
  if (data.size() - std::min(pos, data.size()) < static_cast<std::size_t>(*w) * *h) {
    throw ParseError(0, "truncated PGM data");
  }
  GrayImage image(*w, *h);
  for (int y = 0; y < *h; ++y) {
    for (int x = 0; x < *w; ++x) {
      image.at(x, y) = static_cast<float>(static_cast<unsigned char>(data[pos++])) / static_cast<float>(*maxval);
    }
  }
  return image;
}

// ---------------------------------------------------------------------------
// Datasets

struct Frame {
  std::string id;
  Scene scene;
};

using Dataset = std::vector<Frame>;

inline std::string frame_name(std::size_t index) {
  std::string s = std::to_string(index);
  return std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

/// `count` synthetic frames; frame i uses a seed derived from (seed, i).
inline Dataset generate_synthetic_dataset(std::uint64_t seed, std::size_t count, const SynthConfig& config) {
  Dataset frames;
  frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    frames.push_back({frame_name(i), generate_synthetic_scene(detail::splitmix64(seed ^ (0xA5A5ull + i * 0x10001ull)), config)});
  }
  return frames;
}

inline std::vector<ObjectLabel> filter_categories(std::vector<ObjectLabel> labels, const std::set<std::string>& keep) {
  if (keep.empty()) return labels;
  std::erase_if(labels, [&](const ObjectLabel& l) { return !keep.contains(l.category); });
  return labels;
}

inline std::vector<std::string> read_frame_list(const std::filesystem::path& path) {
  std::vector<std::string> ids;
  const std::string text = detail::read_file(path);
  for (auto line : detail::split_lines(text)) {
    const auto fields = detail::split_ws(line);
    if (!fields.empty()) ids.emplace_back(fields[0]);
  }
  return ids;
}

struct DatasetSource {
  std::filesystem::path label_dir;
  std::filesystem::path calib_dir;        // empty: every frame uses `default_intrinsics`
  std::vector<std::string> frame_ids;     // empty: every *.txt in label_dir, sorted
  std::set<std::string> categories{"Car"};  // empty: keep all
  ImageSize image_size{1242, 375};
  CameraIntrinsics default_intrinsics{721.5, 721.5, 609.6, 172.9};
};

/// Loads KITTI-layout label (and calib) directories. ParseErrors are
/// re-raised with the offending file name.
inline Dataset load_kitti_dataset(const DatasetSource& src) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(src.label_dir)) throw std::runtime_error("label directory not found: " + src.label_dir.string());
  std::vector<std::string> ids = src.frame_ids;
  if (ids.empty()) {
    for (const auto& entry : fs::directory_iterator(src.label_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
  }
  Dataset frames;
  frames.reserve(ids.size());
  for (const auto& id : ids) {
    Frame frame{id, {}};
    frame.scene.image_size = src.image_size;
    const fs::path label_path = src.label_dir / (id + ".txt");
    try {
      frame.scene.objects = filter_categories(parse_kitti_label(detail::read_file(label_path)), src.categories);
    } catch (const ParseError& e) {
      throw ParseError(e.line(), label_path.string() + ": " + e.message());
    }
    if (src.calib_dir.empty()) {
      frame.scene.intrinsics = src.default_intrinsics;
    } else {
      const fs::path calib_path = src.calib_dir / (id + ".txt");
      try {
        frame.scene.intrinsics = parse_kitti_calib(detail::read_file(calib_path));
      } catch (const ParseError& e) {
        throw ParseError(e.line(), calib_path.string() + ": " + e.message());
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

/// Writes `root/label_2`, `root/calib` and, when `canvas` is given,
/// `root/image_2` graymaps.
inline void write_kitti_dataset(const std::filesystem::path& root, const Dataset& frames,
                                std::optional<ImageSize> canvas = std::nullopt) {
  for (const auto& frame : frames) {
    detail::write_file(root / "label_2" / (frame.id + ".txt"), serialize_kitti_label(frame.scene.objects));
    detail::write_file(root / "calib" / (frame.id + ".txt"), serialize_kitti_calib(frame.scene.intrinsics));
    if (canvas) detail::write_file(root / "image_2" / (frame.id + ".pgm"), to_pgm(render_scene(frame.scene, *canvas)));
  }
}

}  // namespace anchordist
