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
#include <anchordist/metrics.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace anchordist {

namespace detail {

inline std::string svg_num(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace detail

struct BevOptions {
  double x_range = 25.0;  // meters either side of the camera
  double z_max = 85.0;
  double pixels_per_meter = 8.0;
};

/// Top-down (x, z) view: one `rect.gt` per ground-truth footprint (rotated by
/// yaw) and one `circle.est` per estimated center.
inline std::string render_bev_svg(std::span<const ObjectLabel> gt, std::span<const Vec3> estimates,
                                  const BevOptions& opt = {}) {
  using detail::svg_num;
  const double s = opt.pixels_per_meter;
  const double width = 2.0 * opt.x_range * s;
  const double height = opt.z_max * s;
  auto px = [&](const Vec2& bev) { return Vec2((bev.x() + opt.x_range) * s, height - bev.y() * s); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(width) << "\" height=\"" << svg_num(height)
     << "\" viewBox=\"0 0 " << svg_num(width) << ' ' << svg_num(height) << "\">\n";
  os << "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" << svg_num(width) << "\" height=\"" << svg_num(height)
     << "\" fill=\"white\"/>\n";
  for (double z = 10.0; z < opt.z_max; z += 10.0) {
    const double y = height - z * s;
    os << "<line class=\"grid\" x1=\"0\" y1=\"" << svg_num(y) << "\" x2=\"" << svg_num(width) << "\" y2=\"" << svg_num(y)
       << "\" stroke=\"#ddd\"/>\n<text class=\"label\" x=\"2\" y=\"" << svg_num(y - 2) << "\" font-size=\"10\">" << z
       << " m</text>\n";
  }
  const Vec2 cam = px({0.0, 0.0});
  os << "<path class=\"camera\" d=\"M " << svg_num(cam.x() - 6) << ' ' << svg_num(cam.y()) << " L " << svg_num(cam.x())
     << ' ' << svg_num(cam.y() - 10) << " L " << svg_num(cam.x() + 6) << ' ' << svg_num(cam.y()) << " Z\" fill=\"black\"/>\n";
  for (const auto& o : gt) {
    const Vec2 c = px(to_bev(o.location));
    const double l = o.dims.length * s;
    const double w = o.dims.width * s;
    // Heading along +x rotated by yaw about the downward y axis; z is drawn upward.
    const double angle = o.yaw * 180.0 / std::numbers::pi;
    os << "<rect class=\"gt\" x=\"" << svg_num(c.x() - 0.5 * l) << "\" y=\"" << svg_num(c.y() - 0.5 * w) << "\" width=\""
       << svg_num(l) << "\" height=\"" << svg_num(w) << "\" transform=\"rotate(" << svg_num(angle) << ' '
       << svg_num(c.x()) << ' ' << svg_num(c.y()) << ")\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.5\"/>\n";
  }
  for (const auto& e : estimates) {
    const Vec2 c = px(to_bev(e));
    os << "<circle class=\"est\" cx=\"" << svg_num(c.x()) << "\" cy=\"" << svg_num(c.y())
       << "\" r=\"3\" fill=\"#d62728\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Mean |error| against ground-truth distance, one panel for x and one for z,
/// one polyline per named series. Empty bins are skipped.
inline std::string render_error_bins_svg(std::span<const std::pair<std::string, ErrorBins>> series) {
  using detail::svg_num;
  constexpr double kPanelW = 360, kPanelH = 240, kMargin = 48;
  double x_max = 1.0, y_max = 0.0;
  for (const auto& [name, bins] : series) {
    if (!bins.edges.empty()) x_max = std::max(x_max, bins.edges.back());
    for (std::size_t b = 0; b < bins.size(); ++b) {
      if (bins.mean_abs_x[b]) y_max = std::max(y_max, *bins.mean_abs_x[b]);
      if (bins.mean_abs_z[b]) y_max = std::max(y_max, *bins.mean_abs_z[b]);
    }
  }
  y_max = y_max > 0.0 ? y_max * 1.1 : 1.0;
  const double total_w = 2 * (kPanelW + 2 * kMargin);
  const double total_h = kPanelH + 2 * kMargin + 16.0 * static_cast<double>(series.size());

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(total_w) << "\" height=\"" << svg_num(total_h)
     << "\">\n<rect x=\"0\" y=\"0\" width=\"" << svg_num(total_w) << "\" height=\"" << svg_num(total_h)
     << "\" fill=\"white\"/>\n";
  for (int panel = 0; panel < 2; ++panel) {
    const double ox = kMargin + panel * (kPanelW + 2 * kMargin);
    const double oy = kMargin;
    auto mx = [&](double d) { return ox + d / x_max * kPanelW; };
    auto my = [&](double e) { return oy + kPanelH - e / y_max * kPanelH; };
    os << "<g class=\"panel\">\n<rect x=\"" << svg_num(ox) << "\" y=\"" << svg_num(oy) << "\" width=\"" << kPanelW
       << "\" height=\"" << kPanelH << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << svg_num(ox) << "\" y=\"" << svg_num(oy - 8) << "\" font-size=\"12\">mean |error| "
       << (panel == 0 ? "x" : "z") << " (m) vs ground-truth distance (m)</text>\n";
    for (double d = 0.0; d <= x_max + 1e-9; d += 10.0) {
      os << "<text x=\"" << svg_num(mx(d) - 6) << "\" y=\"" << svg_num(oy + kPanelH + 14) << "\" font-size=\"10\">" << d
         << "</text>\n";
    }
    os << "<text x=\"" << svg_num(ox - 40) << "\" y=\"" << svg_num(oy + 10) << "\" font-size=\"10\">" << svg_num(y_max)
       << "</text>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
      const auto& bins = series[si].second;
      os << "<polyline class=\"series\" fill=\"none\" stroke=\"" << detail::kPalette[si % detail::kPalette.size()]
         << "\" stroke-width=\"2\" points=\"";
      for (std::size_t b = 0; b < bins.size(); ++b) {
        const auto& v = panel == 0 ? bins.mean_abs_x[b] : bins.mean_abs_z[b];
        if (!v) continue;
        const double mid = 0.5 * (bins.edges[b] + bins.edges[b + 1]);
        os << svg_num(mx(mid)) << ',' << svg_num(my(*v)) << ' ';
      }
      os << "\"/>\n";
    }
    os << "</g>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double y = kPanelH + 2 * kMargin + 16.0 * static_cast<double>(si);
    os << "<text class=\"legend\" x=\"" << svg_num(kMargin) << "\" y=\"" << svg_num(y) << "\" font-size=\"12\" fill=\""
       << detail::kPalette[si % detail::kPalette.size()] << "\">" << detail::xml_escape(series[si].first) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace anchordist
