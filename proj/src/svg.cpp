// Copyright 2026 The cdiff Authors
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

#include "cdiff/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace cdiff {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

}  // namespace

SvgPlot::SvgPlot(int width, int height, std::string title)
    : width_(width), height_(height), title_(std::move(title)) {}

void SvgPlot::add_line(const std::vector<double>& x,
                       const std::vector<double>& y, const std::string& color,
                       const std::string& label) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("svg: x and y sizes differ");
  }
  series_.push_back({x, y, color, label, false});
}

void SvgPlot::add_points(const std::vector<double>& x,
                         const std::vector<double>& y,
                         const std::string& color, const std::string& label) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("svg: x and y sizes differ");
  }
  series_.push_back({x, y, color, label, true});
}

std::string SvgPlot::render() const {
  const double ml = 60, mr = 20, mt = 40, mb = 45;  // margins
  const double pw = width_ - ml - mr;
  const double ph = height_ - mt - mb;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series_) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (!(xmin < xmax)) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (!(ymin < ymax)) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  auto px = [&](double v) { return ml + pw * (v - xmin) / (xmax - xmin); };
  auto py = [&](double v) { return mt + ph * (1.0 - (v - ymin) / (ymax - ymin)); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width_) + "\" height=\"" + std::to_string(height_) +
         "\" font-family=\"monospace\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(width_ / 2.0) +
         "\" y=\"20\" text-anchor=\"middle\">" + title_ + "</text>\n";
  // Axes.
  out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt + ph) + "\" x2=\"" +
         num(ml + pw) + "\" y2=\"" + num(mt + ph) +
         "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" +
         num(ml) + "\" y2=\"" + num(mt + ph) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4;
    const double yv = ymin + (ymax - ymin) * i / 4;
    out += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(mt + ph + 18) +
           "\" text-anchor=\"middle\">" + num(xv) + "</text>\n";
    out += "<text x=\"" + num(ml - 6) + "\" y=\"" + num(py(yv) + 4) +
           "\" text-anchor=\"end\">" + num(yv) + "</text>\n";
  }
  int legend_y = static_cast<int>(mt) + 6;
  for (const auto& s : series_) {
    if (s.points) {
      for (size_t i = 0; i < s.x.size(); ++i) {
        out += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" +
               num(py(s.y[i])) + "\" r=\"2.5\" fill=\"" + s.color + "\"/>\n";
      }
    } else if (!s.x.empty()) {
      out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" points=\"";
      for (size_t i = 0; i < s.x.size(); ++i) {
        out += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      }
      out += "\"/>\n";
    }
    if (!s.label.empty()) {
      out += "<text x=\"" + num(ml + pw - 6) + "\" y=\"" +
             std::to_string(legend_y) + "\" text-anchor=\"end\" fill=\"" +
             s.color + "\">" + s.label + "</text>\n";
      legend_y += 16;
    }
  }
  out += "</svg>\n";
  return out;
}

void SvgPlot::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("svg: cannot open " + path);
  out << render();
}

}  // namespace cdiff
