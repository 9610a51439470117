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

#ifndef CDIFF_SVG_HPP_
#define CDIFF_SVG_HPP_

#include <string>
#include <vector>

namespace cdiff {

// Minimal line/scatter plot writer. Plots are a convenience, not a
// contract; no external plotting dependency.
class SvgPlot {
 public:
  SvgPlot(int width, int height, std::string title);

  void add_line(const std::vector<double>& x, const std::vector<double>& y,
                const std::string& color, const std::string& label = "");
  void add_points(const std::vector<double>& x, const std::vector<double>& y,
                  const std::string& color, const std::string& label = "");

  std::string render() const;
  void save(const std::string& path) const;

 private:
  struct Series {
    std::vector<double> x, y;
    std::string color;
    std::string label;
    bool points = false;
  };

  int width_;
  int height_;
  std::string title_;
  std::vector<Series> series_;
};

}  // namespace cdiff

#endif  // CDIFF_SVG_HPP_
