#pragma once

#include <string>
#include <vector>

namespace rbrl {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  // Optional shaded band (same length as x); empty means no band.
  std::vector<double> band_lo;
  std::vector<double> band_hi;
  std::string color;  // empty -> assigned from a default palette
};

// Small hand-rolled line-plot writer producing a standalone SVG document
// with axes, tick labels, a legend, and optional mean +/- band shading.
struct SvgPlot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  int width = 900;
  int height = 540;
  std::vector<SvgSeries> series;

  std::string render() const;
  void write(const std::string& path) const;
};

}  // namespace rbrl
