#include "rbrl/svg_plot.hpp"

#include "rbrl/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rbrl {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string esc(const std::string& s) {
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

std::string num(double v) { return format_fixed(v, 2); }

// Round a raw tick step to a 1/2/5 multiple of a power of ten.
double nice_step(double span, int target_ticks) {
  if (span <= 0) return 1.0;
  double raw = span / std::max(1, target_ticks);
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double norm = raw / mag;
  double step = (norm < 1.5) ? 1.0 : (norm < 3.5) ? 2.0 : (norm < 7.5) ? 5.0 : 10.0;
  return step * mag;
}

std::string tick_label(double v) {
  double av = std::fabs(v);
  if (av >= 1e5 || (av > 0 && av < 1e-3)) {
    std::ostringstream os;
    os.precision(2);
    os << std::scientific << v;
    return os.str();
  }
  std::string s = format_fixed(v, 3);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s.empty() ? "0" : s;
}

}  // namespace

std::string SvgPlot::render() const {
  const double ml = 78, mr = 24, mt = 46, mb = 58;  // margins
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      double lo = s.band_lo.size() == s.x.size() ? s.band_lo[i] : s.y[i];
      double hi = s.band_hi.size() == s.x.size() ? s.band_hi[i] : s.y[i];
      ymin = std::min({ymin, s.y[i], lo});
      ymax = std::max({ymax, s.y[i], hi});
    }
  }
  if (!std::isfinite(xmin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) { ymax += 0.5; ymin -= 0.5; }
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
        "text-anchor=\"middle\">" << esc(title) << "</text>\n";

  // Gridlines and ticks.
  os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  double xs = nice_step(xmax - xmin, 6);
  for (double t = std::ceil(xmin / xs) * xs; t <= xmax + 1e-9 * xs; t += xs) {
    double gx = px(t);
    os << "<line x1=\"" << num(gx) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(gx) << "\" y2=\""
       << num(mt + ph) << "\" stroke=\"#e5e5e5\"/>\n";
    os << "<text x=\"" << num(gx) << "\" y=\"" << num(mt + ph + 18)
       << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
  }
  double ys = nice_step(ymax - ymin, 6);
  for (double t = std::ceil(ymin / ys) * ys; t <= ymax + 1e-9 * ys; t += ys) {
    double gy = py(t);
    os << "<line x1=\"" << num(ml) << "\" y1=\"" << num(gy) << "\" x2=\"" << num(ml + pw)
       << "\" y2=\"" << num(gy) << "\" stroke=\"#e5e5e5\"/>\n";
    os << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(gy + 4)
       << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
  }
  os << "</g>\n";

  // Axes.
  os << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw)
     << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"" << height - 14
     << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" << esc(xlabel)
     << "</text>\n";
  os << "<text x=\"20\" y=\"" << height / 2
     << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
     << height / 2 << ")\">" << esc(ylabel) << "</text>\n";

  // Series: band first, then line, so lines stay visible.
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    std::string color = s.color.empty() ? kPalette[si % 8] : s.color;
    if (s.band_lo.size() == s.x.size() && s.band_hi.size() == s.x.size() && !s.x.empty()) {
      std::ostringstream path;
      for (size_t i = 0; i < s.x.size(); ++i)
        path << (i ? " L" : "M") << num(px(s.x[i])) << ' ' << num(py(s.band_hi[i]));
      for (size_t i = s.x.size(); i-- > 0;)
        path << " L" << num(px(s.x[i])) << ' ' << num(py(s.band_lo[i]));
      path << " Z";
      os << "<path d=\"" << path.str() << "\" fill=\"" << color << "\" opacity=\"0.15\"/>\n";
    }
    if (!s.x.empty()) {
      std::ostringstream path;
      for (size_t i = 0; i < s.x.size(); ++i)
        path << (i ? " L" : "M") << num(px(s.x[i])) << ' ' << num(py(s.y[i]));
      os << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"1.6\"/>\n";
    }
  }

  // Legend (top-right inside the plot area).
  double ly = mt + 14;
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    std::string color = s.color.empty() ? kPalette[si % 8] : s.color;
    double lx = ml + pw - 170;
    os << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 22)
       << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(lx + 28) << "\" y=\"" << num(ly)
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << esc(s.label) << "</text>\n";
    ly += 17;
  }

  os << "</svg>\n";
  return os.str();
}

void SvgPlot::write(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("svg: cannot open for writing: " + path);
  f << render();
}

}  // namespace rbrl
