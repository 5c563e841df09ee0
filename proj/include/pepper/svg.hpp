#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "pepper/util.hpp"

namespace pepper {

// Deterministic SVG 1.1 emission: fixed-precision coordinates, stable
// ordering, no timestamps, so identical inputs give identical bytes.
namespace svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return std::string(buf);
}

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> lo;  // lower band edge (min across seeds)
  std::vector<double> hi;  // upper band edge (max across seeds)
};

struct ViolinGroup {
  std::string label;
  std::string color;
  double x = 0.0;
  std::vector<double> values;
};

namespace detail {

struct Frame {
  double width = 640, height = 400;
  double left = 60, right = 20, top = 40, bottom = 50;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

  double px(double x) const {
    return left + (x - x_min) / (x_max - x_min) * (width - left - right);
  }
  double py(double y) const {
    return height - bottom - (y - y_min) / (y_max - y_min) * (height - top - bottom);
  }
};

inline void expand(double& lo, double& hi) {
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
}

inline std::string header(const Frame& f, const std::string& title, const std::string& x_label,
                          const std::string& y_label) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(f.width) +
         "\" height=\"" + num(f.height) + "\" viewBox=\"0 0 " + num(f.width) + " " + num(f.height) +
         "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(f.width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + title + "</text>\n";
  out += "<text x=\"" + num(f.width / 2) + "\" y=\"" + num(f.height - 10) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + x_label + "</text>\n";
  out += "<text x=\"14\" y=\"" + num(f.height / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 14 " +
         num(f.height / 2) + ")\">" + y_label + "</text>\n";
  // axes
  out += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.height - f.bottom) + "\" x2=\"" +
         num(f.width - f.right) + "\" y2=\"" + num(f.height - f.bottom) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) +
         "\" y2=\"" + num(f.height - f.bottom) + "\" stroke=\"black\"/>\n";
  // y ticks
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y_min + (f.y_max - f.y_min) * i / 4.0;
    out += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.py(y) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", y);
    out += buf;
    out += "</text>\n";
  }
  return out;
}

}  // namespace detail

// Mean line with a min/max band per series. With one seed the band edges
// coincide with the mean.
inline std::string line_plot(const std::vector<Series>& series, const std::string& title,
                             const std::string& x_label, const std::string& y_label) {
  detail::Frame f;
  f.x_min = 1e300;
  f.x_max = -1e300;
  f.y_min = 1e300;
  f.y_max = -1e300;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      f.x_min = std::min(f.x_min, s.x[i]);
      f.x_max = std::max(f.x_max, s.x[i]);
      f.y_min = std::min({f.y_min, s.lo[i], s.mean[i]});
      f.y_max = std::max({f.y_max, s.hi[i], s.mean[i]});
    }
  detail::expand(f.x_min, f.x_max);
  detail::expand(f.y_min, f.y_max);

  std::string out = detail::header(f, title, x_label, y_label);
  double legend_y = f.top + 4;
  for (const Series& s : series) {
    if (s.x.empty()) continue;
    std::string band = "<path d=\"M";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      band += " " + num(f.px(s.x[i])) + " " + num(f.py(s.hi[i]));
    for (std::size_t i = s.x.size(); i-- > 0;)
      band += " " + num(f.px(s.x[i])) + " " + num(f.py(s.lo[i]));
    band += " Z\" fill=\"" + s.color + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    out += band;
    std::string line = "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      line += num(f.px(s.x[i])) + "," + num(f.py(s.mean[i])) + " ";
    line += "\"/>\n";
    out += line;
    out += "<text x=\"" + num(f.width - f.right - 4) + "\" y=\"" + num(legend_y) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" + s.color +
           "\">" + s.label + "</text>\n";
    legend_y += 13;
  }
  out += "</svg>\n";
  return out;
}

// Histogram-silhouette violins with a mean tick per group.
inline std::string violin_plot(const std::vector<ViolinGroup>& groups, const std::string& title,
                               const std::string& x_label, const std::string& y_label) {
  detail::Frame f;
  f.x_min = 1e300;
  f.x_max = -1e300;
  f.y_min = 1e300;
  f.y_max = -1e300;
  for (const ViolinGroup& g : groups) {
    f.x_min = std::min(f.x_min, g.x);
    f.x_max = std::max(f.x_max, g.x);
    for (double v : g.values) {
      f.y_min = std::min(f.y_min, v);
      f.y_max = std::max(f.y_max, v);
    }
  }
  detail::expand(f.x_min, f.x_max);
  detail::expand(f.y_min, f.y_max);

  std::string out = detail::header(f, title, x_label, y_label);
  const int bins = 24;
  const double half_width = 0.38 * (f.px(f.x_max) - f.px(f.x_min)) /
                            std::max<std::size_t>(groups.size() + 1, 2);
  for (const ViolinGroup& g : groups) {
    if (g.values.empty()) continue;
    double lo = *std::min_element(g.values.begin(), g.values.end());
    double hi = *std::max_element(g.values.begin(), g.values.end());
    if (hi - lo < 1e-12) hi = lo + 1e-12;
    std::vector<double> hist(bins, 0.0);
    for (double v : g.values) {
      int b = static_cast<int>((v - lo) / (hi - lo) * bins);
      if (b == bins) b = bins - 1;
      hist[b] += 1.0;
    }
    const double peak = *std::max_element(hist.begin(), hist.end());
    const double cx = f.px(g.x);
    std::string path = "<path d=\"M";
    for (int b = 0; b < bins; ++b) {
      const double y = f.py(lo + (hi - lo) * (b + 0.5) / bins);
      path += " " + num(cx + half_width * hist[b] / peak) + " " + num(y);
    }
    for (int b = bins; b-- > 0;) {
      const double y = f.py(lo + (hi - lo) * (b + 0.5) / bins);
      path += " " + num(cx - half_width * hist[b] / peak) + " " + num(y);
    }
    path += " Z\" fill=\"" + g.color + "\" fill-opacity=\"0.4\" stroke=\"" + g.color + "\"/>\n";
    out += path;
    const double mean = sum(g.values) / static_cast<double>(g.values.size());
    out += "<line x1=\"" + num(cx - half_width) + "\" y1=\"" + num(f.py(mean)) + "\" x2=\"" +
           num(cx + half_width) + "\" y2=\"" + num(f.py(mean)) + "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    out += "<text x=\"" + num(cx) + "\" y=\"" + num(f.height - f.bottom + 14) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + g.label + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace svg
}  // namespace pepper
