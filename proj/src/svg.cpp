#include "wvsn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace wvsn::svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string escape(const std::string& s) {
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

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = 0, hi = 1;
  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

/// Round tick spacing to 1/2/5 * 10^k.
double nice_step(double span, int target_ticks) {
  if (span <= 0) return 1.0;
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  if (r < 1.5) return mag;
  if (r < 3.5) return 2 * mag;
  if (r < 7.5) return 5 * mag;
  return 10 * mag;
}

struct Plot {
  std::ostringstream out;
  int w, h;
  int left = 70, right = 24, top = 44, bottom = 52;
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;

  double sx(double x) const {
    return left + (x - x_lo) / (x_hi - x_lo) * (w - left - right);
  }
  double sy(double y) const {
    return h - bottom - (y - y_lo) / (y_hi - y_lo) * (h - top - bottom);
  }

  void header(const std::string& title) {
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
        << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n"
        << "<text x=\"" << w / 2 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\""
        << " text-anchor=\"middle\">" << escape(title) << "</text>\n";
  }

  void axes(const std::string& x_label, const std::string& y_label, bool x_ticks = true) {
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    if (x_ticks) {
      const double step = nice_step(x_hi - x_lo, 8);
      for (double t = std::ceil(x_lo / step) * step; t <= x_hi + 1e-9; t += step) {
        out << "<line x1=\"" << fmt(sx(t)) << "\" y1=\"" << h - bottom << "\" x2=\""
            << fmt(sx(t)) << "\" y2=\"" << top << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << fmt(sx(t)) << "\" y=\"" << h - bottom + 16
            << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
      }
    }
    const double step = nice_step(y_hi - y_lo, 6);
    for (double t = std::ceil(y_lo / step) * step; t <= y_hi + 1e-9; t += step) {
      out << "<line x1=\"" << left << "\" y1=\"" << fmt(sy(t)) << "\" x2=\"" << w - right
          << "\" y2=\"" << fmt(sy(t)) << "\" stroke=\"#ddd\"/>\n";
      out << "<text x=\"" << left - 6 << "\" y=\"" << fmt(sy(t) + 4)
          << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
    }
    out << "</g>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w - left - right
        << "\" height=\"" << h - top - bottom
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 10
        << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
        << escape(x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << (top + h - bottom) / 2
        << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\""
        << " transform=\"rotate(-90 16 " << (top + h - bottom) / 2 << ")\">"
        << escape(y_label) << "</text>\n";
  }

  void legend(const std::vector<std::string>& names) {
    int y = top + 14;
    for (size_t i = 0; i < names.size(); ++i) {
      const char* color = kPalette[i % kPaletteSize];
      out << "<rect x=\"" << w - right - 150 << "\" y=\"" << y - 9
          << "\" width=\"14\" height=\"10\" fill=\"" << color << "\"/>\n";
      out << "<text x=\"" << w - right - 132 << "\" y=\"" << y
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(names[i])
          << "</text>\n";
      y += 16;
    }
  }
};

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       int width, int height) {
  Plot p;
  p.w = width;
  p.h = height;
  Range xr, yr;
  xr.lo = std::numeric_limits<double>::infinity();
  xr.hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xr.include(s.x[i]);
      yr.include(s.y[i]);
    }
  if (!std::isfinite(xr.lo) || xr.lo >= xr.hi) {
    xr.lo = 0;
    xr.hi = 1;
  }
  p.x_lo = xr.lo;
  p.x_hi = xr.hi;
  p.y_lo = yr.lo;
  p.y_hi = yr.hi > yr.lo ? yr.hi * 1.05 : yr.lo + 1;

  p.header(title);
  p.axes(x_label, y_label);
  std::vector<std::string> names;
  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    names.push_back(s.name);
    p.out << "<polyline fill=\"none\" stroke=\"" << kPalette[i % kPaletteSize]
          << "\" stroke-width=\"1.6\" points=\"";
    for (size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.y[k])) continue;
      p.out << fmt(p.sx(s.x[k])) << "," << fmt(p.sy(s.y[k])) << " ";
    }
    p.out << "\"/>\n";
  }
  p.legend(names);
  p.out << "</svg>\n";
  return p.out.str();
}

std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<std::string>& series,
                      const std::vector<BarGroup>& groups, int width, int height) {
  Plot p;
  p.w = width;
  p.h = height;
  Range yr;
  for (const auto& g : groups)
    for (double v : g.values) yr.include(v);
  p.y_lo = std::min(0.0, yr.lo);
  p.y_hi = yr.hi > 0 ? yr.hi * 1.1 : 1;
  p.x_lo = 0;
  p.x_hi = 1;

  p.header(title);
  p.axes("", y_label, /*x_ticks=*/false);

  const double plot_w = p.w - p.left - p.right;
  const double group_w = plot_w / std::max<size_t>(1, groups.size());
  const double bar_w = group_w * 0.8 / std::max<size_t>(1, series.size());
  for (size_t g = 0; g < groups.size(); ++g) {
    const double gx = p.left + g * group_w + group_w * 0.1;
    for (size_t s = 0; s < groups[g].values.size(); ++s) {
      const double v = groups[g].values[s];
      const double y = p.sy(v);
      const double y0 = p.sy(0);
      p.out << "<rect x=\"" << fmt(gx + s * bar_w) << "\" y=\"" << fmt(std::min(y, y0))
            << "\" width=\"" << fmt(bar_w * 0.92) << "\" height=\"" << fmt(std::abs(y0 - y))
            << "\" fill=\"" << kPalette[s % kPaletteSize] << "\"/>\n";
    }
    p.out << "<text x=\"" << fmt(gx + group_w * 0.4) << "\" y=\"" << p.h - p.bottom + 16
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
          << escape(groups[g].label) << "</text>\n";
  }
  p.legend(series);
  p.out << "</svg>\n";
  return p.out.str();
}

}  // namespace wvsn::svg
