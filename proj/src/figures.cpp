#include "pagnet/figures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pagnet/binary_io.hpp"
#include "pagnet/error.hpp"

namespace pagnet::fig {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

void require_svg(const std::string& path) {
  const auto dot = path.rfind('.');
  const auto ext = dot == std::string::npos ? std::string() : path.substr(dot);
  if (ext != ".svg") throw ConfigError("unsupported figure format '" + ext + "' (use .svg)");
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

void save(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw IoError("write failed for '" + path + "'");
}

struct Frame {
  double left = 70, top = 40, width = 640, height = 320;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double px(double x) const { return left + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * width; }
  double py(double y) const { return top + height - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * height; }
};

}  // namespace

void write_line_plot(const std::string& path, const LinePlot& plot) {
  require_svg(path);
  Frame f;
  if (!plot.x.empty()) {
    f.x0 = *std::min_element(plot.x.begin(), plot.x.end());
    f.x1 = *std::max_element(plot.x.begin(), plot.x.end());
  }
  double lo = 0.0, hi = 1.0;
  auto widen = [&](const std::vector<double>& v) {
    for (double d : v)
      if (std::isfinite(d)) {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
  };
  for (const auto& s : plot.series) {
    widen(s.y);
    widen(s.lo);
    widen(s.hi);
  }
  for (const auto& b : plot.bars) widen(b);
  f.y0 = lo;
  f.y1 = hi;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"420\">\n";
  os << "<title>" << escape(plot.title) << "</title>\n";
  os << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"420\" fill=\"white\"/>\n";
  os << "<text x=\"400\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(plot.title) << "</text>\n";
  os << "<line x1=\"" << f.left << "\" y1=\"" << f.top + f.height << "\" x2=\"" << f.left + f.width
     << "\" y2=\"" << f.top + f.height << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\""
     << f.top + f.height << "\" stroke=\"black\"/>\n";
  os << "<text x=\"400\" y=\"400\" text-anchor=\"middle\" font-size=\"12\">" << escape(plot.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"200\" font-size=\"12\" transform=\"rotate(-90 16 200)\">" << escape(plot.y_label)
     << "</text>\n";
  os << "<text x=\"" << f.left - 6 << "\" y=\"" << f.py(f.y0) << "\" text-anchor=\"end\" font-size=\"10\">"
     << f.y0 << "</text>\n";
  os << "<text x=\"" << f.left - 6 << "\" y=\"" << f.py(f.y1) << "\" text-anchor=\"end\" font-size=\"10\">"
     << f.y1 << "</text>\n";

  if (!plot.bars.empty() && !plot.x.empty()) {
    const double slot = f.width / std::max<size_t>(plot.x.size(), 1);
    const double bar_w = slot * 0.8 / plot.bars.size();
    for (size_t r = 0; r < plot.bars.size(); ++r) {
      for (size_t i = 0; i < plot.bars[r].size() && i < plot.x.size(); ++i) {
        const double y = plot.bars[r][i];
        const double top = f.py(std::max(y, 0.0));
        const double bottom = f.py(std::min(y, 0.0));
        os << "<rect x=\"" << f.px(plot.x[i]) - slot * 0.4 + r * bar_w << "\" y=\"" << top << "\" width=\""
           << bar_w << "\" height=\"" << bottom - top << "\" fill=\"" << kPalette[(r + 3) % 8]
           << "\" fill-opacity=\"0.35\"/>\n";
      }
    }
  }

  for (size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % 8];
    if (s.lo.size() == s.y.size() && s.hi.size() == s.y.size() && !s.y.empty()) {
      os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (size_t i = 0; i < s.y.size(); ++i) os << f.px(plot.x[i]) << ',' << f.py(s.hi[i]) << ' ';
      for (size_t i = s.y.size(); i-- > 0;) os << f.px(plot.x[i]) << ',' << f.py(s.lo[i]) << ' ';
      os << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.y.size() && i < plot.x.size(); ++i)
      if (std::isfinite(s.y[i])) os << f.px(plot.x[i]) << ',' << f.py(s.y[i]) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << f.left + f.width + 8 << "\" y=\"" << f.top + 14 * (k + 1) << "\" font-size=\"11\" fill=\""
       << color << "\">" << escape(s.name) << "</text>\n";
  }
  for (size_t r = 0; r < plot.bar_names.size(); ++r)
    os << "<text x=\"" << f.left + f.width + 8 << "\" y=\"" << f.top + 14 * (plot.series.size() + r + 1)
       << "\" font-size=\"11\" fill=\"" << kPalette[(r + 3) % 8] << "\">" << escape(plot.bar_names[r])
       << "</text>\n";
  os << "</svg>\n";
  save(path, os.str());
}

void write_heatmap_pair(const std::string& path, const HeatmapPair& map) {
  require_svg(path);
  const size_t rows = std::max(map.left.size(), map.right.size());
  size_t cols = 1;
  for (const auto& r : map.left) cols = std::max(cols, r.size());
  double lo = 0.0, hi = 1.0;
  for (const auto* m : {&map.left, &map.right})
    for (const auto& r : *m)
      for (double v : r)
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
  const double cell = std::clamp(360.0 / cols, 4.0, 24.0);
  const double row_h = std::clamp(480.0 / std::max<size_t>(rows, 1), 4.0, 24.0);
  const double panel = cell * cols;
  const double width = 2 * panel + 120;
  const double height = row_h * rows + 80;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<title>" << escape(map.title) << "</title>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(map.title)
     << "</text>\n";
  auto draw = [&](const std::vector<std::vector<double>>& m, double x0, const std::string& label) {
    os << "<text x=\"" << x0 + panel / 2 << "\" y=\"44\" text-anchor=\"middle\" font-size=\"12\">" << escape(label)
       << "</text>\n";
    for (size_t r = 0; r < m.size(); ++r)
      for (size_t c = 0; c < m[r].size(); ++c) {
        const double v = std::isfinite(m[r][c]) ? (m[r][c] - lo) / (hi - lo) : 0.0;
        const int shade = static_cast<int>(255 - 255 * std::clamp(v, 0.0, 1.0));
        os << "<rect x=\"" << x0 + c * cell << "\" y=\"" << 56 + r * row_h << "\" width=\"" << cell
           << "\" height=\"" << row_h << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\"/>\n";
      }
    for (int b : map.boundaries)
      os << "<line x1=\"" << x0 + b * cell << "\" y1=\"56\" x2=\"" << x0 + b * cell << "\" y2=\""
         << 56 + rows * row_h << "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
  };
  draw(map.left, 40, map.left_label);
  draw(map.right, 80 + panel, map.right_label);
  os << "</svg>\n";
  save(path, os.str());
}

SvgSummary read_svg(const std::string& path) {
  const auto text = bin::read_file(path);
  if (text.rfind("<svg", 0) != 0 || text.find("</svg>") == std::string::npos)
    throw InputError("'" + path + "' is not an svg written by this tool");
  SvgSummary s;
  const auto t0 = text.find("<title>");
  const auto t1 = text.find("</title>");
  if (t0 == std::string::npos || t1 == std::string::npos || t1 < t0)
    throw InputError("'" + path + "' has no title element");
  s.title = text.substr(t0 + 7, t1 - t0 - 7);
  for (size_t p = text.find("<polyline"); p != std::string::npos; p = text.find("<polyline", p + 1)) ++s.polylines;
  for (size_t p = text.find("<rect"); p != std::string::npos; p = text.find("<rect", p + 1)) ++s.rects;
  return s;
}

}  // namespace pagnet::fig
