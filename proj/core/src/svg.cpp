#include "sdlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace sdlab {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// dark blue -> teal -> yellow
std::string ramp(double v) {
  v = std::clamp(v, 0.0, 1.0);
  int r, g, b;
  if (v < 0.5) {
    const double f = v * 2.0;
    r = static_cast<int>(30 + 20 * f);
    g = static_cast<int>(40 + 120 * f);
    b = static_cast<int>(90 + 60 * f);
  } else {
    const double f = (v - 0.5) * 2.0;
    r = static_cast<int>(50 + 200 * f);
    g = static_cast<int>(160 + 75 * f);
    b = static_cast<int>(150 - 110 * f);
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

void minmax(const Mat& m, double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      lo = std::min(lo, m(i, j));
      hi = std::max(hi, m(i, j));
    }
  if (!(hi > lo)) hi = lo + 1.0;
}

}  // namespace

std::string svg_heatmap(const Mat& values, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title) {
  const int rows = static_cast<int>(values.rows()), cols = static_cast<int>(values.cols());
  const int cell = 56, left = 110, top = 46, pad = 12;
  const int width = left + cols * cell + pad, height = top + rows * cell + 34;

  double lo, hi;
  minmax(values, lo, hi);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"monospace\" font-size=\"11\">\n";
  os << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">" << esc(title) << "</text>\n";
  for (int j = 0; j < cols; ++j)
    os << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top - 8
       << "\" text-anchor=\"middle\">" << esc(col_labels[static_cast<std::size_t>(j)])
       << "</text>\n";
  for (int i = 0; i < rows; ++i) {
    os << "<text x=\"" << left - 6 << "\" y=\"" << top + i * cell + cell / 2 + 4
       << "\" text-anchor=\"end\">" << esc(row_labels[static_cast<std::size_t>(i)]) << "</text>\n";
    for (int j = 0; j < cols; ++j) {
      const double v = values(i, j);
      os << "<rect x=\"" << left + j * cell << "\" y=\"" << top + i * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"" << ramp((v - lo) / (hi - lo)) << "\"/>\n";
      os << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top + i * cell + cell / 2 + 4
         << "\" text-anchor=\"middle\" fill=\"#ffffff\">" << fmt(v) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_grid(const ObjectGrid& g, const std::string& title) {
  const int cell = std::max(2, 256 / g.side);
  const int top = 26;
  const int size = g.side * cell;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 12 << "\" height=\""
     << size + top + 8 << "\" font-family=\"monospace\" font-size=\"12\">\n";
  os << "<text x=\"6\" y=\"16\">" << esc(title) << "</text>\n";
  for (int y = 0; y < g.side; ++y)
    for (int x = 0; x < g.side; ++x) {
      const int v = static_cast<int>(std::clamp(g.at(y, x), 0.0, 1.0) * 255.0);
      char color[16];
      std::snprintf(color, sizeof(color), "#%02x%02x%02x", v, v, v);
      os << "<rect x=\"" << 6 + x * cell << "\" y=\"" << top + y * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"" << color << "\"/>\n";
    }
  os << "</svg>\n";
  return os.str();
}

std::string svg_lines(const std::vector<SvgSeries>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label) {
  const int width = 520, height = 320, left = 64, right = 150, top = 40, bottom = 44;
  const int pw = width - left - right, ph = height - top - bottom;
  static const char* palette[] = {"#2266aa", "#cc7722", "#22aa66", "#aa2266", "#777777"};

  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  if (!(xhi > xlo)) xhi = xlo + 1.0;
  if (!(yhi > ylo)) yhi = ylo + 1.0;

  auto px = [&](double x) { return left + pw * (x - xlo) / (xhi - xlo); };
  auto py = [&](double y) { return top + ph * (1.0 - (y - ylo) / (yhi - ylo)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"monospace\" font-size=\"11\">\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << esc(title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#888888\"/>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
     << esc(x_label) << "</text>\n";
  os << "<text x=\"14\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 14 " << top + ph / 2
     << ")\" text-anchor=\"middle\">" << esc(y_label) << "</text>\n";
  os << "<text x=\"" << left - 4 << "\" y=\"" << py(ylo) + 4 << "\" text-anchor=\"end\">"
     << fmt(ylo) << "</text>\n";
  os << "<text x=\"" << left - 4 << "\" y=\"" << py(yhi) + 4 << "\" text-anchor=\"end\">"
     << fmt(yhi) << "</text>\n";
  os << "<text x=\"" << px(xlo) << "\" y=\"" << top + ph + 14 << "\" text-anchor=\"middle\">"
     << fmt(xlo) << "</text>\n";
  os << "<text x=\"" << px(xhi) << "\" y=\"" << top + ph + 14 << "\" text-anchor=\"middle\">"
     << fmt(xhi) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = palette[si % 5];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[si].x.size(); ++i) {
      if (i) os << ' ';
      os << fmt(px(series[si].x[i])) << ',' << fmt(py(series[si].y[i]));
    }
    os << "\"/>\n";
    const int ly = top + 14 + static_cast<int>(si) * 16;
    os << "<rect x=\"" << left + pw + 10 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\""
       << color << "\"/>\n";
    os << "<text x=\"" << left + pw + 24 << "\" y=\"" << ly << "\">" << esc(series[si].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace sdlab
