#include "loralab/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace loralab::svg {

namespace {

std::string fixed2(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<std::pair<double, std::string>> log10_ticks(double log_lo, double log_hi) {
  std::vector<std::pair<double, std::string>> ticks;
  const int k_lo = static_cast<int>(std::ceil(log_lo - 1e-9));
  const int k_hi = static_cast<int>(std::floor(log_hi + 1e-9));
  for (int k = k_lo; k <= k_hi; ++k) {
    std::string label;
    if (k == 0)
      label = "1";
    else
      label = "1e" + std::to_string(k);
    ticks.emplace_back(static_cast<double>(k), label);
  }
  return ticks;
}

std::vector<std::pair<double, std::string>> log2_ticks(double log_lo, double log_hi) {
  std::vector<std::pair<double, std::string>> ticks;
  const int k_lo = static_cast<int>(std::ceil(log_lo - 1e-9));
  const int k_hi = static_cast<int>(std::floor(log_hi + 1e-9));
  for (int k = k_lo; k <= k_hi; ++k)
    ticks.emplace_back(static_cast<double>(k), "2^" + std::to_string(k));
  return ticks;
}

std::vector<std::pair<double, std::string>> linear_ticks(double lo, double hi) {
  if (!(hi > lo)) return {{lo, std::to_string(static_cast<long long>(lo))}};
  const double span = hi - lo;
  double step = std::pow(10.0, std::floor(std::log10(span / 5.0)));
  if (span / step > 10.0) step *= 2.0;
  if (span / step > 10.0) step *= 2.5;
  if (span / step > 10.0) step *= 2.0;
  std::vector<std::pair<double, std::string>> ticks;
  const double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + 1e-9 * span; v += step) {
    const long long rounded = static_cast<long long>(std::llround(v));
    if (std::fabs(v - static_cast<double>(rounded)) < 1e-6 * std::max(1.0, std::fabs(v)))
      ticks.emplace_back(v, std::to_string(rounded));
    else
      ticks.emplace_back(v, fixed2(v));
  }
  return ticks;
}

std::string render(const Chart& chart, int width, int height) {
  if (!(chart.x.hi > chart.x.lo) || !(chart.y.hi > chart.y.lo))
    throw std::invalid_argument("svg: degenerate axis range");
  const double margin_left = 72, margin_right = 170, margin_top = 44, margin_bottom = 52;
  const double plot_w = width - margin_left - margin_right;
  const double plot_h = height - margin_top - margin_bottom;
  const auto sx = [&](double v) {
    return margin_left + plot_w * (v - chart.x.lo) / (chart.x.hi - chart.x.lo);
  };
  const auto sy = [&](double v) {
    return margin_top + plot_h * (1.0 - (v - chart.y.lo) / (chart.y.hi - chart.y.lo));
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << fixed2(margin_left) << "\" y=\"24\" font-family=\"sans-serif\" "
         "font-size=\"15\" fill=\"#222\">"
      << escape(chart.title) << "</text>\n";

  // Gridlines and ticks.
  for (const auto& [pos, label] : chart.x.ticks) {
    if (pos < chart.x.lo - 1e-9 || pos > chart.x.hi + 1e-9) continue;
    const double px = sx(pos);
    out << "<line x1=\"" << fixed2(px) << "\" y1=\"" << fixed2(margin_top) << "\" x2=\""
        << fixed2(px) << "\" y2=\"" << fixed2(margin_top + plot_h)
        << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << fixed2(px) << "\" y=\"" << fixed2(margin_top + plot_h + 18)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\" "
           "text-anchor=\"middle\">"
        << escape(label) << "</text>\n";
  }
  for (const auto& [pos, label] : chart.y.ticks) {
    if (pos < chart.y.lo - 1e-9 || pos > chart.y.hi + 1e-9) continue;
    const double py = sy(pos);
    out << "<line x1=\"" << fixed2(margin_left) << "\" y1=\"" << fixed2(py) << "\" x2=\""
        << fixed2(margin_left + plot_w) << "\" y2=\"" << fixed2(py)
        << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << fixed2(margin_left - 6) << "\" y=\"" << fixed2(py + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\" text-anchor=\"end\">"
        << escape(label) << "</text>\n";
  }

  // Frame.
  out << "<rect x=\"" << fixed2(margin_left) << "\" y=\"" << fixed2(margin_top) << "\" width=\""
      << fixed2(plot_w) << "\" height=\"" << fixed2(plot_h)
      << "\" fill=\"none\" stroke=\"#555\" stroke-width=\"1\"/>\n";

  // Axis labels.
  out << "<text x=\"" << fixed2(margin_left + plot_w / 2) << "\" y=\"" << fixed2(height - 12.0)
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\" text-anchor=\"middle\">"
      << escape(chart.x.label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << fixed2(margin_top + plot_h / 2)
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 18 "
      << fixed2(margin_top + plot_h / 2) << ")\">" << escape(chart.y.label) << "</text>\n";

  // Series.
  for (const auto& series : chart.series) {
    if (series.points.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << series.color << "\" stroke-width=\"1.8\"";
    if (series.dashed) out << " stroke-dasharray=\"6 4\"";
    out << " points=\"";
    for (const auto& [vx, vy] : series.points) out << fixed2(sx(vx)) << ',' << fixed2(sy(vy)) << ' ';
    out << "\"/>\n";
    if (series.markers) {
      for (const auto& [vx, vy] : series.points)
        out << "<circle cx=\"" << fixed2(sx(vx)) << "\" cy=\"" << fixed2(sy(vy))
            << "\" r=\"3\" fill=\"" << series.color << "\"/>\n";
    }
  }

  // Legend.
  double legend_y = margin_top + 8;
  const double legend_x = margin_left + plot_w + 12;
  for (const auto& series : chart.series) {
    out << "<line x1=\"" << fixed2(legend_x) << "\" y1=\"" << fixed2(legend_y - 4) << "\" x2=\""
        << fixed2(legend_x + 24) << "\" y2=\"" << fixed2(legend_y - 4) << "\" stroke=\""
        << series.color << "\" stroke-width=\"2\"";
    if (series.dashed) out << " stroke-dasharray=\"6 4\"";
    out << "/>\n";
    out << "<text x=\"" << fixed2(legend_x + 30) << "\" y=\"" << fixed2(legend_y)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">"
        << escape(series.label) << "</text>\n";
    legend_y += 18;
  }

  out << "</svg>\n";
  return out.str();
}

}  // namespace loralab::svg
