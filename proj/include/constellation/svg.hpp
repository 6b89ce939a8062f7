#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace constellation {

// Deterministic single-series bar chart. Same inputs, same bytes.
// Bars with no value (e.g. a response-time average when no failures occurred)
// render as "n/a" at the baseline.
inline std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                                 const std::vector<std::string>& labels,
                                 const std::vector<std::optional<double>>& values) {
  if (labels.size() != values.size())
    throw std::invalid_argument("svg_bar_chart: labels/values length mismatch");
  if (labels.empty()) throw std::invalid_argument("svg_bar_chart: no bars");

  const double width = 640.0, height = 400.0;
  const double left = 80.0, right = 20.0, top = 50.0, bottom = 70.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double lo = 0.0, hi = 0.0;
  for (const auto& v : values) {
    if (!v) continue;
    lo = std::min(lo, *v);
    hi = std::max(hi, *v);
  }
  if (hi - lo <= 0.0) hi = lo + 1.0;
  const double span = hi - lo;

  auto fmt = [](double v, const char* spec = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return std::string(buf);
  };
  auto y_of = [&](double v) { return top + (hi - v) / span * plot_h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
      << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " " << fmt(height) << "\">\n";
  out << "<rect width=\"" << fmt(width) << "\" height=\"" << fmt(height)
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(width / 2) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\""
      << " text-anchor=\"middle\">" << title << "</text>\n";
  out << "<text x=\"18\" y=\"" << fmt(top + plot_h / 2)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << fmt(top + plot_h / 2) << ")\">" << y_label << "</text>\n";

  // Axis frame, min/max ticks, and a baseline at zero.
  out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left)
      << "\" y2=\"" << fmt(top + plot_h) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(y_of(0.0)) << "\" x2=\""
      << fmt(left + plot_w) << "\" y2=\"" << fmt(y_of(0.0)) << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(y_of(hi) + 4)
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt(hi, "%.6g")
      << "</text>\n";
  out << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(y_of(lo) + 4)
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt(lo, "%.6g")
      << "</text>\n";

  const double slot = plot_w / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    if (values[i]) {
      const double v = *values[i];
      const double bar_w = slot * 0.6;
      const double y_top = std::min(y_of(v), y_of(0.0));
      const double bar_h = std::abs(y_of(v) - y_of(0.0));
      out << "<rect x=\"" << fmt(cx - bar_w / 2) << "\" y=\"" << fmt(y_top) << "\" width=\""
          << fmt(bar_w) << "\" height=\"" << fmt(bar_h) << "\" fill=\"#4878a8\"/>\n";
      out << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(y_top - 4)
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
          << fmt(v, "%.4g") << "</text>\n";
    } else {
      out << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(y_of(0.0) - 4)
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">n/a</text>\n";
    }
    out << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(top + plot_h + 18)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << labels[i]
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace constellation
