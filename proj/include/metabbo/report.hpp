#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "metabbo/io.hpp"

namespace metabbo {

/// Per-iteration mean and population standard deviation across runs.
struct SeriesStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline SeriesStats summarize_curves(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) throw std::invalid_argument("summarize_curves: no curves");
  const std::size_t length = curves.front().size();
  for (const auto& curve : curves)
    if (curve.size() != length)
      throw std::invalid_argument("summarize_curves: curves must have equal length");
  SeriesStats stats;
  stats.mean.resize(length);
  stats.stddev.resize(length);
  const auto n = static_cast<double>(curves.size());
  for (std::size_t i = 0; i < length; ++i) {
    double sum = 0.0;
    for (const auto& curve : curves) sum += curve[i];
    const double mean = sum / n;
    double variance = 0.0;
    for (const auto& curve : curves) variance += (curve[i] - mean) * (curve[i] - mean);
    stats.mean[i] = mean;
    stats.stddev[i] = std::sqrt(variance / n);
  }
  return stats;
}

struct NamedSeries {
  std::string label;
  SeriesStats stats;
};

namespace detail {

inline std::string svg_num(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2f", v);
  return buffer;
}

inline std::string svg_label(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.4g", v);
  return buffer;
}

inline const char* series_color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

struct Frame {
  double x0, y0, x1, y1;        // pixel corners of the plot area
  double vx0, vx1, vy0, vy1;    // value ranges
  bool log_y = false;

  double px(double x) const { return x0 + (x - vx0) / (vx1 - vx0) * (x1 - x0); }
  double py(double y) const {
    const double v = log_y ? std::log10(y) : y;
    const double lo = log_y ? std::log10(vy0) : vy0;
    const double hi = log_y ? std::log10(vy1) : vy1;
    return y1 - (v - lo) / (hi - lo) * (y1 - y0);
  }
};

inline void svg_header(std::ostringstream& out, int width, int height) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline void svg_axes(std::ostringstream& out, const Frame& f, const std::string& x_label,
                     const std::string& y_label) {
  out << "<line x1=\"" << svg_num(f.x0) << "\" y1=\"" << svg_num(f.y1) << "\" x2=\""
      << svg_num(f.x1) << "\" y2=\"" << svg_num(f.y1)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << svg_num(f.x0) << "\" y1=\"" << svg_num(f.y0) << "\" x2=\""
      << svg_num(f.x0) << "\" y2=\"" << svg_num(f.y1)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << svg_num((f.x0 + f.x1) / 2) << "\" y=\"" << svg_num(f.y1 + 32)
      << "\" font-size=\"12\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "<text x=\"14\" y=\"" << svg_num((f.y0 + f.y1) / 2)
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << svg_num((f.y0 + f.y1) / 2) << ")\">" << y_label << "</text>\n";
  // Four ticks per axis.
  for (int t = 0; t <= 3; ++t) {
    const double fx = f.vx0 + (f.vx1 - f.vx0) * t / 3.0;
    out << "<text x=\"" << svg_num(f.px(fx)) << "\" y=\"" << svg_num(f.y1 + 16)
        << "\" font-size=\"10\" text-anchor=\"middle\">" << svg_label(fx) << "</text>\n";
    double fy;
    if (f.log_y) {
      const double lo = std::log10(f.vy0), hi = std::log10(f.vy1);
      fy = std::pow(10.0, lo + (hi - lo) * t / 3.0);
    } else {
      fy = f.vy0 + (f.vy1 - f.vy0) * t / 3.0;
    }
    out << "<text x=\"" << svg_num(f.x0 - 6) << "\" y=\"" << svg_num(f.py(fy) + 4)
        << "\" font-size=\"10\" text-anchor=\"end\">" << svg_label(fy) << "</text>\n";
  }
}

}  // namespace detail

/// Convergence chart: one mean line per series with a +/- one-standard-
/// deviation band, evaluation index on the x axis. Uses a log y axis when
/// every plotted value is positive. Output is a self-contained SVG whose
/// bytes depend only on the input curves.
inline void write_convergence_svg(const std::vector<NamedSeries>& series,
                                  const std::string& path) {
  if (series.empty()) throw std::invalid_argument("write_convergence_svg: no series");
  std::size_t length = 0;
  for (const auto& s : series) length = std::max(length, s.stats.mean.size());
  if (length < 1) throw std::invalid_argument("write_convergence_svg: empty series");

  bool all_positive = true;
  double vy0 = std::numeric_limits<double>::infinity();
  double vy1 = -std::numeric_limits<double>::infinity();
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.stats.mean.size(); ++i) {
      const double lo = s.stats.mean[i] - s.stats.stddev[i];
      const double hi = s.stats.mean[i] + s.stats.stddev[i];
      all_positive = all_positive && lo > 0.0;
      vy0 = std::min(vy0, lo);
      vy1 = std::max(vy1, hi);
    }
  if (!(vy1 > vy0)) vy1 = vy0 + 1.0;

  const int width = 640, height = 420;
  detail::Frame frame{64, 24, width - 24, height - 48, 1.0,
                      static_cast<double>(length), vy0, vy1, all_positive};

  std::ostringstream out;
  detail::svg_header(out, width, height);
  detail::svg_axes(out, frame, "evaluations", "best objective value");

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& stats = series[si].stats;
    const char* color = detail::series_color(si);
    // Band polygon: upper edge forward, lower edge reversed.
    out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < stats.mean.size(); ++i) {
      double hi = stats.mean[i] + stats.stddev[i];
      if (frame.log_y) hi = std::max(hi, frame.vy0);
      out << detail::svg_num(frame.px(static_cast<double>(i + 1))) << ","
          << detail::svg_num(frame.py(hi)) << " ";
    }
    for (std::size_t i = stats.mean.size(); i-- > 0;) {
      double lo = stats.mean[i] - stats.stddev[i];
      if (frame.log_y) lo = std::max(lo, frame.vy0);
      out << detail::svg_num(frame.px(static_cast<double>(i + 1))) << ","
          << detail::svg_num(frame.py(lo)) << " ";
    }
    out << "\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < stats.mean.size(); ++i)
      out << detail::svg_num(frame.px(static_cast<double>(i + 1))) << ","
          << detail::svg_num(frame.py(std::max(stats.mean[i], frame.log_y ? frame.vy0 : -1e300)))
          << " ";
    out << "\"/>\n";
    out << "<text x=\"" << detail::svg_num(frame.x1 - 8) << "\" y=\""
        << detail::svg_num(frame.y0 + 16 + 16 * static_cast<double>(si))
        << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << color << "\">"
        << series[si].label << "</text>\n";
  }
  out << "</svg>\n";
  write_file(path, out.str());
}

/// Empirical-CDF step chart of the validation gaps with two vertical markers:
/// the certified bound and the plain empirical quantile at the same level.
inline void write_cdf_svg(const std::vector<double>& gaps, double bound,
                          double empirical_quantile, double alpha, const std::string& path) {
  if (gaps.empty()) throw std::invalid_argument("write_cdf_svg: empty sample");
  std::vector<double> sorted = gaps;
  std::sort(sorted.begin(), sorted.end());
  const double vx_lo = std::min(sorted.front(), std::min(bound, empirical_quantile));
  const double vx_hi = std::max(sorted.back(), std::max(bound, empirical_quantile));
  const double pad = (vx_hi - vx_lo) > 0 ? 0.05 * (vx_hi - vx_lo) : 1.0;

  const int width = 640, height = 420;
  detail::Frame frame{64, 24, width - 24, height - 48, vx_lo - pad, vx_hi + pad, 0.0, 1.0,
                      false};
  std::ostringstream out;
  detail::svg_header(out, width, height);
  detail::svg_axes(out, frame, "performance gap", "empirical CDF");

  const auto m = static_cast<double>(sorted.size());
  out << "<polyline fill=\"none\" stroke=\"#444444\" stroke-width=\"1.5\" points=\"";
  out << detail::svg_num(frame.px(vx_lo - pad)) << "," << detail::svg_num(frame.py(0.0)) << " ";
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double before = static_cast<double>(i) / m;
    const double after = static_cast<double>(i + 1) / m;
    out << detail::svg_num(frame.px(sorted[i])) << "," << detail::svg_num(frame.py(before))
        << " ";
    out << detail::svg_num(frame.px(sorted[i])) << "," << detail::svg_num(frame.py(after))
        << " ";
  }
  out << detail::svg_num(frame.px(vx_hi + pad)) << "," << detail::svg_num(frame.py(1.0));
  out << "\"/>\n";

  const auto vline = [&](double x, const char* color, const std::string& label, double ty) {
    out << "<line x1=\"" << detail::svg_num(frame.px(x)) << "\" y1=\""
        << detail::svg_num(frame.y0) << "\" x2=\"" << detail::svg_num(frame.px(x))
        << "\" y2=\"" << detail::svg_num(frame.y1) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>\n";
    out << "<text x=\"" << detail::svg_num(frame.px(x) + 4) << "\" y=\"" << detail::svg_num(ty)
        << "\" font-size=\"11\" fill=\"" << color << "\">" << label << "</text>\n";
  };
  vline(bound, "#1f77b4", "bound " + std::string(detail::svg_label(bound)), frame.y0 + 14);
  vline(empirical_quantile, "#ff7f0e",
        std::string(detail::svg_label(100.0 * (1.0 - alpha))) + "% quantile " +
            detail::svg_label(empirical_quantile),
        frame.y0 + 30);
  out << "</svg>\n";
  write_file(path, out.str());
}

}  // namespace metabbo
