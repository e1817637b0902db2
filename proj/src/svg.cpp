#include "sentrec/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sentrec/errors.hpp"

namespace sentrec::svg {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 62.0;
constexpr double kRight = 20.0;
constexpr double kTop = 36.0;
constexpr double kBottom = 46.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

// Expand a data range slightly and guard against degenerate spans.
Range pad_range(double lo, double hi) {
  if (!(lo <= hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    double pad = std::max(0.5, std::fabs(hi) * 0.5);
    return {lo - pad, hi + pad};
  }
  double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

double map_x(double x, const Range& r) {
  return kLeft + (x - r.lo) / (r.hi - r.lo) * (kWidth - kLeft - kRight);
}

double map_y(double y, const Range& r) {
  return kHeight - kBottom - (y - r.lo) / (r.hi - r.lo) * (kHeight - kTop - kBottom);
}

void open_svg(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth)
      << "\" height=\"" << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << " "
      << fmt(kHeight) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
      << "\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\" fill=\"#222222\">"
      << escape(title) << "</text>\n";
}

void axes(std::ostringstream& out, const std::string& x_label, const std::string& y_label) {
  out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft)
      << "\" y2=\"" << fmt(kHeight - kBottom) << "\" stroke=\"#444444\"/>\n";
  out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kHeight - kBottom) << "\" x2=\""
      << fmt(kWidth - kRight) << "\" y2=\"" << fmt(kHeight - kBottom)
      << "\" stroke=\"#444444\"/>\n";
  if (!x_label.empty()) {
    out << "<text x=\"" << fmt((kLeft + kWidth - kRight) / 2) << "\" y=\""
        << fmt(kHeight - 10) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\" fill=\"#222222\">"
        << escape(x_label) << "</text>\n";
  }
  if (!y_label.empty()) {
    double cx = 16.0;
    double cy = (kTop + kHeight - kBottom) / 2;
    out << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(cy)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "fill=\"#222222\" transform=\"rotate(-90 "
        << fmt(cx) << " " << fmt(cy) << ")\">" << escape(y_label) << "</text>\n";
  }
}

void y_ticks(std::ostringstream& out, const Range& r) {
  for (int i = 0; i <= 4; ++i) {
    double v = r.lo + (r.hi - r.lo) * i / 4.0;
    double y = map_y(v, r);
    out << "<line x1=\"" << fmt(kLeft - 4) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(kLeft)
        << "\" y2=\"" << fmt(y) << "\" stroke=\"#444444\"/>\n";
    out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(y) << "\" x2=\""
        << fmt(kWidth - kRight) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#dddddd\" stroke-dasharray=\"3 3\"/>\n";
    out << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#222222\">"
        << fmt(v) << "</text>\n";
  }
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series) {
  if (series.empty()) throw ConfigError("line_chart: no series");
  double xlo = 0.0, xhi = 1.0, ylo = 0.0, yhi = 1.0;
  bool seen = false;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size())
      throw ConfigError("line_chart: series '" + s.label + "' has mismatched x/y sizes");
    for (size_t i = 0; i < s.xs.size(); ++i) {
      if (!seen) {
        xlo = xhi = s.xs[i];
        ylo = yhi = s.ys[i];
        seen = true;
      } else {
        xlo = std::min(xlo, s.xs[i]);
        xhi = std::max(xhi, s.xs[i]);
        ylo = std::min(ylo, s.ys[i]);
        yhi = std::max(yhi, s.ys[i]);
      }
    }
  }
  if (!seen) throw ConfigError("line_chart: all series are empty");
  Range rx = pad_range(xlo, xhi);
  Range ry = pad_range(ylo, yhi);

  std::ostringstream out;
  open_svg(out, title);
  y_ticks(out, ry);
  axes(out, x_label, y_label);

  // X ticks at each distinct x of the first series (sweeps have few points).
  for (double x : series[0].xs) {
    double px = map_x(x, rx);
    out << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(kHeight - kBottom) << "\" x2=\""
        << fmt(px) << "\" y2=\"" << fmt(kHeight - kBottom + 4) << "\" stroke=\"#444444\"/>\n";
    out << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(kHeight - kBottom + 17)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#222222\">"
        << fmt(x) << "</text>\n";
  }

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    if (!s.xs.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (size_t i = 0; i < s.xs.size(); ++i) {
        if (i) out << " ";
        out << fmt(map_x(s.xs[i], rx)) << "," << fmt(map_y(s.ys[i], ry));
      }
      out << "\"/>\n";
      for (size_t i = 0; i < s.xs.size(); ++i) {
        out << "<circle cx=\"" << fmt(map_x(s.xs[i], rx)) << "\" cy=\""
            << fmt(map_y(s.ys[i], ry)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    double ly = kTop + 6 + 16.0 * static_cast<double>(si);
    out << "<rect x=\"" << fmt(kWidth - kRight - 150) << "\" y=\"" << fmt(ly)
        << "\" width=\"12\" height=\"4\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << fmt(kWidth - kRight - 132) << "\" y=\"" << fmt(ly + 6)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222222\">"
        << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string stacked_bar_chart(const std::string& title, const std::string& y_label,
                              const StackedBars& data) {
  if (data.bucket_labels.empty()) throw ConfigError("stacked_bar_chart: no buckets");
  if (data.shares.size() != data.bucket_labels.size())
    throw ConfigError("stacked_bar_chart: shares/bucket count mismatch");
  for (const auto& row : data.shares) {
    if (row.size() != data.part_labels.size())
      throw ConfigError("stacked_bar_chart: shares/part count mismatch");
  }
  Range ry{0.0, 1.0};

  std::ostringstream out;
  open_svg(out, title);
  y_ticks(out, ry);
  axes(out, "", y_label);

  double span = kWidth - kLeft - kRight;
  double n = static_cast<double>(data.bucket_labels.size());
  double slot = span / n;
  double bar_w = slot * 0.6;
  for (size_t b = 0; b < data.bucket_labels.size(); ++b) {
    double x0 = kLeft + slot * static_cast<double>(b) + (slot - bar_w) / 2;
    double acc = 0.0;
    for (size_t p = 0; p < data.part_labels.size(); ++p) {
      double v = std::clamp(data.shares[b][p], 0.0, 1.0);
      double y1 = map_y(acc, ry);
      double y2 = map_y(std::min(1.0, acc + v), ry);
      if (y1 - y2 > 1e-9) {
        out << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y2) << "\" width=\"" << fmt(bar_w)
            << "\" height=\"" << fmt(y1 - y2) << "\" fill=\""
            << kPalette[p % kPaletteSize] << "\"/>\n";
      }
      acc += v;
    }
    out << "<text x=\"" << fmt(x0 + bar_w / 2) << "\" y=\"" << fmt(kHeight - kBottom + 17)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#222222\">"
        << escape(data.bucket_labels[b]) << "</text>\n";
  }
  for (size_t p = 0; p < data.part_labels.size(); ++p) {
    double ly = kTop + 6 + 16.0 * static_cast<double>(p);
    out << "<rect x=\"" << fmt(kWidth - kRight - 150) << "\" y=\"" << fmt(ly)
        << "\" width=\"12\" height=\"12\" fill=\"" << kPalette[p % kPaletteSize] << "\"/>\n";
    out << "<text x=\"" << fmt(kWidth - kRight - 132) << "\" y=\"" << fmt(ly + 10)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222222\">"
        << escape(data.part_labels[p]) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace sentrec::svg
