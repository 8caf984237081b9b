#include "fmpc/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <utility>

namespace fmpc {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 16.0;
constexpr double kTop = 34.0;
constexpr double kBottom = 46.0;

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void take(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (lo > hi) {  // no finite data at all
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(lo))) {
      const double pad = std::max(0.5, std::abs(lo) * 0.5);
      lo -= pad;
      hi += pad;
    }
  }
};

// Round tick spacing to 1/2/5 times a power of ten.
std::vector<double> ticks(const Range& r, int target) {
  const double raw = (r.hi - r.lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (const double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * mult >= raw) {
      step = mag * mult;
      break;
    }
  }
  std::vector<double> out;
  const double first = std::ceil(r.lo / step - 1e-9) * step;
  for (double v = first; v <= r.hi + 1e-9 * step; v += step) out.push_back(v == 0.0 ? 0.0 : v);
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

// Dense traces are thinned to a min-max envelope per bucket so spikes
// survive while the file stays small. Non-finite samples are kept as
// explicit break markers.
constexpr size_t kMaxBuckets = 2000;

void decimate(std::vector<double>& xs, std::vector<double>& ys) {
  const size_t n = std::min(xs.size(), ys.size());
  xs.resize(n);
  ys.resize(n);
  if (n <= 2 * kMaxBuckets) return;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> ox, oy;
  ox.reserve(2 * kMaxBuckets + 16);
  oy.reserve(2 * kMaxBuckets + 16);
  for (size_t b = 0; b < kMaxBuckets; ++b) {
    const size_t lo = b * n / kMaxBuckets;
    const size_t hi = (b + 1) * n / kMaxBuckets;
    size_t imin = n, imax = n;
    bool broke = false;
    for (size_t i = lo; i < hi; ++i) {
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
        broke = true;
        continue;
      }
      if (imin == n || ys[i] < ys[imin]) imin = i;
      if (imax == n || ys[i] > ys[imax]) imax = i;
    }
    if (imin < n) {
      const size_t first = std::min(imin, imax);
      const size_t second = std::max(imin, imax);
      ox.push_back(xs[first]);
      oy.push_back(ys[first]);
      if (second != first) {
        ox.push_back(xs[second]);
        oy.push_back(ys[second]);
      }
    }
    if (broke) {
      ox.push_back(nan);
      oy.push_back(nan);
    }
  }
  xs = std::move(ox);
  ys = std::move(oy);
}

}  // namespace

void LinePlot::write_svg(std::ostream& out) const {
  std::vector<std::pair<std::vector<double>, std::vector<double>>> thin(series.size());
  for (size_t si = 0; si < series.size(); ++si) {
    thin[si] = {series[si].x, series[si].y};
    decimate(thin[si].first, thin[si].second);
  }

  Range rx, ry;
  for (const auto& [xs, ys] : thin) {
    for (size_t i = 0; i < xs.size(); ++i) {
      if (std::isfinite(xs[i]) && std::isfinite(ys[i])) {
        rx.take(xs[i]);
        ry.take(ys[i]);
      }
    }
  }
  rx.finish();
  ry.finish();

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (v - rx.lo) / (rx.hi - rx.lo) * plot_w; };
  auto sy = [&](double v) { return kTop + (ry.hi - v) / (ry.hi - ry.lo) * plot_h; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";

  // Grid and ticks.
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (const double tx : ticks(rx, 8)) {
    const double px = sx(tx);
    out << "<line x1=\"" << px << "\" y1=\"" << kTop << "\" x2=\"" << px << "\" y2=\""
        << kTop + plot_h << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
    out << "<text x=\"" << px << "\" y=\"" << kTop + plot_h + 16
        << "\" text-anchor=\"middle\">" << num(tx) << "</text>\n";
  }
  for (const double ty : ticks(ry, 6)) {
    const double py = sy(ty);
    out << "<line x1=\"" << kLeft << "\" y1=\"" << py << "\" x2=\"" << kLeft + plot_w
        << "\" y2=\"" << py << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\">" << num(ty) << "</text>\n";
  }
  out << "</g>\n";

  // Frame.
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";

  // Series, clipped to the frame; non-finite samples break the polyline.
  out << "<clipPath id=\"frame\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
      << plot_w << "\" height=\"" << plot_h << "\"/></clipPath>\n";
  out << "<g clip-path=\"url(#frame)\" fill=\"none\">\n";
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const auto& [xs, ys] = thin[si];
    std::string points;
    auto flush = [&] {
      if (points.empty()) return;
      out << "<polyline points=\"" << points << "\" stroke=\"" << s.color
          << "\" stroke-width=\"" << s.width << '"';
      if (s.dashed) out << " stroke-dasharray=\"6 4\"";
      out << "/>\n";
      points.clear();
    };
    for (size_t i = 0; i < xs.size(); ++i) {
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += num(sx(xs[i]));
      points += ',';
      points += num(sy(ys[i]));
    }
    flush();
  }
  out << "</g>\n";

  // Labels.
  out << "<g font-family=\"sans-serif\" fill=\"#111\">\n";
  if (!title.empty())
    out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">"
        << escape(title) << "</text>\n";
  if (!xlabel.empty())
    out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
        << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  if (!ylabel.empty())
    out << "<text x=\"14\" y=\"" << kTop + plot_h / 2
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << kTop + plot_h / 2 << ")\">" << escape(ylabel) << "</text>\n";
  out << "</g>\n";

  // Legend, top-right inside the frame.
  double ly = kTop + 14;
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#111\">\n";
  for (const auto& s : series) {
    if (s.name.empty()) continue;
    const double lx = kLeft + plot_w - 150;
    out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 22 << "\" y2=\""
        << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"" << s.width << '"';
    if (s.dashed) out << " stroke-dasharray=\"6 4\"";
    out << "/>\n";
    out << "<text x=\"" << lx + 28 << "\" y=\"" << ly << "\">" << escape(s.name) << "</text>\n";
    ly += 16;
  }
  out << "</g>\n";
  out << "</svg>\n";
}

void LinePlot::write_svg_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_svg_file: cannot open " + path);
  write_svg(out);
}

}  // namespace fmpc
