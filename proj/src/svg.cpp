#include "blochhom/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace blochhom {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  double map(double v) const { return ((log ? std::log10(v) : v) - lo) / (hi - lo); }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
};

Axis fit_axis(const std::vector<PlotSeries>& series, bool use_x, bool log) {
  Axis a;
  a.log = log;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series) {
    const auto& vals = use_x ? s.x : s.y;
    for (double v : vals) {
      if (!a.usable(v)) continue;
      const double t = log ? std::log10(v) : v;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  }
  if (!(hi >= lo)) return a;
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  a.lo = lo - pad;
  a.hi = hi + pad;
  return a;
}

std::string tick_label(double t, bool log) { return log ? fmt::format("1e{:.2g}", t) : fmt::format("{:.4g}", t); }

}  // namespace

std::optional<std::string> render_svg(const PlotSpec& spec) {
  const Axis ax = fit_axis(spec.series, true, spec.log_x);
  const Axis ay = fit_axis(spec.series, false, spec.log_y);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + ax.map(v) * pw; };
  auto py = [&](double v) { return kTop + (1.0 - ay.map(v)) * ph; };

  std::string body;
  std::size_t drawn = 0;
  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const auto& s = spec.series[si];
    const char* color = kColors[si % std::size(kColors)];
    std::string points;
    std::string marks;
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      points += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
      if (s.markers) {
        marks += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3.5\" fill=\"{}\"/>\n", px(s.x[i]), py(s.y[i]), color);
      }
    }
    if (points.empty()) continue;
    body += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, points);
    body += marks;
    const double ly = kTop + 16.0 * static_cast<double>(drawn);
    body += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                        kWidth - kRight + 10.0, ly + 6.0, kWidth - kRight + 30.0, ly + 6.0, color);
    body += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{}</text>\n", kWidth - kRight + 34.0, ly + 10.0,
                        xml_escape(s.name));
    ++drawn;
  }
  if (drawn == 0) return std::nullopt;

  std::string axes = fmt::format(
      "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"#333\"/>\n", kLeft,
      kTop, pw, ph);
  for (int i = 0; i <= 4; ++i) {
    const double fx = i / 4.0;
    const double tx = ax.lo + fx * (ax.hi - ax.lo);
    const double ty = ay.lo + fx * (ay.hi - ay.lo);
    const double sx = kLeft + fx * pw;
    const double sy = kTop + (1.0 - fx) * ph;
    axes += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#333\"/>\n", sx,
                        kTop + ph, kTop + ph + 5.0);
    axes += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n", sx,
                        kTop + ph + 18.0, xml_escape(tick_label(tx, ax.log)));
    axes += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#333\"/>\n", kLeft - 5.0,
                        sy, kLeft, sy);
    axes += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n", kLeft - 8.0,
                        sy + 3.0, xml_escape(tick_label(ty, ay.log)));
  }
  axes += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                      kLeft + 0.5 * pw, kHeight - 15.0, xml_escape(spec.x_label));
  axes += fmt::format(
      "<text x=\"15\" y=\"{:.1f}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.1f})\">{}</text>\n",
      kTop + 0.5 * ph, kTop + 0.5 * ph, xml_escape(spec.y_label));
  axes += fmt::format("<text x=\"{:.1f}\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
                      kLeft + 0.5 * pw, xml_escape(spec.title));

  return fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}{}</svg>\n",
      kWidth, kHeight, kWidth, kHeight, axes, body);
}

}  // namespace blochhom
