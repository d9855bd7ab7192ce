#include "rh/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "rh/common.hpp"

namespace rh {

namespace {

constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
constexpr std::array<const char*, 3> kDashes{"", "6,4", "2,3"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

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

// Tick positions at a 1-2-5 step covering [lo, hi] with about `target` ticks.
std::vector<double> ticks(double lo, double hi, int target) {
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    step = f * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

}  // namespace

std::string emit_svg(const std::vector<Curve>& curves, const Axes& axes) {
  if (curves.empty()) throw DomainError("emit_svg: no curves");
  double xlo = std::numeric_limits<double>::infinity();
  double xhi = -xlo;
  double ylo = xlo;
  double yhi = -xlo;
  std::size_t dropped = 0;
  for (const auto& c : curves) {
    if (c.x.size() != c.y.size()) throw DomainError("emit_svg: curve '" + c.label + "' has mismatched x and y");
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i])) {
        ++dropped;
        continue;
      }
      xlo = std::min(xlo, c.x[i]);
      xhi = std::max(xhi, c.x[i]);
      ylo = std::min(ylo, c.y[i]);
      yhi = std::max(yhi, c.y[i]);
    }
  }
  if (!std::isfinite(xlo)) {
    xlo = 0.0;
    xhi = 1.0;
    ylo = 0.0;
    yhi = 1.0;
  }
  if (xhi - xlo <= 0.0) {
    xlo -= 0.5;
    xhi += 0.5;
  }
  if (yhi - ylo <= 0.0) {
    ylo -= 0.5;
    yhi += 0.5;
  }
  const double pad = 0.05 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;

  const double left = 70.0;
  const double right = 20.0;
  const double top = 40.0;
  const double bottom = 55.0;
  const double w = axes.width - left - right;
  const double h = axes.height - top - bottom;
  auto px = [&](double x) { return left + (x - xlo) / (xhi - xlo) * w; };
  auto py = [&](double y) { return top + (yhi - y) / (yhi - ylo) * h; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(axes.width) + "\" height=\"" +
       std::to_string(axes.height) + "\" viewBox=\"0 0 " + std::to_string(axes.width) + " " +
       std::to_string(axes.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<!-- dropped " + std::to_string(dropped) + " non-finite points -->\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(axes.width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       escape(axes.title) + "</text>\n";
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
       "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : ticks(xlo, xhi, 8)) {
    const double x = px(t);
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(top + h) + "\" x2=\"" + num(x) + "\" y2=\"" + num(top + h + 5) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(top + h + 18) + "\" text-anchor=\"middle\">" + num(t) + "</text>\n";
  }
  for (double t : ticks(ylo, yhi, 6)) {
    const double y = py(t);
    s += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left) + "\" y2=\"" + num(y) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(left - 8) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + num(t) + "</text>\n";
  }
  if (ylo < 0.0 && yhi > 0.0) {
    s += "<line x1=\"" + num(left) + "\" y1=\"" + num(py(0.0)) + "\" x2=\"" + num(left + w) + "\" y2=\"" +
         num(py(0.0)) + "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
  }
  s += "<text x=\"" + num(left + w / 2) + "\" y=\"" + num(axes.height - 12.0) + "\" text-anchor=\"middle\">" +
       escape(axes.x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num(top + h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(top + h / 2) + ")\">" + escape(axes.y_label) + "</text>\n";

  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const std::string color = kColors[k % kColors.size()];
    const std::string dash = kDashes[k % kDashes.size()];
    std::string style = "fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"";
    if (!dash.empty()) style += " stroke-dasharray=\"" + dash + "\"";
    s += "<polyline " + style + " points=\"";
    bool first = true;
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i])) continue;
      if (!first) s += ' ';
      s += num(px(c.x[i])) + "," + num(py(c.y[i]));
      first = false;
    }
    s += "\"/>\n";
    const double ly = top + 14.0 + 16.0 * static_cast<double>(k);
    const double lx = left + w - 170.0;
    s += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 24) + "\" y2=\"" + num(ly) + "\" " +
         style + "/>\n";
    s += "<text x=\"" + num(lx + 30) + "\" y=\"" + num(ly + 4) + "\">" + escape(c.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace rh
