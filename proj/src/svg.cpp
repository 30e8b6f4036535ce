#include "pulsebench/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "pulsebench/error.hpp"

namespace pb::svg {

namespace {

constexpr const char* kCycle[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};

std::string esc(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void feed(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Degenerate or empty ranges widen to something drawable.
  void settle() {
    if (lo > hi) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 1.0;
      hi += 1.0;
    }
  }
  double span() const { return hi - lo; }
};

// Tick step of the form {1,2,5}*10^k giving 4..8 ticks over the span.
double tick_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  if (r < 1.5) return mag;
  if (r < 3.5) return 2.0 * mag;
  if (r < 7.5) return 5.0 * mag;
  return 10.0 * mag;
}

}  // namespace

std::string render_chart(const std::vector<Panel>& panels, int width,
                         int panel_height) {
  require(!panels.empty(), ErrorKind::kEmptyInput, "chart has no panels");
  require(width >= 200 && panel_height >= 120, ErrorKind::kInvalidArgument,
          "chart dimensions too small");

  const double ml = 64, mr = 18, mt = 34, mb = 44;  // per-panel margins
  const int total_h = panel_height * static_cast<int>(panels.size());

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
       std::to_string(width) + "\" height=\"" + std::to_string(total_h) +
       "\" viewBox=\"0 0 " + std::to_string(width) + " " +
       std::to_string(total_h) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const Panel& p = panels[pi];
    const double top = static_cast<double>(panel_height) * pi;
    const double x0 = ml, x1 = width - mr;
    const double y0 = top + mt, y1 = top + panel_height - mb;

    Range rx, ry;
    for (const auto& ser : p.series) {
      for (double v : ser.x) rx.feed(v);
      for (double v : ser.y) ry.feed(v);
    }
    rx.settle();
    ry.settle();
    const double pad = 0.04 * ry.span();
    ry.lo -= pad;
    ry.hi += pad;

    auto px = [&](double v) { return x0 + (v - rx.lo) / rx.span() * (x1 - x0); };
    auto py = [&](double v) { return y1 - (v - ry.lo) / ry.span() * (y1 - y0); };

    s += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" +
         num(x1 - x0) + "\" height=\"" + num(y1 - y0) +
         "\" fill=\"none\" stroke=\"#333333\"/>\n";

    const double sx = tick_step(rx.span());
    for (double t = std::ceil(rx.lo / sx) * sx; t <= rx.hi + 1e-9 * sx; t += sx) {
      const double X = px(t);
      s += "<line x1=\"" + num(X) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(X) +
           "\" y2=\"" + num(y1) + "\" stroke=\"#dddddd\"/>\n";
      s += "<text x=\"" + num(X) + "\" y=\"" + num(y1 + 16) +
           "\" text-anchor=\"middle\">" + num(t) + "</text>\n";
    }
    const double sy = tick_step(ry.span());
    for (double t = std::ceil(ry.lo / sy) * sy; t <= ry.hi + 1e-9 * sy; t += sy) {
      const double Y = py(t);
      s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(Y) + "\" x2=\"" + num(x1) +
           "\" y2=\"" + num(Y) + "\" stroke=\"#dddddd\"/>\n";
      s += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(Y + 4) +
           "\" text-anchor=\"end\">" + num(t) + "</text>\n";
    }

    for (std::size_t si = 0; si < p.series.size(); ++si) {
      const Series& ser = p.series[si];
      require(ser.x.size() == ser.y.size(), ErrorKind::kInvalidLength,
              "series '" + ser.label + "': x/y length mismatch");
      const std::string color =
          ser.color.empty() ? kCycle[si % std::size(kCycle)] : ser.color;
      std::string pts;
      for (std::size_t i = 0; i < ser.x.size(); ++i) {
        if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.y[i])) continue;
        pts += num(px(ser.x[i])) + "," + num(py(ser.y[i])) + " ";
      }
      if (!pts.empty())
        s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"1.3\"/>\n";
      // Legend swatch, top-right, one row per series.
      const double lx = x1 - 150, ly = y0 + 14 + 15 * static_cast<double>(si);
      s += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
           num(lx + 22) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
      s += "<text x=\"" + num(lx + 28) + "\" y=\"" + num(ly) + "\">" +
           esc(ser.label) + "</text>\n";
    }

    s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(y0 - 10) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + esc(p.title) +
         "</text>\n";
    s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(y1 + 34) +
         "\" text-anchor=\"middle\">" + esc(p.x_label) + "</text>\n";
    const double cy = (y0 + y1) / 2;
    s += "<text x=\"14\" y=\"" + num(cy) + "\" transform=\"rotate(-90 14 " +
         num(cy) + ")\" text-anchor=\"middle\">" + esc(p.y_label) + "</text>\n";
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

void write_chart(const std::string& path, const std::vector<Panel>& panels,
                 int width, int panel_height) {
  const std::string body = render_chart(panels, width, panel_height);
  std::ofstream os(path, std::ios::binary);
  require(os.good(), ErrorKind::kIo, "cannot write " + path);
  os << body;
  require(os.good(), ErrorKind::kIo, "short write to " + path);
}

}  // namespace pb::svg
