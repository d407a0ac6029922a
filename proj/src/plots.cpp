#include "eostb/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "eostb/errors.hpp"

namespace eostb {

namespace {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
  double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string header(const std::string& title) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kW) + "\" height=\"" + fmt(kH) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(kW / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
  return s;
}

std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel, bool xticks) {
  std::string s;
  const double l = kLeft, r = kW - kRight, t = kTop, b = kH - kBottom;
  s += "<path d=\"M" + fmt(l) + " " + fmt(t) + " V" + fmt(b) + " H" + fmt(r) + "\" stroke=\"black\" fill=\"none\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += "<text x=\"" + fmt(l - 6) + "\" y=\"" + fmt(f.py(yv) + 4) + "\" text-anchor=\"end\">" + tick(yv) + "</text>\n";
    if (xticks) {
      const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
      s += "<text x=\"" + fmt(f.px(xv)) + "\" y=\"" + fmt(b + 16) + "\" text-anchor=\"middle\">" + tick(xv) +
           "</text>\n";
    }
  }
  s += "<text x=\"" + fmt((l + r) / 2) + "\" y=\"" + fmt(kH - 10) + "\" text-anchor=\"middle\">" + escape(xlabel) +
       "</text>\n";
  s += "<text x=\"16\" y=\"" + fmt((t + b) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fmt((t + b) / 2) + ")\">" + escape(ylabel) + "</text>\n";
  return s;
}

std::string legend(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    const double x = kW - kRight + 14;
    s += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y - 9) + "\" width=\"12\" height=\"10\" fill=\"" +
         kColors[i % std::size(kColors)] + "\"/>\n";
    s += "<text x=\"" + fmt(x + 18) + "\" y=\"" + fmt(y) + "\">" + escape(names[i]) + "</text>\n";
  }
  return s;
}

}  // namespace

std::string line_plot_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.y[i]) || !std::isfinite(s.x[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1};

  std::string svg = header(title) + axes(f, xlabel, ylabel, true);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    names.push_back(s.name);
    const char* color = kColors[k % std::size(kColors)];
    std::string d;
    bool pen = false;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.y[i])) {
        pen = false;
        continue;
      }
      d += (pen ? " L" : " M") + fmt(f.px(s.x[i])) + " " + fmt(f.py(s.y[i]));
      pen = true;
      svg += "<circle cx=\"" + fmt(f.px(s.x[i])) + "\" cy=\"" + fmt(f.py(s.y[i])) + "\" r=\"2.5\" fill=\"" + color +
             "\"/>\n";
    }
    if (!d.empty()) svg += "<path d=\"" + d.substr(1) + "\" stroke=\"" + color + "\" fill=\"none\" stroke-width=\"1.5\"/>\n";
  }
  svg += legend(names);
  svg += "</svg>\n";
  return svg;
}

std::string bar_plot_svg(const std::string& title, const std::vector<std::string>& categories,
                         const std::vector<BarGroup>& groups) {
  double y1 = 0.0, y0 = 0.0;
  for (const auto& g : groups)
    for (double v : g.values)
      if (std::isfinite(v)) {
        y1 = std::max(y1, v);
        y0 = std::min(y0, v);
      }
  widen(y0, y1);
  const Frame f{0.0, static_cast<double>(std::max<std::size_t>(categories.size(), 1)), y0, y1};
  std::string svg = header(title) + axes(f, "", "", false);
  const double slot = (kW - kLeft - kRight) / std::max<double>(static_cast<double>(categories.size()), 1.0);
  const double bw = slot * 0.8 / std::max<double>(static_cast<double>(groups.size()), 1.0);
  std::vector<std::string> names;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    names.push_back(groups[g].name);
    for (std::size_t c = 0; c < categories.size() && c < groups[g].values.size(); ++c) {
      const double v = groups[g].values[c];
      if (!std::isfinite(v)) continue;
      const double x = kLeft + slot * static_cast<double>(c) + slot * 0.1 + bw * static_cast<double>(g);
      const double ya = f.py(std::max(v, 0.0)), yb = f.py(std::min(v, 0.0));
      svg += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(ya) + "\" width=\"" + fmt(bw) + "\" height=\"" + fmt(yb - ya) +
             "\" fill=\"" + kColors[g % std::size(kColors)] + "\"/>\n";
    }
  }
  for (std::size_t c = 0; c < categories.size(); ++c)
    svg += "<text x=\"" + fmt(kLeft + slot * (static_cast<double>(c) + 0.5)) + "\" y=\"" + fmt(kH - kBottom + 16) +
           "\" text-anchor=\"middle\">" + escape(categories[c]) + "</text>\n";
  svg += legend(names);
  svg += "</svg>\n";
  return svg;
}

std::string series_tsv(const std::vector<Series>& series) {
  std::string out = "series\tx\ty\n";
  char buf[96];
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      std::snprintf(buf, sizeof buf, "\t%.10g\t%.10g\n", s.x[i], s.y[i]);
      out += s.name + buf;
    }
  return out;
}

std::string bars_tsv(const std::vector<std::string>& categories, const std::vector<BarGroup>& groups) {
  std::string out = "group\tcategory\tvalue\n";
  char buf[64];
  for (const auto& g : groups)
    for (std::size_t c = 0; c < categories.size() && c < g.values.size(); ++c) {
      std::snprintf(buf, sizeof buf, "\t%.10g\n", g.values[c]);
      out += g.name + "\t" + categories[c] + buf;
    }
  return out;
}

void write_plot(const std::string& stem, const std::string& svg, const std::string& tsv) {
  for (const auto& [path, body] : {std::pair{stem + ".svg", &svg}, std::pair{stem + ".tsv", &tsv}}) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << *body;
    if (!f) throw IoError("write failed for '" + path + "'");
  }
}

}  // namespace eostb
