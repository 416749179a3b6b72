#include "miqp_mpc/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace miqp_mpc {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
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

std::vector<double> row_values(const SimTrace& t, int i) {
  std::vector<double> v;
  for (const auto& r : t.rows) v.push_back(r.x[i]);
  return v;
}

}  // namespace

Axis nice_axis(double data_min, double data_max) {
  if (!(data_min <= data_max)) {
    data_min = 0.0;
    data_max = 0.0;
  }
  if (data_max - data_min <= 1e-12 * std::max(std::abs(data_min), std::abs(data_max))) {
    data_min -= 1.0;
    data_max += 1.0;
  }
  const double raw = (data_max - data_min) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = 10.0 * mag;
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  return {std::floor(data_min / step) * step, std::ceil(data_max / step) * step, step};
}

std::string svg_line_plot(const std::vector<Series>& series, const PlotOptions& o) {
  constexpr double left = 80, right = 150, top = 40, bottom = 55;
  const double pw = o.width - left - right, ph = o.height - top - bottom;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  const Axis ax = nice_axis(xmin, xmax), ay = nice_axis(ymin, ymax);
  auto px = [&](double x) { return left + (x - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double y) { return top + (ay.hi - y) / (ay.hi - ay.lo) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
     << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt("%.2f", left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(o.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << fmt("%.2f", pw) << "\" height=\""
     << fmt("%.2f", ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  const int xticks = static_cast<int>(std::lround((ax.hi - ax.lo) / ax.step));
  for (int i = 0; i <= xticks; ++i) {
    const double v = ax.lo + i * ax.step, x = px(v);
    os << "<line x1=\"" << fmt("%.2f", x) << "\" y1=\"" << fmt("%.2f", top + ph) << "\" x2=\"" << fmt("%.2f", x)
       << "\" y2=\"" << fmt("%.2f", top + ph + 5) << "\" stroke=\"black\"/>";
    os << "<text x=\"" << fmt("%.2f", x) << "\" y=\"" << fmt("%.2f", top + ph + 18)
       << "\" text-anchor=\"middle\">" << fmt("%.6g", std::abs(v) < 1e-12 * ax.step ? 0.0 : v) << "</text>\n";
  }
  const int yticks = static_cast<int>(std::lround((ay.hi - ay.lo) / ay.step));
  for (int i = 0; i <= yticks; ++i) {
    const double v = ay.lo + i * ay.step, y = py(v);
    os << "<line x1=\"" << fmt("%.2f", left - 5) << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\"" << left
       << "\" y2=\"" << fmt("%.2f", y) << "\" stroke=\"black\"/>";
    os << "<text x=\"" << fmt("%.2f", left - 8) << "\" y=\"" << fmt("%.2f", y + 4) << "\" text-anchor=\"end\">"
       << fmt("%.6g", std::abs(v) < 1e-12 * ay.step ? 0.0 : v) << "</text>\n";
  }
  os << "<text x=\"" << fmt("%.2f", left + pw / 2) << "\" y=\"" << o.height - 12 << "\" text-anchor=\"middle\">"
     << escape(o.x_label) << "</text>\n";
  os << "<text transform=\"translate(18 " << fmt("%.2f", top + ph / 2)
     << ") rotate(-90)\" text-anchor=\"middle\">" << escape(o.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << (first ? "" : " ") << fmt("%.2f", px(s.x[i])) << ',' << fmt("%.2f", py(s.y[i]));
      first = false;
    }
    os << "\"/>\n";
    const double ly = top + 12 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << fmt("%.2f", left + pw + 12) << "\" y1=\"" << fmt("%.2f", ly) << "\" x2=\""
       << fmt("%.2f", left + pw + 32) << "\" y2=\"" << fmt("%.2f", ly) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>";
    os << "<text x=\"" << fmt("%.2f", left + pw + 38) << "\" y=\"" << fmt("%.2f", ly + 4) << "\">"
       << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string position_plane_svg(const std::vector<SimTrace>& traces, const std::vector<std::string>& labels) {
  std::vector<Series> series;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Series s{i < labels.size() ? labels[i] : traces[i].name, row_values(traces[i], 0), row_values(traces[i], 1)};
    s.x.push_back(traces[i].x_end[0]);
    s.y.push_back(traces[i].x_end[1]);
    series.push_back(std::move(s));
  }
  return svg_line_plot(series, {"Position plane", "x1 radial [km]", "x2 along-track [km]"});
}

std::string error_svg(const std::vector<SimTrace>& traces, const std::vector<std::string>& labels,
                      const SimTrace* reference) {
  std::vector<Series> series;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Series s;
    s.label = i < labels.size() ? labels[i] : traces[i].name;
    if (reference) {
      s.y = tracking_error(traces[i], *reference);
    } else {
      for (const auto& r : traces[i].rows) s.y.push_back(r.x.norm());
    }
    for (std::size_t k = 0; k < s.y.size(); ++k) s.x.push_back(static_cast<double>(k));
    series.push_back(std::move(s));
  }
  return svg_line_plot(series, {reference ? "Tracking error" : "Distance to origin", "sample k",
                                reference ? "|x_k - x_k^ref| [km]" : "|x_k| [km]"});
}

}  // namespace miqp_mpc
