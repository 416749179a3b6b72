#pragma once

/**
 * @file
 * @brief Self-contained SVG line plots of closed-loop traces.
 *
 * Output depends only on the input values (fixed palette, fixed number
 * formatting), so identical traces give identical bytes.
 */

#include "miqp_mpc/sim_harness.hpp"

#include <string>
#include <vector>

namespace miqp_mpc {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 420;
};

/// Axis range [lo, hi] with "nice" tick spacing (1, 2 or 5 times a power of
/// ten) that covers every finite value; a degenerate range is widened by 1.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  double step = 0.5;
};

Axis nice_axis(double data_min, double data_max);

/// One polyline per series plus a legend. Non-finite points are skipped.
std::string svg_line_plot(const std::vector<Series>& series, const PlotOptions& options);

/// x1 (radial) against x2 (along-track) for every trace, x_end included.
std::string position_plane_svg(const std::vector<SimTrace>& traces, const std::vector<std::string>& labels);

/// e_k against k; against the origin when reference is null, otherwise
/// tracking_error(trace, *reference).
std::string error_svg(const std::vector<SimTrace>& traces, const std::vector<std::string>& labels,
                      const SimTrace* reference = nullptr);

}  // namespace miqp_mpc
