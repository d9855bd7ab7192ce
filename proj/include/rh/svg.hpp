#pragma once

// Minimal self-contained SVG line plots: polylines, axis ticks, legend.
// Non-finite points are dropped and the count is reported in an XML comment.

#include <string>
#include <vector>

namespace rh {

struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 800;
  int height = 500;
};

// Throws DomainError when `curves` is empty or a curve has mismatched x/y sizes.
std::string emit_svg(const std::vector<Curve>& curves, const Axes& axes);

}  // namespace rh
