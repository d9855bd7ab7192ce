#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rh/common.hpp"

namespace rh::quad {

// Gauss-Legendre rule on [-1, 1]; cached, safe to call concurrently.
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const Rule& gauss_legendre(int order);

// Composite Gauss-Legendre: `panels` equal panels of `order` points each.
template <typename F>
auto composite(F&& f, double a, double b, int order, int panels) {
  using R = decltype(f(a));
  const Rule& rule = gauss_legendre(order);
  R sum{};
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    R part{};
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      part += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
    }
    sum += 0.5 * h * part;
  }
  return sum;
}

struct AdaptiveResult {
  double value = 0.0;
  double error = 0.0;
};

// Globally adaptive 15-point Gauss-Kronrod on [a, b], split first at the supplied
// breakpoints. `tol` is relative to the integral of |f|.
AdaptiveResult adaptive(const std::function<double(double)>& f, double a, double b, double tol,
                        std::span<const double> breakpoints = {});

struct AdaptiveComplexResult {
  cplx value;
  double error = 0.0;
};
AdaptiveComplexResult adaptive_complex(const std::function<cplx(double)>& f, double a, double b, double tol,
                                       std::span<const double> breakpoints = {});

}  // namespace rh::quad
