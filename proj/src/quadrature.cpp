#include "rh/quadrature.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <limits>

namespace rh::quad {
namespace {

Rule make_rule(int n) {
  Rule r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[static_cast<std::size_t>(i)] = -x;
    r.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    r.weights[static_cast<std::size_t>(i)] = w;
    r.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return r;
}

std::vector<double> segments(double a, double b, std::span<const double> breakpoints) {
  std::vector<double> pts{a};
  for (double p : breakpoints) {
    if (p > a && p < b) pts.push_back(p);
  }
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

}  // namespace

const Rule& gauss_legendre(int order) {
  if (order < 1) throw DomainError("gauss_legendre: order must be >= 1");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<Rule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<Rule>(make_rule(order));
  return *slot;
}

AdaptiveResult adaptive(const std::function<double(double)>& f, double a, double b, double tol,
                        std::span<const double> breakpoints) {
  // Globally adaptive: keep bisecting the interval with the largest error
  // estimate until the summed error meets the tolerance or the budget is spent.
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  struct Piece {
    double lo;
    double hi;
    double value;
    double error;
    double l1;
    bool operator<(const Piece& o) const { return error < o.error; }
  };
  auto eval = [&](double lo, double hi) {
    Piece p{lo, hi, 0.0, 0.0, 0.0};
    p.value = GK::integrate(f, lo, hi, 0, 0.0, &p.error, &p.l1);
    return p;
  };
  std::priority_queue<Piece> queue;
  const auto pts = segments(a, b, breakpoints);
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Piece p = eval(pts[i], pts[i + 1]);
    value += p.value;
    error += p.error;
    l1 += p.l1;
    queue.push(p);
  }
  constexpr int kMaxSplits = 4000;
  const double floor = 64.0 * std::numeric_limits<double>::epsilon();
  for (int split = 0; split < kMaxSplits && !queue.empty(); ++split) {
    if (error <= std::max(tol, floor) * l1) break;
    const Piece worst = queue.top();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) break;
    queue.pop();
    const Piece left = eval(worst.lo, mid);
    const Piece right = eval(mid, worst.hi);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    queue.push(left);
    queue.push(right);
  }
  return {value, std::max(error, 0.0)};
}

AdaptiveComplexResult adaptive_complex(const std::function<cplx(double)>& f, double a, double b, double tol,
                                       std::span<const double> breakpoints) {
  const auto re = adaptive(std::function<double(double)>([&](double x) { return f(x).real(); }), a, b, tol, breakpoints);
  const auto im = adaptive(std::function<double(double)>([&](double x) { return f(x).imag(); }), a, b, tol, breakpoints);
  return {cplx{re.value, im.value}, std::hypot(re.error, im.error)};
}

}  // namespace rh::quad
