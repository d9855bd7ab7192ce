#include "rh/cell.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rh/parallel.hpp"
#include "rh/rng.hpp"

namespace rh {

namespace {

struct Grid {
  int m = 0;         // nodes per edge
  double h = 0.0;    // spacing
  double side = 0.0; // supercell edge length
  std::vector<int> unknown;  // node -> unknown index
  int unknowns = 0;
  // Edge weights for the +x and +y edge of every node (1 unless cut by a hole boundary).
  std::vector<double> wx;
  std::vector<double> wy;
};

void validate(const CellProblem& p) {
  if (p.supercell_n < 1) throw DomainError("cell problem: supercell_n must be >= 1");
  if (p.resolution < 16) throw DomainError("cell problem: resolution must be >= 16");
  const double side = p.supercell_n;
  for (const auto& c : p.circles) {
    if (!(c.radius > 0.0)) throw DomainError("cell problem: hole radius must be positive");
    const double cx = std::floor(c.center.x);
    const double cy = std::floor(c.center.y);
    if (cx < 0.0 || cy < 0.0 || cx >= side || cy >= side) throw DomainError("cell problem: hole center outside the supercell");
    const double wall = std::min({c.center.x - cx, cx + 1.0 - c.center.x, c.center.y - cy, cy + 1.0 - c.center.y});
    if (c.radius > wall) throw DomainError("cell problem: hole crosses the boundary of its unit cell");
  }
  for (const auto& s : p.squares) {
    if (!(s.lo.x < s.hi.x && s.lo.y < s.hi.y)) throw DomainError("cell problem: empty square hole");
    if (s.lo.x < 0.0 || s.lo.y < 0.0 || s.hi.x > side || s.hi.y > side) {
      throw DomainError("cell problem: square hole outside the supercell");
    }
  }
}

// Fraction t in (0, 1] of the edge a -> a + h e at which it enters the hole.
double entry_fraction(const CellProblem& p, int hole, Point2 a, Point2 e, double h, double side) {
  const int n_circles = static_cast<int>(p.circles.size());
  if (hole < n_circles) {
    const auto& c = p.circles[static_cast<std::size_t>(hole)];
    // Periodic image of the center nearest to a.
    const Point2 center{c.center.x + side * std::round((a.x - c.center.x) / side),
                        c.center.y + side * std::round((a.y - c.center.y) / side)};
    const Point2 d = a - center;
    const double bq = 2.0 * h * dot(d, e);
    const double cq = dot(d, d) - c.radius * c.radius;
    const double disc = std::max(0.0, bq * bq - 4.0 * h * h * cq);
    return (-bq - std::sqrt(disc)) / (2.0 * h * h);
  }
  const auto& sq = p.squares[static_cast<std::size_t>(hole - n_circles)];
  const double x = e.x != 0.0 ? a.x : a.y;
  const double lo = e.x != 0.0 ? sq.lo.x : sq.lo.y;
  const double hi = e.x != 0.0 ? sq.hi.x : sq.hi.y;
  const double dir = e.x != 0.0 ? e.x : e.y;
  const double shift = side * std::round((x - 0.5 * (lo + hi)) / side);
  return dir > 0.0 ? (lo + shift - x) / h : (x - hi - shift) / h;
}

void apply_cut_weights(const CellProblem& p, Grid& g, int holes) {
  // Holes are numbered first, so unknown < holes identifies a hole node and its hole.
  constexpr double kMinFraction = 1e-3;
  const int m = g.m;
  auto pos = [&](int ix, int iy) { return Point2{(ix + 0.5) * g.h, (iy + 0.5) * g.h}; };
  for (int iy = 0; iy < m; ++iy) {
    for (int ix = 0; ix < m; ++ix) {
      const std::size_t i = static_cast<std::size_t>(iy) * m + ix;
      const int ui = g.unknown[i];
      const std::size_t jx = static_cast<std::size_t>(iy) * m + (ix + 1 == m ? 0 : ix + 1);
      const std::size_t jy = static_cast<std::size_t>(iy + 1 == m ? 0 : iy + 1) * m + ix;
      for (int dir = 0; dir < 2; ++dir) {
        const std::size_t j = dir == 0 ? jx : jy;
        const int uj = g.unknown[j];
        const bool hole_i = ui < holes;
        const bool hole_j = uj < holes;
        if (hole_i == hole_j) continue;
        const Point2 e = dir == 0 ? Point2{1.0, 0.0} : Point2{0.0, 1.0};
        double t;
        if (hole_j) {
          t = entry_fraction(p, uj, pos(ix, iy), e, g.h, g.side);
        } else {
          // Walk backwards from the free end j.
          const Point2 b = pos(ix, iy) + g.h * e;
          t = entry_fraction(p, ui, b, -1.0 * e, g.h, g.side);
        }
        const double w = 1.0 / std::clamp(t, kMinFraction, 1.0);
        (dir == 0 ? g.wx : g.wy)[i] = w;
      }
    }
  }
}

Grid build_grid(const CellProblem& p) {
  Grid g;
  g.m = p.resolution * p.supercell_n;
  g.side = p.supercell_n;
  g.h = g.side / g.m;
  const std::size_t nodes = static_cast<std::size_t>(g.m) * static_cast<std::size_t>(g.m);
  g.unknown.assign(nodes, -1);
  int next = 0;
  auto node_index = [&](int ix, int iy) { return static_cast<std::size_t>(iy) * g.m + ix; };
  auto clamp_index = [&](double v) { return std::clamp(static_cast<int>(v), 0, g.m - 1); };
  for (const auto& c : p.circles) {
    const int id = next;
    bool used = false;
    const int x0 = clamp_index((c.center.x - c.radius) / g.h - 1.0);
    const int x1 = clamp_index((c.center.x + c.radius) / g.h + 1.0);
    const int y0 = clamp_index((c.center.y - c.radius) / g.h - 1.0);
    const int y1 = clamp_index((c.center.y + c.radius) / g.h + 1.0);
    for (int iy = y0; iy <= y1; ++iy) {
      for (int ix = x0; ix <= x1; ++ix) {
        const Point2 x{(ix + 0.5) * g.h, (iy + 0.5) * g.h};
        if (norm(x - c.center) < c.radius) {
          g.unknown[node_index(ix, iy)] = id;
          used = true;
        }
      }
    }
    if (used) ++next;
  }
  for (const auto& s : p.squares) {
    const int id = next;
    bool used = false;
    for (int iy = 0; iy < g.m; ++iy) {
      const double y = (iy + 0.5) * g.h;
      if (!(y > s.lo.y && y < s.hi.y)) continue;
      for (int ix = 0; ix < g.m; ++ix) {
        const double x = (ix + 0.5) * g.h;
        if (x > s.lo.x && x < s.hi.x) {
          if (g.unknown[node_index(ix, iy)] >= 0) throw DomainError("cell problem: overlapping holes");
          g.unknown[node_index(ix, iy)] = id;
          used = true;
        }
      }
    }
    if (used) ++next;
  }
  const int holes = next;
  for (auto& u : g.unknown) {
    if (u < 0) u = next++;
  }
  g.unknowns = next;
  g.wx.assign(nodes, 1.0);
  g.wy.assign(nodes, 1.0);
  if (p.boundary == HoleBoundary::cut_edge) apply_cut_weights(p, g, holes);
  return g;
}

// Visits every grid edge once: (node i, node j = +x or +y neighbour, wrap jump, weight).
template <typename F>
void for_each_edge(const Grid& g, Point2 jump, F&& f) {
  const int m = g.m;
  for (int iy = 0; iy < m; ++iy) {
    const std::size_t row = static_cast<std::size_t>(iy) * m;
    const std::size_t up_row = static_cast<std::size_t>(iy + 1 == m ? 0 : iy + 1) * m;
    const double sy = iy + 1 == m ? jump.y : 0.0;
    for (int ix = 0; ix < m; ++ix) {
      const std::size_t i = row + ix;
      const bool wrap_x = ix + 1 == m;
      f(i, row + (wrap_x ? 0 : ix + 1), wrap_x ? jump.x : 0.0, g.wx[i]);
      f(i, up_row + ix, sy, g.wy[i]);
    }
  }
}

// Minimises sum_edges (u[j] - u[i] + s_e)^2 over the unknowns, unknown 0 pinned.
std::vector<double> solve_unknowns(const Grid& g, Point2 jump, const CgControl& cg, int& iterations) {
  const std::size_t n = static_cast<std::size_t>(g.unknowns);
  const auto& map = g.unknown;
  std::vector<double> diag(n, 0.0);
  std::vector<double> b(n, 0.0);
  for_each_edge(g, jump, [&](std::size_t i, std::size_t j, double s, double w) {
    const int p = map[i];
    const int q = map[j];
    if (p == q) return;
    diag[static_cast<std::size_t>(p)] += w;
    diag[static_cast<std::size_t>(q)] += w;
    if (s != 0.0) {
      b[static_cast<std::size_t>(q)] -= w * s;
      b[static_cast<std::size_t>(p)] += w * s;
    }
  });
  auto apply = [&](const std::vector<double>& u, std::vector<double>& y) {
    std::fill(y.begin(), y.end(), 0.0);
    for_each_edge(g, {0.0, 0.0}, [&](std::size_t i, std::size_t j, double, double w) {
      const int p = map[i];
      const int q = map[j];
      if (p == q) return;
      const double d = w * (u[static_cast<std::size_t>(q)] - u[static_cast<std::size_t>(p)]);
      y[static_cast<std::size_t>(q)] += d;
      y[static_cast<std::size_t>(p)] -= d;
    });
    y[0] = 0.0;
  };
  b[0] = 0.0;
  std::vector<double> inv_diag(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) inv_diag[k] = diag[k] > 0.0 ? 1.0 / diag[k] : 0.0;

  std::vector<double> u(n, 0.0);
  std::vector<double> r = b;
  std::vector<double> z(n);
  std::vector<double> p(n);
  std::vector<double> ap(n);
  const double bnorm = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
  iterations = 0;
  if (bnorm == 0.0) return u;
  for (std::size_t k = 0; k < n; ++k) z[k] = inv_diag[k] * r[k];
  p = z;
  double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
  for (int it = 1; it <= cg.max_iterations; ++it) {
    apply(p, ap);
    const double pap = std::inner_product(p.begin(), p.end(), ap.begin(), 0.0);
    if (!(pap > 0.0)) throw NumericalError("cell solver: conjugate gradient breakdown");
    const double alpha = rz / pap;
    double rr = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      u[k] += alpha * p[k];
      r[k] -= alpha * ap[k];
      rr += r[k] * r[k];
    }
    iterations = it;
    if (std::sqrt(rr) <= cg.rel_tol * bnorm) return u;
    for (std::size_t k = 0; k < n; ++k) z[k] = inv_diag[k] * r[k];
    const double rz_next = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
  }
  throw NumericalError("cell solver: conjugate gradient did not reach the requested residual within " +
                       std::to_string(cg.max_iterations) + " iterations");
}

Point2 jump_for(Point2 z, double side) { return side * Point2{-z.y, z.x}; }

std::vector<double> node_values(const Grid& g, const std::vector<double>& u) {
  std::vector<double> psi(g.unknown.size());
  for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = u[static_cast<std::size_t>(g.unknown[i])];
  return psi;
}

// Weighted edge differences sqrt(w_e) (psi_j - psi_i + s_e) in edge visiting order,
// so that energies and cross terms are plain sums of products.
std::vector<double> edge_differences(const Grid& g, const std::vector<double>& psi, Point2 jump) {
  std::vector<double> d;
  d.reserve(2 * psi.size());
  for_each_edge(g, jump, [&](std::size_t i, std::size_t j, double s, double w) {
    d.push_back(std::sqrt(w) * (psi[j] - psi[i] + s));
  });
  return d;
}

struct DirectionSolve {
  std::vector<double> diffs;
  double side = 1.0;
};

DirectionSolve solve_direction(const Grid& g, Point2 z, const CgControl& cg) {
  int its = 0;
  const Point2 jump = jump_for(z, g.side);
  const auto u = solve_unknowns(g, jump, cg, its);
  return {edge_differences(g, node_values(g, u), jump), g.side};
}

CellTensor tensor_at(const CellProblem& p, const CgControl& cg) {
  validate(p);
  const Grid g = build_grid(p);
  const auto a = solve_direction(g, {1.0, 0.0}, cg);
  const auto b = solve_direction(g, {0.0, 1.0}, cg);
  double s11 = 0.0;
  double s12 = 0.0;
  double s22 = 0.0;
  for (std::size_t k = 0; k < a.diffs.size(); ++k) {
    s11 += a.diffs[k] * a.diffs[k];
    s12 += a.diffs[k] * b.diffs[k];
    s22 += b.diffs[k] * b.diffs[k];
  }
  const double area = g.side * g.side;
  return {s11 / area, s12 / area, s22 / area};
}

}  // namespace

CellSolution solve_cell_stream(const CellProblem& problem, const CgControl& cg) {
  validate(problem);
  const double zn = norm(problem.direction);
  if (!(zn > 0.0)) throw DomainError("cell problem: direction must be nonzero");
  const Grid g = build_grid(problem);
  const Point2 jump = jump_for(problem.direction, g.side);
  CellSolution out;
  const auto u = solve_unknowns(g, jump, cg, out.iterations);
  out.grid = g.m;
  out.spacing = g.h;
  out.psi = node_values(g, u);
  const auto d = edge_differences(g, out.psi, jump);
  double e = 0.0;
  for (double v : d) e += v * v;
  out.energy = e / (g.side * g.side);

  // d[2 k] is the +x edge of node k, d[2 k + 1] its +y edge. The weights are
  // divided out again so sigma is the plain centred gradient.
  const int m = g.m;
  out.sigma_x.resize(out.psi.size());
  out.sigma_y.resize(out.psi.size());
  for (int iy = 0; iy < m; ++iy) {
    for (int ix = 0; ix < m; ++ix) {
      const std::size_t k = static_cast<std::size_t>(iy) * m + ix;
      const std::size_t left = static_cast<std::size_t>(iy) * m + (ix == 0 ? m - 1 : ix - 1);
      const std::size_t down = static_cast<std::size_t>(iy == 0 ? m - 1 : iy - 1) * m + ix;
      const double d1 = 0.5 * (d[2 * k] / std::sqrt(g.wx[k]) + d[2 * left] / std::sqrt(g.wx[left])) / g.h;
      const double d2 = 0.5 * (d[2 * k + 1] / std::sqrt(g.wy[k]) + d[2 * down + 1] / std::sqrt(g.wy[down])) / g.h;
      out.sigma_x[k] = d2;
      out.sigma_y[k] = -d1;
    }
  }
  return out;
}

CellTensor cell_tensor(CellProblem problem, bool richardson, const CgControl& cg) {
  const CellTensor fine = tensor_at(problem, cg);
  if (!richardson) return fine;
  if (problem.resolution % 2 != 0 || problem.resolution / 2 < 16) {
    throw DomainError("cell_tensor: Richardson extrapolation needs an even resolution >= 32");
  }
  problem.resolution /= 2;
  const CellTensor coarse = tensor_at(problem, cg);
  // Staircase masking converges at first order, cut edges at second order.
  const double order_factor = problem.boundary == HoleBoundary::staircase ? 2.0 : 4.0;
  auto extrapolate = [&](double f, double c) { return (order_factor * f - c) / (order_factor - 1.0); };
  return {extrapolate(fine.e11, coarse.e11), extrapolate(fine.e12, coarse.e12), extrapolate(fine.e22, coarse.e22)};
}

double EffTensor::max_stderr() const { return std::max({stderr_e11, stderr_e12, stderr_e22}); }

std::pair<double, double> EffTensor::eigenvalues() const {
  const double mean = 0.5 * (e11 + e22);
  const double rad = std::hypot(0.5 * (e11 - e22), e12);
  return {mean - rad, mean + rad};
}

double square_hole_constant(double delta, int resolution, bool richardson, HoleBoundary boundary,
                            const CgControl& cg) {
  if (!(delta > 0.0 && delta < 0.5)) throw DomainError("square_hole_constant: delta must lie in (0, 1/2)");
  CellProblem p;
  p.resolution = resolution;
  p.boundary = boundary;
  p.squares.push_back({{delta, delta}, {1.0 - delta, 1.0 - delta}});
  // By the quarter-turn symmetry of the square the tensor is scalar.
  const CellTensor t = cell_tensor(p, richardson, cg);
  return 0.5 * (t.e11 + t.e22);
}

EpsBounds eps_bounds(const RodLaw& law, double delta, int resolution, HoleBoundary boundary,
                     const CgControl& cg) {
  if (!(delta > 0.0 && delta < 0.5)) throw DomainError("eps_bounds: delta must lie in (0, 1/2)");
  return {1.0 / (1.0 - filling_ratio(law)), square_hole_constant(delta, resolution, true, boundary, cg)};
}

EffTensor eps_eff_tensor(const RodLaw& law, int resolution, const RveOptions& rve, const CgControl& cg) {
  EffTensor out;
  out.resolution = resolution;
  const auto bounds = eps_bounds(law, law.delta, resolution, rve.boundary, cg);
  out.lower = bounds.lower;
  out.upper = bounds.upper;

  if (is_dirac(law.radius)) {
    out.supercell_n = 1;
    out.ensemble_size = 1;
    const double rho = support(law.radius).lo;
    CellProblem p;
    p.resolution = resolution;
    p.boundary = rve.boundary;
    if (rho > 0.0) p.circles.push_back({{moment(law.center.x, 1), moment(law.center.y, 1)}, rho});
    const CellTensor t = cell_tensor(p, rve.richardson, cg);
    out.e11 = t.e11;
    out.e12 = t.e12;
    out.e22 = t.e22;
    return out;
  }

  if (rve.supercell_n < 1) throw DomainError("eps_eff_tensor: supercell_n must be >= 1");
  if (rve.ensemble_size < 2) throw DomainError("eps_eff_tensor: ensemble_size must be >= 2 for a random law");
  out.supercell_n = rve.supercell_n;
  out.ensemble_size = rve.ensemble_size;
  const auto members = static_cast<std::size_t>(rve.ensemble_size);
  std::vector<CellTensor> samples(members);
  parallel_for(members, [&](std::size_t k) {
    const std::uint64_t member_seed = CounterRng::mix(rve.seed + 0x9E3779B97F4A7C15ULL * (k + 1));
    CellProblem p;
    p.resolution = resolution;
    p.supercell_n = rve.supercell_n;
    p.boundary = rve.boundary;
    for (int jy = 0; jy < rve.supercell_n; ++jy) {
      for (int jx = 0; jx < rve.supercell_n; ++jx) {
        CounterRng rng(member_seed, cell_stream(jx, jy));
        const Triple t = sample_triple(law, rng);
        if (t.radius > 0.0) p.circles.push_back({{jx + t.center.x, jy + t.center.y}, t.radius});
      }
    }
    samples[k] = cell_tensor(p, rve.richardson, cg);
  });
  auto mean_se = [&](auto field) {
    double s = 0.0;
    for (const auto& t : samples) s += field(t);
    const double mean = s / static_cast<double>(members);
    double v = 0.0;
    for (const auto& t : samples) v += (field(t) - mean) * (field(t) - mean);
    v /= static_cast<double>(members - 1);
    return std::pair{mean, std::sqrt(v / static_cast<double>(members))};
  };
  std::tie(out.e11, out.stderr_e11) = mean_se([](const CellTensor& t) { return t.e11; });
  std::tie(out.e12, out.stderr_e12) = mean_se([](const CellTensor& t) { return t.e12; });
  std::tie(out.e22, out.stderr_e22) = mean_se([](const CellTensor& t) { return t.e22; });
  if (rve.stderr_tol && out.max_stderr() > *rve.stderr_tol) {
    throw NumericalError("eps_eff_tensor: ensemble standard error " + std::to_string(out.max_stderr()) +
                         " exceeds the requested tolerance " + std::to_string(*rve.stderr_tol));
  }
  return out;
}

}  // namespace rh
