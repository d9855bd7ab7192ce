#pragma once

// Effective permittivity from the perforated-cell variational problem
//   eps_eff z.z = inf { mean |sigma|^2 : div sigma = 0, sigma = 0 on the holes, mean sigma = z }.
// In 2D, sigma = (d2 psi, -d1 psi) with psi - (z1 y2 - z2 y1) periodic and psi
// constant on every hole, so the problem becomes a scalar quasi-periodic
// minimisation of int |grad psi|^2. It is discretised on the cell-centred grid
// with the five-point stencil; nodes inside a hole share one unknown.

#include <cstdint>
#include <optional>
#include <vector>

#include "rh/laws.hpp"

namespace rh {

struct CircleHole {
  Point2 center;  // supercell coordinates, in [0, supercell_n)^2
  double radius = 0.0;
};

struct SquareHole {
  Point2 lo;
  Point2 hi;
};

// Staircase: hole nodes are masked and every edge has unit weight (first-order
// boundary error). Cut edge: an edge from a free node that enters a hole at
// fraction t of its length gets weight 1/t, placing the constant-psi condition on
// the true boundary.
enum class HoleBoundary { staircase, cut_edge };

struct CellProblem {
  std::vector<CircleHole> circles;
  std::vector<SquareHole> squares;
  int supercell_n = 1;
  int resolution = 64;  // grid nodes per unit-cell edge
  Point2 direction{1.0, 0.0};
  HoleBoundary boundary = HoleBoundary::staircase;
};

struct CellSolution {
  int grid = 0;  // nodes per supercell edge
  double spacing = 0.0;
  std::vector<double> psi;      // row-major, psi[iy * grid + ix], values at cell-centred nodes
  std::vector<double> sigma_x;  // (d2 psi, -d1 psi) by centred differences
  std::vector<double> sigma_y;
  double energy = 0.0;  // mean of |grad psi|^2 over the supercell
  int iterations = 0;
};

struct CgControl {
  double rel_tol = 1e-10;
  int max_iterations = 200000;
};

// Throws DomainError on malformed problems and NumericalError when the
// conjugate-gradient iteration does not converge.
CellSolution solve_cell_stream(const CellProblem& problem, const CgControl& cg = {});

struct EffTensor {
  double e11 = 0.0;
  double e12 = 0.0;
  double e22 = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int resolution = 0;
  int supercell_n = 1;
  int ensemble_size = 1;
  double stderr_e11 = 0.0;
  double stderr_e12 = 0.0;
  double stderr_e22 = 0.0;

  double max_stderr() const;
  // Eigenvalues, ascending.
  std::pair<double, double> eigenvalues() const;
};

// Tensor of one configuration from the two direction solves. With
// `richardson`, energies at resolution r/2 and r are extrapolated with the
// order of the boundary treatment: 2 E(r) - E(r/2) for the staircase and
// (4 E(r) - E(r/2)) / 3 for cut edges.
struct CellTensor {
  double e11 = 0.0;
  double e12 = 0.0;
  double e22 = 0.0;
};
CellTensor cell_tensor(CellProblem problem, bool richardson, const CgControl& cg = {});

struct RveOptions {
  int supercell_n = 4;
  int ensemble_size = 8;
  std::uint64_t seed = 1;
  bool richardson = true;
  HoleBoundary boundary = HoleBoundary::staircase;
  // When set, an ensemble standard error above this value is an error.
  std::optional<double> stderr_tol;
};

// Dirac radius: one periodic cell with the hole at the center law's mean.
// Otherwise: average over `ensemble_size` supercells of n x n i.i.d. cells.
EffTensor eps_eff_tensor(const RodLaw& law, int resolution, const RveOptions& rve = {}, const CgControl& cg = {});

struct EpsBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// lower = 1 / (1 - filling ratio), upper = C(delta) from the periodic cell with
// the square (delta, 1 - delta)^2 removed.
EpsBounds eps_bounds(const RodLaw& law, double delta, int resolution,
                     HoleBoundary boundary = HoleBoundary::staircase, const CgControl& cg = {});
double square_hole_constant(double delta, int resolution, bool richardson = true,
                            HoleBoundary boundary = HoleBoundary::staircase, const CgControl& cg = {});

}  // namespace rh
