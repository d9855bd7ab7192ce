#pragma once

// Cylindrical-harmonic scattering of a plane wave by finite rod assemblies and
// by the homogenized disk.
//
// Every scatterer is a disk of radius R centred at c. Outside it the field is
// expanded as sum_m (alpha_m J_m(k0 r) + beta_m H_m(k0 r)) e^{i m phi} in the
// local polar coordinates; inside as sum_m gamma_m J_m(k_in r) e^{i m phi}. The
// medium inside has div(w grad u) + k0^2 v u = 0 with flux weight w, so the
// interface conditions are continuity of u and of the flux. Writing
// x = k0 R, y = k_in R and q = w k_in / k0, each mode gives beta_m = b_m alpha_m
// with
//
//   b_m = -(J_m(x) q J_m'(y) - J_m'(x) J_m(y)) / (H_m(x) q J_m'(y) - H_m'(x) J_m(y)).
//
// For a rod of the eta-scaled assembly w = eta^2 / eps and k_in = k0 sqrt(eps) / eta,
// so y = k0 sqrt(eps) rho and q = eta / sqrt(eps): only the optical radius and
// the exterior size k0 eta rho enter. For the homogenized disk w = 1 / eps_eff and
// k_in = k0 sqrt(eps_eff mu), so q = sqrt(mu / eps_eff).

#include <optional>
#include <vector>

#include "rh/common.hpp"
#include "rh/laws.hpp"
#include "rh/microstructure.hpp"

namespace rh {

// Per-mode reflection coefficients b_{-L..L} (stored at index m + L).
struct TMatrix {
  int order = 0;
  std::vector<cplx> b;
  cplx at(int m) const { return b[static_cast<std::size_t>(m + order)]; }
};

// eta-scaled rod of unscaled radius rho and relative permittivity eps.
// Throws NumericalError when the matching system is numerically singular.
TMatrix rod_tmatrix(double k0, double eta, double rho, cplx eps, int order);

// Generic disk with interior wavenumber k_in and flux ratio q (see above).
TMatrix disk_tmatrix(double k0, double radius, cplx k_in, cplx q, int order);

// Harmonic order used for a rod when none is forced:
// max(4, ceil(|k0 sqrt(eps)| R e / 2) + 6) with R the scaled radius.
int rod_truncation(double k0, double scaled_radius, cplx eps);

struct PlaneWave {
  double angle = 0.0;  // propagation direction (cos, sin)
};

struct RodScatteringProblem {
  RodSet rods;
  double k0 = 1.0;
  PlaneWave incident;
  std::optional<int> order;  // common harmonic order; heuristic maximum over rods when unset
};

// One solved cylindrical scatterer.
struct Scatterer {
  Point2 center;
  double radius = 0.0;
  cplx k_in;
  int order = 0;
  std::vector<cplx> alpha;  // exciting field, index m + order
  std::vector<cplx> beta;   // scattered field
  std::vector<cplx> gamma;  // interior field
};

struct ScatteringSolution {
  double k0 = 1.0;
  PlaneWave incident;
  std::vector<Scatterer> scatterers;
  // Interior multiplier applied by ball averages: 1 for the direct problem,
  // mu for the homogenized disk (the weak limit is mu u inside the obstacle).
  cplx interior_weight{1.0, 0.0};
  double residual = 0.0;  // relative residual of the linear solve
  int unknowns = 0;
};

inline constexpr int kMaxFoldyLaxUnknowns = 20000;

// Dense solve of (I - T G) beta = T q. Throws DomainError above
// kMaxFoldyLaxUnknowns and NumericalError when the residual exceeds 1e-10.
ScatteringSolution solve_foldy_lax(const RodScatteringProblem& problem);

struct HomogenizedDiskProblem {
  Point2 center;
  double radius = 1.0;
  double eps_eff = 1.0;
  cplx mu{1.0, 0.0};
  double k0 = 1.0;
  PlaneWave incident;
  std::optional<int> order;  // default ceil(max(k0 R, |k_int| R)) + 10
};

ScatteringSolution solve_homogenized_disk(const HomogenizedDiskProblem& problem);

// Total field (incident plus scattered outside, interior expansion inside).
cplx total_field(const ScatteringSolution& s, Point2 x);

struct FarField {
  std::vector<double> angles;
  std::vector<cplx> amplitude;  // u_scat ~ f(phi) e^{i k0 r} / sqrt(r)
  double scattering = 0.0;      // integral of |f|^2 (trapezoid)
  double extinction = 0.0;      // optical theorem on the forward amplitude
  double absorption = 0.0;      // net flux into the scatterers, from the local expansions
};

// `n_angles` is raised if needed so that the trapezoid rule resolves the pattern.
FarField far_field(const ScatteringSolution& s, int n_angles = 256);

cplx far_field_amplitude(const ScatteringSolution& s, double angle);

// Relative L2 distance between two patterns on the same grid.
double far_field_gap(const FarField& a, const FarField& reference);

// Midpoint-rule mean of interior_weight * u over the disk B(center, radius) on a
// square grid of the given spacing. Direct solutions are evaluated with the
// piecewise expansions, so the rods inside the ball are sampled as they are.
cplx ball_average(const ScatteringSolution& s, Point2 center, double radius, double spacing);

struct StudyOptions {
  double k0 = 1.0;
  double obstacle_radius = 1.0;
  std::vector<double> etas{0.25, 0.125, 0.0625};
  // The first seed is used at every eta; the others only at the finest eta.
  std::vector<std::uint64_t> seeds{1, 2};
  std::vector<Point2> interior_probes{{0.0, 0.0}};
  std::vector<Point2> exterior_probes{{2.0, 0.0}, {0.0, 2.0}, {-2.0, 0.0}};
  int rod_order = 3;
  int n_angles = 256;
  PlaneWave incident;
  // Grid spacing of the ball averages, as a fraction of eta.
  double ball_spacing = 1.0 / 16.0;
};

struct StudyRecord {
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_rods = 0;
  double farfield_L2_gap = 0.0;
  double interior_gap = 0.0;
  double exterior_gap = 0.0;
  double residual = 0.0;
};

struct SeedSpread {
  double eta = 0.0;
  double farfield_spread = 0.0;  // largest pairwise relative far-field gap between seeds
};

struct StudyReport {
  double k0 = 0.0;
  double eps_eff = 0.0;
  cplx mu;
  std::vector<StudyRecord> records;
  std::vector<SeedSpread> spreads;
};

// Direct versus homogenized scattering from a disk obstacle of the given radius
// centred at the origin. eps_eff and mu come from the other modules.
StudyReport convergence_study(const RodLaw& law, double eps_eff, cplx mu, const StudyOptions& options);

// Picks k0 on the grid where dist(k0^2 eps rho^2, spectrum) is largest among
// points with 0.2 <= |Re mu_eff| <= 5 (Dirac radius and permittivity only).
double choose_off_resonant_k0(const RodLaw& law, const std::vector<double>& k0_grid);

}  // namespace rh
