#include <doctest.h>

#include <cmath>

#include "rh/cell.hpp"

using namespace rh;

namespace {

// Rayleigh multipole series for a square array of perfectly conducting
// cylinders (area fraction f). By the 2D rotation duality this is the energy of
// the perforated cell with psi constant on the holes.
double rayleigh_square_array(double f) {
  const double f4 = f * f * f * f;
  const double f8 = f4 * f4;
  return 1.0 + 2.0 * f / (1.0 - f - 0.305827 * f4 / (1.0 - 1.402958 * f8) - 0.013362 * f8);
}

CellProblem centered(double rho, int res, HoleBoundary b = HoleBoundary::staircase) {
  CellProblem p;
  p.resolution = res;
  p.boundary = b;
  p.circles.push_back({{0.5, 0.5}, rho});
  return p;
}

}  // namespace

TEST_CASE("a cell without holes has the identity tensor") {
  CellProblem p;
  p.resolution = 32;
  const auto s = solve_cell_stream(p);
  CHECK(s.energy == doctest::Approx(1.0).epsilon(1e-12));
  const auto t = cell_tensor(p, true);
  CHECK(t.e11 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.e22 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(t.e12) < 1e-12);
  // sigma equals the applied mean field everywhere.
  for (std::size_t k = 0; k < s.sigma_x.size(); k += 97) {
    CHECK(s.sigma_x[k] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(s.sigma_y[k]) < 1e-9);
  }
}

TEST_CASE("a centered circle gives a scalar tensor") {
  for (auto b : {HoleBoundary::staircase, HoleBoundary::cut_edge}) {
    const auto t = cell_tensor(centered(0.3, 64, b), false);
    CHECK(t.e11 == doctest::Approx(t.e22).epsilon(1e-9));
    CHECK(std::abs(t.e12) < 1e-9);
  }
}

TEST_CASE("energy along a general direction is the quadratic form") {
  CellProblem p;
  p.resolution = 48;
  p.circles.push_back({{0.42, 0.57}, 0.3});
  for (auto b : {HoleBoundary::staircase, HoleBoundary::cut_edge}) {
    p.boundary = b;
    const auto t = cell_tensor(p, false);
    p.direction = {0.6, -0.8};
    const double e = solve_cell_stream(p).energy;
    CHECK(e == doctest::Approx(0.36 * t.e11 - 2.0 * 0.48 * t.e12 + 0.64 * t.e22).epsilon(1e-7));
    p.direction = {1.0, 0.0};
  }
}

TEST_CASE("dilute hole matches the two-term expansion") {
  const double rho = 0.05;
  const double f = kPi * rho * rho;
  const double mg = (1.0 + f) / (1.0 - f);
  const auto stair = cell_tensor(centered(rho, 256), true);
  CHECK(std::abs(stair.e11 - mg) / mg < 0.01);
  const auto cut = cell_tensor(centered(rho, 128, HoleBoundary::cut_edge), true);
  CHECK(std::abs(cut.e11 - mg) / mg < 1e-4);
}

TEST_CASE("dense hole matches the multipole series") {
  const double rho = 0.375;
  const double ref = rayleigh_square_array(kPi * rho * rho);
  const auto cut = cell_tensor(centered(rho, 128, HoleBoundary::cut_edge), true);
  CHECK(std::abs(cut.e11 - ref) / ref < 2e-4);
  const auto stair = cell_tensor(centered(rho, 256), true);
  CHECK(std::abs(stair.e11 - ref) / ref < 5e-3);
}

TEST_CASE("mesh refinement converges at the order of the boundary treatment") {
  auto energies = [](HoleBoundary b) {
    std::vector<double> e;
    for (int r : {64, 128, 256}) e.push_back(solve_cell_stream(centered(0.375, r, b)).energy);
    return e;
  };
  const auto s = energies(HoleBoundary::staircase);
  const double rs = (s[1] - s[0]) / (s[2] - s[1]);
  CHECK(rs > 1.4);
  CHECK(rs < 3.0);
  const auto c = energies(HoleBoundary::cut_edge);
  const double rc = (c[1] - c[0]) / (c[2] - c[1]);
  CHECK(rc > 3.0);
  CHECK(rc < 6.0);
}

TEST_CASE("repeated solves are bit-identical") {
  const auto a = cell_tensor(centered(0.2, 64), true);
  const auto b = cell_tensor(centered(0.2, 64), true);
  CHECK(a.e11 == b.e11);
  CHECK(a.e12 == b.e12);
  CHECK(a.e22 == b.e22);
}

TEST_CASE("moving the hole inside the cell leaves the tensor unchanged") {
  auto moved = [](double rho, int res, HoleBoundary b) {
    CellProblem p = centered(rho, res, b);
    p.circles[0].center = {0.45, 0.55};
    return p;
  };
  const auto c0 = cell_tensor(centered(0.375, 128, HoleBoundary::cut_edge), false);
  const auto c1 = cell_tensor(moved(0.375, 128, HoleBoundary::cut_edge), false);
  CHECK(std::abs(c1.e11 - c0.e11) < 1e-4);
  CHECK(std::abs(c1.e12) < 1e-6);
  // The staircase agrees up to its first-order discretisation gap.
  const auto s0 = cell_tensor(centered(0.375, 256), true);
  const auto s1 = cell_tensor(moved(0.375, 256, HoleBoundary::staircase), true);
  CHECK(std::abs(s1.e11 - s0.e11) < 0.01);
  CHECK(std::abs(s1.e12) < 0.01);
}

TEST_CASE("bounds bracket the effective tensor") {
  const double delta = 0.1;
  const auto law = make_rod_law({}, Dirac{0.375}, {Dirac{100.0}, 5.0}, delta);
  for (auto b : {HoleBoundary::staircase, HoleBoundary::cut_edge}) {
    RveOptions rve;
    rve.boundary = b;
    const auto t = eps_eff_tensor(law, 128, rve);
    CHECK(t.supercell_n == 1);
    CHECK(t.ensemble_size == 1);
    CHECK(t.lower == doctest::Approx(1.79143).epsilon(1e-5));
    const auto [lo, hi] = t.eigenvalues();
    CHECK(lo >= t.lower);
    CHECK(hi <= t.upper);
    CHECK(std::isfinite(t.upper));
  }
}

TEST_CASE("the square-hole constant is stable across treatments") {
  const double stair = square_hole_constant(0.1, 128, false);
  const double cut = square_hole_constant(0.1, 128, false, HoleBoundary::cut_edge);
  CHECK(std::isfinite(stair));
  CHECK(cut > 1.0 / (1.0 - 0.64));
  CHECK(std::abs(stair - cut) / cut < 0.06);
  // Cut edges place the wall exactly, so resolutions agree closely.
  const double cut64 = square_hole_constant(0.1, 64, false, HoleBoundary::cut_edge);
  CHECK(std::abs(cut64 - cut) / cut < 0.01);
}

TEST_CASE("random supercells agree across sizes within the ensemble error") {
  const auto law = make_rod_law({UniformInterval{0.4, 0.6}, UniformInterval{0.4, 0.6}}, UniformInterval{0.1, 0.3},
                                {Dirac{50.0}, 1.0}, 0.1);
  RveOptions small;
  small.supercell_n = 2;
  small.ensemble_size = 8;
  small.seed = 7;
  small.richardson = false;
  small.boundary = HoleBoundary::cut_edge;
  RveOptions large = small;
  large.supercell_n = 4;
  const auto a = eps_eff_tensor(law, 32, small);
  const auto b = eps_eff_tensor(law, 32, large);
  CHECK(a.ensemble_size == 8);
  CHECK(a.max_stderr() > 0.0);
  const double se = std::hypot(a.stderr_e11, b.stderr_e11);
  CHECK(std::abs(a.e11 - b.e11) < 3.0 * se + 1e-3);
  CHECK(std::abs(a.e12) < 3.0 * a.stderr_e12 + 1e-3);
  CHECK(a.e11 >= a.lower);

  // Same seed, same answer.
  const auto again = eps_eff_tensor(law, 32, small);
  CHECK(again.e11 == a.e11);

  RveOptions strict = small;
  strict.stderr_tol = 1e-12;
  CHECK_THROWS_AS(eps_eff_tensor(law, 32, strict), NumericalError);
}

TEST_CASE("malformed cell problems are rejected") {
  CellProblem p;
  p.resolution = 8;
  CHECK_THROWS_AS(solve_cell_stream(p), DomainError);
  p.resolution = 32;
  p.circles.push_back({{0.5, 0.5}, 0.6});
  CHECK_THROWS_AS(solve_cell_stream(p), DomainError);
  p.circles = {{{0.5, 0.5}, 0.2}};
  p.squares.push_back({{0.4, 0.4}, {0.6, 0.6}});
  CHECK_THROWS_AS(solve_cell_stream(p), DomainError);
  p.squares.clear();
  p.direction = {0.0, 0.0};
  CHECK_THROWS_AS(solve_cell_stream(p), DomainError);
  p.direction = {1.0, 0.0};
  p.resolution = 33;
  CHECK_THROWS_AS(cell_tensor(p, true), DomainError);
  CHECK_THROWS_AS(square_hole_constant(0.6, 32), DomainError);
}
