#include <doctest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <algorithm>
#include <cmath>
#include <vector>

#include "rh/permeability.hpp"

using namespace rh;

namespace {

RodLaw fig2_dirac() { return make_rod_law({}, Dirac{0.375}, {Dirac{100.0}, 5.0}, 0.1); }
RodLaw fig2_uniform() { return make_rod_law({}, UniformInterval{0.3, 0.45}, {Dirac{100.0}, 5.0}, 0.05); }

PiecewiseLinearDensity hat_100() { return PiecewiseLinearDensity({{90.0, 0.0}, {100.0, 0.1}, {110.0, 0.0}}); }

LimitAbsorptionSetup fig3(double k0, double h) { return {Dirac{0.35}, hat_100(), h, k0}; }

// Radial boundary-value problem w'' + w'/r + alpha w = 0 on (0, rho), w'(0) = 0,
// w(rho) = 1, by second-order finite differences on cell-centred nodes; returns
// int_{B_rho} w = 2 pi int_0^rho w r dr (midpoint rule).
cplx radial_fd_mean(cplx alpha, double rho, int n) {
  const double h = rho / n;
  std::vector<cplx> lower(n), diag(n), upper(n), rhs(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double r = (i + 0.5) * h;
    const double rm = r - 0.5 * h;
    const double rp = r + 0.5 * h;
    // (1/r) d/dr (r dw/dr) in flux form.
    lower[i] = rm / (r * h * h);
    upper[i] = rp / (r * h * h);
    diag[i] = -(rm + rp) / (r * h * h) + alpha;
  }
  // Dirichlet value at r = rho sits half a cell beyond the last node.
  diag[n - 1] -= upper[n - 1];
  rhs[n - 1] = -2.0 * upper[n - 1];
  upper[n - 1] = 0.0;
  // Thomas algorithm.
  for (int i = 1; i < n; ++i) {
    const cplx m = lower[i] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  std::vector<cplx> w(n);
  w[n - 1] = rhs[n - 1] / diag[n - 1];
  for (int i = n - 2; i >= 0; --i) w[i] = (rhs[i] - upper[i] * w[i + 1]) / diag[i];
  cplx mean = 0.0;
  for (int i = 0; i < n; ++i) mean += w[i] * (i + 0.5) * h * h;
  return 2.0 * kPi * mean;
}

}  // namespace

TEST_CASE("truncation rule") {
  SeriesControl ctrl;
  const int n = series_truncation(2.0, 10.0, ctrl);
  CHECK(series_tail_bound(2.0, n) <= ctrl.tail_tol);
  CHECK(series_tail_bound(2.0, n - 1) > ctrl.tail_tol);
  // The spectral gap condition dominates for large |z| with small rho^4.
  const int m = series_truncation(1e-12, 1e6, ctrl);
  CHECK(std::pow((m + 0.75) * kPi, 2) >= 2e6);
  ctrl.max_modes = 10;
  CHECK_THROWS_AS(series_truncation(2.0, 10.0, ctrl), NumericalError);
}

TEST_CASE("quasi-static and empty limits") {
  SeriesControl ctrl;
  const auto law = fig2_uniform();
  const auto table = spectrum_for(law, 1.0, ctrl);
  CHECK(std::abs(mu_eff_series(1e-6, law, ctrl, table).mu - 1.0) < 1e-9);
  CHECK(std::abs(mu_eff_closed(1e-6, law) - 1.0) < 1e-9);
  const auto empty = make_rod_law({}, Dirac{0.0}, {Dirac{100.0}, 5.0}, 0.1);
  CHECK(mu_eff_series(0.8, empty, ctrl, table).mu == cplx{1.0});
}

TEST_CASE("series matches the closed form on the Dirac and uniform laws") {
  SeriesControl ctrl;
  for (const auto& law : {fig2_dirac(), fig2_uniform()}) {
    const auto table = spectrum_for(law, 1.1, ctrl);
    for (double k0 = 0.3; k0 <= 1.1; k0 += 0.05) {
      const auto s = mu_eff_series(k0, law, ctrl, table);
      const auto c = mu_eff_closed(k0, law);
      CHECK(std::abs(s.mu - c) < 1e-6);
    }
  }
}

TEST_CASE("closed form against a radial finite-difference solve") {
  const auto law = fig2_dirac();
  const double k0 = 0.64;
  const cplx alpha = k0 * k0 * cplx{100.0, 5.0};
  // Richardson on second-order differences.
  const cplx coarse = radial_fd_mean(alpha, 0.375, 4000);
  const cplx fine = radial_fd_mean(alpha, 0.375, 8000);
  const cplx extrapolated = (4.0 * fine - coarse) / 3.0;
  const cplx mu_fd = 1.0 - kPi * 0.375 * 0.375 + extrapolated;
  CHECK(std::abs(mu_eff_closed(k0, law) - mu_fd) < 1e-6);
}

TEST_CASE("real permittivity below the first resonance gives a real permeability") {
  const auto law = make_rod_law({}, Dirac{0.375}, {Dirac{100.0}, 0.0}, 0.1);
  for (double k0 : {0.1, 0.3, 0.6}) {
    CHECK(mu_eff_closed(k0, law).imag() == 0.0);
  }
}

TEST_CASE("on-spectrum and guarded evaluations are refused") {
  const double lam1 = dirichlet_disk_spectrum(1)[0].eigenvalue;
  const double k0 = std::sqrt(lam1 / (100.0 * 0.375 * 0.375));
  const auto law = make_rod_law({}, Dirac{0.375}, {Dirac{100.0}, 0.0}, 0.1);
  SeriesControl ctrl;
  const auto table = spectrum_for(law, 1.0, ctrl);
  CHECK_THROWS_AS(mu_eff_series(k0, law, ctrl, table), ResonanceError);
  CHECK_THROWS_AS(mu_eff_closed(k0, law), ResonanceError);
  ctrl.guard_dist = 0.5;
  CHECK_THROWS_AS(mu_eff_series(k0 * 1.01, law, ctrl, table), ResonanceError);
  ctrl.guard_dist = 0.0;
  CHECK_NOTHROW(mu_eff_series(k0 * 1.01, law, ctrl, table));
  // Too small a table is a caller error.
  CHECK_THROWS_AS(mu_eff_series(0.5, law, ctrl, dirichlet_disk_spectrum(2)), DomainError);
}

TEST_CASE("scale covariance") {
  SeriesControl ctrl;
  const auto law = fig2_uniform();
  const auto scaled = make_rod_law({}, UniformInterval{0.3, 0.45}, {Dirac{25.0}, 1.25}, 0.05);
  const auto table = spectrum_for(law, 2.0, ctrl);
  for (double k0 : {0.4, 0.7, 0.95}) {
    CHECK(mu_eff_series(k0, law, ctrl, table).mu == mu_eff_series(2.0 * k0, scaled, ctrl, table).mu);
  }
  const auto third = make_rod_law({}, UniformInterval{0.3, 0.45}, {Dirac{100.0 / 9.0}, 5.0 / 9.0}, 0.05);
  const auto table3 = spectrum_for(law, 3.0, ctrl);
  CHECK(std::abs(mu_eff_series(0.7, law, ctrl, table3).mu - mu_eff_series(2.1, third, ctrl, table3).mu) < 1e-13);
}

TEST_CASE("dissipation sign and random damping over the Fig-2 sweep") {
  SeriesControl ctrl;
  std::vector<double> k0s;
  for (int i = 0; i < 200; ++i) {
    const double lambda = 6.0 + 14.0 * i / 199.0;
    k0s.push_back(2.0 * kPi / lambda);
  }
  const auto det = dispersion_sweep(fig2_dirac(), k0s, ctrl);
  const auto rnd = dispersion_sweep(fig2_uniform(), k0s, ctrl);
  double max_det = 0.0;
  double max_rnd = 0.0;
  for (std::size_t i = 0; i < k0s.size(); ++i) {
    CHECK(det.points[i].mu.imag() > 0.0);
    CHECK(rnd.points[i].mu.imag() > 0.0);
    CHECK(det.points[i].wavelength == doctest::Approx(2.0 * kPi / k0s[i]));
    max_det = std::max(max_det, std::abs(det.points[i].mu - 1.0));
    max_rnd = std::max(max_rnd, std::abs(rnd.points[i].mu - 1.0));
  }
  CHECK(max_rnd < max_det);
  CHECK(det.law_digest == law_digest(fig2_dirac()));
}

TEST_CASE("center law does not affect the permeability") {
  SeriesControl ctrl;
  const auto moved = make_rod_law({UniformInterval{0.47, 0.53}, UniformInterval{0.46, 0.5}},
                                  UniformInterval{0.3, 0.4}, {Dirac{100.0}, 5.0}, 0.05);
  const auto fixed = make_rod_law({}, UniformInterval{0.3, 0.4}, {Dirac{100.0}, 5.0}, 0.05);
  const auto table = spectrum_for(fixed, 1.0, ctrl);
  CHECK(mu_eff_series(0.7, moved, ctrl, table).mu == mu_eff_series(0.7, fixed, ctrl, table).mu);
  CHECK(mu_eff_closed(0.7, moved) == mu_eff_closed(0.7, fixed));
  CHECK(lambda_second_moment(0.7, moved) == lambda_second_moment(0.7, fixed));
}

TEST_CASE("resonant wavenumbers") {
  const auto table = dirichlet_disk_spectrum(5);
  const auto nu = resonant_wavenumbers(make_rod_law({}, Dirac{0.375}, {Dirac{100.0}, 0.0}, 0.1), table, 3);
  CHECK(nu[0] == doctest::Approx(0.6413).epsilon(1e-4));
  CHECK(2.0 * kPi / nu[0] == doctest::Approx(9.80).epsilon(1e-3));
  CHECK(nu[1] > nu[0]);
  const auto tiny = resonant_wavenumbers(make_rod_law({}, Dirac{1e-4}, {Dirac{100.0}, 0.0}, 0.1), table, 1);
  CHECK(tiny[0] > 1e3);
  CHECK_THROWS_AS(resonant_wavenumbers(make_rod_law({}, Dirac{0.0}, {Dirac{100.0}, 0.0}, 0.1), table, 1),
                  DomainError);
}

TEST_CASE("local field factor") {
  const Triple t{{0.5, 0.5}, 0.375, {100.0, 5.0}};
  CHECK(lambda_sample(t, {0.95, 0.5}, 0.7) == cplx{1.0});
  CHECK(lambda_sample(t, {0.5, 0.875}, 0.7) == cplx{1.0});
  CHECK(std::abs(lambda_sample(t, {0.6, 0.55}, 1e-7) - 1.0) < 1e-10);

  const auto table = dirichlet_disk_spectrum(2000);
  const cplx closed = lambda_sample(t, {0.6, 0.55}, 0.6);
  CHECK(std::abs(lambda_sample_series(t, {0.6, 0.55}, 0.6, table, 2000) - closed) < 1e-3);

  // Cell average in polar coordinates around the center.
  for (double k0 : {0.3, 0.6, 0.9}) {
    using G = boost::math::quadrature::gauss<double, 30>;
    const double rho = t.radius;
    cplx inside = 0.0;
    for (int p = 0; p < 8; ++p) {
      const double a = rho * p / 8.0;
      const double b = rho * (p + 1) / 8.0;
      inside += G::integrate([&](double r) { return 2.0 * kPi * r * lambda_sample(t, {0.5 + r, 0.5}, k0); }, a, b);
    }
    const cplx cell = (1.0 - kPi * rho * rho) + inside;
    const cplx expected = 1.0 - kPi * rho * rho + resonator_mean({k0 * k0 * t.eps, rho});
    CHECK(std::abs(cell - expected) < 1e-6);
  }
}

TEST_CASE("second moment of the local field factor") {
  const auto empty = make_rod_law({}, Dirac{0.0}, {Dirac{100.0}, 5.0}, 0.1);
  CHECK(lambda_second_moment(0.7, empty) == 1.0);
  CHECK(lambda_second_moment(1e-7, fig2_uniform()) == doctest::Approx(1.0).epsilon(1e-10));

  // Independent estimator: sample (triple, y) and average |Lambda|^2.
  const auto law = fig2_uniform();
  const double k0 = 0.6;
  const double quad = lambda_second_moment(k0, law);
  const std::size_t n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(77, i);
    const Triple tr = sample_triple(law, rng);
    const Point2 y{rng.uniform(), rng.uniform()};
    const double v = std::norm(lambda_sample(tr, y, k0));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / (n - 1));
  CHECK(std::abs(mean - quad) < 3.0 * se);
  CHECK(quad > 1.0);
}

TEST_CASE("f_n profile") {
  const auto table = dirichlet_disk_spectrum(10);
  const auto s = fig3(0.69, 0.0);
  const double lam1 = table[0].eigenvalue;
  const double c = lam1 / (0.69 * 0.69);
  const auto g = hat_100();
  for (double x : {-5.0, 0.0, 0.84, 3.0}) {
    CHECK(f_n_profile(1, x, s, table) == doctest::Approx(c * g(c / (0.35 * 0.35) + x)));
  }
  CHECK(f_n_profile(1, 50.0, s, table) == 0.0);
  CHECK(f_n_profile(2, 0.0, s, table) == 0.0);
  CHECK(f_n_profile(1, 0.0, s, table) > 0.0);

  // Continuous gamma against an independent quadrature.
  LimitAbsorptionSetup u{UniformInterval{0.3, 0.4}, g, 0.0, 0.69};
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double x : {-20.0, 0.0, 15.0}) {
    // Split the oracle where c / rho^2 + x crosses a knot of g.
    std::vector<double> cuts{0.3, 0.4};
    for (double knot : {90.0, 100.0, 110.0}) {
      const double rho = std::sqrt(c / (knot - x));
      if (rho > 0.3 && rho < 0.4) cuts.push_back(rho);
    }
    std::sort(cuts.begin(), cuts.end());
    double ref = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      ref += c * ts.integrate([&](double rho) { return g(c / (rho * rho) + x) / 0.1; }, cuts[k], cuts[k + 1]);
    }
    CHECK(f_n_profile(1, x, u, table) == doctest::Approx(ref).epsilon(1e-9));
  }
  const auto fn = f_n_function(1, u, table);
  CHECK(fn.f(fn.lo - 1.0) == 0.0);
  CHECK(fn.f(fn.hi + 1.0) == 0.0);
  CHECK(*fn.lipschitz == doctest::Approx(c * 0.01));
}

TEST_CASE("principal value quadrature") {
  SUBCASE("even functions integrate to zero") {
    LipschitzFunction f{[](double s) { return std::max(0.0, 1.0 - std::abs(s)); }, -1.0, 1.0, 1.0, {0.0}};
    CHECK(std::abs(pv_quotient_integral(f).value) < 1e-10);
  }
  SUBCASE("s (1 - |s|)^+ integrates to one") {
    LipschitzFunction f{[](double s) { return s * std::max(0.0, 1.0 - std::abs(s)); }, -1.0, 1.0, 1.0, {0.0}};
    CHECK(pv_quotient_integral(f).value == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("asymmetric hat touching the origin") {
    LipschitzFunction f{[](double s) { return std::max(0.0, 1.0 - std::abs(s - 1.0)); }, 0.0, 2.0, 1.0, {1.0}};
    boost::math::quadrature::tanh_sinh<double> ts;
    const double oracle = ts.integrate([&](double s) { return f.f(s) / s; }, 0.0, 1.0) +
                          ts.integrate([&](double s) { return f.f(s) / s; }, 1.0, 2.0);
    CHECK(pv_quotient_integral(f, 1e-12).value == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(oracle == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("hat straddling the origin against a different window") {
    LipschitzFunction f{[](double s) { return std::max(0.0, 1.0 - std::abs(s - 0.3)); }, -0.7, 1.3, 1.0, {0.3}};
    boost::math::quadrature::tanh_sinh<double> ts;
    const double oracle = ts.integrate([&](double s) { return (f.f(s) - f.f(-s)) / s; }, 0.0, 0.3) +
                          ts.integrate([&](double s) { return (f.f(s) - f.f(-s)) / s; }, 0.3, 0.7) +
                          ts.integrate([&](double s) { return f.f(s) / s; }, 0.7, 1.3);
    CHECK(pv_quotient_integral(f, 1e-12).value == doctest::Approx(oracle).epsilon(1e-11));
  }
  SUBCASE("a Lipschitz declaration is required") {
    LipschitzFunction f{[](double s) { return s; }, -1.0, 1.0, std::nullopt, {}};
    CHECK_THROWS_AS(pv_quotient_integral(f), DomainError);
  }
}

TEST_CASE("absorption route agrees with the modal series under p_h") {
  SeriesControl ctrl;
  for (double k0 : {0.69, 1.0}) {
    const auto s = fig3(k0, 1.0);
    const auto table = spectrum_for(s, ctrl);
    const auto v = mu_eff_h(s, ctrl, table);
    GaussScheme scheme;
    scheme.order = 64;
    scheme.panels = 8;
    const auto series = mu_eff_series(k0, rod_law(s, 0.1), ctrl, table, scheme);
    CHECK(std::abs(v.mu - series.mu) < 1e-10);
    CHECK(v.mu.imag() > 0.0);
  }
}

TEST_CASE("vanishing absorption limit") {
  SeriesControl ctrl;
  for (double k0 : {0.69, 1.0, 1.58}) {
    const auto s0 = fig3(k0, 0.0);
    const auto table = spectrum_for(s0, ctrl);
    const auto mu0 = mu_eff_limit(s0, ctrl, table);
    double residue = 0.0;
    for (std::size_t n = 1; n <= table.count(); ++n) {
      residue += table[n - 1].coupling * table[n - 1].coupling * f_n_profile(static_cast<int>(n), 0.0, s0, table);
    }
    CHECK(mu0.mu.imag() == doctest::Approx(kPi * residue).epsilon(1e-12));
    CHECK(mu0.mu.imag() >= 0.0);
    double previous = 1e300;
    for (double h : {1.0, 0.3, 0.1, 0.03}) {
      const auto err = std::abs(mu_eff_h(fig3(k0, h), ctrl, table).mu - mu0.mu);
      CHECK(err < previous);
      previous = err;
    }
  }
  // k0 = 1 puts every lambda_n / (k0^2 rho^2) outside the support of g.
  const auto s1 = fig3(1.0, 0.0);
  const auto table = spectrum_for(s1, ctrl);
  CHECK(mu_eff_limit(s1, ctrl, table).mu.imag() == 0.0);
  CHECK_THROWS_AS(mu_eff_h(s1, ctrl, table), DomainError);
  CHECK_THROWS_AS(mu_eff_limit(fig3(1.0, 0.5), ctrl, table), DomainError);
}
