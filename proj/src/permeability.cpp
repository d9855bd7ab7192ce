#include "rh/permeability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rh/parallel.hpp"
#include "rh/quadrature.hpp"

namespace rh {

double series_tail_bound(double sup_eps_rho4_k2, int n_modes) {
  const double m = n_modes - 0.25;
  return 8.0 * kPi * sup_eps_rho4_k2 / (3.0 * std::pow(kPi, 4) * m * m * m);
}

int series_truncation(double sup_eps_rho4_k2, double sup_abs_z, const SeriesControl& ctrl) {
  if (!(ctrl.tail_tol > 0.0)) throw DomainError("series control: tail_tol must be positive");
  if (ctrl.max_modes < 1) throw DomainError("series control: max_modes must be positive");
  // Tail: invert the majorant. Spectrum gap: lambda_{N+1} > ((N + 3/4) pi)^2 >= 2 sup|z|.
  const double by_tail = 0.25 + std::cbrt(8.0 * kPi * sup_eps_rho4_k2 / (3.0 * std::pow(kPi, 4) * ctrl.tail_tol));
  const double by_gap = std::sqrt(2.0 * sup_abs_z) / kPi - 0.75;
  const double need = std::max({1.0, std::ceil(by_tail), std::ceil(by_gap)});
  if (need > ctrl.max_modes) {
    throw NumericalError("series truncation needs " + std::to_string(static_cast<long long>(need)) +
                         " modes, above max_modes = " + std::to_string(ctrl.max_modes));
  }
  int n = static_cast<int>(need);
  // Guard against rounding in the inversion.
  while (series_tail_bound(sup_eps_rho4_k2, n) > ctrl.tail_tol && n < ctrl.max_modes) ++n;
  return n;
}

namespace {

struct LawBounds {
  double s;      // sup |eps| rho^4 k0^2
  double abs_z;  // sup |eps| rho^2 k0^2
};

LawBounds bounds(const RodLaw& law, double k0) {
  const double k2 = k0 * k0;
  return {max_abs_eps_rho4(law) * k2, max_abs_eps_rho2(law) * k2};
}

void check_k0(double k0) {
  if (!(k0 > 0.0) || !std::isfinite(k0)) throw DomainError("k0 must be positive and finite");
}

}  // namespace

SeriesValue mu_eff_series(double k0, const RodLaw& law, const SeriesControl& ctrl, const SpectrumTable& table,
                          const ExpectationScheme& scheme) {
  check_k0(k0);
  const auto b = bounds(law, k0);
  const int n = series_truncation(b.s, b.abs_z, ctrl);
  if (table.count() < static_cast<std::size_t>(n)) {
    throw DomainError("mu_eff_series: spectrum table holds " + std::to_string(table.count()) + " modes, " +
                      std::to_string(n) + " needed");
  }
  const double k2 = k0 * k0;
  const bool lossless = law.permittivity.imag_shift == 0.0;
  const TripleIntegrand term = [&](const Triple& t) -> cplx {
    const double rho2 = t.radius * t.radius;
    const cplx z = t.eps * rho2 * k2;
    cplx sum{};
    double dist = std::numeric_limits<double>::infinity();
    for (int i = n - 1; i >= 0; --i) {
      const DiskMode& m = table[static_cast<std::size_t>(i)];
      const cplx gap = m.eigenvalue - z;
      dist = std::min(dist, std::abs(gap));
      sum += m.coupling * m.coupling / gap;
    }
    if (dist <= 1e-12 * std::max(1.0, std::abs(z))) {
      throw ResonanceError("mu_eff_series: eps rho^2 k0^2 lies on the Dirichlet spectrum");
    }
    if (lossless && dist < ctrl.guard_dist) {
      throw ResonanceError("mu_eff_series: eps rho^2 k0^2 within guard distance of the spectrum");
    }
    return rho2 * z * sum;
  };
  const Estimate e = expectation(law, term, scheme);
  return {1.0 + e.value, n, series_tail_bound(b.s, n), e.std_error};
}

SpectrumTable spectrum_for(const RodLaw& law, double k0_max, const SeriesControl& ctrl) {
  check_k0(k0_max);
  const auto b = bounds(law, k0_max);
  return dirichlet_disk_spectrum(series_truncation(b.s, b.abs_z, ctrl) + 1);
}

cplx mu_eff_closed(double k0, const RodLaw& law, const ExpectationScheme& scheme) {
  check_k0(k0);
  const double k2 = k0 * k0;
  const TripleIntegrand f = [k2](const Triple& t) -> cplx {
    const double area = kPi * t.radius * t.radius;
    return 1.0 - area + resonator_mean({k2 * t.eps, t.radius});
  };
  return expectation(law, f, scheme).value;
}

cplx lambda_sample(const Triple& triple, Point2 y, double k0) {
  const double r = norm(y - triple.center);
  if (r >= triple.radius) return 1.0;
  return resonator_closed(r, {k0 * k0 * triple.eps, triple.radius});
}

cplx lambda_sample_series(const Triple& triple, Point2 y, double k0, const SpectrumTable& table,
                          std::size_t n_modes) {
  const double r = norm(y - triple.center);
  if (r >= triple.radius) return 1.0;
  return resonator_series(r, {k0 * k0 * triple.eps, triple.radius}, table, n_modes);
}

double lambda_second_moment(double k0, const RodLaw& law, const ExpectationScheme& scheme) {
  check_k0(k0);
  const double k2 = k0 * k0;
  const TripleIntegrand f = [k2](const Triple& t) -> cplx {
    if (t.radius == 0.0) return 1.0;
    const ResonatorParams p{k2 * t.eps, t.radius};
    const double inner = quad::composite([&](double r) { return std::norm(resonator_closed(r, p)) * r; }, 0.0,
                                         t.radius, 32, 4);
    return 1.0 - kPi * t.radius * t.radius + 2.0 * kPi * inner;
  };
  return expectation(law, f, scheme).value.real();
}

DispersionCurve dispersion_sweep(const RodLaw& law, const std::vector<double>& k0s, const SeriesControl& ctrl,
                                 const GaussScheme& scheme) {
  DispersionCurve curve;
  curve.law_digest = law_digest(law);
  curve.control = ctrl;
  if (k0s.empty()) return curve;
  for (double k : k0s) check_k0(k);
  const SpectrumTable table = spectrum_for(law, *std::max_element(k0s.begin(), k0s.end()), ctrl);
  curve.points.resize(k0s.size());
  parallel_for(k0s.size(), [&](std::size_t i) {
    const auto v = mu_eff_series(k0s[i], law, ctrl, table, scheme);
    curve.points[i] = {k0s[i], 2.0 * kPi / k0s[i], v.mu, v.n_modes, v.tail_bound};
  });
  return curve;
}

std::vector<double> resonant_wavenumbers(const RodLaw& law, const SpectrumTable& table, std::size_t count) {
  const Support a = support(law.permittivity.real);
  const double re = is_dirac(law.permittivity.real) ? a.lo : 0.5 * (a.lo + a.hi);
  const Support r = support(law.radius);
  const double rho_mid = is_dirac(law.radius) ? r.lo : 0.5 * (r.lo + r.hi);
  if (rho_mid == 0.0) throw DomainError("resonant_wavenumbers: rho = 0 has no resonance");
  if (count > table.count()) throw DomainError("resonant_wavenumbers: table too small");
  const cplx eps{re, law.permittivity.imag_shift};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = (table[i].eigenvalue / (eps * rho_mid * rho_mid)).real();
    out[i] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vanishing absorption

void validate(const LimitAbsorptionSetup& setup) {
  check_k0(setup.k0);
  if (!(setup.h >= 0.0) || !std::isfinite(setup.h)) throw DomainError("limit absorption: h must be >= 0");
  const Support r = support(setup.gamma);
  if (!(r.lo > 0.0) || r.hi > 0.5) throw DomainError("limit absorption: gamma must be supported in (0, 1/2]");
  if (const auto* u = std::get_if<UniformInterval>(&setup.gamma); u && !(u->lo < u->hi)) {
    throw DomainError("limit absorption: gamma uniform law needs lo < hi");
  }
}

RodLaw rod_law(const LimitAbsorptionSetup& setup, double delta) {
  return make_rod_law({}, setup.gamma, {setup.g, setup.h}, delta);
}

namespace {

double mode_eigenvalue(int n, const SpectrumTable& table) {
  if (n < 1 || static_cast<std::size_t>(n) > table.count()) throw DomainError("mode index outside the table");
  return table[static_cast<std::size_t>(n - 1)].eigenvalue;
}

double gamma_density(const ComponentLaw& gamma, double rho) {
  if (const auto* u = std::get_if<UniformInterval>(&gamma)) return 1.0 / (u->hi - u->lo);
  return std::get<PiecewiseLinearDensity>(gamma)(rho);
}

double profile(double lam_over_k2, double s, const LimitAbsorptionSetup& setup) {
  const auto& g = setup.g;
  if (const auto* d = std::get_if<Dirac>(&setup.gamma)) {
    return lam_over_k2 * g(lam_over_k2 / (d->value * d->value) + s);
  }
  // Continuous gamma: the integrand is piecewise smooth in rho with kinks where
  // lambda / (k0^2 rho^2) + s hits a knot of g.
  const Support r = support(setup.gamma);
  std::vector<double> cuts{r.lo, r.hi};
  if (const auto* p = std::get_if<PiecewiseLinearDensity>(&setup.gamma)) {
    for (const auto& k : p->knots()) cuts.push_back(k.x);
  }
  for (const auto& k : g.knots()) {
    if (k.x > s) {
      const double rho = std::sqrt(lam_over_k2 / (k.x - s));
      if (rho > r.lo && rho < r.hi) cuts.push_back(rho);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    total += quad::composite(
        [&](double rho) { return g(lam_over_k2 / (rho * rho) + s) * gamma_density(setup.gamma, rho); }, cuts[i],
        cuts[i + 1], 16, 1);
  }
  return lam_over_k2 * total;
}

}  // namespace

double f_n_profile(int n, double s, const LimitAbsorptionSetup& setup, const SpectrumTable& table) {
  validate(setup);
  const double lam = mode_eigenvalue(n, table);
  return profile(lam / (setup.k0 * setup.k0), s, setup);
}

LipschitzFunction f_n_function(int n, const LimitAbsorptionSetup& setup, const SpectrumTable& table) {
  validate(setup);
  const double c = mode_eigenvalue(n, table) / (setup.k0 * setup.k0);
  const Support r = support(setup.gamma);
  LipschitzFunction out;
  out.f = [c, setup](double s) { return profile(c, s, setup); };
  out.lo = setup.g.lo() - c / (r.lo * r.lo);
  out.hi = setup.g.hi() - c / (r.hi * r.hi);
  out.lipschitz = c * setup.g.lipschitz();
  if (const auto* d = std::get_if<Dirac>(&setup.gamma)) {
    for (const auto& k : setup.g.knots()) out.kinks.push_back(k.x - c / (d->value * d->value));
  }
  return out;
}

PvValue pv_quotient_integral(const LipschitzFunction& fn, double tol) {
  if (!fn.lipschitz) throw DomainError("pv_quotient_integral: a Lipschitz constant must be declared");
  if (!(fn.lo < fn.hi)) throw DomainError("pv_quotient_integral: empty support");
  const auto& f = fn.f;
  PvValue out;
  auto add = [&](const std::function<double(double)>& q, double a, double b, std::vector<double> breaks) {
    if (!(b > a)) return;
    const auto r = quad::adaptive(q, a, b, tol, breaks);
    out.value += r.value;
    out.error += r.error;
  };
  const std::function<double(double)> quotient = [&](double s) { return f(s) / s; };
  if (fn.lo >= 0.0 || fn.hi <= 0.0) {
    add(quotient, fn.lo, fn.hi, fn.kinks);
    return out;
  }
  const double a = std::min(1.0, 0.5 * std::min(-fn.lo, fn.hi));
  std::vector<double> folded;
  for (double k : fn.kinks) folded.push_back(std::abs(k));
  add([&](double s) { return (f(s) - f(-s)) / s; }, 0.0, a, folded);
  add(quotient, fn.lo, -a, fn.kinks);
  add(quotient, a, fn.hi, fn.kinks);
  return out;
}

namespace {

LawBounds setup_bounds(const LimitAbsorptionSetup& setup) {
  const double amax = std::max(std::abs(setup.g.lo()), std::abs(setup.g.hi()));
  const double eps = std::hypot(amax, setup.h);
  const double r = support(setup.gamma).hi;
  const double k2 = setup.k0 * setup.k0;
  return {eps * r * r * r * r * k2, eps * r * r * k2};
}

int setup_truncation(const LimitAbsorptionSetup& setup, const SeriesControl& ctrl, const SpectrumTable& table) {
  const auto b = setup_bounds(setup);
  const int n = series_truncation(b.s, b.abs_z, ctrl);
  if (table.count() < static_cast<std::size_t>(n)) {
    throw DomainError("spectrum table holds " + std::to_string(table.count()) + " modes, " + std::to_string(n) +
                      " needed");
  }
  return n;
}

}  // namespace

SpectrumTable spectrum_for(const LimitAbsorptionSetup& setup, const SeriesControl& ctrl) {
  validate(setup);
  const auto b = setup_bounds(setup);
  return dirichlet_disk_spectrum(series_truncation(b.s, b.abs_z, ctrl) + 1);
}

LimitValue mu_eff_h(const LimitAbsorptionSetup& setup, const SeriesControl& ctrl, const SpectrumTable& table) {
  validate(setup);
  const double h = setup.h;
  if (!(h > 0.0)) throw DomainError("mu_eff_h: h must be positive; use mu_eff_limit for h = 0");
  const int n = setup_truncation(setup, ctrl, table);
  const double m2 = moment(setup.gamma, 2);
  const double rel = 1e-13;
  std::vector<cplx> terms(static_cast<std::size_t>(n));
  parallel_for(terms.size(), [&](std::size_t i) {
    const auto fn = f_n_function(static_cast<int>(i) + 1, setup, table);
    std::vector<double> breaks = fn.kinks;
    for (double p : {0.0, h, -h, 10.0 * h, -10.0 * h}) breaks.push_back(p);
    const auto re = quad::adaptive([&](double s) { return s * fn.f(s) / (s * s + h * h); }, fn.lo, fn.hi, rel, breaks);
    const auto im = quad::adaptive([&](double s) { return h * fn.f(s) / (s * s + h * h); }, fn.lo, fn.hi, rel, breaks);
    const double c2 = table[i].coupling * table[i].coupling;
    terms[i] = c2 * cplx{-m2 - re.value, im.value};
  });
  cplx mu = 1.0;
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) mu += *it;
  return {mu, n, series_tail_bound(setup_bounds(setup).s, n)};
}

LimitValue mu_eff_limit(const LimitAbsorptionSetup& setup, const SeriesControl& ctrl, const SpectrumTable& table) {
  validate(setup);
  if (setup.h != 0.0) throw DomainError("mu_eff_limit: the setup must have h = 0");
  const int n = setup_truncation(setup, ctrl, table);
  const double m2 = moment(setup.gamma, 2);
  std::vector<cplx> terms(static_cast<std::size_t>(n));
  parallel_for(terms.size(), [&](std::size_t i) {
    const auto fn = f_n_function(static_cast<int>(i) + 1, setup, table);
    const auto pv = pv_quotient_integral(fn, 1e-13);
    const double c2 = table[i].coupling * table[i].coupling;
    terms[i] = c2 * cplx{-m2 - pv.value, kPi * fn.f(0.0)};
  });
  cplx mu = 1.0;
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) mu += *it;
  return {mu, n, series_tail_bound(setup_bounds(setup).s, n)};
}

}  // namespace rh
