#pragma once

// Effective permeability of the random rod medium:
//   mu_eff(k0) = 1 + sum_n c_n^2 E[eps rho^4 k0^2 / (lambda_n - eps rho^2 k0^2)],
// the resonator closed form of the same expectation, the local field factor
// Lambda and its second moment, and the vanishing-absorption limit.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "rh/laws.hpp"
#include "rh/spectrum.hpp"

namespace rh {

struct SeriesControl {
  int max_modes = 200000;
  double tail_tol = 1e-8;
  // With a lossless law, evaluating closer than this to the spectrum is refused.
  double guard_dist = 0.0;
};

// Analytic majorant of sum_{n>N} |c_n^2 eps rho^4 k0^2 / (lambda_n - z)| when
// lambda_{N+1} >= 2 sup|z|: 8 pi S / (3 pi^4 (N - 1/4)^3), S = sup |eps| rho^4 k0^2.
double series_tail_bound(double sup_eps_rho4_k2, int n_modes);

// Smallest N with tail below ctrl.tail_tol and lambda_{N+1} >= 2 sup_abs_z.
// Throws NumericalError when N would exceed ctrl.max_modes.
int series_truncation(double sup_eps_rho4_k2, double sup_abs_z, const SeriesControl& ctrl);

struct SeriesValue {
  cplx mu;
  int n_modes = 0;
  double tail_bound = 0.0;
  double std_error = 0.0;  // Monte Carlo schemes only
};

// The table must hold at least the chosen number of modes (see spectrum_for).
SeriesValue mu_eff_series(double k0, const RodLaw& law, const SeriesControl& ctrl, const SpectrumTable& table,
                          const ExpectationScheme& scheme = GaussScheme{});

// Table large enough for mu_eff_series at every k0 up to k0_max.
SpectrumTable spectrum_for(const RodLaw& law, double k0_max, const SeriesControl& ctrl);

// E[1 - pi rho^2 + int_{B_rho} w], w the resonator solution with alpha = k0^2 eps.
cplx mu_eff_closed(double k0, const RodLaw& law, const ExpectationScheme& scheme = GaussScheme{});

// Lambda(y) for one cell: 1 outside the rod, the resonator field inside.
cplx lambda_sample(const Triple& triple, Point2 y, double k0);
cplx lambda_sample_series(const Triple& triple, Point2 y, double k0, const SpectrumTable& table,
                          std::size_t n_modes);

// E|Lambda|^2 = E[(1 - pi rho^2) + 2 pi int_0^rho |w(r)|^2 r dr].
double lambda_second_moment(double k0, const RodLaw& law, const ExpectationScheme& scheme = GaussScheme{});

struct DispersionPoint {
  double k0 = 0.0;
  double wavelength = 0.0;  // 2 pi / k0
  cplx mu;
  int n_modes = 0;
  double tail_bound = 0.0;
};

struct DispersionCurve {
  std::vector<DispersionPoint> points;
  std::uint64_t law_digest = 0;
  SeriesControl control;
};

// Evaluates mu_eff_series on every k0 (in parallel).
DispersionCurve dispersion_sweep(const RodLaw& law, const std::vector<double>& k0s, const SeriesControl& ctrl,
                                 const GaussScheme& scheme = {});

// nu_n = sqrt(Re(lambda_n / (eps rho^2))) at the support midpoints of the law.
// Entries without a real resonance are NaN.
std::vector<double> resonant_wavenumbers(const RodLaw& law, const SpectrumTable& table, std::size_t count);

// ---------------------------------------------------------------------------
// Vanishing absorption

struct LimitAbsorptionSetup {
  ComponentLaw gamma;        // radius law, supported in (0, 1/2]
  PiecewiseLinearDensity g;  // density of Re eps
  double h = 0.0;            // imaginary shift
  double k0 = 1.0;
};

void validate(const LimitAbsorptionSetup& setup);

// The rod law p_h of the setup (Dirac center at the cell midpoint).
RodLaw rod_law(const LimitAbsorptionSetup& setup, double delta);

// f_n(s) = (lambda_n / k0^2) int g(lambda_n / (k0^2 rho^2) + s) gamma(d rho), n >= 1.
double f_n_profile(int n, double s, const LimitAbsorptionSetup& setup, const SpectrumTable& table);

// Compact support, kinks and Lipschitz constant of f_n.
struct LipschitzFunction {
  std::function<double(double)> f;
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> lipschitz;
  std::vector<double> kinks;
};
LipschitzFunction f_n_function(int n, const LimitAbsorptionSetup& setup, const SpectrumTable& table);

struct PvValue {
  double value = 0.0;
  double error = 0.0;
};

// Cauchy principal value of int f(s) / s ds. The window |s| < a, with
// a = min(1, half the distance from 0 to the nearer support edge), is folded
// into int_0^a (f(s) - f(-s)) / s ds whose integrand is bounded by 2 L.
PvValue pv_quotient_integral(const LipschitzFunction& f, double tol = 1e-12);

struct LimitValue {
  cplx mu;
  int n_modes = 0;
  double tail_bound = 0.0;
};

// 1 + sum c_n^2 I_{h,n},
//   I_{h,n} = -int rho^2 d gamma - int s f_n / (s^2 + h^2) ds + i int h f_n / (s^2 + h^2) ds.
LimitValue mu_eff_h(const LimitAbsorptionSetup& setup, const SeriesControl& ctrl, const SpectrumTable& table);

// h = 0: 1 - pi int rho^2 d gamma + sum c_n^2 (-PV int f_n / s ds + i pi f_n(0)), with
// the first term distributed over the modes to keep every summand O(lambda_n^-2).
LimitValue mu_eff_limit(const LimitAbsorptionSetup& setup, const SeriesControl& ctrl, const SpectrumTable& table);

// Table large enough for mu_eff_h / mu_eff_limit on this setup.
SpectrumTable spectrum_for(const LimitAbsorptionSetup& setup, const SeriesControl& ctrl);

}  // namespace rh
