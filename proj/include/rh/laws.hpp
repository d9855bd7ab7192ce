#pragma once

// Probability laws on M = {(theta, rho, eps)} with product structure, the
// expectation engines used for every integral against the law, and the
// well-posedness hypotheses on the law.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rh/common.hpp"
#include "rh/rng.hpp"
#include "rh/spectrum.hpp"

namespace rh {

struct Dirac {
  double value = 0.0;
};

struct UniformInterval {
  double lo = 0.0;
  double hi = 1.0;
};

// Compactly supported, continuous, piecewise-linear density given by knots
// (x_i, g_i). Normalised to 1 (within 1e-12) and nonnegative.
class PiecewiseLinearDensity {
 public:
  struct Knot {
    double x;
    double g;
  };
  explicit PiecewiseLinearDensity(std::vector<Knot> knots);

  double operator()(double x) const;
  double lipschitz() const { return lipschitz_; }
  double lo() const { return knots_.front().x; }
  double hi() const { return knots_.back().x; }
  const std::vector<Knot>& knots() const { return knots_; }

  // Integral of x^p g(x) dx, p in {0, 1, 2}, exact.
  double moment(int p) const;
  // Inverse CDF.
  double quantile(double u) const;

 private:
  std::vector<Knot> knots_;
  std::vector<double> cdf_;  // CDF at each knot
  double lipschitz_ = 0.0;
};

using ComponentLaw = std::variant<Dirac, UniformInterval, PiecewiseLinearDensity>;

struct Support {
  double lo;
  double hi;
};
Support support(const ComponentLaw& law);
bool is_dirac(const ComponentLaw& law);
double moment(const ComponentLaw& law, int p);
double sample(const ComponentLaw& law, CounterRng& rng);

struct CenterLaw {
  ComponentLaw x = Dirac{0.5};
  ComponentLaw y = Dirac{0.5};
};

// eps = a + i h with a distributed by `real` and a fixed imaginary shift h >= 0.
struct PermittivityLaw {
  ComponentLaw real = Dirac{1.0};
  double imag_shift = 0.0;
};

struct RodLaw {
  CenterLaw center;
  ComponentLaw radius = Dirac{0.25};
  PermittivityLaw permittivity;
  double delta = 0.1;
};

// Validates support admissibility dist(theta, dY) >= rho + delta on the whole
// joint support (closed inequality), Im eps >= 0, radius support in [0, 1/2],
// delta in (0, 1/2). Throws DomainError.
RodLaw make_rod_law(CenterLaw center, ComponentLaw radius, PermittivityLaw permittivity, double delta);

// pi E[rho^2]
double filling_ratio(const RodLaw& law);

// Largest |eps| rho^2 over the support.
double max_abs_eps_rho2(const RodLaw& law);
// Largest |eps| rho^4 over the support.
double max_abs_eps_rho4(const RodLaw& law);

struct Triple {
  Point2 center;
  double radius = 0.0;
  cplx eps;
};

Triple sample_triple(const RodLaw& law, CounterRng& rng);

// Tensor-product Gauss-Legendre over the density components (Dirac components
// contribute a single exact node). Declared singular coordinates inside a
// density support are split there and graded geometrically with
// `max_subdivisions` levels; without a budget they are an error.
struct GaussScheme {
  int order = 32;
  int panels = 4;
  std::vector<double> radius_singular{};
  std::vector<double> eps_real_singular{};
  int max_subdivisions = 0;
};

struct MonteCarloScheme {
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
};

using ExpectationScheme = std::variant<GaussScheme, MonteCarloScheme>;

struct Estimate {
  cplx value;
  double std_error = 0.0;  // zero for quadrature
};

using TripleIntegrand = std::function<cplx(const Triple&)>;

// E[integrand]. When `uses_center` is false the center components are not
// enumerated (the integrand is evaluated at the center law's mean).
Estimate expectation(const RodLaw& law, const TripleIntegrand& integrand, const ExpectationScheme& scheme,
                     bool uses_center = false);

struct HypothesisReport {
  double hyp_integral_value = 0.0;  // +inf when divergent
  bool hyp_holds = false;
  double dissipation_mass = 0.0;  // p{Im eps > 0}
  bool dissipation_holds = false;
  double r_used = 0.0;
  bool divergence_by_rule = false;  // verdict came from the support-crossing rule
};

// Estimates int dist(eps rho^2 k0^2, sigma_0)^{-(2+r)} dp. Divergence is decided
// analytically when the support of eps rho^2 k0^2 meets the spectrum with
// positive density (or a point mass sits on it); otherwise the integral is
// computed with the Gauss engine. The table must cover max|eps| rho^2 k0^2.
HypothesisReport check_hypotheses(const RodLaw& law, double k0, double r, const SpectrumTable& table,
                                  const GaussScheme& scheme = {});

// 64-bit FNV-1a over a canonical text rendering of the law.
std::uint64_t law_digest(const RodLaw& law);
std::string describe(const ComponentLaw& law);

}  // namespace rh
