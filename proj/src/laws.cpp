#include "rh/laws.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "rh/bessel.hpp"
#include "rh/digest.hpp"
#include "rh/parallel.hpp"
#include "rh/quadrature.hpp"

namespace rh {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// ---------------------------------------------------------------------------
// Piecewise-linear density

PiecewiseLinearDensity::PiecewiseLinearDensity(std::vector<Knot> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw DomainError("piecewise-linear density needs at least two knots");
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    const auto& k = knots_[i];
    if (!std::isfinite(k.x) || !std::isfinite(k.g)) throw DomainError("piecewise-linear density: non-finite knot");
    if (k.g < 0.0) throw DomainError("piecewise-linear density: negative density value");
    if (i > 0 && !(k.x > knots_[i - 1].x)) {
      throw DomainError("piecewise-linear density: knot abscissae must be strictly increasing");
    }
  }
  if (knots_.front().g != 0.0 || knots_.back().g != 0.0) {
    throw DomainError("piecewise-linear density: must vanish at both ends of its support to be Lipschitz on R");
  }
  cdf_.assign(knots_.size(), 0.0);
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    const double dx = knots_[i].x - knots_[i - 1].x;
    cdf_[i] = cdf_[i - 1] + 0.5 * dx * (knots_[i].g + knots_[i - 1].g);
    lipschitz_ = std::max(lipschitz_, std::abs(knots_[i].g - knots_[i - 1].g) / dx);
  }
  if (std::abs(cdf_.back() - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "piecewise-linear density integrates to " << cdf_.back() << ", expected 1";
    throw DomainError(msg.str());
  }
}

double PiecewiseLinearDensity::operator()(double x) const {
  if (x <= knots_.front().x || x >= knots_.back().x) return 0.0;
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), x,
                                   [](double v, const Knot& k) { return v < k.x; });
  const Knot& b = *it;
  const Knot& a = *(it - 1);
  const double t = (x - a.x) / (b.x - a.x);
  return a.g + t * (b.g - a.g);
}

double PiecewiseLinearDensity::moment(int p) const {
  // Two-point Gauss is exact for the cubic x^p g(x), p <= 2, on each segment.
  const double s = 1.0 / std::sqrt(3.0);
  double total = 0.0;
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    const Knot& a = knots_[i - 1];
    const Knot& b = knots_[i];
    const double mid = 0.5 * (a.x + b.x);
    const double half = 0.5 * (b.x - a.x);
    for (double node : {-s, s}) {
      const double x = mid + half * node;
      const double g = a.g + (x - a.x) / (b.x - a.x) * (b.g - a.g);
      total += half * std::pow(x, p) * g;
    }
  }
  return total;
}

double PiecewiseLinearDensity::quantile(double u) const {
  u = std::clamp(u, 0.0, 1.0) * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return knots_.back().x;
  const std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
  const Knot& a = knots_[i - 1];
  const Knot& b = knots_[i];
  const double dx = b.x - a.x;
  const double slope = (b.g - a.g) / dx;
  const double mass = u - cdf_[i - 1];
  // Solve a.g t + slope t^2 / 2 = mass in the cancellation-free form.
  const double disc = std::max(0.0, a.g * a.g + 2.0 * slope * mass);
  const double denom = a.g + std::sqrt(disc);
  const double t = denom > 0.0 ? 2.0 * mass / denom : 0.0;
  return std::clamp(a.x + t, a.x, b.x);
}

// ---------------------------------------------------------------------------
// Component helpers

Support support(const ComponentLaw& law) {
  return std::visit(Overloaded{
                        [](const Dirac& d) { return Support{d.value, d.value}; },
                        [](const UniformInterval& u) { return Support{u.lo, u.hi}; },
                        [](const PiecewiseLinearDensity& g) { return Support{g.lo(), g.hi()}; },
                    },
                    law);
}

bool is_dirac(const ComponentLaw& law) { return std::holds_alternative<Dirac>(law); }

double moment(const ComponentLaw& law, int p) {
  return std::visit(Overloaded{
                        [p](const Dirac& d) { return std::pow(d.value, p); },
                        [p](const UniformInterval& u) {
                          // (hi^{p+1} - lo^{p+1}) / ((p+1)(hi - lo)) written without cancellation for p <= 2
                          if (p == 0) return 1.0;
                          if (p == 1) return 0.5 * (u.lo + u.hi);
                          if (p == 2) return (u.lo * u.lo + u.lo * u.hi + u.hi * u.hi) / 3.0;
                          return (std::pow(u.hi, p + 1) - std::pow(u.lo, p + 1)) / ((p + 1) * (u.hi - u.lo));
                        },
                        [p](const PiecewiseLinearDensity& g) { return g.moment(p); },
                    },
                    law);
}

double sample(const ComponentLaw& law, CounterRng& rng) {
  // Every component consumes exactly one draw so that the stream layout does
  // not depend on which components are degenerate.
  const double u = rng.uniform();
  return std::visit(Overloaded{
                        [](const Dirac& d) { return d.value; },
                        [u](const UniformInterval& v) { return v.lo + u * (v.hi - v.lo); },
                        [u](const PiecewiseLinearDensity& g) { return g.quantile(u); },
                    },
                    law);
}

std::string describe(const ComponentLaw& law) {
  char buf[64];
  return std::visit(Overloaded{
                        [&](const Dirac& d) {
                          std::snprintf(buf, sizeof buf, "dirac(%.17g)", d.value);
                          return std::string(buf);
                        },
                        [&](const UniformInterval& u) {
                          std::snprintf(buf, sizeof buf, "uniform(%.17g,%.17g)", u.lo, u.hi);
                          return std::string(buf);
                        },
                        [&](const PiecewiseLinearDensity& g) {
                          std::string out = "piecewise_linear(";
                          for (const auto& k : g.knots()) {
                            std::snprintf(buf, sizeof buf, "[%.17g,%.17g]", k.x, k.g);
                            out += buf;
                          }
                          return out + ")";
                        },
                    },
                    law);
}

namespace {

void validate_component(const ComponentLaw& law, const char* name) {
  if (const auto* u = std::get_if<UniformInterval>(&law)) {
    if (!std::isfinite(u->lo) || !std::isfinite(u->hi) || !(u->lo < u->hi)) {
      throw DomainError(std::string(name) + ": uniform law needs finite lo < hi");
    }
  } else if (const auto* d = std::get_if<Dirac>(&law)) {
    if (!std::isfinite(d->value)) throw DomainError(std::string(name) + ": non-finite point mass");
  }
}

// Closed intervals on which the law puts mass (point masses are degenerate intervals).
std::vector<Support> charged_intervals(const ComponentLaw& law) {
  if (const auto* g = std::get_if<PiecewiseLinearDensity>(&law)) {
    std::vector<Support> out;
    const auto& k = g->knots();
    for (std::size_t i = 1; i < k.size(); ++i) {
      if (k[i - 1].g == 0.0 && k[i].g == 0.0) continue;
      if (!out.empty() && out.back().hi == k[i - 1].x) {
        out.back().hi = k[i].x;
      } else {
        out.push_back({k[i - 1].x, k[i].x});
      }
    }
    return out;
  }
  return {support(law)};
}

struct Node {
  double x;
  double w;
};

void append_panel(std::vector<Node>& out, double a, double b, int order, double weight_scale,
                  const ComponentLaw& law) {
  const auto& rule = quad::gauss_legendre(order);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = mid + half * rule.nodes[i];
    double density = weight_scale;
    if (const auto* g = std::get_if<PiecewiseLinearDensity>(&law)) density = (*g)(x);
    if (density != 0.0) out.push_back({x, half * rule.weights[i] * density});
  }
}

// Quadrature nodes for one component, weights already multiplied by the density.
std::vector<Node> component_nodes(const ComponentLaw& law, const GaussScheme& scheme,
                                  const std::vector<double>& singular, const char* name) {
  if (const auto* d = std::get_if<Dirac>(&law)) {
    for (double s : singular) {
      if (s == d->value) {
        throw DomainError(std::string(name) + ": declared singularity carries a point mass");
      }
    }
    return {{d->value, 1.0}};
  }
  if (scheme.order < 1 || scheme.panels < 1) throw DomainError("gauss scheme: order and panels must be >= 1");
  const Support sup = support(law);
  std::vector<double> cuts{sup.lo, sup.hi};
  if (const auto* g = std::get_if<PiecewiseLinearDensity>(&law)) {
    for (const auto& k : g->knots()) cuts.push_back(k.x);
  }
  std::vector<double> sing_in;
  for (double s : singular) {
    if (s >= sup.lo && s <= sup.hi) {
      if (scheme.max_subdivisions <= 0) {
        throw DomainError(std::string(name) +
                          ": declared singularity inside the support and no subdivision budget");
      }
      sing_in.push_back(s);
      cuts.push_back(s);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double scale = 0.0;
  if (const auto* u = std::get_if<UniformInterval>(&law)) scale = 1.0 / (u->hi - u->lo);

  auto is_singular = [&](double x) { return std::find(sing_in.begin(), sing_in.end(), x) != sing_in.end(); };

  std::vector<Node> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    const bool sa = is_singular(a);
    const bool sb = is_singular(b);
    if (!sa && !sb) {
      const double h = (b - a) / scheme.panels;
      for (int p = 0; p < scheme.panels; ++p) append_panel(out, a + p * h, a + (p + 1) * h, scheme.order, scale, law);
      continue;
    }
    // Geometric grading toward singular endpoints: split at the midpoint when
    // both ends are singular, then halve repeatedly toward each singularity.
    auto graded = [&](double from, double to) {
      // `from` is singular; pieces [from + (to-from)/2^{k+1}, from + (to-from)/2^k].
      double far = to;
      for (int k = 0; k < scheme.max_subdivisions; ++k) {
        const double near = from + 0.5 * (far - from);
        append_panel(out, std::min(near, far), std::max(near, far), scheme.order, scale, law);
        far = near;
      }
      append_panel(out, std::min(from, far), std::max(from, far), scheme.order, scale, law);
    };
    if (sa && sb) {
      const double m = 0.5 * (a + b);
      graded(a, m);
      graded(b, m);
    } else if (sa) {
      graded(a, b);
    } else {
      graded(b, a);
    }
  }
  return out;
}

double support_mean(const ComponentLaw& law) { return moment(law, 1); }

}  // namespace

// ---------------------------------------------------------------------------
// Rod law

RodLaw make_rod_law(CenterLaw center, ComponentLaw radius, PermittivityLaw permittivity, double delta) {
  validate_component(center.x, "center.x");
  validate_component(center.y, "center.y");
  validate_component(radius, "radius");
  validate_component(permittivity.real, "permittivity.real");
  if (!(delta > 0.0 && delta < 0.5)) throw DomainError("delta must lie in (0, 1/2)");
  if (!std::isfinite(permittivity.imag_shift) || permittivity.imag_shift < 0.0) {
    throw DomainError("permittivity: imaginary part must be >= 0 on the support");
  }
  const Support r = support(radius);
  if (r.lo < 0.0 || r.hi > 0.5) throw DomainError("radius: support must lie in [0, 1/2]");
  const Support cx = support(center.x);
  const Support cy = support(center.y);
  if (cx.lo <= 0.0 || cx.hi >= 1.0 || cy.lo <= 0.0 || cy.hi >= 1.0) {
    throw DomainError("center: support must lie in the open unit cell");
  }
  const double wall = std::min({cx.lo, 1.0 - cx.hi, cy.lo, 1.0 - cy.hi});
  if (r.hi + delta > wall + 1e-12) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "admissibility margin violated: max radius + delta = %.17g exceeds distance %.17g from the "
                  "center support to the cell boundary",
                  r.hi + delta, wall);
    throw DomainError(buf);
  }
  return RodLaw{std::move(center), std::move(radius), std::move(permittivity), delta};
}

double filling_ratio(const RodLaw& law) { return kPi * moment(law.radius, 2); }

double max_abs_eps_rho2(const RodLaw& law) {
  const Support a = support(law.permittivity.real);
  const double amax = std::max(std::abs(a.lo), std::abs(a.hi));
  const double r = support(law.radius).hi;
  return std::hypot(amax, law.permittivity.imag_shift) * r * r;
}

double max_abs_eps_rho4(const RodLaw& law) {
  const double r = support(law.radius).hi;
  return max_abs_eps_rho2(law) * r * r;
}

Triple sample_triple(const RodLaw& law, CounterRng& rng) {
  Triple t;
  t.center.x = sample(law.center.x, rng);
  t.center.y = sample(law.center.y, rng);
  t.radius = sample(law.radius, rng);
  t.eps = cplx{sample(law.permittivity.real, rng), law.permittivity.imag_shift};
  return t;
}

// ---------------------------------------------------------------------------
// Expectation

namespace {

Estimate gauss_expectation(const RodLaw& law, const TripleIntegrand& f, const GaussScheme& scheme,
                           bool uses_center) {
  std::vector<Node> nx{{support_mean(law.center.x), 1.0}};
  std::vector<Node> ny{{support_mean(law.center.y), 1.0}};
  if (uses_center) {
    nx = component_nodes(law.center.x, scheme, {}, "center.x");
    ny = component_nodes(law.center.y, scheme, {}, "center.y");
  }
  const auto nr = component_nodes(law.radius, scheme, scheme.radius_singular, "radius");
  const auto ne = component_nodes(law.permittivity.real, scheme, scheme.eps_real_singular, "permittivity.real");
  cplx total{};
  Triple t;
  for (const auto& x : nx) {
    for (const auto& y : ny) {
      for (const auto& r : nr) {
        cplx inner{};
        for (const auto& e : ne) {
          t.center = {x.x, y.x};
          t.radius = r.x;
          t.eps = cplx{e.x, law.permittivity.imag_shift};
          inner += e.w * f(t);
        }
        total += x.w * y.w * r.w * inner;
      }
    }
  }
  return {total, 0.0};
}

Estimate monte_carlo_expectation(const RodLaw& law, const TripleIntegrand& f, const MonteCarloScheme& scheme) {
  if (scheme.samples < 2) throw DomainError("monte carlo: at least two samples are required");
  // Fixed-size blocks with per-sample substreams; partial sums are combined in
  // block order so the result does not depend on scheduling.
  constexpr std::size_t kBlock = 1024;
  const std::size_t blocks = (scheme.samples + kBlock - 1) / kBlock;
  struct Partial {
    cplx sum{};
    double sum_sq = 0.0;
  };
  std::vector<Partial> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    Partial acc;
    const std::size_t stop = std::min(scheme.samples, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < stop; ++i) {
      CounterRng rng(scheme.seed, i);
      const cplx v = f(sample_triple(law, rng));
      acc.sum += v;
      acc.sum_sq += std::norm(v);
    }
    partial[b] = acc;
  });
  cplx sum{};
  double sum_sq = 0.0;
  for (const auto& p : partial) {
    sum += p.sum;
    sum_sq += p.sum_sq;
  }
  const double n = static_cast<double>(scheme.samples);
  const cplx mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * std::norm(mean)) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

}  // namespace

Estimate expectation(const RodLaw& law, const TripleIntegrand& integrand, const ExpectationScheme& scheme,
                     bool uses_center) {
  return std::visit(Overloaded{
                        [&](const GaussScheme& g) { return gauss_expectation(law, integrand, g, uses_center); },
                        [&](const MonteCarloScheme& m) { return monte_carlo_expectation(law, integrand, m); },
                    },
                    scheme);
}

// ---------------------------------------------------------------------------
// Hypotheses

HypothesisReport check_hypotheses(const RodLaw& law, double k0, double r, const SpectrumTable& table,
                                  const GaussScheme& scheme) {
  if (!(k0 > 0.0)) throw DomainError("check_hypotheses: k0 must be positive");
  if (!(r > 0.0)) throw DomainError("check_hypotheses: r must be positive");
  HypothesisReport rep;
  rep.r_used = r;
  const double h = law.permittivity.imag_shift;
  rep.dissipation_mass = h > 0.0 ? 1.0 : 0.0;
  rep.dissipation_holds = rep.dissipation_mass > 0.0;

  const double k2 = k0 * k0;
  if (h == 0.0) {
    // z = a rho^2 k0^2 is real. It meets sigma_0 with positive mass or density
    // as soon as some eigenvalue lies in the image of a charged box.
    for (const Support& ia : charged_intervals(law.permittivity.real)) {
      for (const Support& ir : charged_intervals(law.radius)) {
        const double r2lo = ir.lo * ir.lo;
        const double r2hi = ir.hi * ir.hi;
        const double c[] = {ia.lo * r2lo, ia.lo * r2hi, ia.hi * r2lo, ia.hi * r2hi};
        const double zlo = k2 * *std::min_element(std::begin(c), std::end(c));
        const double zhi = k2 * *std::max_element(std::begin(c), std::end(c));
        for (int n = 1;; ++n) {
          const double jn = bessel_j0_zero(n);
          const double lam = jn * jn;
          const double tol = 1e-12 * std::max(1.0, lam);
          if (lam > zhi + tol) break;
          if (lam >= zlo - tol) {
            rep.hyp_integral_value = std::numeric_limits<double>::infinity();
            rep.hyp_holds = false;
            rep.divergence_by_rule = true;
            return rep;
          }
        }
      }
    }
  }

  const double lam1 = table.count() > 0 ? table[0].eigenvalue : 0.0;
  const TripleIntegrand integrand = [&](const Triple& t) -> cplx {
    const cplx z = t.eps * t.radius * t.radius * k2;
    const double d = (table.count() > 0 && table.largest_eigenvalue() > std::abs(z) + lam1)
                         ? dist_to_spectrum(z, table)
                         : dist_to_disk_spectrum(z);
    return std::pow(d, -(2.0 + r));
  };
  const double value = expectation(law, integrand, scheme).value.real();
  rep.hyp_integral_value = std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
  rep.hyp_holds = std::isfinite(value);
  return rep;
}

std::uint64_t law_digest(const RodLaw& law) {
  char buf[96];
  std::snprintf(buf, sizeof buf, ";imag=%.17g;delta=%.17g", law.permittivity.imag_shift, law.delta);
  const std::string text = "cx=" + describe(law.center.x) + ";cy=" + describe(law.center.y) +
                           ";rho=" + describe(law.radius) + ";re_eps=" + describe(law.permittivity.real) + buf;
  return fnv1a64(text);
}

}  // namespace rh
