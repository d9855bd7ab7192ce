#include "rh/scattering.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rh/bessel.hpp"
#include "rh/parallel.hpp"
#include "rh/permeability.hpp"

namespace rh {

namespace {

constexpr double kResidualTol = 1e-10;

std::size_t idx(int m, int order) { return static_cast<std::size_t>(m + order); }

// Per-mode data of one disk: reflection b_m and interior ratio gamma_m / alpha_m.
struct DiskModes {
  TMatrix t;
  std::vector<cplx> interior;
};

DiskModes disk_modes(double k0, double radius, cplx k_in, cplx q, int order) {
  if (!(k0 > 0.0)) throw DomainError("scattering: k0 must be positive");
  if (!(radius > 0.0)) throw DomainError("scattering: radius must be positive");
  if (order < 0) throw DomainError("scattering: harmonic order must be >= 0");
  if (k_in == cplx{0.0, 0.0}) throw DomainError("scattering: interior wavenumber must be nonzero");
  const double x = k0 * radius;
  const cplx y = k_in * radius;
  const auto ext = bessel_jy_sequence(order + 1, x);
  const auto jy = bessel_j_sequence(order + 1, y);

  DiskModes out;
  out.t.order = order;
  out.t.b.assign(static_cast<std::size_t>(2 * order + 1), cplx{});
  out.interior.assign(out.t.b.size(), cplx{});
  for (int m = 0; m <= order; ++m) {
    const auto k = static_cast<std::size_t>(m);
    const double jx = ext.j[k];
    const cplx hx{ext.j[k], ext.y[k]};
    double jpx;
    cplx hpx;
    cplx jpy;
    if (m == 0) {
      jpx = -ext.j[1];
      hpx = -cplx{ext.j[1], ext.y[1]};
      jpy = -jy[1];
    } else {
      jpx = 0.5 * (ext.j[k - 1] - ext.j[k + 1]);
      hpx = 0.5 * (cplx{ext.j[k - 1], ext.y[k - 1]} - cplx{ext.j[k + 1], ext.y[k + 1]});
      jpy = 0.5 * (jy[k - 1] - jy[k + 1]);
    }
    const cplx qj = q * jpy;
    const cplx num = jx * qj - jpx * jy[k];
    const cplx den = hx * qj - hpx * jy[k];
    const double scale = std::abs(hx * qj) + std::abs(hpx * jy[k]);
    if (!(std::abs(den) > 1e-14 * scale) || !std::isfinite(std::abs(den))) {
      throw NumericalError("scattering: singular matching system for mode " + std::to_string(m));
    }
    const cplx b = -num / den;
    // Interior amplitude from whichever interface condition is better conditioned.
    cplx g;
    if (std::abs(jy[k]) * std::abs(hpx) >= std::abs(qj) * std::abs(hx)) {
      g = (jx + b * hx) / jy[k];
    } else {
      g = (jpx + b * hpx) / qj;
    }
    out.t.b[idx(m, order)] = b;
    out.t.b[idx(-m, order)] = b;
    out.interior[idx(m, order)] = g;
    out.interior[idx(-m, order)] = g;
  }
  return out;
}

cplx rod_k_in(double k0, double eta, cplx eps) { return k0 * std::sqrt(eps) / eta; }
cplx rod_q(double eta, cplx eps) { return eta / std::sqrt(eps); }

Point2 direction(const PlaneWave& w) { return {std::cos(w.angle), std::sin(w.angle)}; }

// Plane-wave coefficients about center c: e^{i k d.c} i^m e^{-i m phi_inc}.
std::vector<cplx> incident_expansion(double k0, const PlaneWave& w, Point2 c, int order) {
  std::vector<cplx> q(static_cast<std::size_t>(2 * order + 1));
  const cplx phase = std::exp(kI * (k0 * dot(direction(w), c)));
  for (int m = -order; m <= order; ++m) {
    q[idx(m, order)] = phase * std::pow(kI, m) * std::exp(-kI * (m * w.angle));
  }
  return q;
}

// H_p(k r) e^{i p phi} for p = -2L..2L, index p + 2L, with (r, phi) the polar form of d.
std::vector<cplx> translation_row(double k0, Point2 d, int order) {
  const int p_max = 2 * order;
  const double r = norm(d);
  const double phi = std::atan2(d.y, d.x);
  const auto h = hankel1_sequence(p_max, k0 * r);
  std::vector<cplx> out(static_cast<std::size_t>(2 * p_max + 1));
  for (int p = 0; p <= p_max; ++p) {
    const cplx e = std::exp(kI * (p * phi));
    const cplx v = h[static_cast<std::size_t>(p)] * e;
    out[static_cast<std::size_t>(p + p_max)] = v;
    // H_{-p} e^{-i p phi} = (-1)^p H_p e^{-i p phi}.
    out[static_cast<std::size_t>(p_max - p)] = ((p % 2 == 0) ? 1.0 : -1.0) * h[static_cast<std::size_t>(p)] / e;
  }
  return out;
}

// Scaled coupling (S z)_j,m = sum_{l != j} sum_n G^{jl}_{mn} z_l,n / (D_j,m D_l,n), where
// G^{jl}_{mn} = H_{n-m}(k d) e^{i (n-m) phi_d} with d = c_j - c_l re-expands the waves
// radiated by rod l about rod j, and D_j,m = |H_m(k R_j)| normalises the modes.
void coupling_apply(double k0, const std::vector<Point2>& centers, const std::vector<std::vector<double>>& scale,
                    int order, const Eigen::VectorXcd& z, Eigen::VectorXcd& out) {
  const std::size_t n = centers.size();
  const int M = 2 * order + 1;
  out.setZero(static_cast<Eigen::Index>(n) * M);
  parallel_for(n, [&](std::size_t j) {
    for (std::size_t l = 0; l < n; ++l) {
      if (l == j) continue;
      const auto row = translation_row(k0, centers[j] - centers[l], order);
      for (int m = -order; m <= order; ++m) {
        cplx s{};
        for (int nn = -order; nn <= order; ++nn) {
          s += row[static_cast<std::size_t>(nn - m + 2 * order)] * z[static_cast<Eigen::Index>(l) * M + nn + order] /
               scale[l][idx(nn, order)];
        }
        out[static_cast<Eigen::Index>(j) * M + m + order] += s / scale[j][idx(m, order)];
      }
    }
  });
}

double max_center_radius(const ScatteringSolution& s) {
  double r = 0.0;
  for (const auto& sc : s.scatterers) r = std::max(r, norm(sc.center));
  return r;
}

int max_order(const ScatteringSolution& s) {
  int o = 0;
  for (const auto& sc : s.scatterers) o = std::max(o, sc.order);
  return o;
}

}  // namespace

TMatrix disk_tmatrix(double k0, double radius, cplx k_in, cplx q, int order) {
  return disk_modes(k0, radius, k_in, q, order).t;
}

TMatrix rod_tmatrix(double k0, double eta, double rho, cplx eps, int order) {
  if (!(eta > 0.0)) throw DomainError("rod_tmatrix: eta must be positive");
  if (std::imag(eps) < 0.0) throw DomainError("rod_tmatrix: Im eps must be >= 0");
  return disk_modes(k0, eta * rho, rod_k_in(k0, eta, eps), rod_q(eta, eps), order).t;
}

int rod_truncation(double k0, double scaled_radius, cplx eps) {
  const double size = std::abs(k0 * std::sqrt(eps)) * scaled_radius * std::numbers::e / 2.0;
  return std::max(4, static_cast<int>(std::ceil(size)) + 6);
}

ScatteringSolution solve_foldy_lax(const RodScatteringProblem& problem) {
  const double k0 = problem.k0;
  const double eta = problem.rods.eta;
  if (!(k0 > 0.0)) throw DomainError("solve_foldy_lax: k0 must be positive");
  if (!(eta > 0.0)) throw DomainError("solve_foldy_lax: eta must be positive");
  std::vector<const Rod*> rods;
  for (const auto& r : problem.rods.rods) {
    if (r.radius > 0.0) rods.push_back(&r);
  }
  int order = 0;
  if (problem.order) {
    order = *problem.order;
    if (order < 0) throw DomainError("solve_foldy_lax: harmonic order must be >= 0");
  } else {
    for (const Rod* r : rods) order = std::max(order, rod_truncation(k0, r->radius, r->eps));
  }
  const std::size_t n = rods.size();
  const int M = 2 * order + 1;
  const long long unknowns = static_cast<long long>(n) * M;
  if (unknowns > kMaxFoldyLaxUnknowns) {
    throw DomainError("solve_foldy_lax: " + std::to_string(unknowns) + " unknowns exceed the dense-solve cap of " +
                      std::to_string(kMaxFoldyLaxUnknowns));
  }

  ScatteringSolution sol;
  sol.k0 = k0;
  sol.incident = problem.incident;
  sol.unknowns = static_cast<int>(unknowns);
  sol.scatterers.resize(n);
  std::vector<DiskModes> modes(n);
  std::vector<Point2> centers(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Rod& r = *rods[j];
    modes[j] = disk_modes(k0, r.radius, rod_k_in(k0, eta, r.eps), rod_q(eta, r.eps), order);
    centers[j] = r.center;
    auto& sc = sol.scatterers[j];
    sc.center = r.center;
    sc.radius = r.radius;
    sc.k_in = rod_k_in(k0, eta, r.eps);
    sc.order = order;
  }
  if (n == 0) return sol;

  // The plain multipole unknowns span many orders of magnitude (b_m ~ (k R)^{2m}
  // against H_{n-m}(k d) ~ (k d)^{-|n-m|}), which ruins the factorisation at
  // moderate orders. Work with z = D beta and D^{-1} alpha, D_m = |H_m(k R)|,
  // so every entry of the system is O(1):
  //   z = bt (D^{-1} q + S z),  bt_m = b_m D_m^2.
  std::vector<std::vector<double>> scale(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto h = hankel1_sequence(order, k0 * rods[j]->radius);
    scale[j].resize(static_cast<std::size_t>(M));
    for (int m = -order; m <= order; ++m) scale[j][idx(m, order)] = std::abs(h[static_cast<std::size_t>(std::abs(m))]);
  }
  auto bt = [&](std::size_t j, int m) {
    const double d = scale[j][idx(m, order)];
    return modes[j].t.at(m) * d * d;
  };

  const auto N = static_cast<Eigen::Index>(unknowns);
  Eigen::VectorXcd rhs(N);
  std::vector<std::vector<cplx>> incident(n);
  for (std::size_t j = 0; j < n; ++j) {
    incident[j] = incident_expansion(k0, problem.incident, centers[j], order);
    for (int m = -order; m <= order; ++m) {
      rhs[static_cast<Eigen::Index>(j) * M + m + order] = bt(j, m) * incident[j][idx(m, order)] / scale[j][idx(m, order)];
    }
  }

  Eigen::VectorXcd z;
  {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(N, N);
    parallel_for(n, [&](std::size_t j) {
      for (std::size_t l = 0; l < n; ++l) {
        if (l == j) continue;
        const auto row = translation_row(k0, centers[j] - centers[l], order);
        for (int m = -order; m <= order; ++m) {
          const cplx b = bt(j, m) / scale[j][idx(m, order)];
          const Eigen::Index r = static_cast<Eigen::Index>(j) * M + m + order;
          for (int nn = -order; nn <= order; ++nn) {
            a(r, static_cast<Eigen::Index>(l) * M + nn + order) =
                -b * row[static_cast<std::size_t>(nn - m + 2 * order)] / scale[l][idx(nn, order)];
          }
        }
      }
    });
    Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXcd>> lu(a);
    z = lu.solve(rhs);
  }

  // Residual of z - bt (D^{-1} q + S z) = 0, recomputed without the factorised matrix.
  Eigen::VectorXcd sz;
  coupling_apply(k0, centers, scale, order, z, sz);
  Eigen::VectorXcd res = z - rhs;
  for (std::size_t j = 0; j < n; ++j) {
    for (int m = -order; m <= order; ++m) {
      const Eigen::Index r = static_cast<Eigen::Index>(j) * M + m + order;
      res[r] -= bt(j, m) * sz[r];
    }
  }
  const double rhs_norm = rhs.norm();
  sol.residual = rhs_norm > 0.0 ? res.norm() / rhs_norm : res.norm();
  if (!(sol.residual <= kResidualTol)) {
    throw NumericalError("solve_foldy_lax: relative residual " + std::to_string(sol.residual) + " exceeds 1e-10");
  }

  for (std::size_t j = 0; j < n; ++j) {
    auto& sc = sol.scatterers[j];
    sc.alpha.resize(static_cast<std::size_t>(M));
    sc.beta.resize(static_cast<std::size_t>(M));
    sc.gamma.resize(static_cast<std::size_t>(M));
    for (int m = -order; m <= order; ++m) {
      const Eigen::Index r = static_cast<Eigen::Index>(j) * M + m + order;
      const double d = scale[j][idx(m, order)];
      const cplx alpha = incident[j][idx(m, order)] + d * sz[r];
      sc.alpha[idx(m, order)] = alpha;
      sc.beta[idx(m, order)] = z[r] / d;
      sc.gamma[idx(m, order)] = modes[j].interior[idx(m, order)] * alpha;
    }
  }
  return sol;
}

ScatteringSolution solve_homogenized_disk(const HomogenizedDiskProblem& p) {
  if (!(p.eps_eff > 0.0)) throw DomainError("solve_homogenized_disk: eps_eff must be positive");
  if (std::imag(p.mu) < 0.0) throw DomainError("solve_homogenized_disk: Im mu must be >= 0");
  if (!(p.radius > 0.0)) throw DomainError("solve_homogenized_disk: radius must be positive");
  const cplx k_int = p.k0 * std::sqrt(p.eps_eff * p.mu);
  const int order = p.order.value_or(
      static_cast<int>(std::ceil(std::max(p.k0 * p.radius, std::abs(k_int) * p.radius))) + 10);
  const auto modes = disk_modes(p.k0, p.radius, k_int, std::sqrt(p.mu / p.eps_eff), order);

  ScatteringSolution sol;
  sol.k0 = p.k0;
  sol.incident = p.incident;
  sol.interior_weight = p.mu;
  sol.unknowns = 2 * order + 1;
  Scatterer sc;
  sc.center = p.center;
  sc.radius = p.radius;
  sc.k_in = k_int;
  sc.order = order;
  sc.alpha = incident_expansion(p.k0, p.incident, p.center, order);
  sc.beta.resize(sc.alpha.size());
  sc.gamma.resize(sc.alpha.size());
  for (int m = -order; m <= order; ++m) {
    sc.beta[idx(m, order)] = modes.t.at(m) * sc.alpha[idx(m, order)];
    sc.gamma[idx(m, order)] = modes.interior[idx(m, order)] * sc.alpha[idx(m, order)];
  }
  sol.scatterers.push_back(std::move(sc));
  return sol;
}

cplx total_field(const ScatteringSolution& s, Point2 x) {
  for (const auto& sc : s.scatterers) {
    const Point2 d = x - sc.center;
    const double r = norm(d);
    if (r < sc.radius) {
      const auto j = bessel_j_sequence(sc.order, sc.k_in * r);
      const double phi = std::atan2(d.y, d.x);
      cplx u = sc.gamma[idx(0, sc.order)] * j[0];
      for (int m = 1; m <= sc.order; ++m) {
        const cplx e = std::exp(kI * (m * phi));
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        // J_{-m} = (-1)^m J_m.
        u += j[static_cast<std::size_t>(m)] * (sc.gamma[idx(m, sc.order)] * e + sign * sc.gamma[idx(-m, sc.order)] / e);
      }
      return u;
    }
  }
  cplx u = std::exp(kI * (s.k0 * dot(direction(s.incident), x)));
  for (const auto& sc : s.scatterers) {
    const Point2 d = x - sc.center;
    const auto h = hankel1_sequence(sc.order, s.k0 * norm(d));
    const double phi = std::atan2(d.y, d.x);
    u += sc.beta[idx(0, sc.order)] * h[0];
    for (int m = 1; m <= sc.order; ++m) {
      const cplx e = std::exp(kI * (m * phi));
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      u += h[static_cast<std::size_t>(m)] * (sc.beta[idx(m, sc.order)] * e + sign * sc.beta[idx(-m, sc.order)] / e);
    }
  }
  return u;
}

cplx far_field_amplitude(const ScatteringSolution& s, double angle) {
  const Point2 xhat{std::cos(angle), std::sin(angle)};
  const cplx pre = std::sqrt(2.0 / (kPi * s.k0)) * std::exp(-kI * (kPi / 4.0));
  cplx f{};
  for (const auto& sc : s.scatterers) {
    cplx a{};
    for (int m = -sc.order; m <= sc.order; ++m) {
      a += sc.beta[idx(m, sc.order)] * std::pow(-kI, m) * std::exp(kI * (m * angle));
    }
    f += std::exp(-kI * (s.k0 * dot(xhat, sc.center))) * a;
  }
  return pre * f;
}

FarField far_field(const ScatteringSolution& s, int n_angles) {
  // The pattern is a trigonometric polynomial up to negligible terms of degree
  // order + k0 max|c|; |f|^2 doubles it.
  const int band = max_order(s) + static_cast<int>(std::ceil(s.k0 * max_center_radius(s))) + 10;
  const int n = std::max(n_angles, 2 * band + 2);
  FarField out;
  out.angles.resize(static_cast<std::size_t>(n));
  out.amplitude.resize(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const double a = 2.0 * kPi * static_cast<double>(i) / n;
    out.angles[i] = a;
    out.amplitude[i] = far_field_amplitude(s, a);
  });
  double sca = 0.0;
  for (const auto& f : out.amplitude) sca += std::norm(f);
  out.scattering = sca * 2.0 * kPi / n;
  const cplx forward = far_field_amplitude(s, s.incident.angle);
  out.extinction = -std::sqrt(8.0 * kPi / s.k0) * std::real(std::exp(kI * (kPi / 4.0)) * forward);
  double absorbed = 0.0;
  for (const auto& sc : s.scatterers) {
    for (std::size_t k = 0; k < sc.beta.size(); ++k) {
      absorbed += std::norm(sc.beta[k]) + std::real(sc.alpha[k] * std::conj(sc.beta[k]));
    }
  }
  out.absorption = -4.0 / s.k0 * absorbed;
  return out;
}

double far_field_gap(const FarField& a, const FarField& reference) {
  if (a.amplitude.size() != reference.amplitude.size()) {
    throw DomainError("far_field_gap: patterns are sampled on different angle grids");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.amplitude.size(); ++i) {
    num += std::norm(a.amplitude[i] - reference.amplitude[i]);
    den += std::norm(reference.amplitude[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

cplx ball_average(const ScatteringSolution& s, Point2 center, double radius, double spacing) {
  if (!(radius > 0.0) || !(spacing > 0.0)) throw DomainError("ball_average: radius and spacing must be positive");
  const int half = static_cast<int>(std::ceil(radius / spacing));
  const int side = 2 * half;
  std::vector<cplx> row_sum(static_cast<std::size_t>(side));
  std::vector<long> row_count(static_cast<std::size_t>(side));
  parallel_for(static_cast<std::size_t>(side), [&](std::size_t iy) {
    const double y = (static_cast<double>(iy) - half + 0.5) * spacing;
    for (int ix = 0; ix < side; ++ix) {
      const double x = (ix - half + 0.5) * spacing;
      if (x * x + y * y >= radius * radius) continue;
      row_sum[iy] += total_field(s, center + Point2{x, y});
      ++row_count[iy];
    }
  });
  cplx sum{};
  long count = 0;
  for (std::size_t i = 0; i < row_sum.size(); ++i) {
    sum += row_sum[i];
    count += row_count[i];
  }
  if (count == 0) throw DomainError("ball_average: spacing too coarse for the radius");
  return s.interior_weight * sum / static_cast<double>(count);
}

StudyReport convergence_study(const RodLaw& law, double eps_eff, cplx mu, const StudyOptions& o) {
  if (o.etas.empty() || o.seeds.empty()) throw DomainError("convergence_study: need at least one eta and one seed");
  StudyReport report;
  report.k0 = o.k0;
  report.eps_eff = eps_eff;
  report.mu = mu;

  HomogenizedDiskProblem hp;
  hp.radius = o.obstacle_radius;
  hp.eps_eff = eps_eff;
  hp.mu = mu;
  hp.k0 = o.k0;
  hp.incident = o.incident;
  const auto hom = solve_homogenized_disk(hp);

  struct Job {
    double eta;
    std::uint64_t seed;
  };
  const double finest = *std::min_element(o.etas.begin(), o.etas.end());
  std::vector<Job> jobs;
  for (double eta : o.etas) {
    if (!(eta > 0.0)) throw DomainError("convergence_study: eta must be positive");
    jobs.push_back({eta, o.seeds.front()});
    if (eta == finest) {
      for (std::size_t k = 1; k < o.seeds.size(); ++k) jobs.push_back({eta, o.seeds[k]});
    }
  }

  // The far-field grid must be common to all patterns; fix it from the largest
  // obstacle extent up front.
  const int band = std::max(o.rod_order, max_order(hom)) + static_cast<int>(std::ceil(o.k0 * o.obstacle_radius)) + 10;
  const int n_angles = std::max(o.n_angles, 2 * band + 2);
  const auto f_hom = far_field(hom, n_angles);

  std::vector<StudyRecord> records(jobs.size());
  std::vector<FarField> patterns(jobs.size());
  // Each dense solve is large; run the jobs one after the other and let the
  // assembly and field evaluations use the workers.
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto& job = jobs[k];
    RodScatteringProblem rp;
    rp.rods = sample_microstructure(law, job.eta, DiskObstacle{{0.0, 0.0}, o.obstacle_radius}, job.seed);
    rp.k0 = o.k0;
    rp.incident = o.incident;
    rp.order = o.rod_order;
    const auto sol = solve_foldy_lax(rp);
    patterns[k] = far_field(sol, n_angles);

    StudyRecord& rec = records[k];
    rec.eta = job.eta;
    rec.seed = job.seed;
    rec.n_rods = sol.scatterers.size();
    rec.residual = sol.residual;
    rec.farfield_L2_gap = far_field_gap(patterns[k], f_hom);

    double num = 0.0;
    double den = 0.0;
    const double r_ball = std::sqrt(job.eta);
    const double h = o.ball_spacing * job.eta;
    for (const auto& p : o.interior_probes) {
      if (norm(p) + r_ball > o.obstacle_radius) {
        throw DomainError("convergence_study: interior probe ball leaves the obstacle");
      }
      const cplx direct = ball_average(sol, p, r_ball, h);
      const cplx limit = ball_average(hom, p, r_ball, h);
      num += std::norm(direct - limit);
      den += std::norm(limit);
    }
    rec.interior_gap = o.interior_probes.empty() ? 0.0 : std::sqrt(num / den);

    num = 0.0;
    den = 0.0;
    for (const auto& p : o.exterior_probes) {
      if (norm(p) <= o.obstacle_radius) throw DomainError("convergence_study: exterior probe inside the obstacle");
      const cplx direct = total_field(sol, p);
      const cplx limit = total_field(hom, p);
      num += std::norm(direct - limit);
      den += std::norm(limit);
    }
    rec.exterior_gap = o.exterior_probes.empty() ? 0.0 : std::sqrt(num / den);
  }
  report.records = records;

  // Pairwise seed spread, normalised by the homogenized pattern.
  double ref = 0.0;
  for (const auto& f : f_hom.amplitude) ref += std::norm(f);
  for (double eta : o.etas) {
    std::vector<std::size_t> members;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      if (jobs[k].eta == eta) members.push_back(k);
    }
    if (members.size() < 2) continue;
    double spread = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        double num = 0.0;
        const auto& fa = patterns[members[a]].amplitude;
        const auto& fb = patterns[members[b]].amplitude;
        for (std::size_t i = 0; i < fa.size(); ++i) num += std::norm(fa[i] - fb[i]);
        spread = std::max(spread, std::sqrt(num / ref));
      }
    }
    report.spreads.push_back({eta, spread});
  }
  return report;
}

double choose_off_resonant_k0(const RodLaw& law, const std::vector<double>& k0_grid) {
  if (!is_dirac(law.radius) || !is_dirac(law.permittivity.real)) {
    throw DomainError("choose_off_resonant_k0: needs Dirac radius and permittivity");
  }
  const double rho = support(law.radius).lo;
  const cplx eps{support(law.permittivity.real).lo, law.permittivity.imag_shift};
  double best = -1.0;
  double best_k0 = std::numeric_limits<double>::quiet_NaN();
  for (double k0 : k0_grid) {
    const cplx z = k0 * k0 * eps * rho * rho;
    double dist = std::numeric_limits<double>::infinity();
    for (int n = 1;; ++n) {
      const double j = bessel_j0_zero(n);
      const double lam = j * j;
      dist = std::min(dist, std::abs(z - lam));
      if (lam > std::real(z) + dist) break;
    }
    const double re_mu = std::abs(std::real(mu_eff_closed(k0, law)));
    if (re_mu < 0.2 || re_mu > 5.0) continue;
    if (dist > best) {
      best = dist;
      best_k0 = k0;
    }
  }
  if (!(best >= 0.0)) throw DomainError("choose_off_resonant_k0: no grid point has |Re mu_eff| in [0.2, 5]");
  return best_k0;
}

}  // namespace rh
