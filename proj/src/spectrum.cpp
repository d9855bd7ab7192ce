#include "rh/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rh/bessel.hpp"

namespace rh {
namespace {

void require_off_spectrum(cplx z, const char* who) {
  const double d = dist_to_disk_spectrum(z);
  if (d <= 1e-12 * std::max(1.0, std::abs(z))) {
    throw ResonanceError(std::string(who) + ": alpha rho^2 lies on the Dirichlet spectrum");
  }
}

void check_rho(double rho, const char* who) {
  if (!(rho > 0.0) || rho > 0.5) {
    throw DomainError(std::string(who) + ": rho must lie in (0, 1/2]");
  }
}

}  // namespace

SpectrumTable::SpectrumTable(std::vector<DiskMode> modes) : modes_(std::move(modes)) {
  if (modes_.empty()) throw DomainError("SpectrumTable: at least one mode required");
}

double SpectrumTable::eigenfunction(std::size_t i, double s) const {
  const auto& m = modes_.at(i);
  return bessel_j(0, m.bessel_zero * s) / (std::sqrt(kPi) * m.j1_at_zero);
}

SpectrumTable dirichlet_disk_spectrum(int count) {
  if (count < 1) throw DomainError("dirichlet_disk_spectrum: N must be >= 1");
  std::vector<DiskMode> modes;
  modes.reserve(static_cast<std::size_t>(count));
  for (int n = 1; n <= count; ++n) {
    const double j = bessel_j0_zero(n);
    modes.push_back({n, j, j * j, 2.0 * std::sqrt(kPi) / j, bessel_j(1, j)});
  }
  return SpectrumTable(std::move(modes));
}

SpectrumTable spectrum_covering(double abs_z, int min_count) {
  // lambda_n ~ ((n - 1/4) pi)^2
  const double target = abs_z + 2.0 * 5.783185962946784 + 1.0;
  const int n = static_cast<int>(std::ceil(std::sqrt(target) / kPi + 0.25)) + 2;
  return dirichlet_disk_spectrum(std::max(n, min_count));
}

double dist_to_spectrum(cplx z, const SpectrumTable& table) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : table) best = std::min(best, std::abs(z - m.eigenvalue));
  return best;
}

double dist_to_disk_spectrum(cplx z) {
  const double re = z.real();
  int n0 = 1;
  if (re > 0.0) n0 = std::max(1, static_cast<int>(std::lround(std::sqrt(re) / kPi + 0.25)));
  double best = std::numeric_limits<double>::infinity();
  for (int n = std::max(1, n0 - 1); n <= n0 + 1; ++n) {
    const double j = bessel_j0_zero(n);
    best = std::min(best, std::abs(z - j * j));
  }
  return best;
}

cplx principal_sqrt(cplx z) {
  cplx s = std::sqrt(z);
  if (s.imag() < 0.0 || (s.imag() == 0.0 && s.real() < 0.0)) s = -s;
  return s;
}

cplx resonator_series(double r, const ResonatorParams& params, const SpectrumTable& table,
                      std::size_t n_modes) {
  check_rho(params.rho, "resonator_series");
  if (r < 0.0 || r > params.rho) throw DomainError("resonator_series: r must lie in [0, rho]");
  if (n_modes > table.count()) throw DomainError("resonator_series: table too small");
  const cplx z = params.alpha * params.rho * params.rho;
  require_off_spectrum(z, "resonator_series");
  const double s = r / params.rho;
  cplx sum = 1.0;
  for (std::size_t i = 0; i < n_modes; ++i) {
    const auto& m = table[i];
    sum += z * m.coupling / (m.eigenvalue - z) * table.eigenfunction(i, s);
  }
  return sum;
}

cplx resonator_closed(double r, const ResonatorParams& params) {
  check_rho(params.rho, "resonator_closed");
  if (params.alpha == cplx{0.0, 0.0}) return 1.0;
  const cplx z = params.alpha * params.rho * params.rho;
  require_off_spectrum(z, "resonator_closed");
  const cplx k = principal_sqrt(params.alpha);
  return bessel_j(0, k * r) / bessel_j(0, k * params.rho);
}

cplx resonator_mean(const ResonatorParams& params) {
  if (params.rho == 0.0) return 0.0;
  check_rho(params.rho, "resonator_mean");
  const double area = kPi * params.rho * params.rho;
  if (params.alpha == cplx{0.0, 0.0}) return area;
  const cplx z = params.alpha * params.rho * params.rho;
  require_off_spectrum(z, "resonator_mean");
  const cplx k = principal_sqrt(params.alpha);
  const cplx kr = k * params.rho;
  const auto j = bessel_j_sequence(1, kr);
  // 2 pi rho J1(k rho) / (k J0(k rho)) = pi rho^2 * [2 J1(x)/x] / J0(x), x = k rho
  return area * (2.0 * j[1] / kr) / j[0];
}

cplx resonator_mean_series(const ResonatorParams& params, const SpectrumTable& table,
                           std::size_t n_modes) {
  if (n_modes > table.count()) throw DomainError("resonator_mean_series: table too small");
  const double rho2 = params.rho * params.rho;
  const cplx z = params.alpha * rho2;
  require_off_spectrum(z, "resonator_mean_series");
  cplx sum = kPi * rho2;
  for (std::size_t i = 0; i < n_modes; ++i) {
    const auto& m = table[i];
    sum += m.coupling * m.coupling * rho2 * z / (m.eigenvalue - z);
  }
  return sum;
}

}  // namespace rh
