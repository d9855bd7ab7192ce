#pragma once

// Radial Dirichlet spectrum of the unit disk and the resonator problem
//   Delta w + alpha w = 0 in B_rho,  w = 1 on the boundary.
//
// Only radially symmetric eigenfunctions have a nonzero mean, so the table
// enumerates zeros j_n of J_0: lambda_n = j_n^2, the normalised eigenfunction is
// phi_n(s) = J_0(j_n s) / (sqrt(pi) J_1(j_n)) (sign chosen so that c_n > 0) and
// c_n = int_D phi_n = 2 sqrt(pi) / j_n. Hence sum c_n^2 = 4 pi sum 1/j_n^2 = pi.

#include <cstddef>
#include <vector>

#include "rh/common.hpp"

namespace rh {

struct DiskMode {
  int index = 0;             // n >= 1
  double bessel_zero = 0.0;  // j_{0,n}
  double eigenvalue = 0.0;   // lambda_n = j_{0,n}^2
  double coupling = 0.0;     // c_n = 2 sqrt(pi) / j_{0,n}
  double j1_at_zero = 0.0;   // J_1(j_{0,n}), eigenfunction normalisation
};

// Immutable after construction.
class SpectrumTable {
 public:
  explicit SpectrumTable(std::vector<DiskMode> modes);

  std::size_t count() const { return modes_.size(); }
  const DiskMode& operator[](std::size_t i) const { return modes_[i]; }
  const std::vector<DiskMode>& modes() const { return modes_; }
  auto begin() const { return modes_.begin(); }
  auto end() const { return modes_.end(); }

  double largest_eigenvalue() const { return modes_.back().eigenvalue; }

  // phi_n(s) for 0 <= s <= 1, zero-based mode index.
  double eigenfunction(std::size_t i, double s) const;

 private:
  std::vector<DiskMode> modes_;
};

SpectrumTable dirichlet_disk_spectrum(int count);

// Smallest table whose largest eigenvalue exceeds |z| + lambda_1 + margin,
// i.e. large enough that dist_to_spectrum(z) is attained inside the table.
SpectrumTable spectrum_covering(double abs_z, int min_count = 1);

// min_n |z - lambda_n| over the table. The caller must size the table so that
// lambda_N > |z| + lambda_1.
double dist_to_spectrum(cplx z, const SpectrumTable& table);

// Same distance without a table: locates the nearest zeros of J_0 directly.
double dist_to_disk_spectrum(cplx z);

struct ResonatorParams {
  cplx alpha;  // k0^2 eps
  double rho;  // disk radius, in (0, 1/2]
};

// Principal square root with Im >= 0 (Re >= 0 on the real axis).
cplx principal_sqrt(cplx z);

// Modal partial sum 1 + sum_{n<=N} alpha rho^2 c_n / (lambda_n - alpha rho^2) phi_n(r/rho).
cplx resonator_series(double r, const ResonatorParams& params, const SpectrumTable& table,
                      std::size_t n_modes);

// J_0(sqrt(alpha) r) / J_0(sqrt(alpha) rho).
cplx resonator_closed(double r, const ResonatorParams& params);

// int_{B_rho} w = 2 pi rho J_1(k rho) / (k J_0(k rho)), k = sqrt(alpha).
cplx resonator_mean(const ResonatorParams& params);

// Term-wise integral of the modal series: pi rho^2 + sum c_n^2 rho^2 alpha rho^2 / (lambda_n - alpha rho^2).
cplx resonator_mean_series(const ResonatorParams& params, const SpectrumTable& table,
                           std::size_t n_modes);

}  // namespace rh
