#pragma once

// Integer-order Bessel and Hankel functions.
//
// J_n is computed by Miller's backward recurrence normalised with the
// generating-function identity e^{-iz} = J_0 + 2 sum (-i)^k J_k (or its
// conjugate form in the lower half plane), which keeps full relative accuracy
// away from zeros on the real axis and avoids cancellation for large |Im z|.
// Y_n for real x > 0 uses the Neumann series for Y_0 (and its derivative for
// Y_1) followed by forward recurrence; for x >= 25 the Hankel asymptotic
// expansion is used for orders 0 and 1.
//
// Validated range: |x| <= 100 on the real axis, |Im z| <= 50. Arguments with
// |z| > 2e4 or |Im z| > 600 throw AccuracyError.

#include <vector>

#include "rh/common.hpp"

namespace rh {

// J_0(z) .. J_nmax(z).
std::vector<cplx> bessel_j_sequence(int nmax, cplx z);

cplx bessel_j(int order, cplx z);
double bessel_j(int order, double x);

// J_n'(z) for any integer n.
cplx bessel_j_prime(int order, cplx z);

// Y_n(x), x > 0.
double bessel_y(int order, double x);

// J_0..J_nmax and Y_0..Y_nmax at real x > 0.
struct RealBesselTable {
  std::vector<double> j;
  std::vector<double> y;
};
RealBesselTable bessel_jy_sequence(int nmax, double x);

// H^{(1)}_n(x) = J_n + i Y_n for x > 0, n = 0..nmax. Negative orders follow
// from H_{-n} = (-1)^n H_n.
std::vector<cplx> hankel1_sequence(int nmax, double x);
cplx hankel1(int order, double x);
cplx hankel1_prime(int order, double x);

// n-th positive zero of J_0 (n >= 1), accurate to ~1e-14 relative.
double bessel_j0_zero(int n);

}  // namespace rh
