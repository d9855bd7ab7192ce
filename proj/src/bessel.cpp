#include "rh/bessel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rh {
namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
constexpr double kRescale = 1e250;
constexpr double kMaxAbs = 2e4;
constexpr double kMaxImag = 600.0;
constexpr double kAsymptoticThreshold = 25.0;

void check_range(cplx z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
    throw AccuracyError("bessel: non-finite argument");
  }
  if (std::abs(z) > kMaxAbs || std::abs(z.imag()) > kMaxImag) {
    throw AccuracyError("bessel: argument outside supported range (|z| <= 2e4, |Im z| <= 600)");
  }
}

int miller_start(int nmax, double az) {
  const int m = std::max(nmax, static_cast<int>(std::ceil(az)));
  int start = m + 30 + static_cast<int>(std::sqrt(60.0 * m));
  return start + (start % 2);
}

// Unnormalised backward recurrence from `start` down to 0; returns J_0..J_keep.
// For real arguments the normalisation is 1 = J_0 + 2 sum J_{2k}; for complex
// arguments e^{-iz} (Im z >= 0) or e^{iz} (Im z < 0).
template <typename T>
std::vector<T> miller(int keep, T z, int start) {
  std::vector<T> out(static_cast<std::size_t>(keep) + 1, T(0));
  constexpr bool is_complex = !std::is_same_v<T, double>;
  cplx w{0.0, -1.0};
  if constexpr (is_complex) {
    if (z.imag() < 0.0) w = cplx{0.0, 1.0};
  }
  const T two_over_z = T(2.0) / z;
  T next(0.0);
  T cur(1e-30);
  T sum(0.0);
  cplx wpow = std::pow(w, start);
  for (int k = start; k >= 1; --k) {
    if (k <= keep) out[static_cast<std::size_t>(k)] = cur;
    if constexpr (is_complex) {
      sum += T(2.0) * T(wpow) * cur;
      wpow /= w;
    } else {
      if (k % 2 == 0) sum += 2.0 * cur;
    }
    const T prev = T(static_cast<double>(k)) * two_over_z * cur - next;
    next = cur;
    cur = prev;
    if (std::abs(cur) > kRescale) {
      cur /= kRescale;
      next /= kRescale;
      sum /= kRescale;
      for (int i = k; i <= keep; ++i) out[static_cast<std::size_t>(i)] /= kRescale;
    }
  }
  out[0] = cur;
  sum += cur;
  T factor;
  if constexpr (is_complex) {
    const cplx target = z.imag() < 0.0 ? std::exp(cplx{0.0, 1.0} * z) : std::exp(cplx{0.0, -1.0} * z);
    factor = target / sum;
  } else {
    factor = 1.0 / sum;
  }
  for (auto& v : out) v *= factor;
  return out;
}

struct AsymptoticPair {
  double j;
  double y;
};

// Hankel asymptotic expansion of J_nu, Y_nu for x >= 25 (nu = 0 or 1).
AsymptoticPair hankel_asymptotic(int nu, double x) {
  const double mu = 4.0 * nu * nu;
  double p = 1.0;
  double q = 0.0;
  double term = 1.0;
  double prev_abs = std::numeric_limits<double>::infinity();
  const double eightx = 8.0 * x;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (k * eightx);
    const double a = std::abs(term);
    if (a > prev_abs || a < 1e-18) break;
    prev_abs = a;
    switch (k % 4) {
      case 1: q += term; break;
      case 2: p -= term; break;
      case 3: q -= term; break;
      case 0: p += term; break;
    }
  }
  const double chi = x - (0.5 * nu + 0.25) * kPi;
  const double amp = std::sqrt(2.0 / (kPi * x));
  const double c = std::cos(chi);
  const double s = std::sin(chi);
  return {amp * (p * c - q * s), amp * (p * s + q * c)};
}

}  // namespace

std::vector<cplx> bessel_j_sequence(int nmax, cplx z) {
  if (nmax < 0) throw DomainError("bessel_j_sequence: nmax must be >= 0");
  check_range(z);
  if (z == cplx{0.0, 0.0}) {
    std::vector<cplx> out(static_cast<std::size_t>(nmax) + 1, cplx{0.0, 0.0});
    out[0] = 1.0;
    return out;
  }
  if (z.imag() == 0.0) {
    const auto re = miller<double>(nmax, z.real(), miller_start(nmax, std::abs(z)));
    return {re.begin(), re.end()};
  }
  return miller<cplx>(nmax, z, miller_start(nmax, std::abs(z)));
}

cplx bessel_j(int order, cplx z) {
  const int n = std::abs(order);
  const cplx v = bessel_j_sequence(n, z)[static_cast<std::size_t>(n)];
  return (order < 0 && (n % 2 == 1)) ? -v : v;
}

double bessel_j(int order, double x) {
  const int n = std::abs(order);
  double v;
  if (n <= 1 && std::abs(x) >= kAsymptoticThreshold) {
    check_range(x);
    v = hankel_asymptotic(n, std::abs(x)).j;
    if (x < 0.0 && n == 1) v = -v;
  } else {
    v = bessel_j_sequence(n, cplx{x, 0.0})[static_cast<std::size_t>(n)].real();
  }
  return (order < 0 && (n % 2 == 1)) ? -v : v;
}

cplx bessel_j_prime(int order, cplx z) {
  return 0.5 * (bessel_j(order - 1, z) - bessel_j(order + 1, z));
}

RealBesselTable bessel_jy_sequence(int nmax, double x) {
  if (nmax < 0) throw DomainError("bessel_jy_sequence: nmax must be >= 0");
  if (!(x > 0.0)) throw DomainError("bessel_jy_sequence: x must be > 0");
  check_range(x);
  const int keep = std::max(nmax, 1);
  RealBesselTable t;
  t.y.assign(static_cast<std::size_t>(keep) + 1, 0.0);
  if (x >= kAsymptoticThreshold) {
    t.j = miller<double>(keep, x, miller_start(keep, x));
    const auto a0 = hankel_asymptotic(0, x);
    const auto a1 = hankel_asymptotic(1, x);
    t.j[0] = a0.j;
    t.j[1] = a1.j;
    t.y[0] = a0.y;
    t.y[1] = a1.y;
  } else {
    const int start = miller_start(keep, x);
    const auto full = miller<double>(start, x, start);
    t.j.assign(full.begin(), full.begin() + keep + 1);
    // Y_0 = (2/pi)[(ln(x/2)+gamma) J_0 - 2 sum (-1)^k J_{2k}/k]
    // Y_1 = -Y_0' = (2/pi)[-J_0/x + (ln(x/2)+gamma) J_1 + sum (-1)^k (J_{2k-1}-J_{2k+1})/k]
    const double lg = std::log(0.5 * x) + kEulerGamma;
    double s0 = 0.0;
    double s1 = 0.0;
    for (int k = 1; 2 * k + 1 <= start; ++k) {
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      s0 += sign * full[static_cast<std::size_t>(2 * k)] / k;
      s1 += sign * (full[static_cast<std::size_t>(2 * k - 1)] - full[static_cast<std::size_t>(2 * k + 1)]) / k;
    }
    t.y[0] = (2.0 / kPi) * (lg * full[0] - 2.0 * s0);
    t.y[1] = (2.0 / kPi) * (-full[0] / x + lg * full[1] + s1);
  }
  for (int k = 1; k < keep; ++k) {
    t.y[static_cast<std::size_t>(k) + 1] = (2.0 * k / x) * t.y[static_cast<std::size_t>(k)] - t.y[static_cast<std::size_t>(k) - 1];
  }
  t.j.resize(static_cast<std::size_t>(nmax) + 1);
  t.y.resize(static_cast<std::size_t>(nmax) + 1);
  return t;
}

double bessel_y(int order, double x) {
  const int n = std::abs(order);
  const double v = bessel_jy_sequence(n, x).y[static_cast<std::size_t>(n)];
  return (order < 0 && (n % 2 == 1)) ? -v : v;
}

std::vector<cplx> hankel1_sequence(int nmax, double x) {
  const auto t = bessel_jy_sequence(nmax, x);
  std::vector<cplx> h(t.j.size());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = {t.j[k], t.y[k]};
  return h;
}

cplx hankel1(int order, double x) {
  const int n = std::abs(order);
  const cplx v = hankel1_sequence(n, x)[static_cast<std::size_t>(n)];
  return (order < 0 && (n % 2 == 1)) ? -v : v;
}

cplx hankel1_prime(int order, double x) {
  return 0.5 * (hankel1(order - 1, x) - hankel1(order + 1, x));
}

double bessel_j0_zero(int n) {
  if (n < 1) throw DomainError("bessel_j0_zero: index must be >= 1");
  // McMahon expansion as the starting guess, then Newton on J_0 (J_0' = -J_1).
  const double beta = (n - 0.25) * kPi;
  const double b8 = 8.0 * beta;
  double x = beta + 1.0 / b8 - 124.0 / (3.0 * b8 * b8 * b8) + 120928.0 / (15.0 * std::pow(b8, 5));
  for (int it = 0; it < 20; ++it) {
    const double j0 = bessel_j(0, x);
    const double j1 = bessel_j(1, x);
    const double dx = j0 / j1;
    x += dx;
    if (std::abs(dx) < 1e-15 * x) break;
  }
  return x;
}

}  // namespace rh
