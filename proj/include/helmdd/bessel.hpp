#pragma once

// Modified Bessel functions I0, K0 in double precision, plus the
// log-subtracted combination used by weakly singular boundary quadrature.

#include <cmath>
#include <limits>

namespace helmdd {

namespace detail {

// Chebyshev coefficients of K0(x)*exp(x)*sqrt(x) in t = 4/x - 1, x in [2, inf).
inline constexpr double kK0Cheb[30] = {
    2.44030308206595545,
    -0.0314481013119645005,
    0.00156988388573005337,
    -0.000128495495816278026,
    0.0000139498137188764994,
    -1.83175552271911948e-6,
    2.76681363944501508e-7,
    -4.66048989768794767e-8,
    8.57403401741422609e-9,
    -1.69753450938906152e-9,
    3.57739728140032845e-10,
    -7.95748924447739703e-11,
    1.85594911495492653e-11,
    -4.51459788337451852e-12,
    1.14034058820734263e-12,
    -2.98009692314813868e-13,
    8.03289077506738883e-14,
    -2.22751332674383051e-14,
    6.34007647621449477e-15,
    -1.84859337776306317e-15,
    5.51205599536405326e-16,
    -1.67823111532894224e-16,
    5.21039150633406476e-17,
    -1.64757988180458667e-17,
    5.30041490737160555e-18,
    -1.73312076547037451e-18,
    5.75374757163779856e-19,
    -1.93538214372424407e-19,
    6.52226388796988573e-20,
    -2.00802630554813962e-20,
};

inline double clenshaw(const double* c, int n, double t) {
  double b0 = 0.0, b1 = 0.0;
  for (int k = n - 1; k >= 1; --k) {
    double tmp = 2.0 * t * b0 - b1 + c[k];
    b1 = b0;
    b0 = tmp;
  }
  return t * b0 - b1 + 0.5 * c[0];
}

// G(x) = sum_k psi(k+1) (x^2/4)^k / (k!)^2, the regular companion series of K0:
// K0(x) = -log(x/2) I0(x) + G(x). All terms positive past k=0 except the
// Euler-Mascheroni constant, so there is no cancellation.
inline double k0_companion_series(double x) {
  constexpr double euler_gamma = 0.57721566490153286060651209;
  const double q = 0.25 * x * x;
  double term = 1.0;
  double psi = -euler_gamma;
  double sum = psi;
  for (int k = 1; k < 60; ++k) {
    term *= q / (static_cast<double>(k) * k);
    psi += 1.0 / k;
    const double add = psi * term;
    sum += add;
    if (add < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

}  // namespace detail

/// I0(x) for x >= 0 via the ascending series (all-positive terms).
inline double bessel_i0(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

/// K0(x) for x > 0. Ascending series below 2, Chebyshev expansion above.
inline double bessel_k0(double x) {
  if (!(x > 0.0)) return std::numeric_limits<double>::infinity();
  if (x <= 2.0)
    return -std::log(0.5 * x) * bessel_i0(x) + detail::k0_companion_series(x);
  const double t = 4.0 / x - 1.0;
  return detail::clenshaw(detail::kK0Cheb, 30, t) * std::exp(-x) / std::sqrt(x);
}

/// K0(x) + log(x) I0(x), the smooth remainder after subtracting the log
/// singularity. Finite at x = 0 (value log 2 - gamma).
inline double bessel_k0_log_subtracted(double x) {
  constexpr double ln2 = 0.69314718055994530941723212;
  if (x <= 2.0) return ln2 * bessel_i0(x) + detail::k0_companion_series(x);
  return bessel_k0(x) + std::log(x) * bessel_i0(x);
}

namespace quad {

// Gauss-Legendre, 8 points on [0,1].
inline constexpr double kGauss8X[8] = {
    0.0198550717512318842, 0.101666761293186630, 0.237233795041835507,
    0.408282678752175098,  0.591717321247824902, 0.762766204958164493,
    0.898333238706813370,  0.980144928248768116,
};
inline constexpr double kGauss8W[8] = {
    0.0506142681451881296, 0.111190517226687235, 0.156853322938943644,
    0.181341891689180991,  0.181341891689180991, 0.156853322938943644,
    0.111190517226687235,  0.0506142681451881296,
};

// Gauss rule for the weight -log(x) on (0,1):
// int_0^1 -log(x) f(x) dx ~= sum_i w_i f(x_i).
inline constexpr double kLogGauss8X[8] = {
    0.0133202441608924650, 0.0797504290138949384, 0.197871029326188054,
    0.354153994351909420,  0.529458575234917278,  0.701814529939099964,
    0.849379320441106676,  0.953326450056359789,
};
inline constexpr double kLogGauss8W[8] = {
    0.164416604728002887,  0.237525610023306021,  0.226841984431919126,
    0.175754079006070245,  0.112924030246759052,  0.0578722107177820724,
    0.0209790737421329780, 0.00368640710402761901,
};

// Gauss-Legendre, 2 points on [0,1]; exact for cubics on edge loads.
inline constexpr double kGauss2X[2] = {0.211324865405187118, 0.788675134594812882};
inline constexpr double kGauss2W[2] = {0.5, 0.5};

}  // namespace quad

}  // namespace helmdd
