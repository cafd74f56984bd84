#pragma once

#include <complex>
#include <vector>

// Modified Bessel functions of (mostly) purely imaginary order on the
// positive real axis, the complex gamma function, and the spectral weights
// built from them.
//
// Evaluation strategy by region:
//   - I_nu: defining power series for x <= 400 (terms stay below the
//     overflow threshold), exponentially scaled asymptotic series beyond.
//   - K_nu: adaptive quadrature of exp(x) K_nu(x) = (integral of
//     exp(-x(cosh t - 1)) cosh(nu t)) for x <= 400, asymptotic series beyond.
//   - Derivatives by the order-shift identities I' = (I_{nu-1}+I_{nu+1})/2,
//     K' = -(K_{nu-1}+K_{nu+1})/2, evaluated at the shifted complex orders.
//
// Every result carries an absolute error estimate. For order ik the intrinsic
// conditioning of these representations degrades like exp(pi k / 2) * eps;
// full double accuracy holds for |Im nu| up to roughly 10, which covers the
// spectral window used elsewhere in this project. The estimate stays honest
// beyond that.
namespace orbscat::specfun {

// Gamma function for complex argument (Lanczos approximation plus
// reflection), accurate to ~1e-14 relative away from the poles.
std::complex<double> cgamma(std::complex<double> z);

struct BesselEval {
  std::complex<double> value;
  double est_abs_error = 0.0;
};

// Modified Bessel I_nu(x) and K_nu(x). Requirements: x > 0 (domain_error),
// |Im nu| <= 100 and |Re nu| <= 3 (invalid_argument), tol >= 1e-13
// (invalid_argument). Unscaled values that overflow or underflow the double
// range throw range_error; the scaled variants below never do.
BesselEval bessel_I(std::complex<double> nu, double x, double tol = 1e-12);
BesselEval bessel_K(std::complex<double> nu, double x, double tol = 1e-12);

// exp(-x) I_nu(x) and exp(x) K_nu(x).
BesselEval bessel_I_scaled(std::complex<double> nu, double x, double tol = 1e-12);
BesselEval bessel_K_scaled(std::complex<double> nu, double x, double tol = 1e-12);

// d/dx of I_nu and K_nu, and their scaled forms exp(-x) I_nu', exp(x) K_nu'.
BesselEval bessel_I_deriv(std::complex<double> nu, double x, double tol = 1e-12);
BesselEval bessel_K_deriv(std::complex<double> nu, double x, double tol = 1e-12);
BesselEval bessel_I_deriv_scaled(std::complex<double> nu, double x, double tol = 1e-12);
BesselEval bessel_K_deriv_scaled(std::complex<double> nu, double x, double tol = 1e-12);

// |I_nu K_nu' - I_nu' K_nu + 1/x| at nu = ik; the exact Wronskian of the
// pair is -1/x, so this is a pure consistency residual.
double wronskian_check(double k, double x, double tol = 1e-13);

// Weights entering the distorted plane waves: omega_{+-}(k) and the per-mode
// constants C_m^{(+-)}. For lambda_m != 0, C_m^{(+-)} = (sqrt(lambda_m)/2)^{∓ik};
// the lambda_m = 0 (cusp) branch is +-(i/(k omega_{+-}(k))) sqrt(pi/2).
struct ScatteringWeights {
  std::complex<double> omega_plus;
  std::complex<double> omega_minus;
  std::vector<std::complex<double>> C_plus;
  std::vector<std::complex<double>> C_minus;
};

ScatteringWeights scattering_weights(double k, const std::vector<double>& lambdas);

}  // namespace orbscat::specfun
