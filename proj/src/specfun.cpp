#include "orbscat/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace orbscat::specfun {

namespace {

using cplx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::min();

// Lanczos approximation, g = 607/128, 15 coefficients.
constexpr double kLanczosG = 607.0 / 128.0;
constexpr double kLanczos[15] = {
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
};

cplx cgamma_core(cplx z) {
  // Valid for Re z >= 0.5.
  cplx a(kLanczos[0], 0.0);
  for (int i = 1; i < 15; ++i) a += kLanczos[i] / (z + cplx(i - 1, 0.0));
  cplx t = z + cplx(kLanczosG - 0.5, 0.0);
  return std::sqrt(2.0 * kPi) * std::pow(t, z - cplx(0.5, 0.0)) * std::exp(-t) * a;
}

void check_common(cplx nu, double x, double tol) {
  if (!(x > 0.0)) throw std::domain_error("bessel: argument must be positive");
  if (!(tol >= 1e-13)) throw std::invalid_argument("bessel: tolerance below 1e-13");
  if (std::abs(nu.imag()) > 100.0 || std::abs(nu.real()) > 3.0)
    throw std::invalid_argument("bessel: order outside supported strip");
}

// ---------------------------------------------------------------------------
// Power series for I_nu, x <= 400.
//
// I_nu(x) = (x/2)^nu sum_j (x^2/4)^j / (j! Gamma(nu+j+1)), with the running
// magnitude sum tracked for a rounding-error estimate.
// ---------------------------------------------------------------------------

BesselEval series_I(cplx nu, double x, double tol) {
  // Negative (near-)integer real order: shift by the exact symmetry
  // I_{-n} = I_n so the term recurrence never divides by zero.
  if (std::abs(nu.imag()) < 1e-300) {
    double r = std::round(nu.real());
    if (r < 0.0 && std::abs(nu.real() - r) < 1e-14) nu = -nu;
  }
  const double q = 0.25 * x * x;
  cplx term = 1.0 / cgamma(nu + 1.0);
  cplx sum = term;
  double abs_sum = std::abs(term);
  double j_peak = 0.5 * x;
  double tail = 0.0;
  for (int j = 1; j < 200000; ++j) {
    term *= q / (static_cast<double>(j) * (nu + static_cast<double>(j)));
    sum += term;
    double at = std::abs(term);
    abs_sum += at;
    if (j > j_peak && at < 0.05 * tol * std::max(std::abs(sum), kTiny) + 1e-300) {
      double ratio = q / (static_cast<double>(j + 1) * std::abs(nu + cplx(j + 1, 0.0)));
      tail = (ratio < 0.9) ? at * ratio / (1.0 - ratio) : at;
      break;
    }
  }
  cplx pref = std::pow(cplx(0.5 * x, 0.0), nu);
  double ap = std::abs(pref);
  BesselEval out;
  out.value = pref * sum;
  out.est_abs_error = ap * (4.0 * kEps * abs_sum + tail);
  return out;
}

// ---------------------------------------------------------------------------
// Asymptotic series for x > 400.
//
// With u_0 = 1, u_j = u_{j-1} (4 nu^2 - (2j-1)^2) / (8 j):
//   S1(x) = sum (-1)^j u_j x^{-j},   S2(x) = sum u_j x^{-j},
//   K_nu(x) = sqrt(pi/(2x)) e^{-x} S2,
//   I_nu(x) = [e^{x} S1 - sin(nu pi) e^{-x} S2] / sqrt(2 pi x).
// Truncated at the smallest term (the series are divergent but the first
// omitted term bounds the error in this regime).
// ---------------------------------------------------------------------------

struct AsymSums {
  cplx s1, s2;
  double est;  // common absolute estimate for either sum
};

AsymSums asym_sums(cplx nu, double x) {
  cplx nu2 = 4.0 * nu * nu;
  cplx u = 1.0;
  cplx s1 = 1.0, s2 = 1.0;
  double prev = 1.0;
  double est = kEps;
  for (int j = 1; j < 60; ++j) {
    double tm = 2.0 * j - 1.0;
    u *= (nu2 - cplx(tm * tm, 0.0)) / (8.0 * j * x);
    double au = std::abs(u);
    if (au >= prev) {
      est = prev;
      break;
    }
    s2 += u;
    s1 += ((j % 2) ? -u : u);
    prev = au;
    est = au;
  }
  est += 8.0 * kEps;
  return {s1, s2, est};
}

// ---------------------------------------------------------------------------
// Quadrature for the scaled K, x <= 400:
//   e^{x} K_nu(x) = integral_0^tmax exp(-x (cosh t - 1)) cosh(nu t) dt,
// truncated where the damped integrand is below 1e-26 and integrated by
// adaptive Simpson on sub-oscillation panels.
// ---------------------------------------------------------------------------

struct QuadAcc {
  cplx val{0.0, 0.0};
  double err = 0.0;
  double absint = 0.0;
};

cplx k_integrand(cplx nu, double x, double t) {
  double sh = std::sinh(0.5 * t);
  double phi = 2.0 * x * sh * sh;  // x (cosh t - 1), stable near t = 0
  if (phi > 740.0) return {0.0, 0.0};
  return std::exp(-phi) * std::cosh(nu * t);
}

void adapt_simpson(cplx nu, double x, double a, double b, cplx fa, cplx fm, cplx fb,
                   cplx whole, double tol, int depth, QuadAcc& acc) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  cplx flm = k_integrand(nu, x, lm), frm = k_integrand(nu, x, rm);
  cplx left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  cplx right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  cplx delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    acc.val += left + right + delta / 15.0;
    acc.err += std::abs(delta) / 15.0;
    acc.absint += (b - a) * (std::abs(fa) + 4.0 * std::abs(fm) + std::abs(fb)) / 6.0;
    return;
  }
  adapt_simpson(nu, x, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, acc);
  adapt_simpson(nu, x, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, acc);
}

BesselEval quad_K_scaled(cplx nu, double x, double tol) {
  double ar = std::abs(nu.real());
  double t_max = 1.0;
  for (int it = 0; it < 6; ++it) t_max = std::acosh(1.0 + (60.0 + ar * t_max) / x);
  int panels = std::max(8, static_cast<int>(std::ceil(
                               t_max * 2.0 * (std::abs(nu.imag()) + 1.0) / kPi)));
  double target = 0.25 * tol;
  QuadAcc acc;
  double h = t_max / panels;
  cplx f0 = k_integrand(nu, x, 0.0);
  for (int p = 0; p < panels; ++p) {
    double a = p * h, b = (p + 1) * h, m = a + 0.5 * h;
    cplx fa = (p == 0) ? f0 : k_integrand(nu, x, a);
    cplx fm = k_integrand(nu, x, m);
    cplx fb = k_integrand(nu, x, b);
    cplx whole = h / 6.0 * (fa + 4.0 * fm + fb);
    adapt_simpson(nu, x, a, b, fa, fm, fb, whole, target * h / t_max, 24, acc);
  }
  BesselEval out;
  out.value = acc.val;
  out.est_abs_error = acc.err + 8.0 * kEps * acc.absint + 1e-28;
  return out;
}

// ---------------------------------------------------------------------------
// Dispatchers producing the scaled values; the public entry points apply the
// exponential factors and the overflow/underflow policy.
// ---------------------------------------------------------------------------

// e^{-x} I_nu(x)
BesselEval core_I_scaled(cplx nu, double x, double tol) {
  if (x <= 400.0) {
    BesselEval r = series_I(nu, x, tol);
    double s = std::exp(-x);
    r.value *= s;
    r.est_abs_error *= s;
    return r;
  }
  AsymSums s = asym_sums(nu, x);
  double pref = 1.0 / std::sqrt(2.0 * kPi * x);
  double damp = std::exp(-2.0 * x);  // flushes to zero beyond x ~ 354
  BesselEval out;
  out.value = pref * (s.s1 - std::sin(nu * kPi) * damp * s.s2);
  out.est_abs_error = pref * s.est * (1.0 + std::abs(std::sin(nu * kPi)) * damp);
  return out;
}

// e^{x} K_nu(x)
BesselEval core_K_scaled(cplx nu, double x, double tol) {
  if (x <= 400.0) return quad_K_scaled(nu, x, tol);
  AsymSums s = asym_sums(nu, x);
  double pref = std::sqrt(kPi / (2.0 * x));
  BesselEval out;
  out.value = pref * s.s2;
  out.est_abs_error = pref * s.est;
  return out;
}

BesselEval unscale(BesselEval r, double x, bool grow) {
  // grow: multiply by e^{x}; otherwise by e^{-x}.
  double lx = grow ? x : -x;
  double base = std::abs(r.value);
  if (base > 0.0) {
    double mag = std::log(base) + lx;
    if (mag > 709.5) throw std::range_error("bessel: value overflows double range");
    if (mag < -744.0) throw std::range_error("bessel: value underflows double range");
  }
  double s = std::exp(lx);
  r.value *= s;
  r.est_abs_error *= s;
  return r;
}

BesselEval deriv_scaled(cplx nu, double x, double tol, bool is_I) {
  BesselEval lo = is_I ? core_I_scaled(nu - 1.0, x, tol) : core_K_scaled(nu - 1.0, x, tol);
  BesselEval hi = is_I ? core_I_scaled(nu + 1.0, x, tol) : core_K_scaled(nu + 1.0, x, tol);
  BesselEval out;
  out.value = 0.5 * (lo.value + hi.value);
  if (!is_I) out.value = -out.value;
  out.est_abs_error = 0.5 * (lo.est_abs_error + hi.est_abs_error);
  return out;
}

}  // namespace

std::complex<double> cgamma(std::complex<double> z) {
  if (z.real() >= 0.5) return cgamma_core(z);
  // Reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z).
  cplx s = std::sin(kPi * z);
  return kPi / (s * cgamma_core(1.0 - z));
}

BesselEval bessel_I_scaled(cplx nu, double x, double tol) {
  check_common(nu, x, tol);
  return core_I_scaled(nu, x, tol);
}

BesselEval bessel_K_scaled(cplx nu, double x, double tol) {
  check_common(nu, x, tol);
  return core_K_scaled(nu, x, tol);
}

BesselEval bessel_I(cplx nu, double x, double tol) {
  check_common(nu, x, tol);
  if (x <= 400.0) return series_I(nu, x, tol);
  return unscale(core_I_scaled(nu, x, tol), x, true);
}

BesselEval bessel_K(cplx nu, double x, double tol) {
  check_common(nu, x, tol);
  return unscale(core_K_scaled(nu, x, tol), x, false);
}

BesselEval bessel_I_deriv_scaled(cplx nu, double x, double tol) {
  check_common(nu, x, tol);
  return deriv_scaled(nu, x, tol, true);
}

BesselEval bessel_K_deriv_scaled(cplx nu, double x, double tol) {
  check_common(nu, x, tol);
  return deriv_scaled(nu, x, tol, false);
}

BesselEval bessel_I_deriv(cplx nu, double x, double tol) {
  check_common(nu, x, tol);
  if (x <= 400.0) {
    BesselEval lo = series_I(nu - 1.0, x, tol);
    BesselEval hi = series_I(nu + 1.0, x, tol);
    return {0.5 * (lo.value + hi.value), 0.5 * (lo.est_abs_error + hi.est_abs_error)};
  }
  return unscale(deriv_scaled(nu, x, tol, true), x, true);
}

BesselEval bessel_K_deriv(cplx nu, double x, double tol) {
  check_common(nu, x, tol);
  return unscale(deriv_scaled(nu, x, tol, false), x, false);
}

double wronskian_check(double k, double x, double tol) {
  cplx nu(0.0, k);
  BesselEval i0 = bessel_I(nu, x, tol);
  BesselEval k0 = bessel_K(nu, x, tol);
  BesselEval i1 = bessel_I_deriv(nu, x, tol);
  BesselEval k1 = bessel_K_deriv(nu, x, tol);
  return std::abs(i0.value * k1.value - i1.value * k0.value + 1.0 / x);
}

ScatteringWeights scattering_weights(double k, const std::vector<double>& lambdas) {
  if (!(k > 0.0) || k > 100.0)
    throw std::invalid_argument("scattering_weights: k must lie in (0, 100]");
  ScatteringWeights w;
  double root = std::sqrt(2.0 * k * std::sinh(k * kPi));
  w.omega_plus = kPi / (root * cgamma(cplx(1.0, -k)));
  w.omega_minus = kPi / (root * cgamma(cplx(1.0, k)));
  w.C_plus.reserve(lambdas.size());
  w.C_minus.reserve(lambdas.size());
  for (double lam : lambdas) {
    if (lam < 0.0) throw std::invalid_argument("scattering_weights: negative eigenvalue");
    if (lam == 0.0) {
      cplx root_half = std::sqrt(kPi / 2.0);
      w.C_plus.push_back(cplx(0.0, 1.0) / (k * w.omega_plus) * root_half);
      w.C_minus.push_back(cplx(0.0, -1.0) / (k * w.omega_minus) * root_half);
    } else {
      double L = std::log(0.5 * std::sqrt(lam));
      w.C_plus.push_back(std::exp(cplx(0.0, -k * L)));
      w.C_minus.push_back(std::exp(cplx(0.0, k * L)));
    }
  }
  return w;
}

}  // namespace orbscat::specfun
