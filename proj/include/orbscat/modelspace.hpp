#pragma once

#include <complex>
#include <functional>
#include <vector>

// The model operator on the product cylinder: per-mode radial operators in
// the log variable t = -log y, explicit Green kernels, the free resolvent
// with limiting absorption, Besov/weighted norms, radiation-condition
// residuals, and a two-sided energy identity checker.
//
// Conventions. D_y = y d/dy = -d/dt. The cross-section Laplacian enters
// through its eigenvalues lambda_m (lambda_0 = 0). The radial operator for
// mode m is
//   (-D_y^2 + (n-1) D_y + y^2 lambda_m - ((n-1)/2)^2 - z) u_m = f_m,
// and all integrals are taken against dy/y^n = e^{(n-1)t} dt.
namespace orbscat::modelspace {

using cplx = std::complex<double>;

struct ModeSpectrum {
  int n = 2;                         // dimension, >= 2
  std::vector<double> lambdas;       // nondecreasing, lambdas[0] == 0
  double volume = 1.0;               // cross-section volume, > 0
  std::vector<int> multiplicities;   // empty means all ones

  // Throws std::invalid_argument on violated invariants; fills default
  // multiplicities.
  void validate();
  double mult(std::size_t m) const {
    return multiplicities.empty() ? 1.0 : static_cast<double>(multiplicities[m]);
  }
};

// Uniform grid in t = -log y covering [-T, T], i.e. y in [e^{-T}, e^{T}].
struct RadialGrid {
  double T = 12.0;
  double h = 1e-2;
  int npts = 0;

  static RadialGrid make(double T, double h);
  int size() const { return npts; }
  double t(int i) const { return -T + i * h; }
  double y(int i) const;
  // Trapezoid weight against e^{(n-1)t} dt.
  double weight(int i, int n) const;
  int nearest_index_t(double tv) const;
};

// One radial profile per mode, sampled on the grid.
using ModeFunction = std::vector<cplx>;

struct ModeSet {
  std::vector<ModeFunction> modes;
  std::size_t size() const { return modes.size(); }
};

// How the spectral parameter touches the real axis.
enum class Branch { none, plus_i0, minus_i0 };

struct SpectralParams {
  cplx z;
  Branch branch = Branch::none;
  int n = 2;

  // Throws on inconsistent input (real z without a branch tag, tagged z that
  // is not a positive real, n < 2).
  SpectralParams(cplx z, Branch branch, int n);

  // Principal square root of z (branch cut on the negative reals).
  cplx sqrt_z() const;
  // The root with Im >= 0 actually used in kernels; equals +sqrt(lambda) for
  // plus_i0 and -sqrt(lambda) for minus_i0.
  cplx w() const;
  // Bessel order nu = -i w; Re nu >= 0.
  cplx nu() const;
  cplx sigma_plus() const;   // (n-1)/2 - i sqrt z
  cplx sigma_minus() const;  // (n-1)/2 + i sqrt z
  // s(y): +1 below y = 1, -1 above, 0 exactly at 1.
  static double s_of_y(double y);
  // sigma_tilde_pm(y) = (n-1)/2 -+ i sqrt(z) s(y); pm = +1 or -1.
  cplx sigma_tilde(double y, int pm) const;
};

// ---------------------------------------------------------------------------
// Norms. All take the full mode set; the cross-section norm at fixed y is
// sum_m mult_m |f_m(y)|^2.
// ---------------------------------------------------------------------------

// Besov-type norm: bins are double-exponential in y (unit-exponential in t):
// in t, bin 0 is [-1,1) and bin +-k is +-[e^{k-1}, e^k). If coarse_warning is
// non-null it is set when the grid step cannot resolve the narrowest
// intersected bin.
double besov_norm(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& f,
                  bool* coarse_warning = nullptr);

struct BStarResult {
  double norm = 0.0;            // sqrt of the sup over grid radii R > e
  double limit_estimate = 0.0;  // extrapolated large-R limit of the averages
  bool vanishing = false;       // limit_estimate negligible vs. the sup
};
BStarResult besov_star_norm(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u);

// Weighted L^2 norm with weight (1 + |log y|)^{2s}.
double weighted_norm(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u, double s);

// Plain L^2(dy/y^n) inner product of mode sets.
cplx inner_product(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u,
                   const ModeSet& v);

// ---------------------------------------------------------------------------
// Green kernels and the free resolvent.
// ---------------------------------------------------------------------------

// (yy')^{(n-1)/2} K_nu(zeta y_>) I_nu(zeta y_<), evaluated through scaled
// Bessel factors so large zeta y never overflows. Requires zeta > 0; the
// zeta = 0 mode has the closed power-solution kernel below.
cplx green_kernel(double y, double yp, double zeta, cplx nu, int n);

// Mode-zero kernel (i/2w) y_>^{(n-1)/2 + iw} y_<^{(n-1)/2 - iw}.
cplx green_kernel_mode0(double y, double yp, cplx w, int n);

// Applies (H_free - z) mode-wise with central differences in t; the first and
// last sample of each mode are set to zero (no one-sided stencils).
ModeSet apply_h_free(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u, cplx z);

// u = (H_free - z)^{-1} f through the per-mode Green kernels, O(N) per mode
// via one decaying prefix and one decaying suffix recurrence.
ModeSet resolvent_free(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& f,
                       const SpectralParams& sp);

// Relative residual ||(H_free - z)u - f|| / ||f|| over the interior of the
// grid, trimming `margin` points at each end.
double operator_residual(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u,
                         const ModeSet& f, cplx z, int margin = 8);

// ---------------------------------------------------------------------------
// Radiation condition and the energy identity.
// ---------------------------------------------------------------------------

struct RadiationReport {
  double value = 0.0;       // (1/log R) int_{1/R}^{R} ||(D_y - sigma_tilde)u||^2 dy/y^n at max R
  double half_value = 0.0;  // same at R = sqrt(max R)
  bool decreasing = false;
};
// pm = +1 checks the outgoing condition, pm = -1 the incoming one.
RadiationReport radiation_residual(const RadialGrid& g, const ModeSpectrum& spec,
                                   const ModeSet& u, double lambda, int pm);

// C^1 weight given analytically: phi(y) and its logarithmic derivative
// D_y phi = y phi'(y).
struct WeightProfile {
  std::function<double(double)> phi;
  std::function<double(double)> Dphi;
};

struct EnergyPair {
  double lhs = 0.0;
  double rhs = 0.0;
};

// Evaluates both sides of the two-sided energy identity for w_pm =
// (D_y - sigma_pm) u on the window [ya, yb] (snapped to grid points):
//   LHS = int (D_y phi + 2 phi) ||D_x u||^2 dy/y^n
//         + [phi (||w_pm||^2 - ||D_x u||^2) / y^{n-1}]_{y=ya}^{y=yb}
//   RHS = -+ 2 Im sqrt(z) int phi (||w_pm||^2 + ||D_x u||^2) dy/y^n
//         + int (D_y phi) ||w_pm||^2 dy/y^n - 2 Re int phi (f, w_pm) dy/y^n.
EnergyPair energy_identity_check(const RadialGrid& g, const ModeSpectrum& spec,
                                 const ModeSet& u, const ModeSet& f, cplx z, int pm,
                                 const WeightProfile& w, double ya, double yb);

}  // namespace orbscat::modelspace
