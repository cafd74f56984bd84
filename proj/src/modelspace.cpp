#include "orbscat/modelspace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "orbscat/specfun.hpp"

namespace orbscat::modelspace {

namespace {

double half_dim(int n) { return 0.5 * (n - 1); }

// Besov bin label by |k|; bin 0 is |t| < 1, bin k >= 1 is e^{k-1} <= |t| < e^k.
int bin_of(double t) {
  double a = std::abs(t);
  if (a < 1.0) return 0;
  return static_cast<int>(std::floor(std::log(a))) + 1;
}

// Cross-section norm squared at one grid point.
double point_density(const ModeSpectrum& spec, const ModeSet& u, int j) {
  double s = 0.0;
  for (std::size_t m = 0; m < u.modes.size(); ++m) s += spec.mult(m) * std::norm(u.modes[m][j]);
  return s;
}

void check_shapes(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u) {
  if (u.modes.size() > spec.lambdas.size())
    throw std::invalid_argument("mode set has more modes than the spectrum");
  if (!spec.multiplicities.empty() && spec.multiplicities.size() != spec.lambdas.size())
    throw std::invalid_argument("multiplicity list length mismatch");
  for (const auto& m : u.modes)
    if (static_cast<int>(m.size()) != g.size())
      throw std::invalid_argument("mode samples do not match the grid");
}

// Central difference for D_y = -d/dt; zero at the two end points.
ModeFunction d_y(const RadialGrid& g, const ModeFunction& u) {
  int N = g.size();
  ModeFunction d(N, cplx(0.0, 0.0));
  for (int j = 1; j + 1 < N; ++j) d[j] = -(u[j + 1] - u[j - 1]) / (2.0 * g.h);
  return d;
}

}  // namespace

void ModeSpectrum::validate() {
  if (n < 2) throw std::invalid_argument("dimension must be at least 2");
  if (lambdas.empty() || lambdas.front() != 0.0)
    throw std::invalid_argument("eigenvalue list must start at 0");
  if (!std::is_sorted(lambdas.begin(), lambdas.end()))
    throw std::invalid_argument("eigenvalues must be nondecreasing");
  if (!(volume > 0.0)) throw std::invalid_argument("cross-section volume must be positive");
  if (multiplicities.empty()) multiplicities.assign(lambdas.size(), 1);
  if (multiplicities.size() != lambdas.size())
    throw std::invalid_argument("multiplicity list length mismatch");
  for (int m : multiplicities)
    if (m < 1) throw std::invalid_argument("multiplicities must be positive");
}

RadialGrid RadialGrid::make(double T, double h) {
  if (!(T > 0.0) || !(h > 0.0) || h > T) throw std::invalid_argument("bad grid parameters");
  RadialGrid g;
  g.npts = static_cast<int>(std::lround(2.0 * T / h)) + 1;
  if (g.npts < 9) throw std::invalid_argument("grid too small");
  g.T = T;
  g.h = 2.0 * T / (g.npts - 1);
  return g;
}

double RadialGrid::y(int i) const { return std::exp(-t(i)); }

double RadialGrid::weight(int i, int n) const {
  double c = (i == 0 || i == npts - 1) ? 0.5 : 1.0;
  return c * h * std::exp((n - 1) * t(i));
}

int RadialGrid::nearest_index_t(double tv) const {
  int i = static_cast<int>(std::lround((tv + T) / h));
  return std::clamp(i, 0, npts - 1);
}

SpectralParams::SpectralParams(cplx z_, Branch branch_, int n_) : z(z_), branch(branch_), n(n_) {
  if (n < 2) throw std::invalid_argument("dimension must be at least 2");
  if (branch == Branch::none) {
    if (z.imag() == 0.0)
      throw std::invalid_argument("real spectral parameter requires a +-i0 branch tag");
  } else {
    if (z.imag() != 0.0 || !(z.real() > 0.0))
      throw std::invalid_argument("branch tags apply to positive real z only");
  }
}

cplx SpectralParams::sqrt_z() const { return std::sqrt(z); }

cplx SpectralParams::w() const {
  if (branch == Branch::plus_i0) return {std::sqrt(z.real()), 0.0};
  if (branch == Branch::minus_i0) return {-std::sqrt(z.real()), 0.0};
  cplx r = std::sqrt(z);
  return (r.imag() >= 0.0) ? r : -r;
}

cplx SpectralParams::nu() const { return cplx(0.0, -1.0) * w(); }

cplx SpectralParams::sigma_plus() const { return half_dim(n) - cplx(0.0, 1.0) * sqrt_z(); }

cplx SpectralParams::sigma_minus() const { return half_dim(n) + cplx(0.0, 1.0) * sqrt_z(); }

double SpectralParams::s_of_y(double y) {
  if (y < 1.0) return 1.0;
  if (y > 1.0) return -1.0;
  return 0.0;
}

cplx SpectralParams::sigma_tilde(double y, int pm) const {
  return half_dim(n) - cplx(0.0, pm) * sqrt_z() * s_of_y(y);
}

double besov_norm(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& f,
                  bool* coarse_warning) {
  check_shapes(g, spec, f);
  if (coarse_warning) *coarse_warning = g.h > (std::exp(1.0) - 1.0) / 8.0;
  int kmax = bin_of(g.T);
  std::vector<double> bins(kmax + 1, 0.0);
  for (int j = 0; j + 1 < g.size(); ++j) {
    double r0 = point_density(spec, f, j) * std::exp((spec.n - 1) * g.t(j));
    double r1 = point_density(spec, f, j + 1) * std::exp((spec.n - 1) * g.t(j + 1));
    double mid = 0.5 * (g.t(j) + g.t(j + 1));
    bins[bin_of(mid)] += 0.5 * g.h * (r0 + r1);
  }
  double out = 0.0;
  for (int k = 0; k <= kmax; ++k) out += std::exp(0.5 * k) * std::sqrt(std::max(bins[k], 0.0));
  return out;
}

BStarResult besov_star_norm(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u) {
  check_shapes(g, spec, u);
  int N = g.size();
  int c = (N - 1) / 2;  // t = 0
  // cum[r] = integral over |t| <= r h of the density.
  std::vector<double> rho(N);
  for (int j = 0; j < N; ++j)
    rho[j] = point_density(spec, u, j) * std::exp((spec.n - 1) * g.t(j));
  auto window = [&](int half) {
    double s = 0.0;
    int lo = c - half, hi = c + half;
    for (int j = lo; j < hi; ++j) s += 0.5 * g.h * (rho[j] + rho[j + 1]);
    return s;
  };
  BStarResult out;
  double f_at_T = 0.0, f_at_half = 0.0;
  int half_max = std::min(c, N - 1 - c);
  for (int half = 1; half <= half_max; ++half) {
    double logR = half * g.h;
    if (logR <= 1.0) continue;  // sup is over R > e
    double val = window(half) / logR;
    out.norm = std::max(out.norm, val);
    f_at_T = val;
    if (half == half_max / 2) f_at_half = val;
  }
  out.limit_estimate = std::max(0.0, 2.0 * f_at_T - f_at_half);
  out.vanishing = out.limit_estimate <= 0.05 * out.norm + 1e-300;
  out.norm = std::sqrt(out.norm);
  return out;
}

double weighted_norm(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u, double s) {
  check_shapes(g, spec, u);
  double acc = 0.0;
  for (int j = 0; j < g.size(); ++j)
    acc += g.weight(j, spec.n) * std::pow(1.0 + std::abs(g.t(j)), 2.0 * s) *
           point_density(spec, u, j);
  return std::sqrt(acc);
}

cplx inner_product(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u,
                   const ModeSet& v) {
  check_shapes(g, spec, u);
  check_shapes(g, spec, v);
  std::size_t M = std::min(u.modes.size(), v.modes.size());
  cplx acc(0.0, 0.0);
  for (std::size_t m = 0; m < M; ++m)
    for (int j = 0; j < g.size(); ++j)
      acc += spec.mult(m) * g.weight(j, spec.n) * u.modes[m][j] * std::conj(v.modes[m][j]);
  return acc;
}

cplx green_kernel(double y, double yp, double zeta, cplx nu, int n) {
  if (!(y > 0.0) || !(yp > 0.0)) throw std::invalid_argument("kernel needs positive heights");
  if (!(zeta > 0.0))
    throw std::invalid_argument("zeta = 0 delegates to the mode-zero power kernel");
  double hi = std::max(y, yp), lo = std::min(y, yp);
  cplx ks = specfun::bessel_K_scaled(nu, zeta * hi).value;
  cplx is = specfun::bessel_I_scaled(nu, zeta * lo).value;
  return std::pow(y * yp, half_dim(n)) * ks * is * std::exp(-zeta * (hi - lo));
}

cplx green_kernel_mode0(double y, double yp, cplx w, int n) {
  if (!(y > 0.0) || !(yp > 0.0)) throw std::invalid_argument("kernel needs positive heights");
  if (w == cplx(0.0, 0.0)) throw std::invalid_argument("w must be nonzero");
  double a = half_dim(n);
  double hi = std::max(y, yp), lo = std::min(y, yp);
  cplx iw(0.0, 1.0);
  return iw / (2.0 * w) * std::pow(hi, a + iw * w) * std::pow(lo, a - iw * w);
}

ModeSet apply_h_free(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u, cplx z) {
  check_shapes(g, spec, u);
  double a = half_dim(spec.n);
  ModeSet out;
  out.modes.resize(u.modes.size());
  for (std::size_t m = 0; m < u.modes.size(); ++m) {
    const auto& um = u.modes[m];
    auto& om = out.modes[m];
    om.assign(g.size(), cplx(0.0, 0.0));
    for (int j = 1; j + 1 < g.size(); ++j) {
      cplx d2 = (um[j + 1] - 2.0 * um[j] + um[j - 1]) / (g.h * g.h);  // D_y^2 = d^2/dt^2
      cplx d1 = -(um[j + 1] - um[j - 1]) / (2.0 * g.h);               // D_y = -d/dt
      double y = g.y(j);
      om[j] = -d2 + (spec.n - 1.0) * d1 + (y * y * spec.lambdas[m] - a * a - z) * um[j];
    }
  }
  return out;
}

ModeSet resolvent_free(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& f,
                       const SpectralParams& sp) {
  check_shapes(g, spec, f);
  if (sp.n != spec.n) throw std::invalid_argument("dimension mismatch");
  int N = g.size();
  double a = half_dim(spec.n);
  cplx w = sp.w(), nu = sp.nu(), iw(0.0, 1.0);
  ModeSet out;
  out.modes.resize(f.modes.size());

  for (std::size_t m = 0; m < f.modes.size(); ++m) {
    const auto& fm = f.modes[m];
    auto& um = out.modes[m];
    um.assign(N, cplx(0.0, 0.0));
    double lam = spec.lambdas[m];

    if (lam == 0.0) {
      // Power-solution kernel (i/2w) e^{-a(t+t')} e^{i w |t-t'|}; against
      // e^{(n-1)t'} dt' the source term collapses to e^{a t'} f(t') dt'.
      cplx step = std::exp(iw * w * g.h);  // |step| <= 1 for Im w >= 0
      std::vector<cplx> s(N);
      for (int j = 0; j < N; ++j) {
        double trap = (j == 0 || j + 1 == N) ? 0.5 * g.h : g.h;
        s[j] = std::exp(a * g.t(j)) * fm[j] * trap;
      }
      std::vector<cplx> pre(N), suf(N);
      cplx acc(0.0, 0.0);
      for (int j = 0; j < N; ++j) {
        acc = acc * step + s[j];
        pre[j] = acc;
      }
      acc = cplx(0.0, 0.0);
      for (int j = N - 1; j >= 0; --j) {
        suf[j] = acc;  // sum over j' > j, each term already carrying its step power
        acc = (acc + s[j]) * step;
      }
      for (int j = 0; j < N; ++j)
        um[j] = iw / (2.0 * w) * std::exp(-a * g.t(j)) * (pre[j] + suf[j]);
      continue;
    }

    double zeta = std::sqrt(lam);
    std::vector<cplx> Ks(N), Is(N), mj(N);
    for (int j = 0; j < N; ++j) {
      double x = zeta * g.y(j);
      Ks[j] = specfun::bessel_K_scaled(nu, x).value;
      Is[j] = specfun::bessel_I_scaled(nu, x).value;
      mj[j] = std::pow(g.y(j), a) * fm[j] * g.weight(j, spec.n);
    }
    // u_i = y_i^a [ Ks_i S1_i + Is_i S2_i ], with decaying sweeps:
    //   S1_i = sum_{j>=i} Is_j e^{-zeta(y_i - y_j)} m_j   (y descending in i)
    //   S2_i = sum_{j<i}  Ks_j e^{-zeta(y_j - y_i)} m_j
    std::vector<cplx> S1(N), S2(N);
    cplx acc(0.0, 0.0);
    for (int i = N - 1; i >= 0; --i) {
      double decay = (i + 1 < N) ? std::exp(-zeta * (g.y(i) - g.y(i + 1))) : 0.0;
      acc = acc * decay + Is[i] * mj[i];
      S1[i] = acc;
    }
    acc = cplx(0.0, 0.0);
    for (int i = 0; i < N; ++i) {
      S2[i] = acc;
      double decay = (i + 1 < N) ? std::exp(-zeta * (g.y(i) - g.y(i + 1))) : 0.0;
      acc = (acc + Ks[i] * mj[i]) * decay;
    }
    for (int i = 0; i < N; ++i) um[i] = std::pow(g.y(i), a) * (Ks[i] * S1[i] + Is[i] * S2[i]);
  }
  return out;
}

double operator_residual(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& u,
                         const ModeSet& f, cplx z, int margin) {
  if (margin < 1 || 2 * margin >= g.size()) throw std::invalid_argument("bad margin");
  ModeSet hu = apply_h_free(g, spec, u, z);
  double num = 0.0, den = 0.0;
  for (std::size_t m = 0; m < u.modes.size(); ++m) {
    for (int j = margin; j + margin < g.size(); ++j) {
      double wj = g.weight(j, spec.n) * spec.mult(m);
      num += wj * std::norm(hu.modes[m][j] - f.modes[m][j]);
      den += wj * std::norm(f.modes[m][j]);
    }
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

RadiationReport radiation_residual(const RadialGrid& g, const ModeSpectrum& spec,
                                   const ModeSet& u, double lambda, int pm) {
  check_shapes(g, spec, u);
  if (!(lambda > 0.0)) throw std::invalid_argument("radiation residual needs lambda > 0");
  if (pm != 1 && pm != -1) throw std::invalid_argument("pm must be +-1");
  int N = g.size();
  double rk = std::sqrt(lambda);
  std::vector<double> rho(N, 0.0);
  for (std::size_t m = 0; m < u.modes.size(); ++m) {
    ModeFunction du = d_y(g, u.modes[m]);
    for (int j = 1; j + 1 < N; ++j) {
      cplx sig = half_dim(spec.n) - cplx(0.0, pm) * rk * SpectralParams::s_of_y(g.y(j));
      rho[j] += spec.mult(m) * std::norm(du[j] - sig * u.modes[m][j]) *
                std::exp((spec.n - 1) * g.t(j));
    }
  }
  int c = (N - 1) / 2;
  auto window = [&](int half) {
    double s = 0.0;
    for (int j = c - half; j < c + half; ++j) s += 0.5 * g.h * (rho[j] + rho[j + 1]);
    return s / (half * g.h);
  };
  int half_max = std::min(c, N - 1 - c) - 2;
  RadiationReport rep;
  rep.value = window(half_max);
  rep.half_value = window(half_max / 2);
  rep.decreasing = rep.value < rep.half_value;
  return rep;
}

EnergyPair energy_identity_check(const RadialGrid& g, const ModeSpectrum& spec,
                                 const ModeSet& u, const ModeSet& f, cplx z, int pm,
                                 const WeightProfile& w, double ya, double yb) {
  check_shapes(g, spec, u);
  check_shapes(g, spec, f);
  if (pm != 1 && pm != -1) throw std::invalid_argument("pm must be +-1");
  if (!(0.0 < ya && ya < yb)) throw std::invalid_argument("window must satisfy 0 < ya < yb");
  double a = half_dim(spec.n);
  cplx rz = std::sqrt(z);
  cplx sigma = a - cplx(0.0, pm) * rz;

  int i_lo = g.nearest_index_t(-std::log(yb));  // y = yb has the smaller t
  int i_hi = g.nearest_index_t(-std::log(ya));
  i_lo = std::max(i_lo, 1);
  i_hi = std::min(i_hi, g.size() - 2);
  if (i_hi - i_lo < 4) throw std::invalid_argument("window too narrow for the grid");

  std::size_t M = u.modes.size();
  std::vector<ModeFunction> wpm(M);
  for (std::size_t m = 0; m < M; ++m) {
    wpm[m] = d_y(g, u.modes[m]);
    for (int j = 0; j < g.size(); ++j) wpm[m][j] -= sigma * u.modes[m][j];
  }
  auto norms_at = [&](int j, double& w2, double& dx2, double& fw) {
    w2 = dx2 = fw = 0.0;
    double y = g.y(j);
    for (std::size_t m = 0; m < M; ++m) {
      double mm = spec.mult(m);
      w2 += mm * std::norm(wpm[m][j]);
      dx2 += mm * y * y * spec.lambdas[m] * std::norm(u.modes[m][j]);
      fw += mm * std::real(f.modes[m][j] * std::conj(wpm[m][j]));
    }
  };

  double int_dx = 0.0, int_w = 0.0, int_both = 0.0, int_fw = 0.0;
  for (int j = i_lo; j <= i_hi; ++j) {
    double c = (j == i_lo || j == i_hi) ? 0.5 : 1.0;
    double measure = c * g.h * std::exp((spec.n - 1) * g.t(j));
    double y = g.y(j);
    double w2, dx2, fw;
    norms_at(j, w2, dx2, fw);
    int_dx += measure * (w.Dphi(y) + 2.0 * w.phi(y)) * dx2;
    int_w += measure * w.Dphi(y) * w2;
    int_both += measure * w.phi(y) * (w2 + dx2);
    int_fw += measure * w.phi(y) * fw;
  }
  auto bracket = [&](int j) {
    double w2, dx2, fw;
    norms_at(j, w2, dx2, fw);
    // phi (||w||^2 - ||D_x u||^2) / y^{n-1}, and 1/y^{n-1} = e^{(n-1)t}.
    return w.phi(g.y(j)) * (w2 - dx2) * std::exp((spec.n - 1) * g.t(j));
  };

  EnergyPair out;
  out.lhs = int_dx + (bracket(i_lo) - bracket(i_hi));  // [.]_{y=ya}^{y=yb}, yb at i_lo
  out.rhs = -2.0 * pm * rz.imag() * int_both + int_w - 2.0 * int_fw;
  return out;
}

}  // namespace orbscat::modelspace
