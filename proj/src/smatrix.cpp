#include "orbscat/smatrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "json.hpp"

#include "orbscat/specfun.hpp"
#include "orbscat/transform.hpp"

namespace orbscat::smatrix {
namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<cplx>;
using Trip = Eigen::Triplet<cplx>;

constexpr double kPi = 3.14159265358979323846;
const double kInvRoot2Pi = 1.0 / std::sqrt(2.0 * kPi);

double half_order(int n) { return 0.5 * (n - 1); }

// C-infinity step: 0 for x <= 0, 1 for x >= 1, strictly monotone between.
double smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double e0 = std::exp(-1.0 / x);
  const double e1 = std::exp(-1.0 / (1.0 - x));
  return e0 / (e0 + e1);
}

cplx omega_c(double k, int sign) {
  return cplx(0.0, sign * std::sqrt(0.5 * kPi) / k);
}

cplx omega_reg(double k, int sign) {
  return kPi / (std::sqrt(2.0 * k * std::sinh(kPi * k)) *
                specfun::cgamma(cplx(1.0, -sign * k)));
}

// Normalization of the K_{ik} transform kernel.
double k_prefactor(double k) { return std::sqrt(2.0 * k * std::sinh(kPi * k)) / kPi; }

// (sqrt(lambda)/2)^{-s ik}; the assembly phase of the lambda > 0 channels.
cplx channel_phase(double k, double lambda, int s) {
  return std::exp(cplx(0.0, -s * k * std::log(0.5 * std::sqrt(lambda))));
}

cplx j_entry(double k, double lambda) {
  return lambda > 0.0 ? channel_phase(k, lambda, 2) : cplx(0.0, 0.0);
}

void check_energy(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("smatrix: k must be positive");
  if (k > 30.0) throw std::invalid_argument("smatrix: k too large for the Bessel backend");
}

ModeSet zero_modeset(std::size_t M, int npts) {
  ModeSet f;
  f.modes.assign(M, modelspace::ModeFunction(static_cast<std::size_t>(npts), cplx(0.0, 0.0)));
  return f;
}

// Precomputed per-(manifold, k) data: grid arrays and the exact radial tail
// solutions of every mode on the full grid. pin_c / pout_c are the cusp-side
// incoming/outgoing columns; the same columns double as the Green pairing
// kernels (pairing at an end always happens against the solution that grows
// toward that end).
struct Tails {
  int npts = 0;
  std::size_t M = 0;
  double a = 0.0;
  double k = 0.0;
  std::vector<double> t, y, wq;
  std::vector<double> zeta;
  std::vector<VectorXcd> pin_c, pout_c;

  Tails(const ToyManifold& man, double kk) {
    const RadialGrid& g = man.grid;
    const ModeSpectrum& spec = man.spectrum();
    npts = g.size();
    M = spec.lambdas.size();
    a = half_order(man.n);
    k = kk;
    t.resize(npts);
    y.resize(npts);
    wq.resize(npts);
    for (int i = 0; i < npts; ++i) {
      t[i] = g.t(i);
      y[i] = g.y(i);
      wq[i] = g.weight(i, man.n);
    }
    zeta.resize(M);
    for (std::size_t m = 0; m < M; ++m) zeta[m] = std::sqrt(spec.lambdas[m]);
    pin_c.assign(M, VectorXcd(npts));
    pout_c.assign(M, VectorXcd(npts));
    const cplx nu(0.0, -k);
    for (int i = 0; i < npts; ++i) {
      pin_c[0](i) = std::exp(cplx(-a * t[i], k * t[i]));   // y^{a - ik}
      pout_c[0](i) = std::exp(cplx(-a * t[i], -k * t[i])); // y^{a + ik}
    }
    for (std::size_t m = 1; m < M; ++m) {
      for (int i = 0; i < npts; ++i) {
        const double x = zeta[m] * y[i];
        pin_c[m](i) = specfun::bessel_I_scaled(nu, x).value * std::exp(x - a * t[i]);
        pout_c[m](i) = std::exp(-a * t[i]) * transform::kl_kernel(k, x);
      }
    }
  }

  // Green pairing of a compactly supported source against the free kernel,
  // read off at the cusp (kernel grows toward the cusp) or the regular end
  // (kernel grows toward y = 0). The mode-0 kernel carries the i/2k of the
  // oscillatory one-dimensional Green function; the Bessel pair has unit
  // Wronskian and needs no prefactor.
  cplx pair_cusp(std::size_t m, const ModeSet& f) const {
    cplx acc(0.0, 0.0);
    for (int i = 0; i < npts; ++i) acc += wq[i] * pin_c[m](i) * f.modes[m][i];
    return m == 0 ? acc * cplx(0.0, 0.5 / k) : acc;
  }
  cplx pair_regular(std::size_t m, const ModeSet& f) const {
    cplx acc(0.0, 0.0);
    for (int i = 0; i < npts; ++i) acc += wq[i] * pout_c[m](i) * f.modes[m][i];
    return m == 0 ? acc * cplx(0.0, 0.5 / k) : acc;
  }
};

ModeSet apply_cutoff(const Tails& tl, const ModeSet& f, double (*chi)(double)) {
  ModeSet out = f;
  for (auto& mode : out.modes)
    for (int i = 0; i < tl.npts; ++i) mode[i] *= chi(tl.y[i]);
  return out;
}

void zero_edges(ModeSet& f) {
  for (auto& mode : f.modes) {
    mode.front() = cplx(0.0, 0.0);
    mode.back() = cplx(0.0, 0.0);
  }
}

VectorXcd flatten(const ModeSet& f, std::size_t M, int npts) {
  VectorXcd v(static_cast<Eigen::Index>(M) * npts);
  for (int i = 0; i < npts; ++i)
    for (std::size_t m = 0; m < M; ++m) v(static_cast<Eigen::Index>(i) * M + m) = f.modes[m][i];
  return v;
}

ModeSet unflatten(const VectorXcd& v, std::size_t M, int npts) {
  ModeSet f = zero_modeset(M, npts);
  for (int i = 0; i < npts; ++i)
    for (std::size_t m = 0; m < M; ++m) f.modes[m][i] = v(static_cast<Eigen::Index>(i) * M + m);
  return f;
}

GrowthClass classify_slope(double slope) {
  if (slope < -0.05) return GrowthClass::decaying;
  if (slope > 0.05) return GrowthClass::growing;
  return GrowthClass::bounded;
}

// Least-squares slope of log |b_m| against m over the nonzero entries.
std::pair<double, GrowthClass> ratio_fit(const std::vector<cplx>& b) {
  std::vector<double> xs, ys;
  for (std::size_t m = 0; m < b.size(); ++m) {
    const double mag = std::abs(b[m]);
    if (mag > 1e-290) {
      xs.push_back(static_cast<double>(m));
      ys.push_back(std::log(mag));
    }
  }
  if (xs.size() < 2) return {0.0, GrowthClass::bounded};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double nn = static_cast<double>(xs.size());
  const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  return {slope, classify_slope(slope)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Perturbation profiles.
// ---------------------------------------------------------------------------

double RadialProfile::operator()(double y) const {
  const double s = std::log(y);
  switch (family) {
    case Family::gaussian_bump: {
      const double d = (s - std::log(y0)) / width;
      return amplitude * std::exp(-0.5 * d * d);
    }
    case Family::exp_decay:
      return amplitude * std::exp(-rate * std::abs(s));
  }
  return 0.0;
}

DecayTag RadialProfile::declared_tag() const {
  return family == Family::gaussian_bump ? DecayTag::super_exponential : DecayTag::log_decay;
}

double Perturbation::eval(std::size_t m, std::size_t l, double y) const {
  double v = 0.0;
  for (const auto& e : entries)
    if ((e.m == m && e.l == l) || (e.m == l && e.l == m && e.m != e.l)) v += e.profile(y);
  return v;
}

double Perturbation::sup_norm(const RadialGrid& g) const {
  double s = 0.0;
  for (int i = 0; i < g.size(); ++i)
    for (const auto& e : entries) s = std::max(s, std::abs(e.profile(g.y(i))));
  return s;
}

double Perturbation::sup_tail(const RadialGrid& g, double ycut) const {
  double s = 0.0;
  for (int i = 0; i < g.size(); ++i)
    if (g.y(i) >= ycut)
      for (const auto& e : entries) s = std::max(s, std::abs(e.profile(g.y(i))));
  return s;
}

double Perturbation::sup_head(const RadialGrid& g, double ycut) const {
  double s = 0.0;
  for (int i = 0; i < g.size(); ++i)
    if (g.y(i) <= ycut)
      for (const auto& e : entries) s = std::max(s, std::abs(e.profile(g.y(i))));
  return s;
}

DecayTag Perturbation::declared_tag() const {
  for (const auto& e : entries)
    if (e.profile.declared_tag() == DecayTag::log_decay) return DecayTag::log_decay;
  return DecayTag::super_exponential;
}

DecayTag Perturbation::classify(const RadialGrid& g) const {
  if (entries.empty()) return DecayTag::super_exponential;
  std::vector<double> ts, ls;
  double gmax = 0.0;
  int ipeak = 0;
  std::vector<double> env(g.size(), 0.0);
  for (int i = 0; i < g.size(); ++i) {
    for (const auto& e : entries) env[i] = std::max(env[i], std::abs(e.profile(g.y(i))));
    if (env[i] > gmax) {
      gmax = env[i];
      ipeak = i;
    }
  }
  const double tpeak = g.t(ipeak);
  for (int i = 0; i < g.size(); ++i) {
    if (env[i] > 1e-14 * gmax && env[i] < gmax) {
      ts.push_back(g.t(i) - tpeak);
      ls.push_back(std::log(env[i]));
    }
  }
  if (ts.size() < 8) return declared_tag();
  // Fit log|V| ~ c0 + c1 |t - t*| + c2 (t - t*)^2.
  Eigen::MatrixXd X(ts.size(), 3);
  Eigen::VectorXd rhs(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::abs(ts[i]);
    X(i, 2) = ts[i] * ts[i];
    rhs(i) = ls[i];
  }
  Eigen::Vector3d c = (X.transpose() * X).ldlt().solve(X.transpose() * rhs);
  return c(2) < -0.5 ? DecayTag::super_exponential : DecayTag::log_decay;
}

// ---------------------------------------------------------------------------
// Manifold shape.
// ---------------------------------------------------------------------------

double ToyManifold::wall_y() const { return grid.y(grid.size() - 1); }
double ToyManifold::ymax() const { return grid.y(0); }

void ToyManifold::validate() const {
  if (n < 2) throw std::invalid_argument("manifold: n must be >= 2");
  if (ends.empty() || ends.size() > 2) throw std::invalid_argument("manifold: one or two ends");
  if (ends[0].kind != EndKind::cusp) throw std::invalid_argument("manifold: end 0 must be a cusp");
  if (ends.size() == 2) {
    if (ends[1].kind != EndKind::regular)
      throw std::invalid_argument("manifold: end 1 must be regular");
    if (ends[0].spectrum.lambdas != ends[1].spectrum.lambdas ||
        ends[0].spectrum.volume != ends[1].spectrum.volume)
      throw std::invalid_argument("manifold: the two ends must share one cross-section");
  }
  for (const auto& e : ends) {
    ModeSpectrum s = e.spectrum;
    s.validate();
    if (s.n != n) throw std::invalid_argument("manifold: spectrum dimension mismatch");
    for (int mult : s.multiplicities)
      if (mult != 1)
        throw std::invalid_argument("manifold: repeat lambdas instead of multiplicities > 1");
    if (s.lambdas.size() > 1 && !(s.lambdas[1] > 0.0))
      throw std::invalid_argument("manifold: the zero eigenvalue must be simple");
  }
  if (grid.size() < 16) throw std::invalid_argument("manifold: grid too coarse");
  if (ymax() < 3.2) throw std::invalid_argument("manifold: grid must reach y >= 3.2 at the cusp");
  const double wall_limit = capped() ? 1.0 : 0.30;
  if (wall_y() > wall_limit)
    throw std::invalid_argument("manifold: grid bottom too high for the end configuration");
  const double zmax = std::sqrt(spectrum().lambdas.back());
  if (zmax * ymax() > 690.0)
    throw std::invalid_argument("manifold: sqrt(lambda_max) * ymax exceeds the overflow guard");
  if (!V.empty()) {
    const double sup = V.sup_norm(grid);
    if (sup > 0.0) {
      if (V.sup_tail(grid, 1.5) > 1e-10 * sup)
        throw std::invalid_argument("manifold: V must vanish numerically for y >= 3/2");
      if (V.sup_head(grid, 2.0 * wall_y()) > 1e-10 * sup)
        throw std::invalid_argument("manifold: V must vanish numerically near the grid bottom");
    }
    if (V.classify(grid) != V.declared_tag())
      throw std::invalid_argument("manifold: V decay tag contradicts its numeric classification");
  }
}

RadialGrid make_grid(double ymin, double ymax, double h) {
  if (!(ymin > 0.0) || !(ymax > ymin)) throw std::invalid_argument("make_grid: need 0 < ymin < ymax");
  if (!(h > 0.0)) throw std::invalid_argument("make_grid: need h > 0");
  RadialGrid g;
  g.T = std::log(ymax);
  g.h = h;
  g.npts = static_cast<int>(std::lround(std::log(ymax / ymin) / h)) + 1;
  return g;
}

namespace {
ToyManifold free_manifold(int n, std::vector<double> lambdas, double volume, bool two_ended,
                          double ymin, double ymax, double h) {
  ToyManifold man;
  man.n = n;
  ModeSpectrum spec;
  spec.n = n;
  spec.lambdas = std::move(lambdas);
  spec.volume = volume;
  spec.validate();
  man.ends.push_back(End{EndKind::cusp, spec});
  if (two_ended) man.ends.push_back(End{EndKind::regular, spec});
  man.grid = make_grid(ymin, ymax, h);
  man.validate();
  return man;
}
}  // namespace

ToyManifold free_two_ended(int n, std::vector<double> lambdas, double volume, double ymin,
                           double ymax, double h) {
  return free_manifold(n, std::move(lambdas), volume, true, ymin, ymax, h);
}

ToyManifold free_capped(int n, std::vector<double> lambdas, double volume, double ycap,
                        double ymax, double h) {
  return free_manifold(n, std::move(lambdas), volume, false, ycap, ymax, h);
}

ToyManifold manifold_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("manifold json: ") + e.what());
  }
  static const std::vector<std::string> top_keys = {"n", "volume", "lambdas", "ends", "grid", "V"};
  for (const auto& item : j.items())
    if (std::find(top_keys.begin(), top_keys.end(), item.key()) == top_keys.end())
      throw std::invalid_argument("manifold json: unknown key " + item.key());
  ToyManifold man;
  man.n = j.at("n").get<int>();
  ModeSpectrum spec;
  spec.n = man.n;
  spec.volume = j.value("volume", 1.0);
  spec.lambdas = j.at("lambdas").get<std::vector<double>>();
  spec.validate();
  for (const auto& kind : j.at("ends")) {
    const std::string s = kind.get<std::string>();
    if (s == "cusp")
      man.ends.push_back(End{EndKind::cusp, spec});
    else if (s == "regular")
      man.ends.push_back(End{EndKind::regular, spec});
    else
      throw std::invalid_argument("manifold json: end kind must be cusp or regular");
  }
  const auto& gj = j.at("grid");
  man.grid = make_grid(gj.at("ymin").get<double>(), gj.at("ymax").get<double>(),
                       gj.at("h").get<double>());
  if (j.contains("V")) {
    for (const auto& ej : j.at("V")) {
      VEntry e;
      e.m = ej.at("m").get<std::size_t>();
      e.l = ej.at("l").get<std::size_t>();
      const std::string fam = ej.at("family").get<std::string>();
      e.profile.amplitude = ej.at("amplitude").get<double>();
      if (fam == "gaussian_bump") {
        e.profile.family = RadialProfile::Family::gaussian_bump;
        e.profile.y0 = ej.at("y0").get<double>();
        e.profile.width = ej.at("width").get<double>();
      } else if (fam == "exp_decay") {
        e.profile.family = RadialProfile::Family::exp_decay;
        e.profile.rate = ej.at("rate").get<double>();
      } else {
        throw std::invalid_argument("manifold json: unknown V family " + fam);
      }
      if (e.m >= spec.lambdas.size() || e.l >= spec.lambdas.size())
        throw std::invalid_argument("manifold json: V mode index out of range");
      man.V.entries.push_back(e);
    }
  }
  man.validate();
  return man;
}

// ---------------------------------------------------------------------------
// Cutoffs.
// ---------------------------------------------------------------------------

double chi_incoming_cusp(double y) { return smoothstep(y - 2.0); }
double chi_near_cusp(double y) { return smoothstep((y - 1.5) * 2.0); }
double chi_near_regular(double y) { return smoothstep((2.0 / 3.0 - y) * 6.0); }
double chi_incoming_regular(double y) { return smoothstep((0.5 - y) * 6.0); }

// ---------------------------------------------------------------------------
// Assembly.
// ---------------------------------------------------------------------------

void append_interior_rows(std::vector<Trip>& trip, const ToyManifold& man, cplx z,
                          std::size_t modes) {
  const RadialGrid& g = man.grid;
  const ModeSpectrum& spec = man.spectrum();
  if (modes == 0 || modes > spec.lambdas.size())
    throw std::invalid_argument("append_interior_rows: bad mode count");
  const int npts = g.size();
  const double h = g.h;
  const double a = half_order(man.n);
  const double cp = -1.0 / (h * h) - (man.n - 1) / (2.0 * h);
  const double cm = -1.0 / (h * h) + (man.n - 1) / (2.0 * h);
  const auto idx = [&](int i, std::size_t m) {
    return static_cast<int>(static_cast<std::size_t>(i) * modes + m);
  };
  for (std::size_t m = 0; m < modes; ++m) {
    const double lam = spec.lambdas[m];
    for (int i = 1; i + 1 < npts; ++i) {
      const double y = g.y(i);
      const int row = idx(i, m);
      trip.emplace_back(row, idx(i + 1, m), cplx(cp, 0.0));
      trip.emplace_back(row, idx(i - 1, m), cplx(cm, 0.0));
      trip.emplace_back(row, idx(i, m), cplx(2.0 / (h * h) + y * y * lam - a * a, 0.0) - z);
    }
  }
  for (const auto& e : man.V.entries) {
    if (e.m >= modes || e.l >= modes) continue;
    for (int i = 1; i + 1 < npts; ++i) {
      const double v = e.profile(g.y(i));
      if (v == 0.0) continue;
      trip.emplace_back(idx(i, e.m), idx(i, e.l), cplx(v, 0.0));
      if (e.m != e.l) trip.emplace_back(idx(i, e.l), idx(i, e.m), cplx(v, 0.0));
    }
  }
}

cplx outgoing_ratio(const ToyManifold& man, double k, std::size_t end_index, std::size_t mode) {
  check_energy(k);
  const RadialGrid& g = man.grid;
  const double a = half_order(man.n);
  const double h = g.h;
  const double zeta = std::sqrt(man.spectrum().lambdas.at(mode));
  if (end_index == 0) {
    if (mode == 0) return std::exp(cplx(a * h, k * h));  // y^{a+ik} step toward the cusp
    const double x0 = zeta * g.y(0), x1 = zeta * g.y(1);
    const cplx nu(0.0, k);
    const cplx ks0 = specfun::bessel_K_scaled(nu, x0).value;
    const cplx ks1 = specfun::bessel_K_scaled(nu, x1).value;
    return std::exp(cplx(a * h - (x0 - x1), 0.0)) * ks0 / ks1;
  }
  if (end_index != 1 || man.capped())
    throw std::invalid_argument("outgoing_ratio: no such radiating end");
  const int N = g.size();
  if (mode == 0) return std::exp(cplx(-a * h, k * h));  // y^{a-ik} step toward y = 0
  const double xN = zeta * g.y(N - 1), xP = zeta * g.y(N - 2);
  const cplx nu(0.0, -k);
  return std::exp(cplx(-a * h, 0.0)) * specfun::bessel_I(nu, xN).value /
         specfun::bessel_I(nu, xP).value;
}

// ---------------------------------------------------------------------------
// OutgoingSolver.
// ---------------------------------------------------------------------------

struct OutgoingSolver::Impl {
  ToyManifold man;
  double k = 0.0;
  std::size_t M = 0;
  int npts = 0;
  double scale = 0.0;
  SpMat A;
  SpMat Vm;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  double sigma_min = 0.0;

  Impl(const ToyManifold& m_in, double k_in) : man(m_in), k(k_in) {
    man.validate();
    check_energy(k);
    M = man.modes();
    npts = man.grid.size();
    const double h = man.grid.h;
    const double a = half_order(man.n);
    const cplx z(k * k, 0.0);
    const auto idx = [&](int i, std::size_t m) {
      return static_cast<int>(static_cast<std::size_t>(i) * M + m);
    };

    std::vector<Trip> trip;
    trip.reserve(static_cast<std::size_t>(npts) * M * 4);
    append_interior_rows(trip, man, z, M);
    std::vector<Trip> vtrip;
    for (const auto& e : man.V.entries) {
      for (int i = 1; i + 1 < npts; ++i) {
        const double v = e.profile(man.grid.y(i));
        if (v == 0.0) continue;
        vtrip.emplace_back(idx(i, e.m), idx(i, e.l), cplx(v, 0.0));
        if (e.m != e.l) vtrip.emplace_back(idx(i, e.l), idx(i, e.m), cplx(v, 0.0));
      }
    }
    for (std::size_t m = 0; m < M; ++m) {
      trip.emplace_back(idx(0, m), idx(0, m), cplx(1.0, 0.0));
      trip.emplace_back(idx(0, m), idx(1, m), -outgoing_ratio(man, k, 0, m));
      const int N = npts;
      if (man.capped()) {
        // One-sided second-order Neumann wall in t: 3u_{N-1} - 4u_{N-2} + u_{N-3} = 0.
        trip.emplace_back(idx(N - 1, m), idx(N - 1, m), cplx(3.0, 0.0));
        trip.emplace_back(idx(N - 1, m), idx(N - 2, m), cplx(-4.0, 0.0));
        trip.emplace_back(idx(N - 1, m), idx(N - 3, m), cplx(1.0, 0.0));
      } else {
        trip.emplace_back(idx(N - 1, m), idx(N - 1, m), cplx(1.0, 0.0));
        trip.emplace_back(idx(N - 1, m), idx(N - 2, m), -outgoing_ratio(man, k, 1, m));
      }
    }

    const int dim = static_cast<int>(M) * npts;
    A.resize(dim, dim);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Vm.resize(dim, dim);
    Vm.setFromTriplets(vtrip.begin(), vtrip.end());
    Vm.makeCompressed();

    scale = 2.0 / (h * h) + std::abs(k * k) + a * a;
    for (std::size_t m = 0; m < M; ++m)
      scale = std::max(scale, man.spectrum().lambdas[m] * man.ymax() * man.ymax());

    lu.compute(A);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("OutgoingSolver: factorization failed");

    // ||A^{-1}||_2 by power iteration on A^{-1} A^{-*}; deterministic start.
    std::mt19937 gen(0x5eed5eedu);
    std::normal_distribution<double> dist;
    VectorXcd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = cplx(dist(gen), dist(gen));
    v.normalize();
    double mu = 0.0;
    for (int it = 0; it < 6; ++it) {
      VectorXcd x = lu.adjoint().solve(v);
      VectorXcd w = lu.solve(x);
      mu = w.norm();
      if (mu == 0.0) break;
      v = w / mu;
    }
    sigma_min = mu > 0.0 ? 1.0 / std::sqrt(mu) : 0.0;
    if (sigma_min < 1e-12 * scale) {
      std::ostringstream os;
      os << "OutgoingSolver: k^2 = " << k * k
         << " collides with the discrete spectrum (distance estimate " << sigma_min << ")";
      throw std::runtime_error(os.str());
    }
  }

  void check_set(const ModeSet& f) const {
    if (f.size() != M) throw std::invalid_argument("OutgoingSolver: mode count mismatch");
    for (const auto& mode : f.modes)
      if (static_cast<int>(mode.size()) != npts)
        throw std::invalid_argument("OutgoingSolver: grid size mismatch");
  }
};

OutgoingSolver::OutgoingSolver(const ToyManifold& man, double k)
    : impl_(std::make_unique<Impl>(man, k)) {}
OutgoingSolver::~OutgoingSolver() = default;
OutgoingSolver::OutgoingSolver(OutgoingSolver&&) noexcept = default;
OutgoingSolver& OutgoingSolver::operator=(OutgoingSolver&&) noexcept = default;

ModeSet OutgoingSolver::solve(const ModeSet& f) const {
  impl_->check_set(f);
  VectorXcd b = flatten(f, impl_->M, impl_->npts);
  VectorXcd x = impl_->lu.solve(b);
  return unflatten(x, impl_->M, impl_->npts);
}

ModeSet OutgoingSolver::apply(const ModeSet& u) const {
  impl_->check_set(u);
  VectorXcd x = flatten(u, impl_->M, impl_->npts);
  return unflatten(impl_->A * x, impl_->M, impl_->npts);
}

ModeSet OutgoingSolver::apply_free(const ModeSet& u) const {
  impl_->check_set(u);
  VectorXcd x = flatten(u, impl_->M, impl_->npts);
  VectorXcd y = impl_->A * x - impl_->Vm * x;
  ModeSet out = unflatten(y, impl_->M, impl_->npts);
  zero_edges(out);
  return out;
}

double OutgoingSolver::smallest_singular_value() const { return impl_->sigma_min; }
double OutgoingSolver::spectral_distance() const { return impl_->sigma_min; }
const ToyManifold& OutgoingSolver::manifold() const { return impl_->man; }
double OutgoingSolver::k() const { return impl_->k; }

// ---------------------------------------------------------------------------
// Scattering solves.
// ---------------------------------------------------------------------------

namespace {

// Shared column pipeline: cut the incoming field below the cusp band, form
// the exact stencil commutator source, solve for the radiating part.
struct ColumnSolve {
  ModeSet w;
  ModeSet chiU;
};

ColumnSolve scatter_incoming(const OutgoingSolver& s, const Tails& tl, const ModeSet& U) {
  ColumnSolve out;
  out.chiU = apply_cutoff(tl, U, chi_incoming_cusp);
  ModeSet f = s.apply(out.chiU);
  ModeSet AU = s.apply(U);
  for (std::size_t m = 0; m < f.size(); ++m)
    for (int i = 0; i < tl.npts; ++i)
      f.modes[m][i] -= chi_incoming_cusp(tl.y[i]) * AU.modes[m][i];
  zero_edges(f);
  out.w = s.solve(f);
  return out;
}

double interior_residual_of(const OutgoingSolver& s, const Tails& tl, const ModeSet& u,
                            double scale) {
  ModeSet r = s.apply(u);
  double num = 0.0, den = 0.0;
  for (std::size_t m = 0; m < u.size(); ++m)
    for (int i = 1; i + 1 < tl.npts; ++i) {
      num = std::max(num, std::abs(r.modes[m][i]));
      den = std::max(den, std::abs(u.modes[m][i]));
    }
  return den > 0.0 ? num / (scale * den) : 0.0;
}

}  // namespace

HelmholtzSolution solve_helmholtz_modes(const ToyManifold& man, double k,
                                        const std::vector<cplx>& incoming) {
  man.validate();
  check_energy(k);
  if (incoming.size() > man.modes())
    throw std::invalid_argument("solve_helmholtz_modes: more incoming modes than the spectrum");
  OutgoingSolver s(man, k);
  const Tails tl(man, k);
  const std::size_t M = man.modes();

  std::vector<cplx> a(M, cplx(0.0, 0.0));
  std::copy(incoming.begin(), incoming.end(), a.begin());

  const cplx wminus_c = omega_c(k, -1);
  ModeSet U = zero_modeset(M, tl.npts);
  for (std::size_t m = 0; m < M; ++m) {
    const cplx am = wminus_c * a[m];
    if (am == cplx(0.0, 0.0)) continue;
    for (int i = 0; i < tl.npts; ++i) U.modes[m][i] = am * tl.pin_c[m](i);
  }

  ColumnSolve col = scatter_incoming(s, tl, U);

  HelmholtzSolution sol;
  sol.k = k;
  sol.scattered = col.w;
  sol.u = col.chiU;
  for (std::size_t m = 0; m < M; ++m)
    for (int i = 0; i < tl.npts; ++i) sol.u.modes[m][i] -= col.w.modes[m][i];

  ModeSet fj = s.apply_free(apply_cutoff(tl, col.w, chi_near_cusp));
  sol.cusp.a = a;
  sol.cusp.b.resize(M);
  const cplx wplus_c = omega_c(k, 1);
  for (std::size_t m = 0; m < M; ++m) sol.cusp.b[m] = tl.pair_cusp(m, fj) / wplus_c;
  auto fit = ratio_fit(sol.cusp.b);
  sol.cusp.ratio_exponent = fit.first;
  sol.cusp.growth = fit.second;

  sol.condition = s.smallest_singular_value();
  sol.interior_residual = interior_residual_of(s, tl, sol.u, 2.0 / (man.grid.h * man.grid.h));
  return sol;
}

GenSMatrix generalized_smatrix(const ToyManifold& man, double k, std::size_t M) {
  man.validate();
  check_energy(k);
  if (M == 0 || M > man.modes())
    throw std::invalid_argument("generalized_smatrix: bad truncation");
  OutgoingSolver s(man, k);
  const Tails tl(man, k);
  const std::size_t Mall = man.modes();

  GenSMatrix out;
  out.k = k;
  out.s11 = MatrixXcd::Zero(M, M);
  out.vtag = man.V.empty() ? man.V.declared_tag() : man.V.classify(man.grid);
  const bool two = !man.capped();
  if (two) out.cusp_to_regular = MatrixXcd::Zero(M, M);

  const cplx wminus_c = omega_c(k, -1);
  const cplx wplus = omega_reg(k, 1);
  const double ck = k_prefactor(k);

  for (std::size_t q = 0; q < M; ++q) {
    // Plain (undressed) incoming column; the bracket normalization folds the
    // two half-bound weights into a single overall minus sign for s11.
    ModeSet U = zero_modeset(Mall, tl.npts);
    for (int i = 0; i < tl.npts; ++i) U.modes[q][i] = tl.pin_c[q](i);
    ColumnSolve col = scatter_incoming(s, tl, U);

    ModeSet fj = s.apply_free(apply_cutoff(tl, col.w, chi_near_cusp));
    for (std::size_t m = 0; m < M; ++m) out.s11(m, q) = -tl.pair_cusp(m, fj);

    if (two) {
      ModeSet fr = s.apply_free(apply_cutoff(tl, col.w, chi_near_regular));
      for (std::size_t m = 0; m < M; ++m) {
        const cplx g = tl.pair_regular(m, fr);
        const cplx dress =
            m == 0 ? cplx(1.0, 0.0) / wplus
                   : channel_phase(k, man.spectrum().lambdas[m], 1) * ck;
        out.cusp_to_regular(m, q) = wminus_c * dress * g;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Physical S-matrix.
// ---------------------------------------------------------------------------

double PhysSMatrix::unitarity_defect() const {
  MatrixXcd D = S.adjoint() * S - MatrixXcd::Identity(S.rows(), S.cols());
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(D);
  double def = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    def = std::max(def, std::abs(es.eigenvalues()(i)));
  return def;
}

PhysSMatrix physical_smatrix(const ToyManifold& man, double k) {
  man.validate();
  check_energy(k);
  OutgoingSolver s(man, k);
  const Tails tl(man, k);
  const std::size_t M = man.modes();
  const bool two = !man.capped();
  const std::size_t nch = two ? 1 + M : 1;

  PhysSMatrix out;
  out.k = k;
  out.S = MatrixXcd::Zero(nch, nch);
  out.channels.push_back("cusp");
  if (two)
    for (std::size_t m = 0; m < M; ++m) out.channels.push_back("regular:" + std::to_string(m));

  const auto weights = specfun::scattering_weights(k, man.spectrum().lambdas);
  const cplx c0p = omega_c(k, 1) / weights.omega_plus;
  const double ck = k_prefactor(k);
  const cplx miPiOverK(0.0, -kPi / k);

  for (std::size_t q = 0; q < nch; ++q) {
    // Incoming-adjoint kernel of channel q on the free cylinder.
    ModeSet eta = zero_modeset(M, tl.npts);
    double (*chi_in)(double) = nullptr;
    if (q == 0) {
      chi_in = chi_near_cusp;
      for (int i = 0; i < tl.npts; ++i) eta.modes[0][i] = kInvRoot2Pi * tl.pin_c[0](i);
    } else {
      chi_in = chi_near_regular;
      const std::size_t mq = q - 1;
      const cplx dress = mq == 0 ? c0p * kInvRoot2Pi
                                 : weights.C_plus[mq] * ck;
      for (int i = 0; i < tl.npts; ++i) eta.modes[mq][i] = dress * tl.pout_c[mq](i);
    }

    // phi = (H - k^2)(chi_l eta) = [H_free, chi_l] eta + chi_l V eta, the
    // source of the localized channel function; eta kills the free part, so
    // phi = A(chi_l eta) - chi_l A_free(eta) with support on the cutoff ramp
    // and on the overlap of chi_l with the potential.
    ModeSet chiEta = apply_cutoff(tl, eta, chi_in);
    ModeSet phi = s.apply(chiEta);
    ModeSet Feta = s.apply_free(eta);
    for (std::size_t m = 0; m < M; ++m)
      for (int i = 1; i + 1 < tl.npts; ++i)
        phi.modes[m][i] -= chi_in(tl.y[i]) * Feta.modes[m][i];
    zero_edges(phi);

    ModeSet w = s.solve(phi);

    // Q_j phi collapses to (H_free - k^2)(chi_j w) because w solves the full
    // equation with source phi.
    ModeSet fc = s.apply_free(apply_cutoff(tl, w, chi_near_cusp));
    cplx acc(0.0, 0.0);
    for (int i = 0; i < tl.npts; ++i) acc += tl.wq[i] * tl.pin_c[0](i) * fc.modes[0][i];
    out.S(0, q) = miPiOverK * kInvRoot2Pi * acc;

    if (two) {
      ModeSet fr = s.apply_free(apply_cutoff(tl, w, chi_near_regular));
      for (std::size_t m = 0; m < M; ++m) {
        cplx accm(0.0, 0.0);
        for (int i = 0; i < tl.npts; ++i) accm += tl.wq[i] * tl.pout_c[m](i) * fr.modes[m][i];
        const cplx dress = m == 0 ? c0p * kInvRoot2Pi : weights.C_plus[m] * ck;
        out.S(1 + m, q) = miPiOverK * dress * accm;
      }
      if (q >= 1) out.S(q, q) += j_entry(k, man.spectrum().lambdas[q - 1]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Asymptotic fits.
// ---------------------------------------------------------------------------

namespace {

FitWindow default_window(const ToyManifold& man, std::size_t end_index) {
  const RadialGrid& g = man.grid;
  if (end_index == 0) {
    const double yhi = std::min(12.0, 0.7 * man.ymax());
    const int lo = g.nearest_index_t(-std::log(yhi));
    const int hi = g.nearest_index_t(-std::log(3.3));
    return FitWindow{lo, hi + 1};
  }
  const double ylo = man.wall_y();
  const double yhi = std::min(2.2 * ylo, 0.25);
  const int lo = g.nearest_index_t(-std::log(yhi));
  return FitWindow{lo, g.size()};
}

}  // namespace

EndFit asymptotic_fit(const ToyManifold& man, double k, const ModeSet& u, std::size_t end_index) {
  return asymptotic_fit(man, k, u, end_index, default_window(man, end_index));
}

EndFit asymptotic_fit(const ToyManifold& man, double k, const ModeSet& u, std::size_t end_index,
                      FitWindow window) {
  man.validate();
  check_energy(k);
  if (end_index >= man.ends.size())
    throw std::invalid_argument("asymptotic_fit: no such end");
  if (u.size() != man.modes()) throw std::invalid_argument("asymptotic_fit: mode count mismatch");
  const RadialGrid& g = man.grid;
  const int npts = g.size();
  if (window.lo < 0 || window.hi > npts || window.hi - window.lo < 6)
    throw std::invalid_argument("asymptotic_fit: window too small");

  const std::size_t M = man.modes();
  const double a = half_order(man.n);
  const int len = window.hi - window.lo;

  EndFit fit;
  fit.window = window;
  fit.c_in.resize(M);
  fit.c_out.resize(M);
  fit.a_bracket.resize(M);
  fit.b_bracket.resize(M);
  fit.condition.resize(M);
  fit.reliable.resize(M);

  const cplx wm_c = omega_c(k, -1), wp_c = omega_c(k, 1);
  const cplx wm = omega_reg(k, -1), wp = omega_reg(k, 1);
  const cplx gam_p = specfun::cgamma(cplx(1.0, k));   // Gamma(1 + ik)
  const cplx gam_m = specfun::cgamma(cplx(1.0, -k));  // Gamma(1 - ik)

  for (std::size_t m = 0; m < M; ++m) {
    const double zeta = std::sqrt(man.spectrum().lambdas[m]);
    VectorXcd bin(len), bout(len), rhs(len);
    for (int j = 0; j < len; ++j) {
      const int i = window.lo + j;
      const double t = g.t(i), y = g.y(i);
      rhs(j) = u.modes[m][i];
      if (end_index == 0) {
        if (m == 0) {
          bin(j) = std::exp(cplx(-a * t, k * t));
          bout(j) = std::exp(cplx(-a * t, -k * t));
        } else {
          const double x = zeta * y;
          bin(j) = specfun::bessel_I_scaled(cplx(0.0, -k), x).value * std::exp(x - a * t);
          bout(j) = std::exp(-a * t) * transform::kl_kernel(k, x);
        }
      } else {
        if (m == 0) {
          bin(j) = std::exp(cplx(-a * t, -k * t));  // y^{a+ik}
          bout(j) = std::exp(cplx(-a * t, k * t));  // y^{a-ik}
        } else {
          const double x = zeta * y;
          bin(j) = std::exp(-a * t) * specfun::bessel_I(cplx(0.0, k), x).value;
          bout(j) = std::exp(-a * t) * specfun::bessel_I(cplx(0.0, -k), x).value;
        }
      }
    }
    const double nin = bin.norm(), nout = bout.norm();
    if (!(nin > 0.0) || !(nout > 0.0) || nin / nout > 1e12 || nout / nin > 1e12) {
      fit.reliable[m] = 0;
      fit.condition[m] = std::numeric_limits<double>::infinity();
      fit.c_in[m] = fit.c_out[m] = fit.a_bracket[m] = fit.b_bracket[m] = cplx(0.0, 0.0);
      continue;
    }
    Eigen::Matrix2cd G;
    Eigen::Vector2cd r2;
    const VectorXcd cin = bin / nin, cout = bout / nout;
    G(0, 0) = cin.dot(cin);
    G(0, 1) = cin.dot(cout);
    G(1, 0) = cout.dot(cin);
    G(1, 1) = cout.dot(cout);
    r2(0) = cin.dot(rhs);
    r2(1) = cout.dot(rhs);
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double cond = svd.singularValues()(0) / svd.singularValues()(1);
    Eigen::Vector2cd c = svd.solve(r2);
    fit.c_in[m] = c(0) / nin;
    fit.c_out[m] = c(1) / nout;
    fit.condition[m] = cond;
    fit.reliable[m] = cond < 1e8 ? 1 : 0;

    if (end_index == 0) {
      fit.a_bracket[m] = fit.c_in[m] / wm_c;
      fit.b_bracket[m] = -fit.c_out[m] / wp_c;
    } else if (m == 0) {
      fit.a_bracket[m] = fit.c_in[m] / wm;   // psi_minus
      fit.b_bracket[m] = -fit.c_out[m] / wp; // psi_plus
    } else {
      const cplx ph = std::exp(cplx(0.0, k * std::log(0.5 * zeta)));
      fit.a_bracket[m] = fit.c_in[m] * ph / (gam_p * wm);
      fit.b_bracket[m] = -fit.c_out[m] / (ph * gam_m * wp);
    }
  }
  return fit;
}

}  // namespace orbscat::smatrix
