#include "orbscat/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "orbscat/specfun.hpp"

namespace orbscat::inverse {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using modelspace::ModeFunction;
using modelspace::RadialGrid;
using smatrix::ToyManifold;

namespace {

using Trip = Eigen::Triplet<cplx>;
using Sparse = Eigen::SparseMatrix<cplx>;

double half_order(int n) { return 0.5 * (n - 1); }

// Interior linear system on the sub-grid y <= 2. The ghost variant keeps the
// Neumann closure inside an exact pencil A - z; the one-sided variant turns
// the two boundary rows into explicit flux equations.
struct InteriorSystem {
  const ToyManifold* man = nullptr;
  std::size_t M = 0;
  int gamma = 0, ni = 0;
  double h = 0.0, a = 0.0, cp = 0.0, cm = 0.0;
  double b0 = 0.0;  // ghost-route right-hand-side weight of unit Neumann data
  Sparse A;
  Eigen::SparseLU<Sparse, Eigen::COLAMDOrdering<int>> lu;
  double sigma_min = 0.0, scale = 0.0;

  int idx(int j, std::size_t m) const {
    return static_cast<int>(static_cast<std::size_t>(j) * M + m);
  }

  InteriorSystem(const SplitManifold& split, cplx z, std::size_t modes, bool onesided) {
    man = &split.man;
    M = modes;
    if (M == 0 || M > man->modes())
      throw std::invalid_argument("nd_map: bad mode count");
    const RadialGrid& g = man->grid;
    gamma = split.gamma;
    ni = split.interior_points();
    h = g.h;
    a = half_order(man->n);
    cp = -1.0 / (h * h) - (man->n - 1) / (2.0 * h);
    cm = -1.0 / (h * h) + (man->n - 1) / (2.0 * h);
    b0 = -2.0 * h * cm;

    double k = 0.0;
    if (!split.interior_compact()) {
      if (z.imag() != 0.0 || z.real() <= 0.0)
        throw std::invalid_argument(
            "nd_map: a radiating interior supports z = k^2 + i0 only");
      k = std::sqrt(z.real());
    }

    const auto& lambdas = man->spectrum().lambdas;
    std::vector<Trip> trip;
    trip.reserve(static_cast<std::size_t>(ni) * M * 4);
    for (std::size_t m = 0; m < M; ++m) {
      const double lam = lambdas[m];
      for (int j = 1; j + 1 < ni; ++j) {
        const double y = g.y(gamma + j);
        trip.emplace_back(idx(j, m), idx(j + 1, m), cplx(cp, 0.0));
        trip.emplace_back(idx(j, m), idx(j - 1, m), cplx(cm, 0.0));
        trip.emplace_back(idx(j, m), idx(j, m),
                          cplx(2.0 / (h * h) + y * y * lam - a * a, 0.0) - z);
      }
      const double yg = g.y(gamma);
      if (onesided) {
        trip.emplace_back(idx(0, m), idx(0, m), cplx(3.0 / (2.0 * h), 0.0));
        trip.emplace_back(idx(0, m), idx(1, m), cplx(-4.0 / (2.0 * h), 0.0));
        trip.emplace_back(idx(0, m), idx(2, m), cplx(1.0 / (2.0 * h), 0.0));
      } else {
        trip.emplace_back(idx(0, m), idx(0, m),
                          cplx(2.0 / (h * h) + yg * yg * lam - a * a, 0.0) - z);
        trip.emplace_back(idx(0, m), idx(1, m), cplx(cp + cm, 0.0));
      }
      if (split.interior_compact()) {
        if (onesided) {
          trip.emplace_back(idx(ni - 1, m), idx(ni - 1, m), cplx(3.0 / (2.0 * h), 0.0));
          trip.emplace_back(idx(ni - 1, m), idx(ni - 2, m), cplx(-4.0 / (2.0 * h), 0.0));
          trip.emplace_back(idx(ni - 1, m), idx(ni - 3, m), cplx(1.0 / (2.0 * h), 0.0));
        } else {
          const double yw = g.y(gamma + ni - 1);
          trip.emplace_back(idx(ni - 1, m), idx(ni - 1, m),
                            cplx(2.0 / (h * h) + yw * yw * lam - a * a, 0.0) - z);
          trip.emplace_back(idx(ni - 1, m), idx(ni - 2, m), cplx(cp + cm, 0.0));
        }
      } else {
        trip.emplace_back(idx(ni - 1, m), idx(ni - 1, m), cplx(1.0, 0.0));
        trip.emplace_back(idx(ni - 1, m), idx(ni - 2, m),
                          -smatrix::outgoing_ratio(*man, k, 1, m));
      }
    }
    for (const auto& e : man->V.entries) {
      if (e.m >= M || e.l >= M) continue;
      for (int j = 1; j + 1 < ni; ++j) {
        const double v = e.profile(g.y(gamma + j));
        if (v == 0.0) continue;
        trip.emplace_back(idx(j, e.m), idx(j, e.l), cplx(v, 0.0));
        if (e.m != e.l) trip.emplace_back(idx(j, e.l), idx(j, e.m), cplx(v, 0.0));
      }
    }

    const int dim = static_cast<int>(M) * ni;
    A.resize(dim, dim);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();

    scale = 2.0 / (h * h) + std::abs(z) + a * a;
    for (std::size_t m = 0; m < M; ++m)
      scale = std::max(scale, lambdas[m] * 4.0);

    lu.compute(A);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("nd_map: interior factorization failed");

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
      os << "nd_map: z = " << z
         << " collides with the interior Neumann spectrum (distance estimate "
         << sigma_min << ")";
      throw std::runtime_error(os.str());
    }
  }

  NDMatrix nd(cplx z, bool onesided) const {
    NDMatrix out;
    out.z = z;
    out.entries.resize(M, M);
    const int dim = static_cast<int>(M) * ni;
    for (std::size_t l = 0; l < M; ++l) {
      VectorXcd rhs = VectorXcd::Zero(dim);
      rhs(idx(0, l)) = onesided ? cplx(1.0, 0.0) : cplx(b0, 0.0);
      const VectorXcd u = lu.solve(rhs);
      for (std::size_t m = 0; m < M; ++m) out.entries(m, l) = u(idx(0, m));
    }
    return out;
  }
};

ModeSet zero_set(std::size_t M, int npts) {
  ModeSet s;
  s.modes.assign(M, ModeFunction(static_cast<std::size_t>(npts), cplx(0.0, 0.0)));
  return s;
}

}  // namespace

int SplitManifold::interior_points() const { return man.grid.size() - gamma; }

SplitManifold make_split(const ToyManifold& man) {
  man.validate();
  SplitManifold split;
  split.man = man;
  const RadialGrid& g = man.grid;
  const int i = g.nearest_index_t(-std::log(2.0));
  if (std::abs(g.y(i) - 2.0) > 1e-9)
    throw std::invalid_argument("make_split: the grid has no node at y = 2");
  split.gamma = i;
  if (split.gamma < 3 || split.interior_points() < 16)
    throw std::invalid_argument("make_split: too few grid rows on one side of y = 2");
  return split;
}

double NDMatrix::symmetry_defect() const {
  double d = 0.0;
  for (int i = 0; i < entries.rows(); ++i)
    for (int j = 0; j < entries.cols(); ++j)
      d = std::max(d, std::abs(entries(i, j) - entries(j, i)));
  return d;
}

NDMatrix nd_map(const SplitManifold& split, cplx z, std::size_t modes) {
  InteriorSystem sys(split, z, modes, false);
  return sys.nd(z, false);
}

NDMatrix nd_map_onesided(const SplitManifold& split, cplx z, std::size_t modes) {
  InteriorSystem sys(split, z, modes, true);
  return sys.nd(z, true);
}

ProbeFamily probe_solutions(const SplitManifold& split, double k, std::size_t count) {
  const ToyManifold& man = split.man;
  if (!(k > 0.0) || k > 30.0)
    throw std::invalid_argument("probe_solutions: k must lie in (0, 30]");
  const std::size_t M = man.modes();
  if (count == 0 || count > M)
    throw std::invalid_argument("probe_solutions: bad probe count");

  // reject energies near either spectrum: the full outgoing solver guards its
  // own, and the interior pencil guards the Neumann spectrum
  InteriorSystem guard(split, cplx(k * k, 0.0), M, false);
  smatrix::OutgoingSolver s(man, k);

  const RadialGrid& g = man.grid;
  const int npts = g.size();
  const int iG = split.gamma;
  const double h = g.h;
  const double a = half_order(man.n);
  const auto& lambdas = man.spectrum().lambdas;

  ProbeFamily out;
  out.k = k;
  out.neumann.resize(M, count);
  out.dirichlet.resize(M, count);

  for (std::size_t p = 0; p < count; ++p) {
    ModeSet U = zero_set(M, npts);
    if (p == 0) {
      for (int i = 0; i < npts; ++i)
        U.modes[0][i] = std::exp(cplx(-a * g.t(i), k * g.t(i)));
    } else {
      const double zeta = std::sqrt(lambdas[p]);
      const cplx nu(0.0, -k);
      for (int i = 0; i < npts; ++i) {
        const double x = zeta * g.y(i);
        U.modes[p][i] = specfun::bessel_I_scaled(nu, x).value * std::exp(x - a * g.t(i));
      }
    }
    ModeSet chiU = U;
    for (std::size_t m = 0; m < M; ++m)
      for (int i = 0; i < npts; ++i) chiU.modes[m][i] *= smatrix::chi_incoming_cusp(g.y(i));
    ModeSet f = s.apply(chiU);
    ModeSet AU = s.apply(U);
    for (std::size_t m = 0; m < M; ++m) {
      for (int i = 1; i + 1 < npts; ++i)
        f.modes[m][i] -= smatrix::chi_incoming_cusp(g.y(i)) * AU.modes[m][i];
      f.modes[m][0] = cplx(0.0, 0.0);
      f.modes[m][npts - 1] = cplx(0.0, 0.0);
    }
    ModeSet w = s.solve(f);
    ModeSet phi = chiU;
    for (std::size_t m = 0; m < M; ++m)
      for (int i = 0; i < npts; ++i) phi.modes[m][i] -= w.modes[m][i];

    const ModeSet r = s.apply(phi);
    double umax = 0.0, rmax = 0.0;
    for (std::size_t m = 0; m < M; ++m)
      for (int i = iG; i + 1 < npts; ++i) {
        umax = std::max(umax, std::abs(phi.modes[m][i]));
        rmax = std::max(rmax, std::abs(r.modes[m][i]));
      }
    out.interior_residuals.push_back(rmax / (1.0 + umax));

    for (std::size_t m = 0; m < M; ++m) {
      out.dirichlet(m, p) = phi.modes[m][iG];
      out.neumann(m, p) = -(phi.modes[m][iG + 1] - phi.modes[m][iG - 1]) / (2.0 * h);
    }
    out.probes.push_back(std::move(phi));
  }
  return out;
}

ModeSet layer_potential(const SplitManifold& split, double k, std::size_t mode) {
  const ToyManifold& man = split.man;
  const std::size_t M = man.modes();
  if (mode >= M) throw std::invalid_argument("layer_potential: no such mode");
  smatrix::OutgoingSolver s(man, k);
  const RadialGrid& g = man.grid;
  const int iG = split.gamma;
  const double h = g.h;

  ModeSet src = zero_set(M, g.size());
  src.modes[mode][iG - 1] = cplx(1.0 / (2.0 * h * g.weight(iG - 1, man.n)), 0.0);
  src.modes[mode][iG + 1] = cplx(-1.0 / (2.0 * h * g.weight(iG + 1, man.n)), 0.0);
  ModeSet u = s.solve(src);
  for (auto& m : u.modes)
    for (auto& v : m) v = std::conj(v);
  return u;
}

DensityReport density_check(const ProbeFamily& probes, std::size_t count) {
  if (count == 0 || count > probes.probes.size())
    throw std::invalid_argument("density_check: bad probe count");
  DensityReport out;
  const MatrixXcd N = probes.neumann.leftCols(static_cast<Eigen::Index>(count));
  out.gram = N.adjoint() * N;
  for (std::size_t c = 1; c <= count; ++c) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(
        out.gram.topLeftCorner(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)));
    out.sigma_by_count.push_back(es.eigenvalues().minCoeff());
  }
  out.sigma_min = out.sigma_by_count.back();
  return out;
}

bool SeparationReport::separated(double threshold) const {
  return max_s11_diff > threshold && max_nd_diff > threshold;
}

SeparationReport interior_comparison(const SplitManifold& a, const SplitManifold& b,
                                     const std::vector<double>& ks, std::size_t modes) {
  const ToyManifold& ma = a.man;
  const ToyManifold& mb = b.man;
  const bool same_shape =
      ma.n == mb.n && a.gamma == b.gamma && ma.ends.size() == mb.ends.size() &&
      ma.grid.npts == mb.grid.npts && ma.grid.h == mb.grid.h && ma.grid.T == mb.grid.T &&
      ma.spectrum().lambdas == mb.spectrum().lambdas &&
      ma.spectrum().volume == mb.spectrum().volume;
  if (!same_shape)
    throw std::invalid_argument("interior_comparison: the manifolds must share one exterior");
  for (std::size_t e = 0; e < ma.ends.size(); ++e)
    if (ma.ends[e].kind != mb.ends[e].kind)
      throw std::invalid_argument("interior_comparison: the manifolds must share one exterior");

  SeparationReport rep;
  for (double k : ks) {
    const auto ga = smatrix::generalized_smatrix(ma, k, modes);
    const auto gb = smatrix::generalized_smatrix(mb, k, modes);
    const auto la = nd_map(a, cplx(k * k, 0.0), modes);
    const auto lb = nd_map(b, cplx(k * k, 0.0), modes);
    const double ds = (ga.s11 - gb.s11).cwiseAbs().maxCoeff();
    const double dn = (la.entries - lb.entries).cwiseAbs().maxCoeff();
    rep.ks.push_back(k);
    rep.s11_diff.push_back(ds);
    rep.nd_diff.push_back(dn);
    rep.max_s11_diff = std::max(rep.max_s11_diff, ds);
    rep.max_nd_diff = std::max(rep.max_nd_diff, dn);
  }
  return rep;
}

BoundarySpectrum bsp_extract(const SplitManifold& split, std::size_t modes,
                             std::size_t count) {
  const ToyManifold& man = split.man;
  if (!split.interior_compact())
    throw std::invalid_argument("bsp_extract: the interior must be compact");
  if (modes == 0 || modes > man.modes())
    throw std::invalid_argument("bsp_extract: bad mode count");
  const RadialGrid& g = man.grid;
  const int iG = split.gamma;
  const int ni = split.interior_points();
  const int dim = static_cast<int>(modes) * ni;
  if (dim > 4000)
    throw std::invalid_argument("bsp_extract: interior grid too large for a dense solve");
  if (count == 0 || static_cast<int>(count) > dim)
    throw std::invalid_argument("bsp_extract: bad eigenvalue count");

  const double h = g.h;
  const double a = half_order(man.n);
  const double cp = -1.0 / (h * h) - (man.n - 1) / (2.0 * h);
  const double cm = -1.0 / (h * h) + (man.n - 1) / (2.0 * h);
  const auto idx = [&](int j, std::size_t m) {
    return static_cast<int>(static_cast<std::size_t>(j) * modes + m);
  };
  const auto& lambdas = man.spectrum().lambdas;

  MatrixXd A = MatrixXd::Zero(dim, dim);
  for (std::size_t m = 0; m < modes; ++m) {
    const double lam = lambdas[m];
    for (int j = 1; j + 1 < ni; ++j) {
      const double y = g.y(iG + j);
      A(idx(j, m), idx(j + 1, m)) = cp;
      A(idx(j, m), idx(j - 1, m)) = cm;
      A(idx(j, m), idx(j, m)) = 2.0 / (h * h) + y * y * lam - a * a;
    }
    const double yg = g.y(iG);
    A(idx(0, m), idx(0, m)) = 2.0 / (h * h) + yg * yg * lam - a * a;
    A(idx(0, m), idx(1, m)) = cp + cm;
    const double yw = g.y(iG + ni - 1);
    A(idx(ni - 1, m), idx(ni - 1, m)) = 2.0 / (h * h) + yw * yw * lam - a * a;
    A(idx(ni - 1, m), idx(ni - 2, m)) = cp + cm;
  }
  for (const auto& e : man.V.entries) {
    if (e.m >= modes || e.l >= modes) continue;
    for (int j = 1; j + 1 < ni; ++j) {
      const double v = e.profile(g.y(iG + j));
      if (v == 0.0) continue;
      A(idx(j, e.m), idx(j, e.l)) += v;
      if (e.m != e.l) A(idx(j, e.l), idx(j, e.m)) += v;
    }
  }

  // diagonal similarity onto a symmetric matrix; the squared scaling is the
  // discrete interior measure
  std::vector<double> E(static_cast<std::size_t>(ni));
  E[0] = 1.0;
  for (int j = 0; j + 1 < ni; ++j) {
    double up = cp, down = cm;
    if (j == 0) up = cp + cm;
    if (j + 1 == ni - 1) down = cp + cm;
    E[static_cast<std::size_t>(j + 1)] =
        E[static_cast<std::size_t>(j)] * std::sqrt(up / down);
  }
  MatrixXd S(dim, dim);
  for (int j = 0; j < ni; ++j)
    for (int j2 = 0; j2 < ni; ++j2)
      for (std::size_t m = 0; m < modes; ++m)
        for (std::size_t m2 = 0; m2 < modes; ++m2)
          S(idx(j, m), idx(j2, m2)) =
              A(idx(j, m), idx(j2, m2)) * E[static_cast<std::size_t>(j)] /
              E[static_cast<std::size_t>(j2)];
  S = 0.5 * (S + S.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("bsp_extract: eigensolve failed");

  BoundarySpectrum out;
  out.pairing_constant = -2.0 * h * cm;
  for (std::size_t i = 0; i < count; ++i) {
    const double lam = es.eigenvalues()(static_cast<Eigen::Index>(i));
    out.lambdas.push_back(lam);
    MatrixXcd P(modes, modes);
    for (std::size_t q = 0; q < modes; ++q)
      for (std::size_t q2 = 0; q2 < modes; ++q2)
        P(q, q2) = es.eigenvectors()(idx(0, q), static_cast<Eigen::Index>(i)) *
                   es.eigenvectors()(idx(0, q2), static_cast<Eigen::Index>(i));
    out.projections.push_back(std::move(P));
    double gap = 1e300;
    if (i > 0) gap = std::min(gap, lam - es.eigenvalues()(static_cast<Eigen::Index>(i - 1)));
    if (static_cast<int>(i) + 1 < dim)
      gap = std::min(gap, es.eigenvalues()(static_cast<Eigen::Index>(i + 1)) - lam);
    out.degenerate.push_back(gap < 1e-6 * (1.0 + std::abs(lam)) ? 1 : 0);
  }
  return out;
}

}  // namespace orbscat::inverse
