#pragma once

// Interior/exterior splitting at the interface y = 2, the Neumann-to-Dirichlet
// map of the interior piece, probe solutions driven from the cusp, boundary
// spectral data of compact interiors, and a comparison report showing that the
// cusp block of the scattering matrix and the interior N-D map separate
// distinct interiors together.
//
// The split keeps the exterior an exact product M1 x (2, inf); the manifold
// validator already confines perturbations to y < 3/2, so any valid manifold
// splits. The interface normal is the metric-unit outward normal of the
// interior, y d/dy at y = 2.

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "orbscat/modelspace.hpp"
#include "orbscat/smatrix.hpp"

namespace orbscat::inverse {

using modelspace::cplx;
using modelspace::ModeSet;

// A manifold together with the grid row of the interface y = 2. The interior
// is the sub-grid y <= 2 (indices >= gamma); its inner closure is the Neumann
// wall for capped manifolds and the radiating regular end otherwise.
struct SplitManifold {
  smatrix::ToyManifold man;
  int gamma = -1;

  int interior_points() const;
  bool interior_compact() const { return man.capped(); }
};

// Builds the split, requiring a grid node at y = 2 (within 1e-9) with at
// least a handful of rows on both sides. Validates the manifold.
SplitManifold make_split(const smatrix::ToyManifold& man);

// Truncated Neumann-to-Dirichlet matrix on the interface mode space: column l
// is the Dirichlet trace of the interior solution whose outward Neumann trace
// is the unit mode l. Symmetric (not Hermitian) for any z off the interior
// spectrum; real symmetric for real z on compact interiors.
struct NDMatrix {
  cplx z;
  Eigen::MatrixXcd entries;

  double symmetry_defect() const;
};

// Primary route: centered ghost elimination of the Neumann condition, which
// keeps the interior system an exact linear pencil A - z, so the poles of the
// map are exactly the discrete interior eigenvalues. Compact interiors accept
// any z off the spectrum; radiating interiors accept real z = k^2 > 0 only
// (outgoing closure at the regular end). Near-collision with the interior
// spectrum raises a conditioning error carrying a distance estimate.
NDMatrix nd_map(const SplitManifold& split, cplx z, std::size_t modes);

// Cross-check route: the Neumann data enters through one-sided second-order
// flux rows instead of the ghost pencil. A genuinely different discretization
// of the same map; both converge at second order to the same object.
NDMatrix nd_map_onesided(const SplitManifold& split, cplx z, std::size_t modes);

// Probe solutions: for each mode m the incoming channel wave is cut off near
// the cusp and corrected by the outgoing solve, producing a global solution
// of the homogeneous equation whose interface traces feed the density and
// separation machinery. Rejects energies colliding with either the full or
// the interior spectrum.
struct ProbeFamily {
  double k = 0.0;
  std::vector<ModeSet> probes;       // full-grid mode coefficients, one per probe
  Eigen::MatrixXcd neumann;          // (manifold modes) x count traces at y = 2
  Eigen::MatrixXcd dirichlet;
  std::vector<double> interior_residuals;  // relative equation residual on y <= 2
};
ProbeFamily probe_solutions(const SplitManifold& split, double k, std::size_t count);

// The field radiated by a unit normal-derivative layer on the interface at
// energy k^2, with the incoming (conjugate-outgoing) radiation condition: the
// discrete realization places a measure-normalized two-node pair astride the
// interface. Away from y = 2 it solves the homogeneous equation; its value
// jumps across the interface while the first derivative stays continuous.
ModeSet layer_potential(const SplitManifold& split, double k, std::size_t mode);

// Gram matrix of the probe Neumann traces over the first `count` probes, its
// smallest eigenvalue, and the trend of that eigenvalue as probes accumulate.
// Strict positivity is the density statement at this truncation.
struct DensityReport {
  Eigen::MatrixXcd gram;
  double sigma_min = 0.0;
  std::vector<double> sigma_by_count;
};
DensityReport density_check(const ProbeFamily& probes, std::size_t count);

// Sweeps k over the given list and reports the max-norm differences of the
// cusp scattering block and of the interior N-D map between two manifolds
// sharing the identical exterior (same cross-section, grid, and end layout;
// enforced structurally). Identical interiors give vanishing differences;
// distinct interiors separate in both quantities at some k.
struct SeparationReport {
  std::vector<double> ks;
  std::vector<double> s11_diff;
  std::vector<double> nd_diff;
  double max_s11_diff = 0.0;
  double max_nd_diff = 0.0;

  bool separated(double threshold) const;
};
SeparationReport interior_comparison(const SplitManifold& a, const SplitManifold& b,
                                     const std::vector<double>& ks, std::size_t modes);

// Neumann eigenvalues of the compact interior and the boundary projections of
// their eigenfunctions, per mode block: entry i holds lambda_i and the outer
// product of interface traces P_i in mode space, normalized so that the N-D
// map has the expansion sum_i pairing_constant * P_i / (lambda_i - z).
// Clustered eigenvalues are flagged as degenerate.
struct BoundarySpectrum {
  std::vector<double> lambdas;
  std::vector<Eigen::MatrixXcd> projections;
  std::vector<char> degenerate;
  double pairing_constant = 0.0;
};
BoundarySpectrum bsp_extract(const SplitManifold& split, std::size_t modes,
                             std::size_t count);

}  // namespace orbscat::inverse
