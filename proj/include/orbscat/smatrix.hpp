#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "orbscat/modelspace.hpp"

// Scattering matrices on a two-ended (or capped single-ended) model manifold:
// mode-coupled Helmholtz solves on the radial log grid with exact radiating
// tail closures, generalized and physical S-matrices, and asymptotic-fit
// extraction of channel data.
//
// Geometry. The manifold is the product cylinder of `modelspace` restricted
// to y in [ymin, ymax]: end 0 is always the cusp (y -> ymax side of the
// grid, grid index 0), and either a regular end sits at y -> ymin (grid
// index npts-1) or the cylinder is capped there by a Neumann wall
// (d/dt u = 0). A finite-rank symmetric perturbation V_{ml}(y) couples the
// cross-section modes; it must decay before the cutoff bands listed below.
//
// Channel conventions. Write a = (n-1)/2, zeta_m = sqrt(lambda_m), and
//   omega_pm(k)   = pi / (sqrt(2 k sinh(pi k)) Gamma(1 -+ ik)),
//   omega_pm_c(k) = +- (i/k) sqrt(pi/2),
// so |omega_pm| = |omega_pm_c| = sqrt(pi/2)/k. Solutions of (H - k^2) u = 0
// have the normal forms, in normalized-mode coefficients,
//   cusp end:    u_m ~ omega_minus_c [ a_0 y^{a-ik},  a_m y^a I_{-ik}(zeta_m y) ]
//                    - omega_plus_c  [ b_0 y^{a+ik},  b_m y^a K_{ik}(zeta_m y) ],
//   regular end: u_m ~ omega_minus y^{a+ik} psi_minus_m
//                    - omega_plus  y^{a-ik} psi_plus_m   (leading order in y),
// where for m >= 1 the regular-end powers abbreviate the exact radial
// solutions y^a I_{+-ik}(zeta_m y) ~ y^{a -+ ik} (zeta_m/2)^{+-ik}/Gamma(1 +- ik).
// The generalized S-matrix maps cusp data b = S11 a (all modes, the m >= 1
// cusp channels are exponentially closed); the physical S-matrix acts on the
// open channels only: one coefficient per cusp (the normalized zero mode)
// plus one per cross-section mode at a regular end, psi_plus = S psi_minus.
namespace orbscat::smatrix {

using modelspace::cplx;
using modelspace::ModeSet;
using modelspace::ModeSpectrum;
using modelspace::RadialGrid;

enum class EndKind { cusp, regular };

// Decay class of a perturbation profile in the log variable t = -log y:
// log_decay means exponential decay in |t| (a power of y), super_exponential
// means faster than any exponential in |t| (e.g. Gaussian bumps in t).
enum class DecayTag { log_decay, super_exponential };

enum class GrowthClass { decaying, bounded, growing };

// One radial coupling profile. gaussian_bump is
//   amplitude * exp(-(log y - log y0)^2 / (2 width^2)),
// exp_decay is amplitude * exp(-rate |log y|).
struct RadialProfile {
  enum class Family { gaussian_bump, exp_decay };
  Family family = Family::gaussian_bump;
  double y0 = 1.0;     // bump center (gaussian_bump)
  double width = 0.1;  // bump width in t (gaussian_bump)
  double rate = 4.0;   // decay rate in |t| (exp_decay)
  double amplitude = 0.0;

  double operator()(double y) const;
  DecayTag declared_tag() const;
};

struct VEntry {
  std::size_t m = 0;
  std::size_t l = 0;
  RadialProfile profile;
};

// Symmetric mode-coupling potential: eval(m, l, .) sums every entry listed
// for (m, l) or (l, m), so storing one triangle is enough.
struct Perturbation {
  std::vector<VEntry> entries;

  bool empty() const { return entries.empty(); }
  double eval(std::size_t m, std::size_t l, double y) const;
  // sup over the grid of max_{m,l} |V_{ml}(y)|, and the same sup restricted
  // to y >= ycut (resp. y <= ycut for sup_head).
  double sup_norm(const RadialGrid& g) const;
  double sup_tail(const RadialGrid& g, double ycut) const;
  double sup_head(const RadialGrid& g, double ycut) const;
  // Least-squares fit of log max_{m,l}|V| against {1, |t - t*|, (t - t*)^2}
  // around the peak t*; a dominant quadratic term reads as super-exponential.
  DecayTag classify(const RadialGrid& g) const;
  DecayTag declared_tag() const;
};

struct End {
  EndKind kind = EndKind::cusp;
  ModeSpectrum spectrum;
};

// The computational manifold. ends[0] must be a cusp; a second end, if
// present, must be regular and carry the same spectrum (one shared
// cross-section). With a single end the grid bottom y = ymin acts as a
// Neumann wall, closing the manifold compactly.
struct ToyManifold {
  int n = 2;
  std::vector<End> ends;
  RadialGrid grid;
  Perturbation V;

  const ModeSpectrum& spectrum() const { return ends.at(0).spectrum; }
  std::size_t modes() const { return spectrum().lambdas.size(); }
  bool capped() const { return ends.size() == 1; }
  double wall_y() const;  // y at the grid bottom
  double ymax() const;    // y at the grid top (cusp side)

  // Enforces the shape above plus: unit multiplicities, sqrt(lambda_max) *
  // ymax <= 690 (Bessel growth within double range), V numerically dead on
  // the cutoff bands (sup_{y >= 3/2} and sup_{y <= 2 ymin} below 1e-10 of
  // the sup) and smooth tags matching their numeric classification.
  void validate() const;
};

// Grid covering y in [ymin, ymax] with log step h (cusp side first).
RadialGrid make_grid(double ymin, double ymax, double h);

// Free manifold helpers used across tests and demos.
ToyManifold free_two_ended(int n, std::vector<double> lambdas, double volume,
                           double ymin, double ymax, double h);
ToyManifold free_capped(int n, std::vector<double> lambdas, double volume,
                        double ycap, double ymax, double h);

// Parses a manifold from JSON text:
// {"n":3, "volume":1.0, "lambdas":[0,1,4], "ends":["cusp","regular"],
//  "grid":{"ymin":0.05,"ymax":33.1,"h":0.005},
//  "V":[{"m":0,"l":1,"family":"gaussian_bump","y0":0.7,"width":0.1,
//        "amplitude":0.05}]}
// Unknown keys are rejected. exp_decay entries take "rate" instead of
// "y0"/"width".
ToyManifold manifold_from_json(const std::string& text);

// Fixed C-infinity cutoffs (plateau values exact, smoothstep transitions):
double chi_incoming_cusp(double y);     // 0 for y <= 2,   1 for y >= 3
double chi_near_cusp(double y);         // 0 for y <= 3/2, 1 for y >= 2
double chi_near_regular(double y);      // 1 for y <= 1/2, 0 for y >= 2/3
double chi_incoming_regular(double y);  // 1 for y <= 1/3, 0 for y >= 1/2

// Outgoing coefficients at the cusp in the bracket convention above, plus a
// geometric ratio fit of |b_m| (slope of log |b_m| per mode index).
struct CuspData {
  std::vector<cplx> a;
  std::vector<cplx> b;
  double ratio_exponent = 0.0;
  GrowthClass growth = GrowthClass::bounded;
};

// Factorized discrete operator H - k^2 with radiating (resp. wall) closure
// rows: second-order central stencils in t per mode, V coupling on the
// diagonal in y, exact analytic tail ratios at the closure rows. Throws
// std::runtime_error from the constructor when k^2 sits within ~1e-12 of the
// discrete spectrum (the message carries the distance estimate).
class OutgoingSolver {
 public:
  OutgoingSolver(const ToyManifold& man, double k);
  ~OutgoingSolver();
  OutgoingSolver(OutgoingSolver&&) noexcept;
  OutgoingSolver& operator=(OutgoingSolver&&) noexcept;

  ModeSet solve(const ModeSet& f) const;
  ModeSet apply(const ModeSet& u) const;       // full operator, closure rows too
  ModeSet apply_free(const ModeSet& u) const;  // V dropped, closure rows zeroed
  // Inverse-iteration estimate of the smallest singular value, and the
  // induced estimate of |k^2 - nearest eigenvalue|.
  double smallest_singular_value() const;
  double spectral_distance() const;

  const ToyManifold& manifold() const;
  double k() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct HelmholtzSolution {
  ModeSet u;          // total field chi_hat * incoming - scattered
  ModeSet scattered;  // the radiating part
  CuspData cusp;      // incoming a echoed, outgoing b extracted
  double interior_residual = 0.0;  // equation-relative stencil residual of u
  double condition = 0.0;          // smallest singular value of the solve
  double k = 0.0;
};

// Scatters the cusp data `incoming` = (a_m) off the manifold: the incoming
// wave is cut off below y = 2, the source is the exact stencil commutator,
// and b is extracted by the Green pairing of the free kernels against
// f_j = (H_free - k^2)(chi w). Requires incoming.size() <= modes().
HelmholtzSolution solve_helmholtz_modes(const ToyManifold& man, double k,
                                        const std::vector<cplx>& incoming);

// Generalized S-matrix on M cusp modes: s11[m][q] is the outgoing bracket
// coefficient b_m for incoming a = e_q. For a two-ended manifold
// cusp_to_regular[m][q] is the open-channel coefficient psi_plus_m at the
// regular end for the same columns; empty when capped.
struct GenSMatrix {
  double k = 0.0;
  Eigen::MatrixXcd s11;
  Eigen::MatrixXcd cusp_to_regular;
  DecayTag vtag = DecayTag::super_exponential;
};
GenSMatrix generalized_smatrix(const ToyManifold& man, double k, std::size_t M);

// Physical S-matrix on the open channels, channel 0 the cusp, channels
// 1..M the regular-end modes (absent when capped). Assembled from the
// stationary formula S_{jl} = delta_{jl} J_j - (pi i / k) F_j^{(+)}
// [(H_free - k^2)(chi_j w)], where w is the outgoing response to the
// localized channel source (H - k^2)(chi_l eta_l) and J is diagonal
// (sqrt(lambda_m)/2)^{-2ik} on regular rows (zero on the m = 0 slot), with
// no delta term on cusp rows.
struct PhysSMatrix {
  double k = 0.0;
  Eigen::MatrixXcd S;
  std::vector<std::string> channels;
  double unitarity_defect() const;  // ||S^* S - I||_2
};
PhysSMatrix physical_smatrix(const ToyManifold& man, double k);

// Two-coefficient least-squares fit of a field against the exact tail basis
// of one end, mode by mode, over a window of grid indices.
struct FitWindow {
  int lo = 0;
  int hi = 0;  // half-open [lo, hi)
};

struct EndFit {
  // Raw coefficients in the tail bases: cusp {y^a I_{-ik}, y^a K_{ik}}
  // (powers for mode 0), regular {y^a I_{+ik}, y^a I_{-ik}} (powers for
  // mode 0); in = first slot.
  std::vector<cplx> c_in, c_out;
  // Bracket coefficients (a_m, b_m) at a cusp end; at a regular end the
  // dressed channel values (psi_minus_m, psi_plus_m).
  std::vector<cplx> a_bracket, b_bracket;
  std::vector<double> condition;  // normalized-basis condition per mode
  std::vector<char> reliable;     // 0 when the window cannot see one column
  FitWindow window;
};

EndFit asymptotic_fit(const ToyManifold& man, double k, const ModeSet& u,
                      std::size_t end_index);
EndFit asymptotic_fit(const ToyManifold& man, double k, const ModeSet& u,
                      std::size_t end_index, FitWindow window);

// Low-level assembly shared with boundary-value solvers: appends the
// interior stencil rows (grid indices 1..npts-2, interleaved unknown index
// i * M + m) of H - z including V, acting on `modes` cross-section modes.
void append_interior_rows(std::vector<Eigen::Triplet<cplx>>& trip,
                          const ToyManifold& man, cplx z, std::size_t modes);

// The exact one-step tail ratio u(edge) / u(edge one step in) of the
// radiating solution at the given end.
cplx outgoing_ratio(const ToyManifold& man, double k, std::size_t end_index,
                    std::size_t mode);

}  // namespace orbscat::smatrix
