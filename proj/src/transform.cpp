#include "orbscat/transform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace orbscat::transform {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double sign_of(Sign s) { return s == Sign::plus ? 1.0 : -1.0; }

Sign flipped(Sign s) { return s == Sign::plus ? Sign::minus : Sign::plus; }

void check_energy(double k) {
  if (!(k > 0.0)) throw std::invalid_argument("transform: energy k must be positive");
}

// The cusp channel reads the zero mode without a multiplicity weight, so the
// transform is only unitary when that mode is simple (it always is on a
// connected cross-section).
void check_simple_zero_mode(const ModeSpectrum& spec) {
  if (spec.mult(0) != 1.0)
    throw std::invalid_argument("transform: the zero mode must be simple");
}

void check_mode_set(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& f) {
  if (f.size() == 0) throw std::invalid_argument("transform: empty mode set");
  if (f.size() > spec.lambdas.size())
    throw std::invalid_argument("transform: more modes than spectrum entries");
  if (!spec.multiplicities.empty() && spec.multiplicities.size() < f.size())
    throw std::invalid_argument("transform: multiplicity list shorter than mode set");
  check_simple_zero_mode(spec);
  for (const auto& m : f.modes)
    if (static_cast<int>(m.size()) != g.size())
      throw std::invalid_argument("transform: mode sample count does not match the grid");
}

void check_sample(const ModeSpectrum& spec, const SpectralSample& psi) {
  if (psi.regular.empty()) throw std::invalid_argument("transform: empty spectral sample");
  if (psi.regular.size() > spec.lambdas.size())
    throw std::invalid_argument("transform: more sample entries than spectrum entries");
  if (!spec.multiplicities.empty() && spec.multiplicities.size() < psi.regular.size())
    throw std::invalid_argument("transform: multiplicity list shorter than sample");
  check_simple_zero_mode(spec);
}

// Kontorovich-Lebedev prefactor (2 k sinh(k pi))^{1/2} / pi.
double kl_prefactor(double k) { return std::sqrt(2.0 * k * std::sinh(k * M_PI)) / M_PI; }

}  // namespace

KGrid KGrid::make(double k_min, double k_max, int nk) {
  if (!(k_min > 0.0) || !(k_max > k_min) || nk < 2)
    throw std::invalid_argument("KGrid: needs 0 < k_min < k_max and nk >= 2");
  KGrid kg;
  kg.k_min = k_min;
  kg.k_max = k_max;
  kg.nk = nk;
  return kg;
}

double KGrid::weight(int i) const {
  const double dk = (k_max - k_min) / (nk - 1);
  return (i == 0 || i == nk - 1) ? 0.5 * dk : dk;
}

// K_{ik}(x) = int_0^inf exp(-x cosh u) cos(ku) du. The scaled integrand
// exp(-x(cosh u - 1)) cos(ku) extends to an even entire function of u, so the
// uniform trapezoid converges spectrally; the step resolves both the cos(ku)
// oscillation and the exp decay scale 1/sqrt(x), and the range caps the decay
// at exp(-45). cosh u - 1 is evaluated as 2 sinh^2(u/2) to keep the exponent
// accurate for small steps.
double kl_kernel(double k, double x) {
  if (!(k > 0.0) || !(x > 0.0))
    throw std::invalid_argument("kl_kernel: requires k > 0 and x > 0");
  const double du = std::min({0.04, 0.35 / std::max(k, 1.0), 0.2 / std::sqrt(x)});
  const double u_max = std::acosh(1.0 + 45.0 / x);
  const int nseg = std::max(4, static_cast<int>(std::ceil(u_max / du)));
  const double step = u_max / nseg;
  const double sh_end = std::sinh(0.5 * u_max);
  double acc = 0.5 * (1.0 + std::exp(-2.0 * x * sh_end * sh_end) * std::cos(k * u_max));
  for (int j = 1; j < nseg; ++j) {
    const double u = j * step;
    const double sh = std::sinh(0.5 * u);
    acc += std::exp(-2.0 * x * sh * sh) * std::cos(k * u);
  }
  return acc * step * std::exp(-x);
}

cplx fourier_mode0(const RadialGrid& g, const ModeSpectrum& spec, const ModeFunction& f0,
                   double k, Sign sign) {
  check_energy(k);
  if (static_cast<int>(f0.size()) != g.size())
    throw std::invalid_argument("fourier_mode0: sample count does not match the grid");
  const double s = sign_of(sign);
  cplx acc{0.0, 0.0};
  for (int i = 0; i < g.size(); ++i) {
    const double t = g.t(i);
    // y^{1 + s i k} at y = e^{-t}
    acc += g.weight(i, spec.n) * std::exp(cplx(-t, -s * k * t)) * f0[i];
  }
  return acc / std::sqrt(kTwoPi);
}

cplx fourier_cusp(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& f, double k,
                  Sign sign) {
  check_mode_set(g, spec, f);
  return fourier_mode0(g, spec, f.modes[0], k, flipped(sign)) / std::sqrt(spec.volume);
}

std::vector<cplx> fourier_regular(const RadialGrid& g, const ModeSpectrum& spec,
                                  const ModeSet& f, double k, Sign sign) {
  check_energy(k);
  check_mode_set(g, spec, f);
  const double a = 0.5 * (spec.n - 1);
  const double c = kl_prefactor(k);
  std::vector<cplx> out(f.size());
  for (std::size_t m = 0; m < f.size(); ++m) {
    if (spec.lambdas[m] == 0.0) {
      out[m] = fourier_mode0(g, spec, f.modes[m], k, sign);
      continue;
    }
    const double zeta = std::sqrt(spec.lambdas[m]);
    cplx acc{0.0, 0.0};
    for (int i = 0; i < g.size(); ++i) {
      const double t = g.t(i);
      acc += g.weight(i, spec.n) * std::exp(-a * t) * kl_kernel(k, zeta * g.y(i)) * f.modes[m][i];
    }
    out[m] = c * acc;
  }
  return out;
}

SpectralData forward(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& f,
                     const KGrid& kg, Sign sign) {
  check_mode_set(g, spec, f);
  SpectralData data;
  data.grid = kg;
  data.samples.resize(kg.size());
  for (int i = 0; i < kg.size(); ++i) {
    const double k = kg.k(i);
    data.samples[i].cusp = fourier_cusp(g, spec, f, k, sign);
    data.samples[i].regular = fourier_regular(g, spec, f, k, sign);
  }
  return data;
}

double spectral_norm(const ModeSpectrum& spec, const SpectralData& data) {
  if (static_cast<int>(data.samples.size()) != data.grid.size())
    throw std::invalid_argument("spectral_norm: sample count does not match the k grid");
  double acc = 0.0;
  for (int i = 0; i < data.grid.size(); ++i) {
    const SpectralSample& s = data.samples[i];
    check_sample(spec, s);
    double density = std::norm(s.cusp);
    for (std::size_t m = 0; m < s.regular.size(); ++m)
      density += spec.mult(m) * std::norm(s.regular[m]);
    acc += data.grid.weight(i) * density;
  }
  return std::sqrt(acc);
}

ModeSet adjoint_eigenfunction(const RadialGrid& g, const ModeSpectrum& spec, double k,
                              const SpectralSample& psi, Sign sign) {
  check_energy(k);
  check_sample(spec, psi);
  const double s = sign_of(sign);
  const double a = 0.5 * (spec.n - 1);
  const double c = kl_prefactor(k);
  const double inv_root2pi = 1.0 / std::sqrt(kTwoPi);
  const double inv_vroot = 1.0 / std::sqrt(spec.volume);
  ModeSet u;
  u.modes.assign(psi.regular.size(), ModeFunction(g.size()));
  for (int i = 0; i < g.size(); ++i) {
    const double t = g.t(i);
    for (std::size_t m = 0; m < psi.regular.size(); ++m) {
      if (spec.lambdas[m] == 0.0) {
        // conjugate of the forward power kernel: y^{1 - s i k}
        u.modes[m][i] = inv_root2pi * std::exp(cplx(-t, s * k * t)) * psi.regular[m];
      } else {
        const double zeta = std::sqrt(spec.lambdas[m]);
        u.modes[m][i] = c * std::exp(-a * t) * kl_kernel(k, zeta * g.y(i)) * psi.regular[m];
      }
    }
    // conjugate of the cusp kernel lands in mode zero: y^{1 + s i k} / sqrt(V)
    u.modes[0][i] += inv_root2pi * inv_vroot * std::exp(cplx(-t, -s * k * t)) * psi.cusp;
  }
  return u;
}

ModeSet synthesize(const RadialGrid& g, const ModeSpectrum& spec, const SpectralData& data,
                   Sign sign) {
  if (static_cast<int>(data.samples.size()) != data.grid.size())
    throw std::invalid_argument("synthesize: sample count does not match the k grid");
  if (data.samples.empty()) throw std::invalid_argument("synthesize: empty spectral data");
  ModeSet acc;
  acc.modes.assign(data.samples[0].regular.size(), ModeFunction(g.size()));
  for (int i = 0; i < data.grid.size(); ++i) {
    const ModeSet e = adjoint_eigenfunction(g, spec, data.grid.k(i), data.samples[i], sign);
    if (e.size() != acc.size())
      throw std::invalid_argument("synthesize: ragged spectral data");
    const double w = data.grid.weight(i);
    for (std::size_t m = 0; m < acc.size(); ++m)
      for (int j = 0; j < g.size(); ++j) acc.modes[m][j] += w * e.modes[m][j];
  }
  return acc;
}

ParsevalReport parseval_check(const RadialGrid& g, const ModeSpectrum& spec, const ModeSet& f,
                              const KGrid& kg, Sign sign) {
  check_mode_set(g, spec, f);
  ParsevalReport rep;
  rep.input_norm = std::sqrt(std::max(0.0, modelspace::inner_product(g, spec, f, f).real()));
  const SpectralData data = forward(g, spec, f, kg, sign);
  rep.transform_norm = spectral_norm(spec, data);
  rep.defect = rep.input_norm > 0.0
                   ? std::abs(rep.transform_norm - rep.input_norm) / rep.input_norm
                   : rep.transform_norm;
  const std::size_t last = f.size() - 1;
  double tail = 0.0;
  for (int i = 0; i < kg.size(); ++i)
    tail += kg.weight(i) * spec.mult(last) * std::norm(data.samples[i].regular[last]);
  const double total = rep.transform_norm * rep.transform_norm;
  rep.tail_fraction = total > 0.0 ? tail / total : 0.0;
  return rep;
}

}  // namespace orbscat::transform
