#include "orbscat/mobius.hpp"

#include <cmath>
#include <stdexcept>

namespace orbscat {

MatC to_complex(const MatQ& g) {
  auto cv = [](const Qi& q) { return std::complex<double>(q.re.to_double(), q.im.to_double()); };
  return MatC(cv(g.a), cv(g.b), cv(g.c), cv(g.d));
}

std::string to_string(MobiusType t) {
  switch (t) {
    case MobiusType::identity: return "identity";
    case MobiusType::elliptic: return "elliptic";
    case MobiusType::parabolic: return "parabolic";
    case MobiusType::hyperbolic: return "hyperbolic";
    case MobiusType::loxodromic: return "loxodromic";
  }
  return "?";
}

MobiusType classify(const MatQ& g) {
  if (!(g.det() == Qi(1))) throw std::invalid_argument("classify: determinant must be 1");
  if (same_in_psl(g, MatQ::identity())) return MobiusType::identity;
  Qi t = g.tr();
  if (!t.is_real()) return MobiusType::loxodromic;
  Rat t2 = t.re * t.re;
  if (t2 < Rat(4)) return MobiusType::elliptic;
  if (t2 == Rat(4)) return MobiusType::parabolic;
  return MobiusType::hyperbolic;
}

MobiusType classify(const MatC& g, double tol) {
  std::complex<double> t = g.tr();
  double offdiag = std::abs(g.b) + std::abs(g.c);
  if (std::abs(g.a - 1.0) < tol && std::abs(g.d - 1.0) < tol && offdiag < tol) return MobiusType::identity;
  if (std::abs(g.a + 1.0) < tol && std::abs(g.d + 1.0) < tol && offdiag < tol) return MobiusType::identity;
  if (std::abs(t.imag()) > tol) return MobiusType::loxodromic;
  double at = std::abs(t.real());
  if (std::abs(at - 2.0) <= tol) return MobiusType::parabolic;
  return at < 2.0 ? MobiusType::elliptic : MobiusType::hyperbolic;
}

int elliptic_order(const MatQ& g, int max_order) {
  MatQ p = g;
  for (int n = 1; n <= max_order; ++n) {
    if (same_in_psl(p, MatQ::identity())) return n;
    p = p * g;
  }
  return 0;
}

std::complex<double> act_h2(const MatC& g, std::complex<double> z) {
  return (g.a * z + g.b) / (g.c * z + g.d);
}

Qi act_h2(const MatQ& g, const Qi& z) {
  if (!(g.a.is_real() && g.b.is_real() && g.c.is_real() && g.d.is_real()))
    throw std::invalid_argument("act_h2: matrix must have real entries");
  return (g.a * z + g.b) / (g.c * z + g.d);
}

H3Point act_h3(const MatC& g, const H3Point& p) {
  std::complex<double> num = (g.a * p.z + g.b) * std::conj(g.c * p.z + g.d) +
                             g.a * std::conj(g.c) * (p.y * p.y);
  double den = std::norm(g.c * p.z + g.d) + std::norm(g.c) * (p.y * p.y);
  return H3Point{num / den, p.y / den};
}

H3PointQ act_h3(const MatQ& g, const H3PointQ& p) {
  Qi cz_d = g.c * p.z + g.d;
  Rat den = cz_d.norm2() + g.c.norm2() * p.y2;
  if (den.is_zero()) throw std::domain_error("act_h3: image at infinity");
  Qi num = (g.a * p.z + g.b) * cz_d.conj() + g.a * g.c.conj() * p.y2;
  Qi dinv = Qi(Rat(1) / den);
  return H3PointQ{num * dinv, p.y2 / (den * den)};
}

BoundaryFixedPoints fixed_points_h3(const MatC& g, double tol) {
  if (classify(g) == MobiusType::identity)
    throw std::invalid_argument("fixed_points_h3: identity fixes everything");
  BoundaryFixedPoints out;
  if (std::abs(g.c) < tol) {
    out.has_infinity = true;
    if (std::abs(g.a - g.d) > tol) out.finite.push_back(g.b / (g.d - g.a));
    return out;
  }
  std::complex<double> t = g.tr();
  std::complex<double> disc = std::sqrt(t * t - 4.0);
  std::complex<double> r1 = (g.a - g.d + disc) / (2.0 * g.c);
  std::complex<double> r2 = (g.a - g.d - disc) / (2.0 * g.c);
  out.finite.push_back(r1);
  if (std::abs(r1 - r2) > tol) out.finite.push_back(r2);
  return out;
}

double h3_fixed_residual(const MatC& g, const H3Point& p) {
  H3Point q = act_h3(g, p);
  return std::abs(q.z - p.z) + std::abs(q.y - p.y);
}

double elliptic_rotation_angle(const MatC& g) {
  std::complex<double> t = g.tr();
  if (std::abs(t.imag()) > 1e-9 || std::abs(t.real()) >= 2.0)
    throw std::invalid_argument("elliptic_rotation_angle: element is not elliptic");
  return 2.0 * std::acos(t.real() / 2.0);
}

std::complex<double> EllipticChart::to_chart(std::complex<double> z) const {
  return std::pow(disk_coord(z), n);
}

double EllipticChart::metric_density(std::complex<double> z) const {
  // dzeta/dz = n T^(n-1) T' with T' = (p - conj p)/(z - conj p)^2.
  std::complex<double> T = disk_coord(z);
  std::complex<double> dT = (p - std::conj(p)) / ((z - std::conj(p)) * (z - std::conj(p)));
  std::complex<double> dzeta = static_cast<double>(n) * std::pow(T, n - 1) * dT;
  double m = std::abs(dzeta);
  return 1.0 / (m * m);
}

}  // namespace orbscat
