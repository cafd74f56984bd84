#pragma once

#include <complex>
#include <string>
#include <vector>

#include "orbscat/rational.hpp"

namespace orbscat {

namespace detail {
inline Qi scalar_conj(const Qi& x) { return x.conj(); }
inline std::complex<double> scalar_conj(const std::complex<double>& x) { return std::conj(x); }
}  // namespace detail

// 2x2 matrix acting on hyperbolic 2- and 3-space by fractional-linear
// transformations. S is either Qi (exact) or std::complex<double>.
template <class S>
struct Mat2 {
  S a{}, b{}, c{}, d{};

  Mat2() = default;
  Mat2(S a_, S b_, S c_, S d_) : a(a_), b(b_), c(c_), d(d_) {}

  static Mat2 identity() { return Mat2(S(1), S(0), S(0), S(1)); }

  S det() const { return a * d - b * c; }
  S tr() const { return a + d; }

  friend Mat2 operator*(const Mat2& x, const Mat2& y) {
    return Mat2(x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
                x.c * y.b + x.d * y.d);
  }
  Mat2 operator-() const { return Mat2(-a, -b, -c, -d); }

  // Inverse of a determinant-one matrix.
  Mat2 inv_unimodular() const { return Mat2(d, -b, -c, a); }

  friend bool operator==(const Mat2&, const Mat2&) = default;
};

using MatQ = Mat2<Qi>;
using MatC = Mat2<std::complex<double>>;

MatC to_complex(const MatQ& g);

// Projective equality g == +-h.
inline bool same_in_psl(const MatQ& g, const MatQ& h) { return g == h || g == -h; }

enum class MobiusType { identity, elliptic, parabolic, hyperbolic, loxodromic };

std::string to_string(MobiusType t);

// Exact classification of a determinant-one element.
MobiusType classify(const MatQ& g);
// Floating-point classification; tol bounds both the imaginary part of the
// trace and the distance of |tr| from 2.
MobiusType classify(const MatC& g, double tol = 1e-10);

// Smallest n >= 1 with g^n == +-identity, or 0 if none up to max_order.
int elliptic_order(const MatQ& g, int max_order = 24);

// --- Upper half-plane action (real entries) ---

std::complex<double> act_h2(const MatC& g, std::complex<double> z);
// Exact variant; throws if g has a non-real entry.
Qi act_h2(const MatQ& g, const Qi& z);

// --- Upper half-space action ---

struct H3Point {
  std::complex<double> z;
  double y = 1.0;
};

H3Point act_h3(const MatC& g, const H3Point& p);
H3PointQ act_h3(const MatQ& g, const H3PointQ& p);

inline bool fixes_h3(const MatQ& g, const H3PointQ& p) { return act_h3(g, p) == p; }

// Fixed points of the boundary action on C u {infinity}.
struct BoundaryFixedPoints {
  bool has_infinity = false;
  std::vector<std::complex<double>> finite;
};

BoundaryFixedPoints fixed_points_h3(const MatC& g, double tol = 1e-12);

// Residual |act(g,p) - p| in the (z, y) chart, for numeric fixedness tests.
double h3_fixed_residual(const MatC& g, const H3Point& p);

// Rotation angle of an elliptic element around its axis, from the argument
// of the eigenvalue pair: tr = 2 cos(theta), angle = 2 theta in (0, 2 pi).
double elliptic_rotation_angle(const MatC& g);

// Local uniformizing coordinate at an elliptic fixed point p in the upper
// half-plane, for a stabilizer of order n. The disk coordinate is
// T(z) = (z - p)/(z - conj p) and the chart coordinate is zeta = T(z)^n;
// metric_density returns |dz/dzeta|^2, which blows up like
// |zeta|^(-(2 - 2/n)) at the cone point.
struct EllipticChart {
  std::complex<double> p;
  int n = 2;

  std::complex<double> disk_coord(std::complex<double> z) const { return (z - p) / (z - std::conj(p)); }
  std::complex<double> to_chart(std::complex<double> z) const;
  double metric_density(std::complex<double> z) const;
  double cone_exponent() const { return 2.0 - 2.0 / static_cast<double>(n); }
};

}  // namespace orbscat
