#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "orbscat/mobius.hpp"
#include "orbscat/rational.hpp"

// Exact data for the Picard group PSL(2, Z[i]) acting on upper half-space:
// the standard fundamental domain, its elliptic singular set, side pairings,
// and isotropy types, all over rational coordinates.
namespace orbscat::picard {

// --- Fundamental domain ---
//
// D = { (z,y) : |Re z| <= 1/2, 0 <= Im z <= 1/2, |z|^2 + y^2 >= 1 }.
// Boundary faces, with the planar and spherical pieces split along Re z = 0:
//   S1: Re z = -1/2          S2: Re z = 1/2
//   S3: Im z = 0,  Re z <= 0 S4: Im z = 0,  Re z >= 0
//   S5: Im z = 1/2, Re z <= 0 S6: Im z = 1/2, Re z >= 0
//   S7: |z|^2 + y^2 = 1, Re z <= 0   S8: |z|^2 + y^2 = 1, Re z >= 0

struct DomainQuery {
  bool inside = false;
  std::vector<std::string> faces;  // labels "S1".."S8" the point lies on
};

DomainQuery in_domain(const H3PointQ& p);

// --- Fixed-set geometry ---

// Vertical ray { z = z0, y^2 >= y2min } (y2min where the ray enters D).
struct VerticalRay {
  Qi z0;
  Rat y2min;
  friend bool operator==(const VerticalRay&, const VerticalRay&) = default;
};

// Arc of a circle on the unit sphere |z|^2 + y^2 = 1 with one coordinate of z
// pinned: re_fixed ? Re z = value : Im z = value, free coordinate in
// [free_lo, free_hi] and y^2 = 1 - value^2 - u^2 > 0 throughout.
struct SphereArc {
  bool re_fixed = true;
  Rat value;
  Rat free_lo, free_hi;
  friend bool operator==(const SphereArc&, const SphereArc&) = default;
};

// Isolated fixed point in D.
struct PointFix {
  Qi z;
  Rat y2;
  friend bool operator==(const PointFix&, const PointFix&) = default;
};

using FixedSet = std::variant<VerticalRay, SphereArc, PointFix>;

// Evaluate a point of the fixed set at a rational parameter, for exact
// fixed-point checks. Rays take y^2 = y2min + s, arcs take u = free_lo +
// s*(free_hi - free_lo) (s in [0,1]), points ignore s.
H3PointQ sample_fixed_set(const FixedSet& fs, const Rat& s);

// --- Singular segments ---

struct Segment {
  std::string name;  // "L13", "L34", ...
  FixedSet geom;
};

// The thirteen closed singular segments of the boundary of D.
const std::vector<Segment>& singular_segments();

// Exact membership of a point in a segment's closed geometry.
bool segment_contains(const Segment& s, const H3PointQ& p);

// --- Singular set enumeration ---

// One elliptic element (determinant 1, entries in Z[i], sign-normalized)
// whose fixed set meets D, together with that intersection and the names of
// the singular segments it covers.
struct SingularRow {
  MatQ g;
  FixedSet fixed;
  std::vector<std::string> segments;
};

// Enumerates every elliptic element of PSL(2,Z[i]) whose fixed-point set
// meets D (inverse pairs listed separately, matrices normalized so c = 0 has
// d = i, otherwise Re c > 0 or (Re c = 0, Im c > 0)). Rows are sorted by
// (|c|^2, c, d, trace, b). The scan covers |c|^2 <= 2 and |d|^2 <= 2; these
// bounds are forced by y^2 >= 1/2 on D.
std::vector<SingularRow> enumerate_singular_set();

// The canonical 6 + 14 + 4 rows in table order. Every returned row is drawn
// from enumerate_singular_set() by exact entry match; the enumeration's
// remaining rows are inverses of canonical ones (see inverse_complement_rows).
// Throws logic_error if the enumeration fails to reproduce a canonical row.
std::vector<SingularRow> tabulated_rows();

// Rows found by the exact scan beyond the canonical ones. Each equals, up to
// overall sign, the inverse of some canonical row.
std::vector<SingularRow> inverse_complement_rows();

// --- Identifications and isotropy ---

// Image of a named segment under a group element, identified among the
// thirteen segments; nullopt if the image is not one of them.
std::optional<std::string> map_segment(const MatQ& g, const std::string& name);

struct Identification {
  std::string from, to;
  MatQ via;
};

// The side-pairing images of all thirteen segments: five glued pairs plus
// three segments mapped to themselves.
std::vector<Identification> segment_identifications();

struct IsotropyClass {
  std::string name;                   // "C1".."C8"
  std::vector<std::string> segments;  // members of the interior equivalence class
  MatQ generator;
  int order;
};

// The eight equivalence classes of singular segments in the quotient and a
// generator of the isotropy group of the associated cone geodesic.
const std::vector<IsotropyClass>& isotropy_classes();

// --- Side pairings ---

struct SidePairing {
  std::string face_from, face_to;
  MatQ g;
};

const std::vector<SidePairing>& side_pairings();

// Rational points on a boundary face, for exact side-pairing verification.
// Returns n distinct points lying on the named face (and in D).
std::vector<H3PointQ> face_sample(const std::string& face, int n);

// --- Modular group example on the upper half-plane ---

struct H2EllipticDatum {
  MatQ g;              // real entries, determinant 1
  int order = 0;       // order in PSL(2,Z)
  // Fixed point p in H2 as a root of c p^2 + (d-a) p - b = 0; min_poly holds
  // the monic rational quadratic p^2 + m1 p + m0 satisfied by p (exact), and
  // fixed_point the numeric value in the upper half-plane.
  Rat min_poly_m1, min_poly_m0;
  std::complex<double> fixed_point;
};

// The three conjugacy classes of elliptic fixed points of PSL(2,Z):
// i (order 2), exp(i pi/3) and exp(2 i pi/3) (order 3).
std::vector<H2EllipticDatum> sl2z_elliptic_points();

// --- Generators ---

struct Generators {
  MatQ gamma1, gamma2, gamma3;  // [[1,0],[1,1]], [[0,-1],[1,0]], [[1,0],[i,1]]
  MatQ g1, g2, g3, h;           // alternate system; h is the unit translation
};

const Generators& group_generators();

}  // namespace orbscat::picard
