#include "orbscat/picard.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace orbscat::picard {

namespace {

Rat rr(long long n, long long d = 1) { return Rat(n, d); }
Qi gi(long long re, long long im) { return Qi(Rat(re), Rat(im)); }

const Rat kHalf(1, 2);
const Rat kOne(1);

Rat sphere_gap(const H3PointQ& p) { return p.z.norm2() + p.y2 - kOne; }

// Comparison key for deterministic row ordering; all entries are Gaussian
// integers, so the key is integral.
std::array<long long, 8> row_key(const MatQ& g) {
  auto v = [](const Rat& x) {
    if (!x.is_integer()) throw std::logic_error("non-integer singular row entry");
    return static_cast<long long>(x.num());
  };
  return {v(g.c.norm2()), v(g.c.re), v(g.c.im), v(g.d.re),
          v(g.d.im),      v(g.tr().re), v(g.b.re), v(g.b.im)};
}

FixedSet arc(bool re_fixed, Rat value, Rat lo, Rat hi) {
  return SphereArc{re_fixed, value, lo, hi};
}

}  // namespace

DomainQuery in_domain(const H3PointQ& p) {
  DomainQuery q;
  if (p.y2.sign() <= 0) throw std::invalid_argument("in_domain: y^2 must be positive");
  Rat re = p.z.re, im = p.z.im;
  if (re < -kHalf || re > kHalf) return q;
  if (im < Rat(0) || im > kHalf) return q;
  Rat gap = sphere_gap(p);
  if (gap.sign() < 0) return q;
  q.inside = true;
  if (re == -kHalf) q.faces.push_back("S1");
  if (re == kHalf) q.faces.push_back("S2");
  if (im.is_zero()) {
    if (re <= Rat(0)) q.faces.push_back("S3");
    if (re >= Rat(0)) q.faces.push_back("S4");
  }
  if (im == kHalf) {
    if (re <= Rat(0)) q.faces.push_back("S5");
    if (re >= Rat(0)) q.faces.push_back("S6");
  }
  if (gap.is_zero()) {
    if (re <= Rat(0)) q.faces.push_back("S7");
    if (re >= Rat(0)) q.faces.push_back("S8");
  }
  return q;
}

H3PointQ sample_fixed_set(const FixedSet& fs, const Rat& s) {
  if (const auto* ray = std::get_if<VerticalRay>(&fs)) {
    if (s.sign() < 0) throw std::invalid_argument("sample_fixed_set: s < 0");
    return H3PointQ{ray->z0, ray->y2min + s};
  }
  if (const auto* a = std::get_if<SphereArc>(&fs)) {
    if (s.sign() < 0 || s > kOne) throw std::invalid_argument("sample_fixed_set: s outside [0,1]");
    Rat u = a->free_lo + s * (a->free_hi - a->free_lo);
    Qi z = a->re_fixed ? Qi(a->value, u) : Qi(u, a->value);
    Rat y2 = kOne - z.norm2();
    if (y2.sign() <= 0) throw std::logic_error("sample_fixed_set: arc leaves upper half-space");
    return H3PointQ{z, y2};
  }
  const auto& pt = std::get<PointFix>(fs);
  return H3PointQ{pt.z, pt.y2};
}

const std::vector<Segment>& singular_segments() {
  static const std::vector<Segment> segs = {
      {"L13", VerticalRay{Qi(rr(-1, 2), rr(0)), rr(3, 4)}},
      {"L34", VerticalRay{Qi(rr(0), rr(0)), rr(1)}},
      {"L24", VerticalRay{Qi(rr(1, 2), rr(0)), rr(3, 4)}},
      {"L15", VerticalRay{Qi(rr(-1, 2), rr(1, 2)), rr(1, 2)}},
      {"L56", VerticalRay{Qi(rr(0), rr(1, 2)), rr(3, 4)}},
      {"L26", VerticalRay{Qi(rr(1, 2), rr(1, 2)), rr(1, 2)}},
      {"L17", arc(true, rr(-1, 2), rr(0), rr(1, 2))},
      {"L78", arc(true, rr(0), rr(0), rr(1, 2))},
      {"L28", arc(true, rr(1, 2), rr(0), rr(1, 2))},
      {"L37", arc(false, rr(0), rr(-1, 2), rr(0))},
      {"L48", arc(false, rr(0), rr(0), rr(1, 2))},
      {"L57", arc(false, rr(1, 2), rr(-1, 2), rr(0))},
      {"L68", arc(false, rr(1, 2), rr(0), rr(1, 2))},
  };
  return segs;
}

bool segment_contains(const Segment& s, const H3PointQ& p) {
  if (const auto* ray = std::get_if<VerticalRay>(&s.geom)) {
    return p.z == ray->z0 && p.y2 >= ray->y2min;
  }
  const auto& a = std::get<SphereArc>(s.geom);
  Rat pinned = a.re_fixed ? p.z.re : p.z.im;
  Rat u = a.re_fixed ? p.z.im : p.z.re;
  return pinned == a.value && u >= a.free_lo && u <= a.free_hi && sphere_gap(p).is_zero();
}

namespace {

std::vector<std::string> labels_for(const FixedSet& fs) {
  std::vector<std::string> out;
  const auto& segs = singular_segments();
  if (const auto* ray = std::get_if<VerticalRay>(&fs)) {
    for (const auto& s : segs)
      if (const auto* sr = std::get_if<VerticalRay>(&s.geom))
        if (*sr == *ray) out.push_back(s.name);
  } else if (const auto* a = std::get_if<SphereArc>(&fs)) {
    for (const auto& s : segs)
      if (const auto* sa = std::get_if<SphereArc>(&s.geom))
        if (sa->re_fixed == a->re_fixed && sa->value == a->value && sa->free_lo >= a->free_lo &&
            sa->free_hi <= a->free_hi)
          out.push_back(s.name);
  } else {
    const auto& pt = std::get<PointFix>(fs);
    H3PointQ p{pt.z, pt.y2};
    for (const auto& s : segs)
      if (segment_contains(s, p)) out.push_back(s.name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void verify_row_fixes_set(const SingularRow& row) {
  // Three parameters suffice to pin a geodesic; points need one.
  for (const Rat& s : {rr(0), rr(1, 3), rr(1)}) {
    H3PointQ p = sample_fixed_set(row.fixed, s);
    if (!in_domain(p).inside) throw std::logic_error("singular row leaves the domain");
    if (!fixes_h3(row.g, p)) throw std::logic_error("singular row does not fix its set");
    if (std::holds_alternative<PointFix>(row.fixed)) break;
  }
}

void emit(std::vector<SingularRow>& rows, MatQ g, FixedSet fs) {
  if (!(g.det() == Qi(1))) throw std::logic_error("enumerator produced det != 1");
  if (classify(g) != MobiusType::elliptic) throw std::logic_error("enumerator produced non-elliptic row");
  SingularRow row{g, std::move(fs), {}};
  row.segments = labels_for(row.fixed);
  verify_row_fixes_set(row);
  rows.push_back(std::move(row));
}

// Case |c| = 0: a = -i, d = i, translation part z -> -z - ib fixes the
// vertical line z = -ib/2.
void scan_c0(std::vector<SingularRow>& rows) {
  for (long long bre = -2; bre <= 2; ++bre) {
    for (long long bim = -2; bim <= 2; ++bim) {
      Qi b = gi(bre, bim);
      Qi z0 = Qi(rr(0), rr(-1, 2)) * b;  // -i b / 2
      if (z0.re < -kHalf || z0.re > kHalf) continue;
      if (z0.im < Rat(0) || z0.im > kHalf) continue;
      MatQ g(gi(0, -1), b, gi(0, 0), gi(0, 1));
      emit(rows, g, VerticalRay{z0, kOne - z0.norm2()});
    }
  }
}

// Case |c|^2 = 1: the fixed set lies on the unit hemisphere around
// w0 = -d conj(c) cut by a coordinate plane; within the domain it is either a
// full-width arc of the sphere |z|^2 + y^2 = 1 or a single rational point.
void scan_c1(std::vector<SingularRow>& rows) {
  for (const Qi c : {gi(1, 0), gi(0, 1)}) {
    bool re_fixed = c.im.is_zero();  // c = 1 pins Re z, c = i pins Im z
    for (long long dre = -1; dre <= 1; ++dre) {
      for (long long dim = -1; dim <= 1; ++dim) {
        for (long long t = -1; t <= 1; ++t) {
          Qi d = gi(dre, dim);
          Qi a = Qi(rr(t)) - d;
          Qi b = (a * d - Qi(1)) * c.conj();
          MatQ g(a, b, c, d);
          if (!(g.det() == Qi(1))) continue;

          Qi w0 = -d * c.conj();
          Rat p0 = w0.re, q0 = w0.im;
          Rat v = re_fixed ? p0 + rr(t, 2) : q0 - rr(t, 2);
          Rat vlo = re_fixed ? -kHalf : Rat(0);
          if (v < vlo || v > kHalf) continue;
          Rat m = re_fixed ? q0 : p0;
          Rat ulo = re_fixed ? Rat(0) : -kHalf;
          Rat rho2 = kOne - rr(t * t, 4);
          Rat kappa = m * m + rr(t * t, 4) - v * v;

          if (m.is_zero()) {
            // Arc on the unit sphere across the full admissible width.
            if (!kappa.is_zero()) throw std::logic_error("off-sphere arc candidate");
            emit(rows, g, arc(re_fixed, v, ulo, kHalf));
          } else {
            // 2 m u >= kappa meets the rectangle in at most one point.
            Rat ustar = kappa / (Rat(2) * m);
            if (ustar < ulo || ustar > kHalf) continue;
            Rat y2 = rho2 - (ustar - m) * (ustar - m);
            if (y2.sign() <= 0) continue;
            Qi z = re_fixed ? Qi(v, ustar) : Qi(ustar, v);
            emit(rows, g, PointFix{z, y2});
          }
        }
      }
    }
  }
}

// Case |c|^2 = 2: y^2 <= 1/2 on the fixed hemisphere while y^2 >= 1/2 on the
// domain, so only the apex (z, y^2) = (-d/c, 1/2) can occur, and fixedness
// there forces a = -d.
void scan_c2(std::vector<SingularRow>& rows) {
  for (const Qi c : {gi(1, 1), gi(1, -1)}) {
    for (long long dre = -1; dre <= 1; ++dre) {
      for (long long dim = -1; dim <= 1; ++dim) {
        Qi d = gi(dre, dim);
        if (d.is_zero()) continue;
        Qi a = -d;
        Qi num = (a * d - Qi(1)) * c.conj();  // b * |c|^2
        Qi b(num.re * kHalf, num.im * kHalf);
        if (!b.is_gaussian_integer()) continue;
        MatQ g(a, b, c, d);
        if (!(g.det() == Qi(1))) continue;
        Qi w0 = -d * c.conj();
        Qi z0(w0.re * kHalf, w0.im * kHalf);
        if (z0.re < -kHalf || z0.re > kHalf) continue;
        if (z0.im < Rat(0) || z0.im > kHalf) continue;
        if (z0.norm2() < kHalf) continue;  // below the unit sphere at y^2 = 1/2
        emit(rows, g, PointFix{z0, kHalf});
      }
    }
  }
}

const std::vector<std::array<std::array<long long, 2>, 4>>& canonical_tuples() {
  // (a, b, c, d) as (re, im) pairs, in table order: 6 vertical-line rows,
  // 14 unit-hemisphere rows, 4 double-norm rows.
  static const std::vector<std::array<std::array<long long, 2>, 4>> rows = {
      {{{0, -1}, {0, 0}, {0, 0}, {0, 1}}},
      {{{0, -1}, {-1, 0}, {0, 0}, {0, 1}}},
      {{{0, -1}, {0, -1}, {0, 0}, {0, 1}}},
      {{{0, -1}, {0, 1}, {0, 0}, {0, 1}}},
      {{{0, -1}, {-1, 1}, {0, 0}, {0, 1}}},
      {{{0, -1}, {-1, -1}, {0, 0}, {0, 1}}},
      {{{0, 0}, {-1, 0}, {1, 0}, {1, 0}}},
      {{{0, 0}, {-1, 0}, {1, 0}, {-1, 0}}},
      {{{-1, 1}, {0, 1}, {1, 0}, {0, -1}}},
      {{{0, 1}, {0, 0}, {1, 0}, {0, -1}}},
      {{{1, 1}, {0, -1}, {1, 0}, {0, -1}}},
      {{{-1, 0}, {-1, 0}, {1, 0}, {0, 0}}},
      {{{0, 0}, {-1, 0}, {1, 0}, {0, 0}}},
      {{{1, 0}, {-1, 0}, {1, 0}, {0, 0}}},
      {{{0, -1}, {0, 0}, {0, 1}, {0, 1}}},
      {{{-1, -1}, {-1, 0}, {0, 1}, {0, 1}}},
      {{{0, 1}, {0, 0}, {0, 1}, {0, -1}}},
      {{{-1, 1}, {1, 0}, {0, 1}, {0, -1}}},
      {{{0, 0}, {0, 1}, {0, 1}, {0, 0}}},
      {{{-1, 0}, {0, 1}, {0, 1}, {0, 0}}},
      {{{0, 1}, {0, 0}, {1, 1}, {0, -1}}},
      {{{-1, 0}, {-1, 1}, {1, 1}, {1, 0}}},
      {{{1, 0}, {-1, -1}, {1, -1}, {-1, 0}}},
      {{{0, 1}, {0, 0}, {1, -1}, {0, -1}}},
  };
  return rows;
}

MatQ tuple_to_mat(const std::array<std::array<long long, 2>, 4>& t) {
  return MatQ(gi(t[0][0], t[0][1]), gi(t[1][0], t[1][1]), gi(t[2][0], t[2][1]),
              gi(t[3][0], t[3][1]));
}

}  // namespace

std::vector<SingularRow> enumerate_singular_set() {
  std::vector<SingularRow> rows;
  scan_c0(rows);
  scan_c1(rows);
  scan_c2(rows);
  std::sort(rows.begin(), rows.end(),
            [](const SingularRow& x, const SingularRow& y) { return row_key(x.g) < row_key(y.g); });
  return rows;
}

std::vector<SingularRow> tabulated_rows() {
  auto all = enumerate_singular_set();
  std::vector<SingularRow> out;
  for (const auto& t : canonical_tuples()) {
    MatQ want = tuple_to_mat(t);
    auto it = std::find_if(all.begin(), all.end(),
                           [&](const SingularRow& r) { return r.g == want; });
    if (it == all.end()) throw std::logic_error("enumeration lost a canonical singular row");
    out.push_back(*it);
  }
  return out;
}

std::vector<SingularRow> inverse_complement_rows() {
  auto all = enumerate_singular_set();
  std::vector<SingularRow> out;
  for (const auto& r : all) {
    bool canonical = false;
    for (const auto& t : canonical_tuples())
      if (r.g == tuple_to_mat(t)) canonical = true;
    if (!canonical) out.push_back(r);
  }
  return out;
}

std::optional<std::string> map_segment(const MatQ& g, const std::string& name) {
  const auto& segs = singular_segments();
  const Segment* src = nullptr;
  for (const auto& s : segs)
    if (s.name == name) src = &s;
  if (!src) throw std::invalid_argument("map_segment: unknown segment " + name);

  const std::vector<Rat> params = {rr(0), rr(1, 3), rr(1), rr(7, 10)};
  MatQ ginv = g.inv_unimodular();
  for (const auto& cand : segs) {
    bool ok = true;
    for (const auto& s : params) {
      H3PointQ image = act_h3(g, sample_fixed_set(src->geom, s));
      if (!segment_contains(cand, image)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    // Reverse inclusion: candidate samples must pull back into the source.
    for (const auto& s : params) {
      H3PointQ back = act_h3(ginv, sample_fixed_set(cand.geom, s));
      if (!segment_contains(*src, back)) {
        ok = false;
        break;
      }
    }
    if (ok) return cand.name;
  }
  return std::nullopt;
}

std::vector<Identification> segment_identifications() {
  std::vector<Identification> out;
  for (const auto& sp : side_pairings()) {
    for (const auto& seg : singular_segments()) {
      for (const MatQ& g : {sp.g, sp.g.inv_unimodular()}) {
        auto img = map_segment(g, seg.name);
        if (!img) continue;
        std::string lo = std::min(seg.name, *img), hi = std::max(seg.name, *img);
        bool seen = false;
        for (const auto& id : out)
          if (id.from == lo && id.to == hi) seen = true;
        if (!seen) out.push_back({lo, hi, g});
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Identification& x, const Identification& y) { return x.from < y.from; });
  return out;
}

const std::vector<IsotropyClass>& isotropy_classes() {
  static const std::vector<IsotropyClass> classes = [] {
    std::vector<IsotropyClass> cs = {
        {"C1", {"L13", "L24"}, MatQ(gi(0, -1), gi(0, -1), gi(0, 0), gi(0, 1)), 0},
        {"C2", {"L15", "L26"}, MatQ(gi(0, -1), gi(-1, -1), gi(0, 0), gi(0, 1)), 0},
        {"C3", {"L34"}, MatQ(gi(0, -1), gi(0, 0), gi(0, 0), gi(0, 1)), 0},
        {"C4", {"L56"}, MatQ(gi(0, -1), gi(-1, 0), gi(0, 0), gi(0, 1)), 0},
        {"C5", {"L17", "L28"}, MatQ(gi(0, 0), gi(-1, 0), gi(1, 0), gi(1, 0)), 0},
        {"C6", {"L78"}, MatQ(gi(0, 0), gi(-1, 0), gi(1, 0), gi(0, 0)), 0},
        {"C7", {"L37", "L48"}, MatQ(gi(0, 0), gi(0, 1), gi(0, 1), gi(0, 0)), 0},
        {"C8", {"L57", "L68"}, MatQ(gi(-1, 0), gi(0, 1), gi(0, 1), gi(0, 0)), 0},
    };
    for (auto& c : cs) {
      c.order = elliptic_order(c.generator);
      if (c.order == 0) throw std::logic_error("isotropy generator is not of finite order");
    }
    return cs;
  }();
  return classes;
}

const std::vector<SidePairing>& side_pairings() {
  static const std::vector<SidePairing> sp = [] {
    const auto& g = group_generators();
    return std::vector<SidePairing>{
        {"S1", "S2", g.h},
        {"S3", "S4", g.g3},
        {"S5", "S6", g.g3 * g.g2 * g.g3},
        {"S7", "S8", g.g1},
    };
  }();
  return sp;
}

std::vector<H3PointQ> face_sample(const std::string& face, int n) {
  if (n < 1) throw std::invalid_argument("face_sample: n must be positive");
  std::vector<H3PointQ> pts;
  pts.reserve(static_cast<size_t>(n));
  // Rational sweep parameters s in (0,1), avoiding endpoints.
  auto sweep = [&](int k) { return rr(2 * k + 1, 2 * (n + 1)); };

  for (int k = 0; k < n; ++k) {
    Rat s = sweep(k);
    H3PointQ p;
    if (face == "S1" || face == "S2") {
      Rat re = (face == "S1") ? -kHalf : kHalf;
      Rat im = s * kHalf;
      p.z = Qi(re, im);
      p.y2 = kOne - p.z.norm2() + rr(k % 5, 3);  // on or above the sphere
    } else if (face == "S3" || face == "S4" || face == "S5" || face == "S6") {
      Rat im = (face == "S3" || face == "S4") ? Rat(0) : kHalf;
      Rat re = s * kHalf;
      if (face == "S3" || face == "S5") re = -re;
      p.z = Qi(re, im);
      p.y2 = kOne - p.z.norm2() + rr(k % 5, 3);
    } else if (face == "S7" || face == "S8") {
      Rat re = s * kHalf;
      if (face == "S7") re = -re;
      Rat im = rr(k % 3 + 1, 8);  // within [0, 1/2]
      p.z = Qi(re, im);
      p.y2 = kOne - p.z.norm2();
    } else {
      throw std::invalid_argument("face_sample: unknown face " + face);
    }
    if (!in_domain(p).inside) throw std::logic_error("face_sample produced an exterior point");
    pts.push_back(p);
  }
  return pts;
}

std::vector<H2EllipticDatum> sl2z_elliptic_points() {
  auto mk = [](long long a, long long b, long long c, long long d) {
    return MatQ(gi(a, 0), gi(b, 0), gi(c, 0), gi(d, 0));
  };
  std::vector<H2EllipticDatum> out;

  H2EllipticDatum at_i;
  at_i.g = mk(0, -1, 1, 0);
  at_i.min_poly_m1 = Rat(0);
  at_i.min_poly_m0 = Rat(1);  // p^2 + 1
  at_i.fixed_point = {0.0, 1.0};
  out.push_back(at_i);

  H2EllipticDatum at_pi3;
  at_pi3.g = mk(0, -1, 1, -1);
  at_pi3.min_poly_m1 = Rat(-1);
  at_pi3.min_poly_m0 = Rat(1);  // p^2 - p + 1
  at_pi3.fixed_point = {0.5, std::sqrt(3.0) / 2.0};
  out.push_back(at_pi3);

  H2EllipticDatum at_2pi3;
  at_2pi3.g = mk(-1, -1, 1, 0);
  at_2pi3.min_poly_m1 = Rat(1);
  at_2pi3.min_poly_m0 = Rat(1);  // p^2 + p + 1
  at_2pi3.fixed_point = {-0.5, std::sqrt(3.0) / 2.0};
  out.push_back(at_2pi3);

  for (auto& e : out) {
    e.order = elliptic_order(e.g);
    // The fixed-point quadratic c p^2 + (d-a) p - b must be proportional to
    // the stored monic polynomial.
    Rat c = e.g.c.re, m1 = (e.g.d - e.g.a).re / c, m0 = (-e.g.b).re / c;
    if (!(m1 == e.min_poly_m1 && m0 == e.min_poly_m0))
      throw std::logic_error("sl2z elliptic datum has inconsistent minimal polynomial");
  }
  return out;
}

const Generators& group_generators() {
  static const Generators gens = [] {
    Generators g;
    g.gamma1 = MatQ(gi(1, 0), gi(0, 0), gi(1, 0), gi(1, 0));
    g.gamma2 = MatQ(gi(0, 0), gi(-1, 0), gi(1, 0), gi(0, 0));
    g.gamma3 = MatQ(gi(1, 0), gi(0, 0), gi(0, 1), gi(1, 0));
    g.g1 = MatQ(gi(0, 0), gi(-1, 0), gi(1, 0), gi(0, 0));
    g.g2 = MatQ(gi(0, 1), gi(-1, 0), gi(0, 0), gi(0, -1));
    g.g3 = MatQ(gi(0, -1), gi(0, 0), gi(0, 0), gi(0, 1));
    g.h = MatQ(gi(1, 0), gi(1, 0), gi(0, 0), gi(1, 0));
    return g;
  }();
  return gens;
}

}  // namespace orbscat::picard
