#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "orbscat/mobius.hpp"
#include "orbscat/picard.hpp"

using namespace orbscat;
using std::complex;

namespace {

MatQ mat(long long are, long long aim, long long bre, long long bim, long long cre, long long cim,
         long long dre, long long dim) {
  return MatQ(Qi(Rat(are), Rat(aim)), Qi(Rat(bre), Rat(bim)), Qi(Rat(cre), Rat(cim)),
              Qi(Rat(dre), Rat(dim)));
}

std::vector<MatQ> generator_pool() {
  const auto& g = picard::group_generators();
  std::vector<MatQ> pool = {g.gamma1, g.gamma2, g.gamma3, g.h, g.g1, g.g2, g.g3};
  size_t n = pool.size();
  for (size_t i = 0; i < n; ++i) pool.push_back(pool[i].inv_unimodular());
  return pool;
}

MatQ random_word(std::mt19937& rng, const std::vector<MatQ>& pool, int max_len = 6) {
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  MatQ w = MatQ::identity();
  int L = len(rng);
  for (int i = 0; i < L; ++i) w = w * pool[pick(rng)];
  return w;
}

H3PointQ random_point(std::mt19937& rng) {
  std::uniform_int_distribution<long long> num(-3, 3);
  std::uniform_int_distribution<long long> den(1, 4);
  std::uniform_int_distribution<long long> ypos(1, 5);
  return H3PointQ{Qi(Rat(num(rng), den(rng)), Rat(num(rng), den(rng))),
                  Rat(ypos(rng), den(rng))};
}

double dist(complex<double> a, complex<double> b) { return std::abs(a - b); }

}  // namespace

TEST_CASE("classification of exact elements") {
  CHECK(classify(mat(1, 0, 0, 0, 0, 0, 1, 0)) == MobiusType::identity);
  CHECK(classify(mat(-1, 0, 0, 0, 0, 0, -1, 0)) == MobiusType::identity);
  CHECK(classify(mat(0, 0, -1, 0, 1, 0, 0, 0)) == MobiusType::elliptic);
  CHECK(classify(mat(1, 0, 1, 0, 0, 0, 1, 0)) == MobiusType::parabolic);
  CHECK(classify(mat(2, 0, 1, 0, 1, 0, 1, 0)) == MobiusType::hyperbolic);
  CHECK(classify(mat(1, 1, 0, 1, 1, 0, 1, 0)) == MobiusType::loxodromic);
  CHECK(classify(mat(0, -1, 0, 0, 0, 0, 0, 1)) == MobiusType::elliptic);
  CHECK_THROWS_AS(classify(mat(2, 0, 0, 0, 0, 0, 1, 0)), std::invalid_argument);
}

TEST_CASE("floating-point classification agrees with exact") {
  std::vector<MatQ> samples = {
      mat(1, 0, 0, 0, 0, 0, 1, 0),    mat(0, 0, -1, 0, 1, 0, 0, 0),
      mat(1, 0, 1, 0, 0, 0, 1, 0),    mat(2, 0, 1, 0, 1, 0, 1, 0),
      mat(1, 1, 0, 1, 1, 0, 1, 0),    mat(0, 0, -1, 0, 1, 0, -1, 0),
      mat(-1, 0, -1, 0, 1, 0, 0, 0),  mat(0, -1, 0, 0, 0, 1, 0, 1),
  };
  for (const auto& g : samples) CHECK(classify(to_complex(g)) == classify(g));
}

TEST_CASE("orders of elliptic elements") {
  CHECK(elliptic_order(mat(0, 0, -1, 0, 1, 0, 0, 0)) == 2);
  CHECK(elliptic_order(mat(0, 0, -1, 0, 1, 0, -1, 0)) == 3);
  CHECK(elliptic_order(mat(-1, 0, -1, 0, 1, 0, 0, 0)) == 3);
  CHECK(elliptic_order(mat(0, -1, 0, 0, 0, 0, 0, 1)) == 2);
  CHECK(elliptic_order(mat(0, 1, -1, 0, 0, 0, 0, -1)) == 2);
  CHECK(elliptic_order(mat(1, 0, 1, 0, 0, 0, 1, 0)) == 0);  // parabolic
}

TEST_CASE("half-plane action") {
  MatC shift = to_complex(mat(1, 0, 1, 0, 0, 0, 1, 0));
  CHECK(dist(act_h2(shift, {0.0, 1.0}), {1.0, 1.0}) < 1e-15);

  MatC inv = to_complex(mat(0, 0, -1, 0, 1, 0, 0, 0));
  CHECK(dist(act_h2(inv, {0.0, 1.0}), {0.0, 1.0}) < 1e-15);
  CHECK(dist(act_h2(inv, {0.0, 2.0}), {0.0, 0.5}) < 1e-15);

  MatQ inv_q = mat(0, 0, -1, 0, 1, 0, 0, 0);
  Qi img = act_h2(inv_q, Qi(Rat(0), Rat(2)));
  CHECK(img == Qi(Rat(0), Rat(1, 2)));
  CHECK_THROWS_AS(act_h2(mat(0, -1, 0, 0, 0, 0, 0, 1), Qi(Rat(0), Rat(1))),
                  std::invalid_argument);
}

TEST_CASE("half-space action closed forms") {
  // Unit horizontal translation.
  MatQ h = mat(1, 0, 1, 0, 0, 0, 1, 0);
  H3PointQ p{Qi(Rat(1, 3), Rat(1, 5)), Rat(7, 2)};
  H3PointQ hp = act_h3(h, p);
  CHECK(hp.z == Qi(Rat(4, 3), Rat(1, 5)));
  CHECK(hp.y2 == p.y2);

  // Inversion in the unit sphere: (z, y) -> (-conj z, y)/(|z|^2 + y^2).
  MatQ g1 = mat(0, 0, -1, 0, 1, 0, 0, 0);
  H3PointQ q{Qi(Rat(1, 2), Rat(1, 4)), Rat(2)};
  Rat D = q.z.norm2() + q.y2;
  H3PointQ g1q = act_h3(g1, q);
  CHECK(g1q.z == Qi(-q.z.re / D, q.z.im / D));
  CHECK(g1q.y2 == q.y2 / (D * D));

  // j is fixed by the inversion.
  H3PointQ j{Qi(Rat(0), Rat(0)), Rat(1)};
  CHECK(fixes_h3(g1, j));

  // Float backend agrees with the exact one.
  H3Point pf{{q.z.re.to_double(), q.z.im.to_double()}, std::sqrt(q.y2.to_double())};
  H3Point imgf = act_h3(to_complex(g1), pf);
  CHECK(dist(imgf.z, {g1q.z.re.to_double(), g1q.z.im.to_double()}) < 1e-15);
  CHECK(imgf.y == doctest::Approx(std::sqrt(g1q.y2.to_double())).epsilon(1e-14));
}

TEST_CASE("action is a homomorphism, exactly and in floating point") {
  std::mt19937 rng(20240521);
  auto pool = generator_pool();
  for (int trial = 0; trial < 1000; ++trial) {
    MatQ u = random_word(rng, pool);
    MatQ v = random_word(rng, pool);
    H3PointQ p = random_point(rng);
    H3PointQ lhs = act_h3(u * v, p);
    H3PointQ rhs = act_h3(u, act_h3(v, p));
    REQUIRE(lhs == rhs);

    H3Point pf{{p.z.re.to_double(), p.z.im.to_double()}, std::sqrt(p.y2.to_double())};
    H3Point lf = act_h3(to_complex(u * v), pf);
    H3Point rf = act_h3(to_complex(u), act_h3(to_complex(v), pf));
    REQUIRE(dist(lf.z, rf.z) < 1e-10);
    REQUIRE(std::abs(lf.y - rf.y) < 1e-10);
  }
}

TEST_CASE("sign invariance of the action") {
  std::mt19937 rng(7);
  auto pool = generator_pool();
  for (int trial = 0; trial < 200; ++trial) {
    MatQ g = random_word(rng, pool);
    H3PointQ p = random_point(rng);
    CHECK(act_h3(g, p) == act_h3(-g, p));
  }
}

TEST_CASE("classification is conjugation invariant") {
  std::mt19937 rng(11);
  auto pool = generator_pool();
  std::vector<MatQ> samples = {
      mat(0, 0, -1, 0, 1, 0, 0, 0), mat(1, 0, 1, 0, 0, 0, 1, 0),
      mat(2, 0, 1, 0, 1, 0, 1, 0),  mat(1, 1, 0, 1, 1, 0, 1, 0),
      mat(0, 0, -1, 0, 1, 0, -1, 0)};
  for (const auto& g : samples) {
    for (int trial = 0; trial < 50; ++trial) {
      MatQ h = random_word(rng, pool);
      CHECK(classify(h * g * h.inv_unimodular()) == classify(g));
    }
  }
}

TEST_CASE("metric pullback is the identity") {
  // Central-difference Jacobian of the action in coordinates (Re z, Im z, y);
  // the pulled-back metric tensor must match (dx^2 + dy^2 + dw^2)/w^2.
  auto pool = generator_pool();
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> coord(-0.9, 0.9);
  std::uniform_real_distribution<double> height(0.5, 2.0);

  for (int trial = 0; trial < 40; ++trial) {
    MatC g = to_complex(random_word(rng, pool, 4));
    double x[3] = {coord(rng), coord(rng), height(rng)};
    const double step = 1e-5;

    auto eval = [&](const double* u) {
      H3Point q = act_h3(g, H3Point{{u[0], u[1]}, u[2]});
      return std::array<double, 3>{q.z.real(), q.z.imag(), q.y};
    };

    double J[3][3];
    for (int k = 0; k < 3; ++k) {
      double up[3] = {x[0], x[1], x[2]};
      double dn[3] = {x[0], x[1], x[2]};
      up[k] += step;
      dn[k] -= step;
      auto fu = eval(up), fd = eval(dn);
      for (int m = 0; m < 3; ++m) J[m][k] = (fu[m] - fd[m]) / (2 * step);
    }

    auto f0 = eval(x);
    double w2 = f0[2] * f0[2];
    double y2 = x[2] * x[2];
    for (int k = 0; k < 3; ++k) {
      for (int l = 0; l < 3; ++l) {
        double pb = 0;
        for (int m = 0; m < 3; ++m) pb += J[m][k] * J[m][l] / w2;
        double expect = (k == l) ? 1.0 / y2 : 0.0;
        REQUIRE(std::abs(pb - expect) < 1e-6 * std::max(1.0, 1.0 / y2));
      }
    }
  }
}

TEST_CASE("boundary fixed points") {
  // Diagonal elliptic element: axis is the vertical line over 0.
  MatC g3 = to_complex(mat(0, -1, 0, 0, 0, 0, 0, 1));
  auto f = fixed_points_h3(g3);
  CHECK(f.has_infinity);
  REQUIRE(f.finite.size() == 1);
  CHECK(std::abs(f.finite[0]) < 1e-12);
  for (double y : {0.5, 1.0, 3.0})
    CHECK(h3_fixed_residual(g3, H3Point{{0, 0}, y}) < 1e-15);

  // Translation: boundary fixed point at infinity only.
  auto t = fixed_points_h3(to_complex(mat(1, 0, 1, 0, 0, 0, 1, 0)));
  CHECK(t.has_infinity);
  CHECK(t.finite.empty());

  // Elliptic with c != 0: both endpoints lie on Re = -1/2 and the unit circle.
  auto e = fixed_points_h3(to_complex(mat(0, 0, -1, 0, 1, 0, 1, 0)));
  CHECK(!e.has_infinity);
  REQUIRE(e.finite.size() == 2);
  for (auto z : e.finite) {
    CHECK(z.real() == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(std::abs(z) == doctest::Approx(1.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(fixed_points_h3(to_complex(mat(1, 0, 0, 0, 0, 0, 1, 0))),
                  std::invalid_argument);
  CHECK(elliptic_rotation_angle(to_complex(mat(0, 0, -1, 0, 1, 0, 0, 0))) ==
        doctest::Approx(3.14159265358979324).epsilon(1e-12));
}

TEST_CASE("cone exponent from the uniformizing chart") {
  // Log-log slope of the metric density against |zeta| approaches
  // -(2 - 2/n) near the cone point.
  auto slope_for = [](complex<double> p, int n) {
    EllipticChart chart{p, n};
    std::vector<double> lx, ly;
    for (int k = 0; k < 24; ++k) {
      double eps = std::pow(10.0, -6.0 + 3.0 * k / 23.0);
      // choose z so that |zeta| ~ eps: |T| ~ eps^(1/n), T'(p) = 1/(p - conj p)
      complex<double> dir = std::polar(1.0, 0.3 + 0.1 * k);
      complex<double> z = p + std::pow(eps, 1.0 / n) * std::abs(p - std::conj(p)) * dir;
      complex<double> zeta = chart.to_chart(z);
      if (std::abs(zeta) < 1e-300) continue;
      lx.push_back(std::log(std::abs(zeta)));
      ly.push_back(std::log(chart.metric_density(z)));
    }
    double n_ = static_cast<double>(lx.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
      sx += lx[i];
      sy += ly[i];
      sxx += lx[i] * lx[i];
      sxy += lx[i] * ly[i];
    }
    return (n_ * sxy - sx * sy) / (n_ * sxx - sx * sx);
  };

  CHECK(slope_for({0.0, 1.0}, 2) == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(slope_for({0.5, std::sqrt(3.0) / 2.0}, 3) == doctest::Approx(-4.0 / 3.0).epsilon(0.05));

  EllipticChart chart{{0.0, 1.0}, 2};
  CHECK(std::abs(chart.disk_coord({0.0, 1.0})) < 1e-15);
  CHECK(chart.cone_exponent() == doctest::Approx(1.0));
}
