#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace orbscat {

// Exact rational arithmetic on a 128-bit backbone.
//
// Group-theory paths (matrix entries, fundamental-domain data) keep values
// tiny, but composing many transformations can square denominators, so every
// product is overflow-checked and throws instead of silently wrapping.

namespace detail {

inline __int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

inline __int128 add_checked(__int128 a, __int128 b) {
  __int128 r;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("rational add overflow");
  return r;
}

inline __int128 sub_checked(__int128 a, __int128 b) {
  __int128 r;
  if (__builtin_sub_overflow(a, b, &r)) throw std::overflow_error("rational sub overflow");
  return r;
}

inline __int128 mul_checked(__int128 a, __int128 b) {
  __int128 r;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("rational mul overflow");
  return r;
}

std::string int128_to_string(__int128 v);

}  // namespace detail

class Rat {
 public:
  constexpr Rat() : num_(0), den_(1) {}
  Rat(long long n) : num_(n), den_(1) {}  // NOLINT: implicit by design
  Rat(long long n, long long d) : num_(n), den_(d) { normalize(); }

  static Rat from128(__int128 n, __int128 d) {
    Rat r;
    r.num_ = n;
    r.den_ = d;
    r.normalize();
    return r;
  }

  __int128 num() const { return num_; }
  __int128 den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_integer() const { return den_ == 1; }
  int sign() const { return num_ > 0 ? 1 : (num_ < 0 ? -1 : 0); }

  friend Rat operator+(const Rat& x, const Rat& y) {
    using namespace detail;
    __int128 g = gcd128(x.den_, y.den_);
    __int128 xb = x.den_ / g;
    __int128 yb = y.den_ / g;
    __int128 n = add_checked(mul_checked(x.num_, yb), mul_checked(y.num_, xb));
    __int128 d = mul_checked(x.den_, yb);
    return from128(n, d);
  }
  friend Rat operator-(const Rat& x, const Rat& y) { return x + (-y); }
  friend Rat operator*(const Rat& x, const Rat& y) {
    using namespace detail;
    __int128 g1 = gcd128(x.num_ < 0 ? -x.num_ : x.num_, y.den_);
    __int128 g2 = gcd128(y.num_ < 0 ? -y.num_ : y.num_, x.den_);
    Rat r;
    r.num_ = mul_checked(x.num_ / (g1 ? g1 : 1), y.num_ / (g2 ? g2 : 1));
    r.den_ = mul_checked(x.den_ / (g2 ? g2 : 1), y.den_ / (g1 ? g1 : 1));
    return r;
  }
  friend Rat operator/(const Rat& x, const Rat& y) {
    if (y.num_ == 0) throw std::domain_error("rational division by zero");
    Rat inv;
    inv.num_ = y.den_;
    inv.den_ = y.num_;
    if (inv.den_ < 0) {
      inv.num_ = -inv.num_;
      inv.den_ = -inv.den_;
    }
    return x * inv;
  }
  Rat operator-() const {
    Rat r;
    r.num_ = -num_;
    r.den_ = den_;
    return r;
  }
  Rat& operator+=(const Rat& y) { return *this = *this + y; }
  Rat& operator-=(const Rat& y) { return *this = *this - y; }
  Rat& operator*=(const Rat& y) { return *this = *this * y; }
  Rat& operator/=(const Rat& y) { return *this = *this / y; }

  friend bool operator==(const Rat& x, const Rat& y) {
    return x.num_ == y.num_ && x.den_ == y.den_;
  }
  friend std::strong_ordering operator<=>(const Rat& x, const Rat& y) {
    __int128 lhs = detail::mul_checked(x.num_, y.den_);
    __int128 rhs = detail::mul_checked(y.num_, x.den_);
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  double to_double() const {
    return static_cast<double>(static_cast<long double>(num_) / static_cast<long double>(den_));
  }

  std::string str() const;

 private:
  __int128 num_;
  __int128 den_;

  void normalize() {
    if (den_ == 0) throw std::domain_error("rational with zero denominator");
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    __int128 g = detail::gcd128(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }
};

inline Rat abs(const Rat& x) { return x.sign() < 0 ? -x : x; }

// Gaussian rational re + im*i.
struct Qi {
  Rat re;
  Rat im;

  constexpr Qi() = default;
  Qi(Rat r) : re(r), im(0) {}  // NOLINT: implicit by design
  Qi(long long r) : re(r), im(0) {}
  Qi(Rat r, Rat i) : re(r), im(i) {}

  static Qi unit_i() { return Qi(Rat(0), Rat(1)); }

  bool is_zero() const { return re.is_zero() && im.is_zero(); }
  bool is_real() const { return im.is_zero(); }
  bool is_gaussian_integer() const { return re.is_integer() && im.is_integer(); }

  Qi conj() const { return Qi(re, -im); }
  Rat norm2() const { return re * re + im * im; }
  Qi inv() const {
    Rat n = norm2();
    if (n.is_zero()) throw std::domain_error("inverse of zero Gaussian rational");
    return Qi(re / n, -im / n);
  }

  friend Qi operator+(const Qi& x, const Qi& y) { return Qi(x.re + y.re, x.im + y.im); }
  friend Qi operator-(const Qi& x, const Qi& y) { return Qi(x.re - y.re, x.im - y.im); }
  friend Qi operator*(const Qi& x, const Qi& y) {
    return Qi(x.re * y.re - x.im * y.im, x.re * y.im + x.im * y.re);
  }
  friend Qi operator/(const Qi& x, const Qi& y) { return x * y.inv(); }
  Qi operator-() const { return Qi(-re, -im); }
  friend bool operator==(const Qi& x, const Qi& y) = default;

  std::string str() const;
};

// Point of the upper half-space model: (z, y) with y > 0 kept as y^2 so that
// the isometric action closes over exact coordinates.
struct H3PointQ {
  Qi z;
  Rat y2;
  friend bool operator==(const H3PointQ&, const H3PointQ&) = default;
};

}  // namespace orbscat
