#include "orbscat/rational.hpp"

#include <algorithm>

namespace orbscat {

namespace detail {

std::string int128_to_string(__int128 v) {
  if (v == 0) return "0";
  bool neg = v < 0;
  unsigned __int128 u = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
  std::string digits;
  while (u != 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (neg) digits.push_back('-');
  std::reverse(digits.begin(), digits.end());
  return digits;
}

}  // namespace detail

std::string Rat::str() const {
  std::string s = detail::int128_to_string(num_);
  if (den_ != 1) {
    s += "/";
    s += detail::int128_to_string(den_);
  }
  return s;
}

std::string Qi::str() const {
  if (im.is_zero()) return re.str();
  std::string s;
  if (!re.is_zero()) s = re.str();
  if (im == Rat(1)) {
    s += s.empty() ? "i" : "+i";
  } else if (im == Rat(-1)) {
    s += "-i";
  } else {
    std::string t = im.str();
    if (!s.empty() && t[0] != '-') s += "+";
    s += t + "i";
  }
  return s;
}

}  // namespace orbscat
