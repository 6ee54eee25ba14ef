#include "tpnsec/time.hpp"

#include <charconv>
#include <numeric>
#include <stdexcept>

namespace tpnsec {

namespace {

std::int64_t checked(__int128 v) {
  if (v > INT64_MAX || v < INT64_MIN) throw std::overflow_error("rational overflow");
  return static_cast<std::int64_t>(v);
}

Rational make(__int128 num, __int128 den) {
  if (den == 0) throw std::domain_error("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  __int128 a = num < 0 ? -num : num;
  __int128 b = den;
  while (b != 0) {
    __int128 r = a % b;
    a = b;
    b = r;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
  return Rational(checked(num), checked(den));
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
  if (den_ == 0) throw std::domain_error("rational with zero denominator");
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
  std::int64_t g = std::gcd(num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
}

Rational Rational::operator+(const Rational& o) const {
  return make(static_cast<__int128>(num_) * o.den_ + static_cast<__int128>(o.num_) * den_,
              static_cast<__int128>(den_) * o.den_);
}

Rational Rational::operator-(const Rational& o) const { return *this + (-o); }

Rational Rational::operator*(const Rational& o) const {
  return make(static_cast<__int128>(num_) * o.num_, static_cast<__int128>(den_) * o.den_);
}

Rational Rational::operator/(const Rational& o) const {
  return make(static_cast<__int128>(num_) * o.den_, static_cast<__int128>(den_) * o.num_);
}

std::strong_ordering Rational::operator<=>(const Rational& o) const {
  __int128 l = static_cast<__int128>(num_) * o.den_;
  __int128 r = static_cast<__int128>(o.num_) * den_;
  if (l < r) return std::strong_ordering::less;
  if (l > r) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  std::int64_t d = den_;
  int twos = 0, fives = 0;
  while (d % 2 == 0) {
    d /= 2;
    ++twos;
  }
  while (d % 5 == 0) {
    d /= 5;
    ++fives;
  }
  if (d != 1) return std::to_string(num_) + "/" + std::to_string(den_);
  int digits = std::max(twos, fives);
  __int128 scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  __int128 scaled = static_cast<__int128>(num_) * (scale / den_);
  bool neg = scaled < 0;
  if (neg) scaled = -scaled;
  auto whole = static_cast<std::int64_t>(scaled / scale);
  auto frac = static_cast<std::int64_t>(scaled % scale);
  std::string fs = std::to_string(frac);
  fs.insert(0, static_cast<std::size_t>(digits) - fs.size(), '0');
  return (neg ? "-" : "") + std::to_string(whole) + "." + fs;
}

std::optional<Rational> Rational::parse(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    auto a = parse(text.substr(0, slash));
    auto b = parse(text.substr(slash + 1));
    if (!a || !b || b->num() == 0) return std::nullopt;
    return *a / *b;
  }
  bool neg = false;
  std::size_t i = 0;
  if (text[0] == '-' || text[0] == '+') {
    neg = text[0] == '-';
    i = 1;
  }
  __int128 num = 0, den = 1;
  bool seen_digit = false, seen_dot = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '.') {
      if (seen_dot) return std::nullopt;
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') return std::nullopt;
    seen_digit = true;
    num = num * 10 + (c - '0');
    if (seen_dot) den *= 10;
    if (num > INT64_MAX || den > INT64_MAX) return std::nullopt;
  }
  if (!seen_digit) return std::nullopt;
  return make(neg ? -num : num, den);
}

std::string TimeInterval::check() const {
  if (lower < Rational(0)) return "negative lower bound";
  if (upper) {
    if (*upper < lower) return "upper bound below lower bound";
    if (*upper == lower && !(lower_closed && upper_closed)) return "empty interval";
  } else if (upper_closed) {
    return "infinite upper bound must be open";
  }
  return {};
}

std::string TimeInterval::to_string() const {
  std::string s = lower_closed ? "[" : "(";
  s += lower.to_string();
  s += ",";
  s += upper ? upper->to_string() : "inf";
  s += upper_closed ? "]" : ")";
  return s;
}

std::optional<Rational> parse_time_literal(std::string_view text) {
  Rational factor(1);
  if (text.ends_with("ms")) {
    text.remove_suffix(2);
  } else if (text.ends_with("us")) {
    text.remove_suffix(2);
    factor = Rational(1, 1000);
  } else if (text.ends_with("s")) {
    text.remove_suffix(1);
    factor = Rational(1000);
  }
  auto v = Rational::parse(text);
  if (!v) return std::nullopt;
  return *v * factor;
}

}  // namespace tpnsec
