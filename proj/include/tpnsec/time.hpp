#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace tpnsec {

/// Exact rational number with a normalized, positive denominator.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  Rational operator-() const { return Rational(-num_, den_); }

  bool operator==(const Rational& o) const = default;
  std::strong_ordering operator<=>(const Rational& o) const;

  bool is_integer() const { return den_ == 1; }

  /// Decimal form when the denominator only has factors 2 and 5, `a/b` otherwise.
  std::string to_string() const;

  /// Accepts `12`, `0.25`, `-3`, `7/3`.
  static std::optional<Rational> parse(std::string_view text);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Firing interval relative to the enabling instant. An absent upper bound is infinity.
struct TimeInterval {
  Rational lower;
  std::optional<Rational> upper = Rational(0);
  bool lower_closed = true;
  bool upper_closed = true;

  static TimeInterval immediate() { return {}; }
  static TimeInterval closed(Rational lo, Rational hi) { return {lo, hi, true, true}; }
  static TimeInterval at_least(Rational lo) { return {lo, std::nullopt, true, false}; }

  bool is_immediate() const {
    return lower == Rational(0) && upper && *upper == Rational(0) && lower_closed && upper_closed;
  }
  bool bounded() const { return upper.has_value(); }

  /// Empty string when valid, reason otherwise.
  std::string check() const;

  /// `[a,b]`, `(a,inf)`, ... in canonical milliseconds.
  std::string to_string() const;

  bool operator==(const TimeInterval&) const = default;
};

/// Parses a time literal with optional unit suffix (`ms` default, `us`, `s`) into milliseconds.
std::optional<Rational> parse_time_literal(std::string_view text);

}  // namespace tpnsec
