#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace tpnsec {

/// Difference bound packed into one integer: value*2 + (1 if non-strict).
/// The packed order is the order of the bounds, (v,<) < (v,<=).
using Bound = std::int64_t;

namespace bound {

constexpr Bound inf = std::numeric_limits<std::int64_t>::max();
constexpr Bound le_zero = 1;

constexpr Bound make(std::int64_t v, bool strict) { return v * 2 + (strict ? 0 : 1); }
constexpr Bound le(std::int64_t v) { return make(v, false); }
constexpr Bound lt(std::int64_t v) { return make(v, true); }
constexpr std::int64_t value(Bound b) { return b >> 1; }
constexpr bool strict(Bound b) { return (b & 1) == 0; }

constexpr Bound add(Bound a, Bound b) {
  if (a == inf || b == inf) return inf;
  return make(value(a) + value(b), strict(a) || strict(b));
}

std::string to_string(Bound b);

}  // namespace bound

/// Square difference-bound matrix over variables 1..n plus the reference 0.
/// Entry (i,j) bounds x_i - x_j.
class Zone {
 public:
  Zone() : Zone(0) {}
  explicit Zone(std::size_t vars);

  std::size_t vars() const { return dim_ - 1; }
  std::size_t dim() const { return dim_; }

  Bound& at(std::size_t i, std::size_t j) { return m_[i * dim_ + j]; }
  Bound at(std::size_t i, std::size_t j) const { return m_[i * dim_ + j]; }

  /// Floyd-Warshall closure. Returns false if the zone is empty.
  bool canonicalize();
  bool is_canonical() const;

  std::size_t hash() const;
  bool operator==(const Zone&) const = default;
  std::string to_string() const;

 private:
  std::size_t dim_;
  std::vector<Bound> m_;
};

}  // namespace tpnsec
