#include "tpnsec/zone.hpp"

namespace tpnsec {

std::string bound::to_string(Bound b) {
  if (b == inf) return "<inf";
  return (strict(b) ? "<" : "<=") + std::to_string(value(b));
}

Zone::Zone(std::size_t vars) : dim_(vars + 1), m_(dim_ * dim_, bound::inf) {
  for (std::size_t i = 0; i < dim_; ++i) at(i, i) = bound::le_zero;
  for (std::size_t i = 1; i < dim_; ++i) at(0, i) = bound::le_zero;
}

bool Zone::canonicalize() {
  for (std::size_t k = 0; k < dim_; ++k)
    for (std::size_t i = 0; i < dim_; ++i) {
      Bound ik = at(i, k);
      if (ik == bound::inf) continue;
      for (std::size_t j = 0; j < dim_; ++j) {
        Bound c = bound::add(ik, at(k, j));
        if (c < at(i, j)) at(i, j) = c;
      }
    }
  for (std::size_t i = 0; i < dim_; ++i)
    if (at(i, i) < bound::le_zero) return false;
  return true;
}

bool Zone::is_canonical() const {
  Zone z = *this;
  return z.canonicalize() && z == *this;
}

std::size_t Zone::hash() const {
  std::uint64_t h = 1469598103934665603ULL ^ dim_;
  for (Bound b : m_) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

std::string Zone::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      if (j) s += ' ';
      s += bound::to_string(at(i, j));
    }
    s += '\n';
  }
  return s;
}

}  // namespace tpnsec
