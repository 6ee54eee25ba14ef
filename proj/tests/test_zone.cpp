#include <random>

#include "doctest.h"
#include "tpnsec/zone.hpp"

using namespace tpnsec;

TEST_CASE("bound encoding orders strict below non-strict") {
  CHECK(bound::lt(3) < bound::le(3));
  CHECK(bound::le(2) < bound::lt(3));
  CHECK(bound::le(-2) < bound::le(0));
  CHECK(bound::add(bound::le(2), bound::lt(3)) == bound::lt(5));
  CHECK(bound::add(bound::le(2), bound::le(-3)) == bound::le(-1));
  CHECK(bound::add(bound::inf, bound::le(1)) == bound::inf);
  CHECK(bound::value(bound::lt(-4)) == -4);
  CHECK(bound::strict(bound::lt(-4)));
}

TEST_CASE("canonicalization tightens and detects emptiness") {
  Zone z(2);
  z.at(1, 0) = bound::le(5);
  z.at(0, 1) = bound::le(-2);
  z.at(2, 1) = bound::le(1);
  REQUIRE(z.canonicalize());
  CHECK(z.at(2, 0) == bound::le(6));
  CHECK(z.at(0, 2) == bound::le(0));
  Zone e(1);
  e.at(1, 0) = bound::le(1);
  e.at(0, 1) = bound::lt(-1);
  CHECK_FALSE(e.canonicalize());
}

TEST_CASE("canonicalization is idempotent on random zones") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> v(-5, 20), coin(0, 3);
  int nonempty = 0;
  for (int iter = 0; iter < 300; ++iter) {
    std::size_t n = 1 + iter % 5;
    Zone z(n);
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t j = 0; j <= n; ++j)
        if (i != j && coin(rng) != 0) z.at(i, j) = bound::make(v(rng), coin(rng) == 0);
    if (!z.canonicalize()) continue;
    ++nonempty;
    Zone again = z;
    CHECK(again.canonicalize());
    CHECK(again == z);
    CHECK(z.is_canonical());
  }
  CHECK(nonempty > 20);
}
