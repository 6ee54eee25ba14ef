#pragma once

#include <random>

#include "tpnsec/net.hpp"

namespace testing_support {

inline tpnsec::Expr random_int_expr(std::mt19937& rng, int depth, int places) {
  using namespace tpnsec;
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  switch (depth <= 0 ? pick(0, 2) : pick(0, 3)) {
    case 0: return Expr::integer(pick(-3, 9));
    case 1: return Expr::var("v");
    case 2: return Expr::mark("p" + std::to_string(pick(0, places - 1)));
    default: return plus(random_int_expr(rng, depth - 1, places), random_int_expr(rng, depth - 1, places));
  }
}

inline tpnsec::Expr random_bool_expr(std::mt19937& rng, int depth, int places) {
  using namespace tpnsec;
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto a = [&] { return random_int_expr(rng, 1, places); };
  switch (depth <= 0 ? pick(0, 5) : pick(0, 8)) {
    case 0: return eq(a(), a());
    case 1: return ne(a(), a());
    case 2: return lt(a(), a());
    case 3: return ge(a(), a());
    case 4: return le(a(), a());
    case 5: return Expr::boolean(pick(0, 1));
    case 6: return random_bool_expr(rng, depth - 1, places) && random_bool_expr(rng, depth - 1, places);
    case 7: return random_bool_expr(rng, depth - 1, places) || random_bool_expr(rng, depth - 1, places);
    default: return !random_bool_expr(rng, depth - 1, places);
  }
}

/// Small random time Petri net with closed integer intervals in [0,10] and
/// occasional unbounded upper bounds, guards and updates on one variable.
inline tpnsec::Net random_net(std::mt19937& rng, bool with_data = true) {
  using namespace tpnsec;
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  Net n;
  n.name = "rnd";
  int places = pick(2, 6);
  for (int p = 0; p < places; ++p) n.add_place("p" + std::to_string(p), p == 0 ? pick(1, 2) : pick(0, 1));
  if (with_data) n.add_variable("v", 0);
  int trans = pick(2, 6);
  for (int t = 0; t < trans; ++t) {
    Transition tr;
    tr.id = "t" + std::to_string(t);
    int ins = pick(1, 2), outs = pick(1, 2);
    for (int i = 0; i < ins; ++i) {
      std::string p = "p" + std::to_string(pick(0, places - 1));
      bool dup = false;
      for (auto& a : tr.inputs) dup = dup || a.place == p;
      if (!dup) tr.inputs.push_back({p, 1});
    }
    for (int i = 0; i < outs; ++i) {
      std::string p = "p" + std::to_string(pick(0, places - 1));
      bool dup = false;
      for (auto& a : tr.outputs) dup = dup || a.place == p;
      if (!dup) tr.outputs.push_back({p, 1});
    }
    int lo = pick(0, 5);
    if (pick(0, 5) == 0) {
      tr.interval = TimeInterval::at_least(lo);
    } else {
      tr.interval = TimeInterval::closed(lo, lo + pick(0, 5));
    }
    if (with_data && pick(0, 2) == 0) tr.guard = var_eq("v", pick(0, 1));
    if (with_data && pick(0, 2) == 0) tr.updates.push_back({"v", Expr::integer(pick(0, 1))});
    n.add_transition(std::move(tr));
  }
  return n;
}

}  // namespace testing_support
