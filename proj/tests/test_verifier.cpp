#include <random>

#include "doctest.h"
#include "random_nets.hpp"
#include "tpnsec/verifier.hpp"

using namespace tpnsec;

namespace {

Transition trans(std::string id, std::vector<Arc> in, std::vector<Arc> out, TimeInterval iv = TimeInterval::closed(1, 2)) {
  Transition t;
  t.id = std::move(id);
  t.inputs = std::move(in);
  t.outputs = std::move(out);
  t.interval = iv;
  return t;
}

Net choice_net() {
  Net n;
  n.add_place("A", 1).add_place("B").add_place("C");
  n.add_transition(trans("toB", {{"A", 1}}, {{"B", 1}}));
  n.add_transition(trans("toC", {{"A", 1}}, {{"C", 1}}));
  n.add_transition(trans("back", {{"B", 1}}, {{"A", 1}}));
  return n;
}

// EG(not q) as a greatest fixpoint, deadlocked classes count as maximal paths.
bool leads_to_violated_oracle(const CompiledNet& net, const ClassGraph& g, const Expr& p, const Expr& q) {
  std::size_t n = g.nodes.size();
  std::vector<char> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = eval_expr(q, net, g.nodes[i].state).v == 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!z[i] || g.nodes[i].enabled.empty()) continue;
      bool keep = false;
      for (const auto& e : g.succ(i)) keep = keep || z[e.target];
      if (!keep) {
        z[i] = 0;
        changed = true;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (z[i] && eval_expr(p, net, g.nodes[i].state).v) return true;
  return false;
}

}  // namespace

TEST_CASE("AG safety with shortest witness") {
  CompiledNet net(choice_net());
  Verifier v(net);
  auto prop = Property::ag("noC", mark_eq("C", 0));
  auto r = v.check(prop);
  REQUIRE(r.status == Status::Violated);
  REQUIRE(r.witness);
  CHECK(r.witness->steps.size() == 1);
  CHECK(net.transition_id(r.witness->steps[0].transition) == "toC");
  CHECK(check_witness(net, prop, *r.witness).empty());
  CHECK(v.check(Property::ag("tokens", le(plus(plus(Expr::mark("A"), Expr::mark("B")), Expr::mark("C")), Expr::integer(1))))
            .status == Status::Holds);
}

TEST_CASE("deadlock and boundedness") {
  CompiledNet net(choice_net());
  Verifier v(net);
  auto dl = Property::deadlock_free("dl");
  auto r = v.check(dl);
  CHECK(r.status == Status::Violated);
  CHECK(r.witness->ends_in_deadlock);
  CHECK(check_witness(net, dl, *r.witness).empty());
  CHECK(v.check(Property::bounded("safe", 1)).status == Status::Holds);

  Net grow;
  grow.add_place("P", 1).add_place("Q");
  grow.add_transition(trans("produce", {{"P", 1}}, {{"P", 1}, {"Q", 1}}));
  CompiledNet gnet(grow);
  VerifyOptions opts;
  opts.max_classes = 100;
  Verifier gv(gnet, opts);
  auto b = Property::bounded("safe", 1);
  auto gr = gv.check(b);
  CHECK(gr.status == Status::Violated);
  CHECK(check_witness(gnet, b, *gr.witness).empty());
  CHECK(gv.check(Property::bounded("P only", 1, {"P"})).status == Status::Inconclusive);

  Net dead;
  dead.add_place("P", 1);
  CompiledNet dnet(dead);
  Verifier dv(dnet);
  CHECK(dv.check(dl).status == Status::Violated);
  CHECK(dv.graph().nodes.size() == 1);
  CHECK(dv.graph().num_edges() == 0);
}

TEST_CASE("leads-to: lassos, deadlocks and vacuity") {
  CompiledNet net(choice_net());
  Verifier v(net);

  // A --> C fails on the A/B cycle; lasso preferred over the deadlock in C.
  auto p1 = Property::leads_to("AtoC", mark_eq("A", 1), mark_eq("C", 1));
  auto r1 = v.check(p1);
  REQUIRE(r1.status == Status::Violated);
  CHECK(r1.witness->lasso.has_value());
  CHECK(check_witness(net, p1, *r1.witness).empty());

  // A --> B fails by deadlocking in C.
  auto p2 = Property::leads_to("AtoB", mark_eq("A", 1), mark_eq("B", 1));
  auto r2 = v.check(p2);
  REQUIRE(r2.status == Status::Violated);
  CHECK_FALSE(r2.witness->lasso);
  CHECK(r2.witness->ends_in_deadlock);
  CHECK(check_witness(net, p2, *r2.witness).empty());

  auto r3 = v.check(Property::leads_to("B", mark_eq("B", 1), mark_eq("A", 1)));
  CHECK(r3.status == Status::Holds);
  auto r4 = v.check(Property::leads_to("vac", mark_eq("A", 7), mark_eq("B", 1)));
  CHECK(r4.status == Status::Holds);
  CHECK(r4.stats.vacuous);
  CHECK_FALSE(r3.stats.vacuous);
}

TEST_CASE("leads-to agrees with a fixpoint oracle on random nets") {
  std::mt19937 rng(99);
  int compared = 0, violated = 0;
  for (int iter = 0; iter < 400 && compared < 150; ++iter) {
    CompiledNet net(testing_support::random_net(rng));
    VerifyOptions opts;
    opts.max_classes = 2000;
    Verifier v(net, opts);
    if (v.graph().truncated) continue;
    ++compared;
    std::uniform_int_distribution<int> pl(0, static_cast<int>(net.num_places()) - 1);
    Expr p = ge(Expr::mark(net.place_name(pl(rng))), Expr::integer(1));
    Expr q = ge(Expr::mark(net.place_name(pl(rng))), Expr::integer(1));
    auto prop = Property::leads_to("r", p, q);
    auto r = v.check(prop);
    bool expect = leads_to_violated_oracle(net, v.graph(), p, q);
    CHECK((r.status == Status::Violated) == expect);
    if (r.witness) {
      ++violated;
      CHECK(check_witness(net, prop, *r.witness).empty());
    }
  }
  CHECK(compared >= 100);
  CHECK(violated > 10);
}

TEST_CASE("nominal return cycle length") {
  CompiledNet net(choice_net());
  Verifier v(net);
  CHECK(shortest_return_cycle(net, v.graph()) == 2u);
}
