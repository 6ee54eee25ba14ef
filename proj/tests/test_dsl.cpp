#include <random>

#include "doctest.h"
#include "random_nets.hpp"
#include "tpnsec/dsl.hpp"

using namespace tpnsec;
using testing_support::random_bool_expr;

namespace {

const Diagnostic* first_error(const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds)
    if (d.severity == Severity::Error) return &d;
  return nullptr;
}

const char* kToggle = R"(net toggle
var x = 0
place A tokens=1
place B
trans t0 interval=[1,2] guard=x==1 update=x=0 { in: B out: A }
trans t1 interval=[0.5,inf) guard=x==0 update=x=1 { in: A out: B }
)";

const char* kCipn = R"(cipn LC1
sensor Pres1, Pres2
signal Pick, Complete
var active = 0
place P_Init initial
place P_Tx { send({LC2}, Pick, 1); delay(500ms) }
place P_Run { act bp1=1 }
trans T_go cond=Pres1==1 and active==0 update=active=1 { in: P_Init out: P_Tx }
trans T_tx { in: P_Tx out: P_Run }
trans T_done cond=Complete==1 update=active=0 { in: P_Run out: P_Init }
)";

}  // namespace

TEST_CASE("net text round-trips exactly") {
  auto r = parse_net(kToggle, "toggle.tpn");
  REQUIRE(r.ok());
  CHECK(print_net(*r.value) == kToggle);
  CHECK(r.value->transitions[1].interval == TimeInterval::at_least(Rational(1, 2)));
}

TEST_CASE("random nets survive print then parse") {
  std::mt19937 rng(2024);
  for (int i = 0; i < 500; ++i) {
    Net n = testing_support::random_net(rng, true);
    int places = static_cast<int>(n.places.size());
    for (auto& t : n.transitions)
      if (rng() % 2) t.guard = random_bool_expr(rng, 2, places);
    if (rng() % 3 == 0) n.transitions[0].interval = TimeInterval::closed(Rational(1, 3), Rational(7, 4));
    std::string text = print_net(n);
    auto r = parse_net(text);
    INFO(text);
    REQUIRE(r.ok());
    CHECK(*r.value == n);
    CHECK(print_net(*r.value) == text);
  }
}

TEST_CASE("expressions keep precedence through printing") {
  std::mt19937 rng(7);
  for (int i = 0; i < 500; ++i) {
    Expr e = random_bool_expr(rng, 3, 3);
    auto r = parse_expr(e.to_string());
    INFO(e.to_string());
    REQUIRE(r.ok());
    CHECK(*r.value == e);
  }
  auto imp = parse_expr("a==1 => b==2");
  REQUIRE(imp.ok());
  CHECK(*imp.value == (!var_eq("a", 1) || var_eq("b", 2)));
}

TEST_CASE("cipn text round-trips and keeps actions") {
  auto r = parse_cipn(kCipn, "lc1.cipn");
  REQUIRE(r.ok());
  CHECK(print_cipn(*r.value) == kCipn);
  const auto* tx = r.value->find_place("P_Tx");
  REQUIRE(tx);
  REQUIRE(tx->actions.size() == 2);
  CHECK(tx->actions[0] == CipnAction::send("Pick", 1, {"LC2"}));
  CHECK(tx->actions[1] == CipnAction::wait(Rational(500)));
  CHECK(r.value->initial_place() == "P_Init");
}

TEST_CASE("time units convert to milliseconds") {
  auto r = parse_cipn("cipn c\nplace A initial { delay(2s) }\nplace B\ntrans t { in: A out: B }\n");
  REQUIRE(r.ok());
  CHECK(r.value->places[0].actions[0].delay == Rational(2000));
  auto n = parse_net("net n\nplace A tokens=1\ntrans t interval=[250us,1ms] { in: A }\n");
  REQUIRE(n.ok());
  CHECK(n.value->transitions[0].interval == TimeInterval::closed(Rational(1, 4), Rational(1)));
}

TEST_CASE("syntax errors point at the offending token") {
  auto r = parse_net("net n\nplace A tokens=1\ntrans t interval=[3,1] { in: A }\n", "bad.tpn");
  auto* d = first_error(r.diagnostics);
  REQUIRE(d);
  CHECK(!r.ok());
  CHECK(d->file == "bad.tpn");
  CHECK(d->line == 3);
  CHECK(d->column == 18);

  auto w = parse_cipn("cipn c\nplace A initial\nplace B\ntrans t { in: A*2 out: B }\n");
  d = first_error(w.diagnostics);
  REQUIRE(d);
  CHECK(d->line == 4);
  CHECK(d->column == 17);

  auto u = parse_net("net n\nplace A tokens=1\ntrans t guard=v==1 { in: A }\n");
  d = first_error(u.diagnostics);
  REQUIRE(d);
  CHECK(d->line == 3);
  CHECK(d->column == 7);
  CHECK(d->message.find("v") != std::string::npos);

  auto k = parse_net("net n\nplace A\nbogus 3\nplace B\nplace A\n");
  int errors = 0;
  for (auto& e : k.diagnostics) errors += e.severity == Severity::Error;
  CHECK(errors == 2);
  CHECK(k.diagnostics.back().line == 5);
}

TEST_CASE("cipn semantic checks") {
  auto empty = parse_cipn("");
  REQUIRE(first_error(empty.diagnostics));
  CHECK(first_error(empty.diagnostics)->message.find("no initial place") != std::string::npos);

  auto two = parse_cipn("cipn c\nplace A initial\nplace B initial\ntrans t { in: A out: B }\n");
  CHECK(!two.ok());

  auto mark = parse_cipn("cipn c\nplace A initial\nplace B\ntrans t cond=M(A)==1 { in: A out: B }\n");
  CHECK(!mark.ok());

  auto lint = parse_cipn(
      "cipn c\nsensor s\nplace A initial\nplace B\nplace C\n"
      "trans t1 cond=s==1 { in: A out: B }\ntrans t2 cond=s>=1 { in: A out: C }\n");
  CHECK(lint.ok());
  bool warned = false;
  for (auto& d : lint.diagnostics) warned = warned || d.severity == Severity::Warning;
  CHECK(warned);
}

TEST_CASE("property files") {
  const char* text =
      "property P1 : AG(M(Ball)<=1)\n"
      "property P2 : M(A)==1 --> M(B)==1\n"
      "property P3 : bounded(1, {A, B})\n"
      "property P4 : deadlock_free\n";
  auto r = parse_properties(text);
  REQUIRE(r.ok());
  REQUIRE(r.value->size() == 4);
  CHECK((*r.value)[1].kind == Property::Kind::LeadsTo);
  auto again = parse_properties(print_properties(*r.value));
  REQUIRE(again.ok());
  CHECK(*again.value == *r.value);
  auto sugar = parse_properties("property L : AG(M(A)==1 => AF(M(B)==1))\n");
  REQUIRE(sugar.ok());
  auto expect = (*r.value)[1];
  expect.name = "L";
  CHECK((*sugar.value)[0] == expect);
  auto bad = parse_properties("property X : AG(3)\n");
  CHECK(!bad.ok());
}

TEST_CASE("imported places resolve only through composition") {
  const char* plant =
      "net plant\nimport Pctrl_Ret\nplace Idle tokens=1\nplace Busy\n"
      "trans go guard=M(Pctrl_Ret)==1 { in: Idle out: Busy }\n";
  auto r = parse_net(plant);
  REQUIRE(r.ok());
  CHECK(print_net(*r.value) == plant);
  auto missing = parse_net("net plant\nplace Idle tokens=1\ntrans go guard=M(Pctrl_Ret)==1 { in: Idle }\n");
  CHECK(!missing.ok());

  Net ctrl;
  ctrl.name = "ctrl";
  ctrl.add_place("Pctrl_Ret", 1);
  Net sys = compose({{"PP", *r.value}, {"LC2", ctrl}});
  CHECK(sys.imports.empty());
  CHECK(validate_net(sys).empty());

  Net alone = with_free_environment(*r.value);
  CHECK(alone.imports.empty());
  CHECK(validate_net(alone).empty());
  CHECK(alone.transitions.size() == 3);
}
