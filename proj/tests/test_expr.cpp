#include <map>

#include "doctest.h"
#include "tpnsec/expr.hpp"

using namespace tpnsec;

namespace {

EvalEnv env_of(std::map<std::string, std::int64_t> marks, std::map<std::string, std::int64_t> vars) {
  EvalEnv env;
  env.marking = [marks](const std::string& p) { return marks.at(p); };
  env.variable = [vars](const std::string& v) { return vars.at(v); };
  return env;
}

}  // namespace

TEST_CASE("guards evaluate over marking and valuation") {
  auto env = env_of({{"Pw_Ready1", 1}}, {{"Pick", 2}});
  CHECK(eval(mark_eq("Pw_Ready1", 1), env).v == 1);
  CHECK(eval(var_eq("Pick", 1), env).v == 0);
  CHECK(eval(var_eq("Pick", 2) && !mark_eq("Pw_Ready1", 0), env).v == 1);
  CHECK(eval(plus(Expr::var("Pick"), Expr::integer(-3)), env) == Value{Type::Int, -1});
  CHECK(eval(Expr(), env) == Value{Type::Bool, 1});
}

TEST_CASE("type errors are reported") {
  std::string err;
  CHECK(type_of(Expr::var("x") && Expr(), &err) == Type::Bool);
  CHECK_FALSE(err.empty());
  err.clear();
  CHECK(type_of(plus(Expr::var("x"), Expr::integer(1)), &err) == Type::Int);
  CHECK(err.empty());
  auto env = env_of({}, {{"x", 1}});
  CHECK_THROWS_AS(eval(!Expr::var("x"), env), EvalError);
}

TEST_CASE("printing respects precedence and quoting") {
  Expr e = (var_eq("a", 1) || var_eq("b", 2)) && !mark_eq("P&P1", 1);
  CHECK(e.to_string() == "(a==1 or b==2) and not(M(\"P&P1\")==1)");
  CHECK(plus(Expr::var("a"), plus(Expr::var("b"), Expr::integer(1))).to_string() == "a+(b+1)");
  CHECK(quote_id("LC1.Pcm_Init") == "LC1.Pcm_Init");
  CHECK(quote_id("and") == "\"and\"");
  CHECK(quote_id("a\"b") == "\"a\\\"b\"");
}

TEST_CASE("rename and collect") {
  Expr e = mark_eq("P", 1) && var_eq("x", 0);
  Expr r = e.rename([](Op op, const std::string& n) { return op == Op::Mark ? "N." + n : n; });
  std::set<std::string> ps, vs;
  r.collect(&ps, &vs);
  CHECK(ps == std::set<std::string>{"N.P"});
  CHECK(vs == std::set<std::string>{"x"});
  CHECK(e != r);
  CHECK(conj(Expr(), e) == e);
}
