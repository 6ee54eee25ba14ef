#include "tpnsec/expr.hpp"

#include <cctype>

namespace tpnsec {

namespace {

std::shared_ptr<const ExprNode> leaf(Op op, std::int64_t v, std::string name = {}) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->value = v;
  n->name = std::move(name);
  return n;
}

int precedence(Op op) {
  switch (op) {
    case Op::Or: return 1;
    case Op::And: return 2;
    case Op::Not: return 3;
    case Op::Eq: case Op::Ne: case Op::Lt: case Op::Le: case Op::Gt: case Op::Ge: return 4;
    case Op::Add: return 5;
    default: return 6;
  }
}

const char* op_text(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::And: return " and ";
    case Op::Or: return " or ";
    default: return "?";
  }
}

bool is_comparison(Op op) {
  return op == Op::Eq || op == Op::Ne || op == Op::Lt || op == Op::Le || op == Op::Gt || op == Op::Ge;
}

void print(const ExprNode& n, std::string& out) {
  switch (n.op) {
    case Op::Int: out += std::to_string(n.value); return;
    case Op::Bool: out += n.value ? "true" : "false"; return;
    case Op::Var: out += quote_id(n.name); return;
    case Op::Mark: out += "M(" + quote_id(n.name) + ")"; return;
    case Op::Not:
      out += "not(";
      print(*n.lhs, out);
      out += ")";
      return;
    default: break;
  }
  int p = precedence(n.op);
  auto side = [&](const ExprNode& c, bool right) {
    int cp = precedence(c.op);
    // comparisons are non-associative; left-assoc binary ops need parens on the right at equal level
    bool paren = cp < p || (cp == p && (right || is_comparison(n.op)));
    if (paren) out += "(";
    print(c, out);
    if (paren) out += ")";
  };
  side(*n.lhs, false);
  out += op_text(n.op);
  side(*n.rhs, true);
}

bool equal(const ExprNode* a, const ExprNode* b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->op != b->op) return false;
  switch (a->op) {
    case Op::Int:
    case Op::Bool: return a->value == b->value;
    case Op::Var:
    case Op::Mark: return a->name == b->name;
    case Op::Not: return equal(a->lhs.get(), b->lhs.get());
    default: return equal(a->lhs.get(), b->lhs.get()) && equal(a->rhs.get(), b->rhs.get());
  }
}

}  // namespace

Expr::Expr() : node_(leaf(Op::Bool, 1)) {}

Expr Expr::integer(std::int64_t v) { return Expr(leaf(Op::Int, v)); }
Expr Expr::boolean(bool v) { return Expr(leaf(Op::Bool, v ? 1 : 0)); }
Expr Expr::var(std::string name) { return Expr(leaf(Op::Var, 0, std::move(name))); }
Expr Expr::mark(std::string place) { return Expr(leaf(Op::Mark, 0, std::move(place))); }

Expr Expr::negate(Expr e) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Not;
  n->lhs = e.node_;
  return Expr(n);
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->lhs = lhs.node_;
  n->rhs = rhs.node_;
  return Expr(n);
}

Expr Expr::rename(const std::function<std::string(Op, const std::string&)>& fn) const {
  const ExprNode& n = *node_;
  switch (n.op) {
    case Op::Int:
    case Op::Bool: return *this;
    case Op::Var:
    case Op::Mark: {
      std::string renamed = fn(n.op, n.name);
      if (renamed == n.name) return *this;
      return Expr(leaf(n.op, 0, std::move(renamed)));
    }
    case Op::Not: return negate(lhs().rename(fn));
    default: return binary(n.op, lhs().rename(fn), rhs().rename(fn));
  }
}

void Expr::collect(std::set<std::string>* places, std::set<std::string>* vars) const {
  const ExprNode& n = *node_;
  switch (n.op) {
    case Op::Int:
    case Op::Bool: return;
    case Op::Var:
      if (vars) vars->insert(n.name);
      return;
    case Op::Mark:
      if (places) places->insert(n.name);
      return;
    case Op::Not: lhs().collect(places, vars); return;
    default:
      lhs().collect(places, vars);
      rhs().collect(places, vars);
  }
}

std::string Expr::to_string() const {
  std::string out;
  print(*node_, out);
  return out;
}

bool Expr::operator==(const Expr& o) const { return equal(node_.get(), o.node_.get()); }

Expr operator&&(Expr a, Expr b) { return Expr::binary(Op::And, std::move(a), std::move(b)); }
Expr operator||(Expr a, Expr b) { return Expr::binary(Op::Or, std::move(a), std::move(b)); }
Expr operator!(Expr a) { return Expr::negate(std::move(a)); }
Expr eq(Expr a, Expr b) { return Expr::binary(Op::Eq, std::move(a), std::move(b)); }
Expr ne(Expr a, Expr b) { return Expr::binary(Op::Ne, std::move(a), std::move(b)); }
Expr lt(Expr a, Expr b) { return Expr::binary(Op::Lt, std::move(a), std::move(b)); }
Expr ge(Expr a, Expr b) { return Expr::binary(Op::Ge, std::move(a), std::move(b)); }
Expr le(Expr a, Expr b) { return Expr::binary(Op::Le, std::move(a), std::move(b)); }
Expr plus(Expr a, Expr b) { return Expr::binary(Op::Add, std::move(a), std::move(b)); }

Expr mark_eq(const std::string& place, std::int64_t n) { return eq(Expr::mark(place), Expr::integer(n)); }
Expr var_eq(const std::string& var, std::int64_t n) { return eq(Expr::var(var), Expr::integer(n)); }

Expr conj(Expr a, Expr b) {
  if (a.is_true()) return b;
  if (b.is_true()) return a;
  return std::move(a) && std::move(b);
}

Type type_of(const Expr& e, std::string* error) {
  auto fail = [&](const std::string& msg) {
    if (error && error->empty()) *error = msg + " in '" + e.to_string() + "'";
    return Type::Bool;
  };
  switch (e.op()) {
    case Op::Int:
    case Op::Var:
    case Op::Mark: return Type::Int;
    case Op::Bool: return Type::Bool;
    case Op::Not:
      if (type_of(e.lhs(), error) != Type::Bool) return fail("'not' expects a boolean operand");
      return Type::Bool;
    case Op::Add:
      if (type_of(e.lhs(), error) != Type::Int || type_of(e.rhs(), error) != Type::Int)
        return fail("'+' expects integer operands");
      return Type::Int;
    case Op::And:
    case Op::Or:
      if (type_of(e.lhs(), error) != Type::Bool || type_of(e.rhs(), error) != Type::Bool)
        return fail("boolean operator expects boolean operands");
      return Type::Bool;
    default:
      if (type_of(e.lhs(), error) != Type::Int || type_of(e.rhs(), error) != Type::Int)
        return fail("comparison expects integer operands");
      return Type::Bool;
  }
}

Value eval(const Expr& e, const EvalEnv& env) {
  auto as_int = [](Value v) {
    if (v.type != Type::Int) throw EvalError("integer expected");
    return v.v;
  };
  auto as_bool = [](Value v) {
    if (v.type != Type::Bool) throw EvalError("boolean expected");
    return v.v != 0;
  };
  switch (e.op()) {
    case Op::Int: return {Type::Int, e.value()};
    case Op::Bool: return {Type::Bool, e.value()};
    case Op::Var: return {Type::Int, env.variable(e.name())};
    case Op::Mark: return {Type::Int, env.marking(e.name())};
    case Op::Not: return {Type::Bool, !as_bool(eval(e.lhs(), env))};
    case Op::Add: return {Type::Int, as_int(eval(e.lhs(), env)) + as_int(eval(e.rhs(), env))};
    case Op::And: return {Type::Bool, as_bool(eval(e.lhs(), env)) && as_bool(eval(e.rhs(), env))};
    case Op::Or: return {Type::Bool, as_bool(eval(e.lhs(), env)) || as_bool(eval(e.rhs(), env))};
    default: break;
  }
  std::int64_t a = as_int(eval(e.lhs(), env));
  std::int64_t b = as_int(eval(e.rhs(), env));
  bool r = false;
  switch (e.op()) {
    case Op::Eq: r = a == b; break;
    case Op::Ne: r = a != b; break;
    case Op::Lt: r = a < b; break;
    case Op::Le: r = a <= b; break;
    case Op::Gt: r = a > b; break;
    case Op::Ge: r = a >= b; break;
    default: break;
  }
  return {Type::Bool, r};
}

std::string quote_id(const std::string& id) {
  bool bare = !id.empty() && (std::isalpha(static_cast<unsigned char>(id[0])) || id[0] == '_');
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) bare = false;
  }
  static const char* keywords[] = {"and", "or", "not", "true", "false", "M", "inf"};
  for (const char* k : keywords)
    if (id == k) bare = false;
  if (bare) return id;
  std::string q = "\"";
  for (char c : id) {
    if (c == '"' || c == '\\') q += '\\';
    q += c;
  }
  return q + "\"";
}

}  // namespace tpnsec
