#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>

namespace tpnsec {

/// Raised when an expression is evaluated against a state it does not fit
/// (type error, unresolved reference). Signals a DSL or composition bug.
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Op { Int, Bool, Var, Mark, Not, Add, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class Type { Int, Bool };

struct ExprNode {
  Op op = Op::Bool;
  std::int64_t value = 1;
  std::string name;
  std::shared_ptr<const ExprNode> lhs;
  std::shared_ptr<const ExprNode> rhs;
};

/// Immutable expression tree over integer literals, variables, marking counts
/// M(place), integer addition, comparisons and boolean connectives.
class Expr {
 public:
  /// The literal `true`.
  Expr();

  static Expr integer(std::int64_t v);
  static Expr boolean(bool v);
  static Expr var(std::string name);
  static Expr mark(std::string place);
  static Expr negate(Expr e);
  static Expr binary(Op op, Expr lhs, Expr rhs);

  Op op() const { return node_->op; }
  std::int64_t value() const { return node_->value; }
  const std::string& name() const { return node_->name; }
  Expr lhs() const { return Expr(node_->lhs); }
  Expr rhs() const { return Expr(node_->rhs); }

  bool is_true() const { return op() == Op::Bool && value() != 0; }

  /// Rewrites every Var/Mark name; the tree is otherwise shared.
  Expr rename(const std::function<std::string(Op, const std::string&)>& fn) const;

  void collect(std::set<std::string>* places, std::set<std::string>* vars) const;

  /// Source form accepted by the DSL parsers.
  std::string to_string() const;

  bool operator==(const Expr& o) const;

 private:
  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const ExprNode> node_;
};

Expr operator&&(Expr a, Expr b);
Expr operator||(Expr a, Expr b);
Expr operator!(Expr a);
Expr eq(Expr a, Expr b);
Expr ne(Expr a, Expr b);
Expr lt(Expr a, Expr b);
Expr ge(Expr a, Expr b);
Expr le(Expr a, Expr b);
Expr plus(Expr a, Expr b);

/// Shorthands for the common `M(p)==n` and `v==n` guards.
Expr mark_eq(const std::string& place, std::int64_t n);
Expr var_eq(const std::string& var, std::int64_t n);

/// Conjunction that drops literal `true` operands.
Expr conj(Expr a, Expr b);

/// Returns the type, or sets `error` and returns Bool.
Type type_of(const Expr& e, std::string* error);

/// Value of an evaluated expression (booleans stored as 0/1).
struct Value {
  Type type = Type::Int;
  std::int64_t v = 0;
  bool operator==(const Value&) const = default;
};

/// Name lookups used by the tree-walking evaluator.
struct EvalEnv {
  std::function<std::int64_t(const std::string&)> marking;
  std::function<std::int64_t(const std::string&)> variable;
};

Value eval(const Expr& e, const EvalEnv& env);

/// Identifier as written in DSL source: bare when it matches
/// [A-Za-z_][A-Za-z0-9_.]*, double-quoted otherwise.
std::string quote_id(const std::string& id);

}  // namespace tpnsec
