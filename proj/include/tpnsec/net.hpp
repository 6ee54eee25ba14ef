#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tpnsec/expr.hpp"
#include "tpnsec/time.hpp"

namespace tpnsec {

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string file;
  int line = 0;
  int column = 0;
  std::string location;  // net / place / transition id
  std::string message;

  std::string to_string() const;
};

bool has_errors(std::span<const Diagnostic> diags);

/// Structural problem in a model (bad composition, invalid net handed to compile).
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& msg, std::vector<Diagnostic> diags = {})
      : std::runtime_error(msg), diagnostics(std::move(diags)) {}
  std::vector<Diagnostic> diagnostics;
};

/// Contract violation at run time, e.g. firing a disabled transition.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Arc {
  std::string place;
  int weight = 1;
  bool operator==(const Arc&) const = default;
};

struct Update {
  std::string var;
  Expr value;
  bool operator==(const Update&) const = default;
};

struct Transition {
  std::string id;
  Expr guard;
  std::vector<Update> updates;
  TimeInterval interval;
  std::vector<Arc> inputs;
  std::vector<Arc> outputs;

  bool operator==(const Transition&) const = default;
};

struct Variable {
  std::string name;
  std::int64_t initial = 0;
  bool operator==(const Variable&) const = default;
};

/// Places, transitions, variables and the initial marking. Plain value type;
/// use CompiledNet for execution.
struct Net {
  std::string name;
  std::vector<std::string> places;
  std::map<std::string, int> initial_marking;
  std::vector<Variable> variables;
  std::vector<Transition> transitions;
  /// Places of other models that guards read; resolved by composition.
  std::vector<std::string> imports;

  Net& add_place(std::string id, int tokens = 0);
  Net& add_variable(std::string name, std::int64_t initial = 0);
  /// Adds the variable unless a variable with that name is already declared.
  Net& ensure_variable(const std::string& name, std::int64_t initial = 0);
  Transition& add_transition(Transition t);

  bool has_place(const std::string& id) const;
  bool has_variable(const std::string& name) const;
  const Transition* find_transition(const std::string& id) const;
  Transition* find_transition(const std::string& id);

  bool operator==(const Net&) const = default;
};

/// Integer bound applied to every variable; updates leaving it are evaluation faults.
struct VariableBounds {
  std::int64_t min = -(std::int64_t{1} << 31);
  std::int64_t max = (std::int64_t{1} << 31) - 1;
};

/// Structural well-formedness and reference resolution. Never throws.
std::vector<Diagnostic> validate_net(const Net& net);

/// Disjoint union with `ns.` prefixes (an empty namespace adds no prefix).
/// Variables are global and merge by name; guard references to local places
/// are qualified, references to foreign places are kept as written.
/// Imports still unresolved after composition are kept.
Net compose(const std::vector<std::pair<std::string, Net>>& parts);

/// Replaces every import by a place whose single token an environment may add
/// or remove at any time, so the net can be explored on its own.
Net with_free_environment(const Net& net);

/// Discrete part of the system state: marking and valuation, indexed like the compiled net.
struct SystemState {
  std::vector<std::int32_t> marking;
  std::vector<std::int64_t> valuation;

  bool operator==(const SystemState&) const = default;
  std::size_t hash() const;
};

/// Executable form of a validated Net. Transitions are sorted by id, which
/// fixes the exploration order.
class CompiledNet {
 public:
  /// Throws ModelError carrying the diagnostics when validation fails.
  explicit CompiledNet(const Net& net, VariableBounds bounds = {});

  const Net& source() const { return net_; }
  std::size_t num_places() const { return place_names_.size(); }
  std::size_t num_transitions() const { return trans_.size(); }
  std::size_t num_variables() const { return var_names_.size(); }

  const std::string& place_name(std::size_t i) const { return place_names_[i]; }
  const std::string& var_name(std::size_t i) const { return var_names_[i]; }
  const Transition& transition(std::size_t i) const { return net_.transitions[trans_[i].source]; }
  const std::string& transition_id(std::size_t i) const { return transition(i).id; }

  std::optional<std::size_t> place_index(const std::string& name) const;
  std::optional<std::size_t> var_index(const std::string& name) const;
  std::optional<std::size_t> transition_index(const std::string& id) const;

  SystemState initial_state() const;

  bool token_enabled(const SystemState& s, std::size_t t) const;
  bool token_enabled_after_consuming(const SystemState& s, std::size_t consumed, std::size_t t) const;
  bool guard_holds(const SystemState& s, std::size_t t) const;
  bool is_enabled(const SystemState& s, std::size_t t) const { return token_enabled(s, t) && guard_holds(s, t); }

  /// Indices of enabled transitions in ascending order.
  std::vector<std::size_t> enabled(const SystemState& s) const;

  /// Throws PreconditionError if t is disabled.
  SystemState fire(const SystemState& s, std::size_t t) const;

  /// Compiles an expression against this net's names (exact or unique `.suffix` match).
  class Program compile_expr(const Expr& e) const;

  /// Resolves a place reference, empty optional if unresolved or ambiguous.
  std::optional<std::size_t> resolve_place(const std::string& ref) const;

  // Scaled integer time: every interval bound multiplied by time_scale() is an integer.
  std::int64_t time_scale() const { return time_scale_; }
  std::int64_t lower_scaled(std::size_t t) const { return trans_[t].lo; }
  std::optional<std::int64_t> upper_scaled(std::size_t t) const { return trans_[t].hi; }
  bool lower_closed(std::size_t t) const { return transition(t).interval.lower_closed; }
  bool upper_closed(std::size_t t) const { return transition(t).interval.upper_closed; }

  std::span<const std::pair<std::size_t, int>> pre(std::size_t t) const { return trans_[t].pre; }
  std::span<const std::pair<std::size_t, int>> post(std::size_t t) const { return trans_[t].post; }

 private:
  Net net_;
  VariableBounds bounds_;
  std::vector<std::string> place_names_;
  std::vector<std::string> var_names_;
  std::unordered_map<std::string, std::size_t> place_idx_;
  std::unordered_map<std::string, std::size_t> var_idx_;
  std::unordered_map<std::string, std::size_t> trans_idx_;
  std::unordered_multimap<std::string, std::size_t> place_suffix_;
  std::int64_t time_scale_ = 1;

  struct CompiledTransition {
    std::size_t source = 0;
    std::vector<std::pair<std::size_t, int>> pre;
    std::vector<std::pair<std::size_t, int>> post;
    std::vector<std::int64_t> delta;  // dense marking delta
    std::vector<std::pair<std::size_t, std::int64_t>> effect;  // sparse (place, delta)
    std::vector<std::int32_t> guard_code;
    std::vector<std::pair<std::size_t, std::vector<std::int32_t>>> updates;
    std::int64_t lo = 0;
    std::optional<std::int64_t> hi;
  };
  std::vector<CompiledTransition> trans_;
  std::vector<std::int64_t> literals_;

  friend class Program;
  std::vector<std::int32_t> compile_code(const Expr& e) const;
  std::int64_t run(const std::vector<std::int32_t>& code, const SystemState& s) const;
};

/// Compiled expression bound to one CompiledNet.
class Program {
 public:
  Program() = default;
  bool holds(const SystemState& s) const { return net_->run(code_, s) != 0; }
  std::int64_t value(const SystemState& s) const { return net_->run(code_, s); }

 private:
  friend class CompiledNet;
  const CompiledNet* net_ = nullptr;
  std::vector<std::int32_t> code_;
};

/// Tree-walking evaluation by name, independent of the compiled fast path.
Value eval_expr(const Expr& e, const CompiledNet& net, const SystemState& s);

}  // namespace tpnsec
