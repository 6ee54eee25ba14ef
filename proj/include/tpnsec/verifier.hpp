#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tpnsec/engine.hpp"

namespace tpnsec {

struct Property {
  enum class Kind { Ag, LeadsTo, Bounded, DeadlockFree };
  std::string name;
  Kind kind = Kind::Ag;
  Expr cond;  // Ag
  Expr p, q;  // LeadsTo
  int k = 1;  // Bounded
  std::vector<std::string> scope;  // Bounded; empty = all places

  static Property ag(std::string name, Expr cond);
  static Property leads_to(std::string name, Expr p, Expr q);
  static Property bounded(std::string name, int k, std::vector<std::string> scope = {});
  static Property deadlock_free(std::string name);

  /// Property-file syntax of the formula.
  std::string formula() const;
  bool operator==(const Property&) const = default;
};

enum class Status { Holds, Violated, Inconclusive };
std::string to_string(Status s);

struct Witness {
  std::vector<TimedStep> steps;
  /// Index into steps where the cycle starts; the run after all steps is back in
  /// the class reached after `*lasso` steps.
  std::optional<std::size_t> lasso;
  /// Leads-to: number of steps after which p holds; q never holds from there on.
  std::optional<std::size_t> trigger;
  bool ends_in_deadlock = false;
};

struct VerifyStats {
  std::size_t classes = 0;
  std::size_t edges = 0;
  double seconds = 0;
  bool vacuous = false;  // leads-to: no reachable class satisfies p
  bool truncated = false;
};

struct Verdict {
  Status status = Status::Holds;
  std::string reason;
  std::optional<Witness> witness;
  VerifyStats stats;
};

struct VerifyOptions {
  std::size_t max_classes = default_max_classes();
  std::size_t max_depth = 0;
  bool reverse_order = false;
};

/// Checks properties over one net. AG, bounded and deadlock checks run
/// on the fly; leads-to builds the full class graph once and reuses it.
class Verifier {
 public:
  explicit Verifier(const CompiledNet& net, VerifyOptions opts = {});

  Verdict check(const Property& prop);

  /// Full class graph (built on first use).
  const ClassGraph& graph();

 private:
  Verdict check_state_predicate(const Property& prop, const std::function<bool(const StateClass&)>& bad,
                                const std::string& what);
  Verdict check_leads_to(const Property& prop);
  Witness make_witness(const std::vector<std::size_t>& transitions) const;

  const CompiledNet& net_;
  VerifyOptions opts_;
  std::optional<ClassGraph> graph_;
};

/// Shortest cycle through the initial class's discrete state: length of the
/// shortest non-empty path in the class graph from the initial class to a class
/// with the same marking and valuation. nullopt if none.
std::optional<std::size_t> shortest_return_cycle(const CompiledNet& net, const ClassGraph& g);

/// Re-derives the witness from the initial class with successor() and checks it
/// against the property. Empty string if the witness is valid.
std::string check_witness(const CompiledNet& net, const Property& prop, const Witness& w);

}  // namespace tpnsec
