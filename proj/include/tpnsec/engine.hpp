#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpnsec/net.hpp"
#include "tpnsec/zone.hpp"

namespace tpnsec {

/// Discrete state plus the firing domain of the enabled transitions.
/// Zone variable k+1 is the firing time of enabled[k], measured from entry
/// into the class, in scaled integer time units.
struct StateClass {
  SystemState state;
  std::vector<std::size_t> enabled;  // ascending transition indices
  Zone zone;

  bool operator==(const StateClass&) const = default;
  std::size_t hash() const;
};

StateClass initial_class(const CompiledNet& net);

/// Transitions of the class that can fire first, ascending.
std::vector<std::size_t> fireable(const CompiledNet& net, const StateClass& c);

/// Successor class after firing t; throws PreconditionError if t is not fireable.
StateClass successor(const CompiledNet& net, const StateClass& c, std::size_t t);

/// True when t' keeps its clock across the firing of t from `before`.
bool persists(const CompiledNet& net, const SystemState& before, std::size_t fired, const SystemState& after,
              std::size_t other);

struct ExploreOptions {
  std::size_t max_classes = 12000000;
  std::size_t max_depth = 0;  // 0 = unbounded
  /// Expand successors in descending transition-id order instead of ascending.
  bool reverse_order = false;
  /// Stop as soon as a newly discovered class satisfies this predicate.
  std::function<bool(const StateClass&)> stop_at;
};

/// Reads TPNSEC_MAX_CLASSES when set.
std::size_t default_max_classes();

struct Edge {
  std::uint32_t transition;
  std::uint32_t target;
};

/// Explored classes serialized into one byte arena (zigzag varints),
/// deduplicated by an open-addressing index. Decoded on access.
class ClassStore {
 public:
  std::size_t size() const { return offsets_.size() - 1; }
  bool empty() const { return size() == 0; }
  StateClass operator[](std::size_t i) const;
  /// True when class i has no enabled transition.
  bool is_deadlock(std::size_t i) const { return arena_[offsets_[i]] == 0; }
  /// Index of c, storing it first if no equal class is present.
  std::pair<std::size_t, bool> insert(const StateClass& c);
  std::size_t bytes() const;

 private:
  void grow();

  std::vector<std::uint8_t> arena_;
  std::vector<std::uint64_t> offsets_{0};
  std::vector<std::uint32_t> hashes_;
  std::vector<std::uint32_t> slots_;  // node index + 1, 0 = empty
};

struct ClassGraph {
  ClassStore nodes;
  std::vector<std::uint64_t> succ_begin;  // successors of n: edges[succ_begin[n] .. succ_begin[n+1])
  std::vector<Edge> edges;
  std::vector<std::uint32_t> parent;        // BFS tree; parent of root is itself
  std::vector<std::uint32_t> parent_trans;  // transition on the tree edge
  std::vector<std::uint32_t> depth;
  bool truncated = false;
  std::optional<std::size_t> stopped_at;
  std::size_t num_edges() const { return edges.size(); }
  std::span<const Edge> succ(std::size_t n) const {
    return {edges.data() + succ_begin[n], edges.data() + succ_begin[n + 1]};
  }

  /// Transition sequence of the BFS tree path from the root to node n.
  std::vector<std::size_t> path_to(std::size_t n) const;
};

/// Breadth-first state-class graph construction in deterministic order.
ClassGraph explore(const CompiledNet& net, const ExploreOptions& opts = {});

/// A timed firing sequence, times absolute in milliseconds.
struct TimedStep {
  std::size_t transition;
  Rational time;
};

/// Earliest concrete firing times for a transition sequence that is feasible
/// in the class graph, or nullopt when no timing realizes it.
std::optional<std::vector<TimedStep>> concretize(const CompiledNet& net, const std::vector<std::size_t>& transitions);

/// Replays a timed run with the token game and interval semantics directly,
/// without zones. Returns an empty string if the run is valid, else the reason.
std::string check_timed_run(const CompiledNet& net, const std::vector<TimedStep>& run);

}  // namespace tpnsec
