#pragma once
// Drives an attack-extended net with the nominal class graph, matching
// transitions by id, to check that every nominal run stays possible.
#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "tpnsec/engine.hpp"

namespace testing_support {

/// Empty when every nominal run of at most `depth` steps is fireable in the
/// attacked net; otherwise names the first blocked transition.
inline std::string nominal_runs_blocked(const tpnsec::CompiledNet& nominal, const tpnsec::ClassGraph& g,
                                        const tpnsec::CompiledNet& attacked, std::size_t depth) {
  using namespace tpnsec;
  std::vector<std::size_t> map(nominal.num_transitions());
  for (std::size_t t = 0; t < nominal.num_transitions(); ++t) {
    auto m = attacked.transition_index(nominal.transition_id(t));
    if (!m) return "transition " + nominal.transition_id(t) + " missing";
    map[t] = *m;
  }
  struct Pair {
    std::size_t node;
    StateClass cls;
  };
  std::set<std::pair<std::size_t, std::size_t>> seen;  // (node, class hash)
  std::vector<Pair> layer = {{0, initial_class(attacked)}};
  for (std::size_t d = 0; d < depth && !layer.empty(); ++d) {
    std::vector<Pair> next;
    for (const auto& [node, cls] : layer) {
      auto f = fireable(attacked, cls);
      for (const auto& e : g.succ(node)) {
        std::size_t t = map[e.transition];
        if (!std::binary_search(f.begin(), f.end(), t))
          return "transition " + nominal.transition_id(e.transition) + " blocked at depth " + std::to_string(d);
        StateClass succ = successor(attacked, cls, t);
        if (seen.insert({e.target, succ.hash()}).second) next.push_back({e.target, std::move(succ)});
      }
    }
    layer = std::move(next);
  }
  return "";
}

}  // namespace testing_support
