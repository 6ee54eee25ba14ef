#include "tpnsec/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <deque>

namespace tpnsec {

Property Property::ag(std::string name, Expr cond) {
  Property p;
  p.name = std::move(name);
  p.kind = Kind::Ag;
  p.cond = std::move(cond);
  return p;
}

Property Property::leads_to(std::string name, Expr p, Expr q) {
  Property r;
  r.name = std::move(name);
  r.kind = Kind::LeadsTo;
  r.p = std::move(p);
  r.q = std::move(q);
  return r;
}

Property Property::bounded(std::string name, int k, std::vector<std::string> scope) {
  Property p;
  p.name = std::move(name);
  p.kind = Kind::Bounded;
  p.k = k;
  p.scope = std::move(scope);
  return p;
}

Property Property::deadlock_free(std::string name) {
  Property p;
  p.name = std::move(name);
  p.kind = Kind::DeadlockFree;
  return p;
}

std::string Property::formula() const {
  switch (kind) {
    case Kind::Ag: return "AG(" + cond.to_string() + ")";
    case Kind::LeadsTo: return "(" + p.to_string() + ") --> (" + q.to_string() + ")";
    case Kind::Bounded: {
      std::string s = "bounded(" + std::to_string(k);
      if (!scope.empty()) {
        s += ", {";
        for (std::size_t i = 0; i < scope.size(); ++i) s += (i ? ", " : "") + quote_id(scope[i]);
        s += "}";
      }
      return s + ")";
    }
    case Kind::DeadlockFree: return "deadlock_free";
  }
  return {};
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Holds: return "holds";
    case Status::Violated: return "violated";
    case Status::Inconclusive: return "inconclusive";
  }
  return {};
}

Verifier::Verifier(const CompiledNet& net, VerifyOptions opts) : net_(net), opts_(opts) {}

const ClassGraph& Verifier::graph() {
  if (!graph_) {
    ExploreOptions eo;
    eo.max_classes = opts_.max_classes;
    eo.max_depth = opts_.max_depth;
    eo.reverse_order = opts_.reverse_order;
    graph_ = explore(net_, eo);
  }
  return *graph_;
}

Witness Verifier::make_witness(const std::vector<std::size_t>& transitions) const {
  Witness w;
  auto steps = concretize(net_, transitions);
  if (!steps) throw std::logic_error("class path without a concrete timing");
  w.steps = std::move(*steps);
  return w;
}

namespace {

std::vector<std::size_t> scope_places(const CompiledNet& net, const Property& prop) {
  std::vector<std::size_t> out;
  if (prop.scope.empty()) {
    for (std::size_t p = 0; p < net.num_places(); ++p) out.push_back(p);
    return out;
  }
  for (const auto& name : prop.scope) {
    auto p = net.resolve_place(name);
    if (!p) throw EvalError("unresolved place " + name + " in " + prop.name);
    out.push_back(*p);
  }
  return out;
}

std::function<bool(const StateClass&)> bad_predicate(const CompiledNet& net, const Property& prop) {
  switch (prop.kind) {
    case Property::Kind::Ag: {
      auto prog = net.compile_expr(prop.cond);
      return [prog](const StateClass& c) { return !prog.holds(c.state); };
    }
    case Property::Kind::Bounded: {
      auto places = scope_places(net, prop);
      int k = prop.k;
      return [places, k](const StateClass& c) {
        for (auto p : places)
          if (c.state.marking[p] > k) return true;
        return false;
      };
    }
    case Property::Kind::DeadlockFree:
      return [](const StateClass& c) { return c.enabled.empty(); };
    default: return {};
  }
}

}  // namespace

Verdict Verifier::check(const Property& prop) {
  auto start = std::chrono::steady_clock::now();
  Verdict v;
  switch (prop.kind) {
    case Property::Kind::Ag: v = check_state_predicate(prop, bad_predicate(net_, prop), "invariant"); break;
    case Property::Kind::Bounded:
      if (prop.k < 1) throw PreconditionError("bound must be >= 1");
      v = check_state_predicate(prop, bad_predicate(net_, prop), "bound");
      break;
    case Property::Kind::DeadlockFree: v = check_state_predicate(prop, bad_predicate(net_, prop), "deadlock"); break;
    case Property::Kind::LeadsTo: v = check_leads_to(prop); break;
  }
  v.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return v;
}

Verdict Verifier::check_state_predicate(const Property&, const std::function<bool(const StateClass&)>& bad,
                                        const std::string& what) {
  Verdict v;
  auto finish = [&](const ClassGraph& g, std::optional<std::size_t> hit) {
    v.stats.classes = g.nodes.size();
    v.stats.edges = g.num_edges();
    v.stats.truncated = g.truncated;
    if (hit) {
      v.status = Status::Violated;
      v.witness = make_witness(g.path_to(*hit));
      v.witness->ends_in_deadlock = g.nodes.is_deadlock(*hit);
    } else if (g.truncated) {
      v.status = Status::Inconclusive;
      v.reason = "class graph truncated at " + std::to_string(g.nodes.size()) + " classes";
    }
  };
  if (graph_) {
    // BFS numbering makes the first hit a shortest one.
    std::optional<std::size_t> hit;
    for (std::size_t i = 0; i < graph_->nodes.size() && !hit; ++i)
      if (bad(graph_->nodes[i])) hit = i;
    finish(*graph_, hit);
    return v;
  }
  ExploreOptions eo;
  eo.max_classes = opts_.max_classes;
  eo.max_depth = opts_.max_depth;
  eo.reverse_order = opts_.reverse_order;
  eo.stop_at = bad;
  ClassGraph g = explore(net_, eo);
  finish(g, g.stopped_at);
  if (!g.stopped_at && !g.truncated) graph_ = std::move(g);
  (void)what;
  return v;
}

Verdict Verifier::check_leads_to(const Property& prop) {
  const ClassGraph& g = graph();
  Verdict v;
  v.stats.classes = g.nodes.size();
  v.stats.edges = g.num_edges();
  v.stats.truncated = g.truncated;
  const std::size_t n = g.nodes.size();
  auto P = net_.compile_expr(prop.p);
  auto Q = net_.compile_expr(prop.q);
  std::vector<char> in_b(n), is_p(n);
  bool any_p = false;
  for (std::size_t i = 0; i < n; ++i) {
    in_b[i] = !Q.holds(g.nodes[i].state);
    is_p[i] = P.holds(g.nodes[i].state);
    any_p = any_p || is_p[i];
  }
  v.stats.vacuous = !any_p;

  // Tarjan SCCs of the subgraph induced by the non-q classes (iterative).
  std::vector<std::size_t> index(n, SIZE_MAX), low(n, 0), comp(n, SIZE_MAX), comp_size;
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  std::size_t counter = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (!in_b[root] || index[root] != SIZE_MAX) continue;
    std::vector<std::pair<std::size_t, std::size_t>> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& [u, ei] = call.back();
      if (ei < g.succ(u).size()) {
        std::size_t w = g.succ(u)[ei++].target;
        if (!in_b[w]) continue;
        if (index[w] == SIZE_MAX) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[u] = std::min(low[u], index[w]);
        }
        continue;
      }
      if (low[u] == index[u]) {
        std::size_t id = comp_size.size(), size = 0;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = id;
          ++size;
        } while (w != u);
        comp_size.push_back(size);
      }
      std::size_t done = u;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
    }
  }
  std::vector<char> cyclic(n, 0);
  for (std::size_t u = 0; u < n; ++u) {
    if (!in_b[u]) continue;
    if (comp_size[comp[u]] > 1) cyclic[u] = 1;
    for (const auto& e : g.succ(u))
      if (e.target == u) cyclic[u] = 1;
  }

  // Forward search inside the non-q subgraph from a p-class.
  auto search = [&](std::size_t from, auto&& target) -> std::optional<std::vector<std::size_t>> {
    std::vector<std::size_t> par(n, SIZE_MAX), via(n, SIZE_MAX);
    std::deque<std::size_t> queue{from};
    par[from] = from;
    while (!queue.empty()) {
      std::size_t u = queue.front();
      queue.pop_front();
      if (target(u)) {
        std::vector<std::size_t> nodes{u};
        while (u != from) {
          u = par[u];
          nodes.push_back(u);
        }
        std::reverse(nodes.begin(), nodes.end());
        return nodes;
      }
      for (const auto& e : g.succ(u)) {
        if (!in_b[e.target] || par[e.target] != SIZE_MAX) continue;
        par[e.target] = u;
        queue.push_back(e.target);
      }
    }
    return std::nullopt;
  };
  auto edge_trans = [&](std::size_t a, std::size_t b) {
    for (const auto& e : g.succ(a))
      if (e.target == b) return e.transition;
    throw std::logic_error("missing edge");
  };

  // predecessors inside the non-q subgraph, for one backward sweep per trap kind
  std::vector<std::vector<std::size_t>> pred(n);
  for (std::size_t u = 0; u < n; ++u)
    if (in_b[u])
      for (const auto& e : g.succ(u))
        if (in_b[e.target]) pred[e.target].push_back(u);

  for (bool want_cycle : {true, false}) {
    auto is_trap = [&](std::size_t u) { return want_cycle ? cyclic[u] != 0 : g.nodes.is_deadlock(u); };
    std::vector<char> reaches(n, 0);
    std::deque<std::size_t> back;
    for (std::size_t u = 0; u < n; ++u)
      if (in_b[u] && is_trap(u)) {
        reaches[u] = 1;
        back.push_back(u);
      }
    while (!back.empty()) {
      std::size_t u = back.front();
      back.pop_front();
      for (std::size_t w : pred[u])
        if (!reaches[w]) {
          reaches[w] = 1;
          back.push_back(w);
        }
    }
    for (std::size_t s = 0; s < n; ++s) {
      if (!is_p[s] || !reaches[s]) continue;
      auto to_trap = search(s, is_trap);
      if (!to_trap) continue;
      std::vector<std::size_t> trans = g.path_to(s);
      std::size_t trigger = trans.size();
      for (std::size_t i = 0; i + 1 < to_trap->size(); ++i) trans.push_back(edge_trans((*to_trap)[i], (*to_trap)[i + 1]));
      std::optional<std::size_t> lasso;
      if (want_cycle) {
        std::size_t c = to_trap->back();
        lasso = trans.size();
        std::vector<std::size_t> cycle;
        for (const auto& e : g.succ(c))
          if (e.target == c) cycle = {e.transition};
        if (cycle.empty()) {
          // shortest path back to c through its component
          std::optional<std::vector<std::size_t>> best;
          for (const auto& e : g.succ(c)) {
            if (!in_b[e.target] || comp[e.target] != comp[c]) continue;
            auto back = search(e.target, [&](std::size_t u) { return u == c; });
            if (back && (!best || back->size() < best->size())) {
              std::vector<std::size_t> nodes{c};
              nodes.insert(nodes.end(), back->begin(), back->end());
              best = nodes;
            }
          }
          for (std::size_t i = 0; i + 1 < best->size(); ++i) cycle.push_back(edge_trans((*best)[i], (*best)[i + 1]));
        }
        trans.insert(trans.end(), cycle.begin(), cycle.end());
      }
      v.status = Status::Violated;
      v.witness = make_witness(trans);
      v.witness->lasso = lasso;
      v.witness->trigger = trigger;
      v.witness->ends_in_deadlock = !want_cycle;
      return v;
    }
  }
  if (g.truncated) {
    v.status = Status::Inconclusive;
    v.reason = "class graph truncated at " + std::to_string(n) + " classes";
  }
  return v;
}

std::optional<std::size_t> shortest_return_cycle(const CompiledNet&, const ClassGraph& g) {
  const SystemState init = g.nodes[0].state;
  std::optional<std::size_t> best;
  for (std::size_t u = 0; u < g.nodes.size(); ++u) {
    if (u != 0 && g.nodes[u].state == init && (!best || g.depth[u] < *best)) best = g.depth[u];
    for (const auto& e : g.succ(u))
      if (e.target == 0 && (!best || g.depth[u] + 1 < *best)) best = g.depth[u] + 1;
  }
  return best;
}

std::string check_witness(const CompiledNet& net, const Property& prop, const Witness& w) {
  std::vector<StateClass> classes{initial_class(net)};
  for (std::size_t i = 0; i < w.steps.size(); ++i) {
    auto f = fireable(net, classes.back());
    if (!std::binary_search(f.begin(), f.end(), w.steps[i].transition))
      return "step " + std::to_string(i + 1) + " is not fireable";
    classes.push_back(successor(net, classes.back(), w.steps[i].transition));
  }
  if (auto why = check_timed_run(net, w.steps); !why.empty()) return "timing: " + why;
  const StateClass& last = classes.back();
  switch (prop.kind) {
    case Property::Kind::Ag:
    case Property::Kind::Bounded:
    case Property::Kind::DeadlockFree:
      if (!bad_predicate(net, prop)(last)) return "final class does not violate " + prop.name;
      return {};
    case Property::Kind::LeadsTo: {
      if (!w.trigger || *w.trigger >= classes.size()) return "missing trigger index";
      auto P = net.compile_expr(prop.p);
      auto Q = net.compile_expr(prop.q);
      if (!P.holds(classes[*w.trigger].state)) return "p does not hold at the trigger";
      for (std::size_t i = *w.trigger; i < classes.size(); ++i)
        if (Q.holds(classes[i].state)) return "q holds after step " + std::to_string(i);
      if (w.lasso) {
        if (*w.lasso < *w.trigger || *w.lasso >= w.steps.size()) return "bad lasso index";
        if (!(classes[*w.lasso] == last)) return "cycle does not close";
        return {};
      }
      if (!last.enabled.empty()) return "finite witness does not end in a deadlock";
      return {};
    }
  }
  return {};
}

}  // namespace tpnsec
