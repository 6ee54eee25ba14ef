#include "tpnsec/engine.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace tpnsec {

std::size_t StateClass::hash() const {
  std::size_t h = state.hash();
  return h ^ (zone.hash() + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

namespace {

Bound upper_bound_of(const CompiledNet& net, std::size_t t) {
  auto hi = net.upper_scaled(t);
  if (!hi) return bound::inf;
  return bound::make(*hi, !net.upper_closed(t));
}

Bound neg_lower_bound_of(const CompiledNet& net, std::size_t t) {
  return bound::make(-net.lower_scaled(t), !net.lower_closed(t));
}

SystemState intermediate(const CompiledNet& net, const SystemState& s, std::size_t t) {
  SystemState m = s;
  for (const auto& [p, w] : net.pre(t)) m.marking[p] -= w;
  return m;
}

std::size_t var_of(const StateClass& c, std::size_t t) {
  auto it = std::lower_bound(c.enabled.begin(), c.enabled.end(), t);
  if (it == c.enabled.end() || *it != t) throw PreconditionError("transition not enabled in class");
  return static_cast<std::size_t>(it - c.enabled.begin()) + 1;
}

}  // namespace

bool persists(const CompiledNet& net, const SystemState& before, std::size_t fired, const SystemState& after,
              std::size_t other) {
  if (other == fired) return false;
  if (!net.is_enabled(before, other) || !net.is_enabled(after, other)) return false;
  if (!net.token_enabled_after_consuming(before, fired, other)) return false;
  return net.guard_holds(intermediate(net, before, fired), other);
}

StateClass initial_class(const CompiledNet& net) {
  StateClass c;
  c.state = net.initial_state();
  c.enabled = net.enabled(c.state);
  const std::size_t n = c.enabled.size();
  c.zone = Zone(n);
  for (std::size_t k = 1; k <= n; ++k) {
    c.zone.at(k, 0) = upper_bound_of(net, c.enabled[k - 1]);
    c.zone.at(0, k) = neg_lower_bound_of(net, c.enabled[k - 1]);
  }
  for (std::size_t k = 1; k <= n; ++k)
    for (std::size_t j = 1; j <= n; ++j)
      if (k != j) c.zone.at(k, j) = bound::add(c.zone.at(k, 0), c.zone.at(0, j));
  return c;
}

std::vector<std::size_t> fireable(const CompiledNet&, const StateClass& c) {
  std::vector<std::size_t> out;
  const std::size_t n = c.enabled.size();
  for (std::size_t f = 1; f <= n; ++f) {
    bool ok = true;
    for (std::size_t j = 1; j <= n && ok; ++j)
      if (j != f && c.zone.at(j, f) < bound::le_zero) ok = false;
    if (ok) out.push_back(c.enabled[f - 1]);
  }
  return out;
}

StateClass successor(const CompiledNet& net, const StateClass& c, std::size_t t) {
  const std::size_t n = c.enabled.size();
  const std::size_t f = var_of(c, t);
  for (std::size_t j = 1; j <= n; ++j)
    if (j != f && c.zone.at(j, f) < bound::le_zero)
      throw PreconditionError("transition " + net.transition_id(t) + " is not fireable");

  // Add theta_f <= theta_k for every k; only paths through f improve.
  const Zone& D = c.zone;
  std::vector<Bound> r(n + 1, bound::inf);
  for (std::size_t j = 0; j <= n; ++j)
    for (std::size_t k = 1; k <= n; ++k) r[j] = std::min(r[j], D.at(k, j));
  auto tight = [&](std::size_t i, std::size_t j) {
    if (i == f) return r[j];
    return std::min(D.at(i, j), bound::add(D.at(i, f), r[j]));
  };

  StateClass out;
  out.state = net.fire(c.state, t);
  out.enabled = net.enabled(out.state);
  const std::size_t m = out.enabled.size();
  out.zone = Zone(m);
  std::vector<std::size_t> old_var(m + 1, 0);  // 0 = newly enabled
  for (std::size_t p = 1; p <= m; ++p) {
    std::size_t tp = out.enabled[p - 1];
    if (persists(net, c.state, t, out.state, tp)) old_var[p] = var_of(c, tp);
  }
  Zone& N = out.zone;
  for (std::size_t p = 1; p <= m; ++p) {
    if (std::size_t a = old_var[p]) {
      N.at(p, 0) = tight(a, f);
      N.at(0, p) = tight(f, a);
      for (std::size_t q = 1; q <= m; ++q)
        if (q != p && old_var[q]) N.at(p, q) = tight(a, old_var[q]);
    } else {
      N.at(p, 0) = upper_bound_of(net, out.enabled[p - 1]);
      N.at(0, p) = neg_lower_bound_of(net, out.enabled[p - 1]);
    }
  }
  for (std::size_t p = 1; p <= m; ++p) {
    if (old_var[p]) continue;
    for (std::size_t j = 1; j <= m; ++j) {
      if (j == p) continue;
      N.at(p, j) = bound::add(N.at(p, 0), N.at(0, j));
      N.at(j, p) = bound::add(N.at(j, 0), N.at(0, p));
    }
  }
  return out;
}

std::size_t default_max_classes() {
  if (const char* env = std::getenv("TPNSEC_MAX_CLASSES")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 12000000;
}

std::vector<std::size_t> ClassGraph::path_to(std::size_t n) const {
  std::vector<std::size_t> out;
  while (parent[n] != n) {
    out.push_back(parent_trans[n]);
    n = parent[n];
  }
  std::reverse(out.begin(), out.end());
  return out;
}

namespace {

void put(std::vector<std::uint8_t>& out, std::int64_t v) {
  auto z = (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
  while (z >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(z | 0x80));
    z >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(z));
}

std::int64_t get(const std::uint8_t*& p) {
  std::uint64_t z = 0;
  for (int shift = 0;; shift += 7) {
    std::uint8_t b = *p++;
    z |= static_cast<std::uint64_t>(b & 0x7f) << shift;
    if (!(b & 0x80)) break;
  }
  return static_cast<std::int64_t>(z >> 1) ^ -static_cast<std::int64_t>(z & 1);
}

// The enabled count comes first so that a deadlock class starts with byte 0.
void encode(const StateClass& c, std::vector<std::uint8_t>& out) {
  put(out, static_cast<std::int64_t>(c.enabled.size()));
  for (auto t : c.enabled) put(out, static_cast<std::int64_t>(t));
  put(out, static_cast<std::int64_t>(c.state.marking.size()));
  for (auto m : c.state.marking) put(out, m);
  put(out, static_cast<std::int64_t>(c.state.valuation.size()));
  for (auto v : c.state.valuation) put(out, v);
  const std::size_t d = c.zone.dim();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i != j) put(out, c.zone.at(i, j));
}

std::uint32_t hash_bytes(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return static_cast<std::uint32_t>(h ^ (h >> 32));
}

}  // namespace

StateClass ClassStore::operator[](std::size_t i) const {
  const std::uint8_t* p = arena_.data() + offsets_[i];
  StateClass c;
  c.enabled.resize(static_cast<std::size_t>(get(p)));
  for (auto& t : c.enabled) t = static_cast<std::size_t>(get(p));
  c.state.marking.resize(static_cast<std::size_t>(get(p)));
  for (auto& m : c.state.marking) m = static_cast<std::int32_t>(get(p));
  c.state.valuation.resize(static_cast<std::size_t>(get(p)));
  for (auto& v : c.state.valuation) v = get(p);
  c.zone = Zone(c.enabled.size());
  const std::size_t d = c.zone.dim();
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      c.zone.at(a, b) = a == b ? bound::le_zero : get(p);
  return c;
}

void ClassStore::grow() {
  std::vector<std::uint32_t> old = std::move(slots_);
  slots_.assign(old.empty() ? 1024 : old.size() * 2, 0);
  const std::size_t mask = slots_.size() - 1;
  for (std::uint32_t k : old) {
    if (k == 0) continue;
    std::size_t s = hashes_[k - 1] & mask;
    while (slots_[s] != 0) s = (s + 1) & mask;
    slots_[s] = k;
  }
}

std::pair<std::size_t, bool> ClassStore::insert(const StateClass& c) {
  if ((size() + 1) * 2 > slots_.size()) grow();
  const std::size_t start = arena_.size();
  encode(c, arena_);
  const std::size_t len = arena_.size() - start;
  const std::uint32_t h = hash_bytes(arena_.data() + start, len);
  // Compare against the stored copies while the candidate sits at the arena tail.
  const std::size_t mask = slots_.size() - 1;
  for (std::size_t s = h & mask;; s = (s + 1) & mask) {
    std::uint32_t k = slots_[s];
    if (k == 0) {
      if (size() >= UINT32_MAX - 1) throw std::length_error("class store full");
      slots_[s] = static_cast<std::uint32_t>(size() + 1);
      hashes_.push_back(h);
      offsets_.push_back(arena_.size());
      return {size() - 1, true};
    }
    std::size_t i = k - 1;
    if (hashes_[i] == h && offsets_[i + 1] - offsets_[i] == len &&
        std::equal(arena_.data() + start, arena_.data() + start + len, arena_.data() + offsets_[i])) {
      arena_.resize(start);
      return {i, false};
    }
  }
}

std::size_t ClassStore::bytes() const {
  return arena_.capacity() + offsets_.capacity() * 8 + hashes_.capacity() * 4 + slots_.capacity() * 4;
}

ClassGraph explore(const CompiledNet& net, const ExploreOptions& opts) {
  ClassGraph g;
  auto add = [&](const StateClass& c, std::size_t parent, std::size_t via, std::size_t depth) {
    auto [idx, fresh] = g.nodes.insert(c);
    if (fresh) {
      g.parent.push_back(static_cast<std::uint32_t>(parent == SIZE_MAX ? idx : parent));
      g.parent_trans.push_back(static_cast<std::uint32_t>(via));
      g.depth.push_back(static_cast<std::uint32_t>(depth));
    }
    return std::pair{idx, fresh};
  };
  auto finish = [&] {
    while (g.succ_begin.size() <= g.nodes.size()) g.succ_begin.push_back(g.edges.size());
    return std::move(g);
  };

  StateClass init = initial_class(net);
  add(init, SIZE_MAX, SIZE_MAX, 0);
  if (opts.stop_at && opts.stop_at(init)) {
    g.stopped_at = 0;
    return finish();
  }
  // Classes are numbered in discovery order and expanded in the same order,
  // so successor lists are appended contiguously.
  for (std::size_t cur = 0; cur < g.nodes.size(); ++cur) {
    g.succ_begin.push_back(g.edges.size());
    StateClass c = g.nodes[cur];
    if (opts.max_depth && g.depth[cur] >= opts.max_depth) {
      if (!c.enabled.empty()) g.truncated = true;
      continue;
    }
    auto order = fireable(net, c);
    if (opts.reverse_order) std::reverse(order.begin(), order.end());
    for (std::size_t t : order) {
      if (g.nodes.size() >= opts.max_classes) {
        g.truncated = true;
        return finish();
      }
      auto next = successor(net, c, t);
      auto [idx, fresh] = add(next, cur, t, g.depth[cur] + 1);
      g.edges.push_back({static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(idx)});
      if (fresh && opts.stop_at && opts.stop_at(next)) {
        g.stopped_at = idx;
        return finish();
      }
    }
  }
  return finish();
}

namespace {

struct DiffEdge {
  std::size_t from, to;
  std::int64_t w;  // scaled
  bool strict;
};

}  // namespace

std::optional<std::vector<TimedStep>> concretize(const CompiledNet& net, const std::vector<std::size_t>& transitions) {
  const std::size_t steps = transitions.size();
  // Constraint tau_a - tau_b <= w becomes edge a -> b of weight w on y = -tau;
  // shortest distances from y_0 = 0 give the earliest times.
  std::vector<DiffEdge> edges;
  auto constrain = [&](std::size_t a, std::size_t b, std::int64_t w, bool strict) { edges.push_back({a, b, w, strict}); };

  StateClass c = initial_class(net);
  std::vector<std::size_t> enabled_at(net.num_transitions(), 0);
  for (std::size_t s = 1; s <= steps; ++s) {
    std::size_t t = transitions[s - 1];
    auto f = fireable(net, c);
    if (!std::binary_search(f.begin(), f.end(), t)) return std::nullopt;
    constrain(s - 1, s, 0, false);
    constrain(enabled_at[t], s, -net.lower_scaled(t), !net.lower_closed(t));
    for (std::size_t k : c.enabled) {
      if (auto hi = net.upper_scaled(k)) constrain(s, enabled_at[k], *hi, !net.upper_closed(k));
    }
    StateClass next = successor(net, c, t);
    for (std::size_t k : next.enabled)
      if (!persists(net, c.state, t, next.state, k)) enabled_at[k] = s;
    c = std::move(next);
  }

  bool any_strict = std::any_of(edges.begin(), edges.end(), [](const DiffEdge& e) { return e.strict; });
  const std::int64_t K = any_strict ? static_cast<std::int64_t>(steps) + 2 : 1;
  const std::int64_t INF = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> dist(steps + 1, INF);
  dist[0] = 0;
  for (std::size_t round = 0; round <= steps + 1; ++round) {
    bool changed = false;
    for (const auto& e : edges) {
      if (dist[e.from] == INF) continue;
      std::int64_t w = e.w * K - (e.strict ? 1 : 0);
      if (dist[e.from] + w < dist[e.to]) {
        dist[e.to] = dist[e.from] + w;
        changed = true;
      }
    }
    if (!changed) break;
    if (round == steps + 1) return std::nullopt;  // negative cycle
  }
  std::vector<TimedStep> out;
  for (std::size_t s = 1; s <= steps; ++s) out.push_back({transitions[s - 1], Rational(-dist[s], K * net.time_scale())});
  return out;
}

std::string check_timed_run(const CompiledNet& net, const std::vector<TimedStep>& run) {
  SystemState s = net.initial_state();
  std::vector<std::optional<Rational>> since(net.num_transitions());
  for (std::size_t t = 0; t < net.num_transitions(); ++t)
    if (net.is_enabled(s, t)) since[t] = Rational(0);
  Rational now(0);
  for (std::size_t i = 0; i < run.size(); ++i) {
    const auto& [t, at] = run[i];
    const std::string where = "step " + std::to_string(i + 1) + " (" + net.transition_id(t) + "): ";
    if (at < now) return where + "time goes backwards";
    if (!since[t]) return where + "not enabled";
    for (std::size_t k = 0; k < net.num_transitions(); ++k) {
      if (!since[k]) continue;
      const auto& iv = net.transition(k).interval;
      if (!iv.upper) continue;
      Rational elapsed = at - *since[k];
      if (elapsed > *iv.upper || (elapsed == *iv.upper && !iv.upper_closed))
        return where + "deadline of " + net.transition_id(k) + " passed";
    }
    const auto& iv = net.transition(t).interval;
    Rational elapsed = at - *since[t];
    if (elapsed < iv.lower || (elapsed == iv.lower && !iv.lower_closed)) return where + "fired too early";
    SystemState mid = s;
    for (const auto& [p, w] : net.pre(t)) mid.marking[p] -= w;
    SystemState next = net.fire(s, t);
    std::vector<std::optional<Rational>> nsince(net.num_transitions());
    for (std::size_t k = 0; k < net.num_transitions(); ++k) {
      if (!net.is_enabled(next, k)) continue;
      bool keep = k != t && since[k] && net.is_enabled(mid, k);
      nsince[k] = keep ? since[k] : std::optional<Rational>(at);
    }
    s = std::move(next);
    since = std::move(nsince);
    now = at;
  }
  return {};
}

}  // namespace tpnsec
