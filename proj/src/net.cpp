#include "tpnsec/net.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace tpnsec {

std::string Diagnostic::to_string() const {
  std::string s;
  if (!file.empty()) {
    s += file;
    if (line > 0) s += ":" + std::to_string(line) + ":" + std::to_string(column);
    s += ": ";
  }
  s += severity == Severity::Error ? "error: " : "warning: ";
  if (!location.empty()) s += "[" + location + "] ";
  return s + message;
}

bool has_errors(std::span<const Diagnostic> diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

Net& Net::add_place(std::string id, int tokens) {
  if (tokens != 0) initial_marking[id] = tokens;
  places.push_back(std::move(id));
  return *this;
}

Net& Net::add_variable(std::string name, std::int64_t initial) {
  variables.push_back({std::move(name), initial});
  return *this;
}

Net& Net::ensure_variable(const std::string& name, std::int64_t initial) {
  if (!has_variable(name)) add_variable(name, initial);
  return *this;
}

Transition& Net::add_transition(Transition t) {
  transitions.push_back(std::move(t));
  return transitions.back();
}

bool Net::has_place(const std::string& id) const { return std::find(places.begin(), places.end(), id) != places.end(); }

bool Net::has_variable(const std::string& name) const {
  return std::any_of(variables.begin(), variables.end(), [&](const Variable& v) { return v.name == name; });
}

const Transition* Net::find_transition(const std::string& id) const {
  for (const auto& t : transitions)
    if (t.id == id) return &t;
  return nullptr;
}

Transition* Net::find_transition(const std::string& id) {
  for (auto& t : transitions)
    if (t.id == id) return &t;
  return nullptr;
}

namespace {

/// Exact match first, then a unique match on the `.name` suffix of a qualified id.
class PlaceResolver {
 public:
  explicit PlaceResolver(const std::vector<std::string>& places) {
    for (std::size_t i = 0; i < places.size(); ++i) {
      exact_.emplace(places[i], i);
      for (std::size_t dot = places[i].find('.'); dot != std::string::npos; dot = places[i].find('.', dot + 1))
        suffix_.emplace(places[i].substr(dot + 1), i);
    }
  }

  std::optional<std::size_t> resolve(const std::string& ref) const {
    if (auto it = exact_.find(ref); it != exact_.end()) return it->second;
    auto [b, e] = suffix_.equal_range(ref);
    if (b == e || std::next(b) != e) return std::nullopt;
    return b->second;
  }

  bool ambiguous(const std::string& ref) const {
    if (exact_.count(ref)) return false;
    return suffix_.count(ref) > 1;
  }

 private:
  std::unordered_map<std::string, std::size_t> exact_;
  std::unordered_multimap<std::string, std::size_t> suffix_;
};

void check_expr(const Expr& e, Type want, const PlaceResolver& places, const std::set<std::string>& vars,
                const std::string& loc, const std::string& what, std::vector<Diagnostic>& out) {
  std::string err;
  Type got = type_of(e, &err);
  if (!err.empty()) {
    out.push_back({Severity::Error, {}, 0, 0, loc, what + ": " + err});
  } else if (got != want) {
    out.push_back({Severity::Error, {}, 0, 0, loc,
                   what + " must be " + (want == Type::Bool ? "boolean" : "integer") + ": '" + e.to_string() + "'"});
  }
  std::set<std::string> ps, vs;
  e.collect(&ps, &vs);
  for (const auto& p : ps) {
    if (!places.resolve(p)) {
      out.push_back({Severity::Error, {}, 0, 0, loc,
                     (places.ambiguous(p) ? "ambiguous place " : "unresolved place ") + p});
    }
  }
  for (const auto& v : vs)
    if (!vars.count(v)) out.push_back({Severity::Error, {}, 0, 0, loc, "unresolved variable " + v});
}

}  // namespace

std::vector<Diagnostic> validate_net(const Net& net) {
  std::vector<Diagnostic> out;
  auto err = [&](const std::string& loc, const std::string& msg) {
    out.push_back({Severity::Error, {}, 0, 0, loc, msg});
  };
  const std::string base = net.name.empty() ? std::string("net") : net.name;

  std::set<std::string> place_set;
  for (const auto& p : net.places) {
    if (p.empty()) err(base, "empty place id");
    if (!place_set.insert(p).second) err(base + "/" + p, "duplicate place " + p);
  }
  std::set<std::string> trans_set;
  for (const auto& t : net.transitions) {
    if (!trans_set.insert(t.id).second) err(base + "/" + t.id, "duplicate transition " + t.id);
    if (place_set.count(t.id)) err(base + "/" + t.id, "id used for both a place and a transition: " + t.id);
  }
  std::set<std::string> var_set;
  for (const auto& v : net.variables)
    if (!var_set.insert(v.name).second) err(base, "duplicate variable " + v.name);

  for (const auto& [p, n] : net.initial_marking) {
    if (!place_set.count(p)) err(base, "initial marking names unresolved place " + p);
    if (n < 0) err(base + "/" + p, "negative token count");
  }

  std::vector<std::string> visible = net.places;
  std::set<std::string> import_set;
  for (const auto& i : net.imports) {
    if (place_set.count(i)) err(base + "/" + i, "import names a local place: " + i);
    if (!import_set.insert(i).second) err(base + "/" + i, "duplicate import " + i);
    visible.push_back(i);
  }
  PlaceResolver resolver(visible);
  for (const auto& t : net.transitions) {
    const std::string loc = base + "/" + t.id;
    if (t.inputs.empty() && t.outputs.empty()) err(loc, "isolated transition (no input or output arc)");
    for (const auto* arcs : {&t.inputs, &t.outputs}) {
      std::set<std::string> seen;
      for (const auto& a : *arcs) {
        if (!place_set.count(a.place)) err(loc, "unresolved place " + a.place);
        if (a.weight < 1) err(loc, "arc weight must be >= 1 on " + a.place);
        if (!seen.insert(a.place).second) err(loc, "duplicate arc on " + a.place);
      }
    }
    if (auto why = t.interval.check(); !why.empty()) err(loc, "malformed interval " + t.interval.to_string() + ": " + why);
    check_expr(t.guard, Type::Bool, resolver, var_set, loc, "guard", out);
    std::set<std::string> assigned;
    for (const auto& u : t.updates) {
      if (!var_set.count(u.var)) err(loc, "update of unresolved variable " + u.var);
      if (!assigned.insert(u.var).second) err(loc, "variable assigned twice: " + u.var);
      check_expr(u.value, Type::Int, resolver, var_set, loc, "update of " + u.var, out);
    }
  }
  return out;
}

Net compose(const std::vector<std::pair<std::string, Net>>& parts) {
  std::set<std::string> namespaces;
  for (const auto& [ns, _] : parts) {
    if (!ns.empty() && !namespaces.insert(ns).second) throw ModelError("duplicate namespace " + ns);
  }
  Net out;
  std::set<std::string> ids;
  std::map<std::string, std::int64_t> var_init;
  for (const auto& [ns, net] : parts) {
    if (!out.name.empty()) out.name += "+";
    out.name += ns.empty() ? net.name : ns;
    auto q = [&](const std::string& id) { return ns.empty() ? id : ns + "." + id; };
    std::set<std::string> local(net.places.begin(), net.places.end());
    auto qualify = [&](Op op, const std::string& name) {
      if (op == Op::Mark && local.count(name)) return q(name);
      return name;
    };
    for (const auto& p : net.places) {
      if (!ids.insert(q(p)).second) throw ModelError("duplicate namespaced id " + q(p));
      out.places.push_back(q(p));
    }
    for (const auto& [p, n] : net.initial_marking)
      if (n != 0) out.initial_marking[q(p)] = n;
    for (const auto& v : net.variables) {
      auto [it, fresh] = var_init.emplace(v.name, v.initial);
      if (fresh) {
        out.variables.push_back(v);
      } else if (it->second != v.initial) {
        throw ModelError("merged variable " + v.name + " has conflicting initial values " + std::to_string(it->second) +
                         " and " + std::to_string(v.initial));
      }
    }
    for (const auto& t : net.transitions) {
      Transition c = t;
      c.id = q(t.id);
      if (!ids.insert(c.id).second) throw ModelError("duplicate namespaced id " + c.id);
      for (auto& a : c.inputs) a.place = q(a.place);
      for (auto& a : c.outputs) a.place = q(a.place);
      c.guard = t.guard.rename(qualify);
      for (auto& u : c.updates) u.value = u.value.rename(qualify);
      out.transitions.push_back(std::move(c));
    }
  }
  PlaceResolver resolver(out.places);
  std::set<std::string> kept;
  for (const auto& [ns, net] : parts)
    for (const auto& i : net.imports)
      if (!resolver.resolve(i) && kept.insert(i).second) out.imports.push_back(i);
  return out;
}

Net with_free_environment(const Net& net) {
  Net out = net;
  out.imports.clear();
  for (const auto& i : net.imports) {
    out.add_place(i);
    Transition on, off;
    on.id = i + "__env_on";
    on.outputs = {{i, 1}};
    on.guard = mark_eq(i, 0);
    on.interval = TimeInterval::at_least(0);
    off.id = i + "__env_off";
    off.inputs = {{i, 1}};
    off.interval = TimeInterval::at_least(0);
    out.add_transition(std::move(on));
    out.add_transition(std::move(off));
  }
  return out;
}

std::size_t SystemState::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  for (auto m : marking) mix(static_cast<std::uint64_t>(m));
  for (auto v : valuation) mix(static_cast<std::uint64_t>(v));
  return static_cast<std::size_t>(h);
}

namespace {

enum Code : std::int32_t { kLit, kVar, kMark, kNot, kAdd, kEq, kNe, kLt, kLe, kGt, kGe, kAnd, kOr };

}  // namespace

CompiledNet::CompiledNet(const Net& net, VariableBounds bounds) : net_(net), bounds_(bounds) {
  auto diags = validate_net(net_);
  if (has_errors(diags)) {
    std::string msg = "invalid net '" + net_.name + "':";
    for (const auto& d : diags)
      if (d.severity == Severity::Error) msg += "\n  " + d.to_string();
    throw ModelError(msg, diags);
  }
  place_names_ = net_.places;
  for (std::size_t i = 0; i < place_names_.size(); ++i) {
    place_idx_.emplace(place_names_[i], i);
    for (std::size_t dot = place_names_[i].find('.'); dot != std::string::npos;
         dot = place_names_[i].find('.', dot + 1))
      place_suffix_.emplace(place_names_[i].substr(dot + 1), i);
  }
  for (const auto& v : net_.variables) {
    var_idx_.emplace(v.name, var_names_.size());
    var_names_.push_back(v.name);
  }

  std::vector<std::size_t> order(net_.transitions.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return net_.transitions[a].id < net_.transitions[b].id; });

  std::int64_t scale = 1;
  for (const auto& t : net_.transitions) {
    scale = std::lcm(scale, t.interval.lower.den());
    if (t.interval.upper) scale = std::lcm(scale, t.interval.upper->den());
  }
  time_scale_ = scale;

  for (std::size_t src : order) {
    const Transition& t = net_.transitions[src];
    CompiledTransition c;
    c.source = src;
    c.delta.assign(place_names_.size(), 0);
    for (const auto& a : t.inputs) {
      c.pre.emplace_back(place_idx_.at(a.place), a.weight);
      c.delta[place_idx_.at(a.place)] -= a.weight;
    }
    for (const auto& a : t.outputs) {
      c.post.emplace_back(place_idx_.at(a.place), a.weight);
      c.delta[place_idx_.at(a.place)] += a.weight;
    }
    for (std::size_t p = 0; p < c.delta.size(); ++p)
      if (c.delta[p] != 0) c.effect.emplace_back(p, c.delta[p]);
    c.guard_code = compile_code(t.guard);
    for (const auto& u : t.updates) c.updates.emplace_back(var_idx_.at(u.var), compile_code(u.value));
    c.lo = (t.interval.lower * Rational(scale)).num();
    if (t.interval.upper) c.hi = (*t.interval.upper * Rational(scale)).num();
    trans_idx_.emplace(t.id, trans_.size());
    trans_.push_back(std::move(c));
  }
}

std::optional<std::size_t> CompiledNet::place_index(const std::string& name) const {
  if (auto it = place_idx_.find(name); it != place_idx_.end()) return it->second;
  return std::nullopt;
}

std::optional<std::size_t> CompiledNet::var_index(const std::string& name) const {
  if (auto it = var_idx_.find(name); it != var_idx_.end()) return it->second;
  return std::nullopt;
}

std::optional<std::size_t> CompiledNet::transition_index(const std::string& id) const {
  if (auto it = trans_idx_.find(id); it != trans_idx_.end()) return it->second;
  return std::nullopt;
}

std::optional<std::size_t> CompiledNet::resolve_place(const std::string& ref) const {
  if (auto p = place_index(ref)) return p;
  auto [b, e] = place_suffix_.equal_range(ref);
  if (b == e || std::next(b) != e) return std::nullopt;
  return b->second;
}

std::vector<std::int32_t> CompiledNet::compile_code(const Expr& e) const {
  std::vector<std::int32_t> code;
  auto emit = [&](auto&& self, const Expr& x) -> void {
    switch (x.op()) {
      case Op::Int:
      case Op::Bool: {
        code.push_back(kLit);
        auto& lits = const_cast<std::vector<std::int64_t>&>(literals_);
        code.push_back(static_cast<std::int32_t>(lits.size()));
        lits.push_back(x.value());
        return;
      }
      case Op::Var: {
        auto v = var_index(x.name());
        if (!v) throw EvalError("unresolved variable " + x.name());
        code.push_back(kVar);
        code.push_back(static_cast<std::int32_t>(*v));
        return;
      }
      case Op::Mark: {
        auto p = resolve_place(x.name());
        if (!p) throw EvalError("unresolved place " + x.name());
        code.push_back(kMark);
        code.push_back(static_cast<std::int32_t>(*p));
        return;
      }
      case Op::Not:
        self(self, x.lhs());
        code.push_back(kNot);
        return;
      default: break;
    }
    self(self, x.lhs());
    self(self, x.rhs());
    switch (x.op()) {
      case Op::Add: code.push_back(kAdd); break;
      case Op::Eq: code.push_back(kEq); break;
      case Op::Ne: code.push_back(kNe); break;
      case Op::Lt: code.push_back(kLt); break;
      case Op::Le: code.push_back(kLe); break;
      case Op::Gt: code.push_back(kGt); break;
      case Op::Ge: code.push_back(kGe); break;
      case Op::And: code.push_back(kAnd); break;
      case Op::Or: code.push_back(kOr); break;
      default: break;
    }
  };
  std::string err;
  type_of(e, &err);
  if (!err.empty()) throw EvalError(err);
  emit(emit, e);
  return code;
}

std::int64_t CompiledNet::run(const std::vector<std::int32_t>& code, const SystemState& s) const {
  std::int64_t stack[64];
  int sp = 0;
  for (std::size_t pc = 0; pc < code.size(); ++pc) {
    switch (code[pc]) {
      case kLit: stack[sp++] = literals_[static_cast<std::size_t>(code[++pc])]; break;
      case kVar: stack[sp++] = s.valuation[static_cast<std::size_t>(code[++pc])]; break;
      case kMark: stack[sp++] = s.marking[static_cast<std::size_t>(code[++pc])]; break;
      case kNot: stack[sp - 1] = !stack[sp - 1]; break;
      default: {
        std::int64_t b = stack[--sp];
        std::int64_t& a = stack[sp - 1];
        switch (code[pc]) {
          case kAdd: a = a + b; break;
          case kEq: a = a == b; break;
          case kNe: a = a != b; break;
          case kLt: a = a < b; break;
          case kLe: a = a <= b; break;
          case kGt: a = a > b; break;
          case kGe: a = a >= b; break;
          case kAnd: a = a && b; break;
          case kOr: a = a || b; break;
          default: break;
        }
      }
    }
    if (sp >= 63) throw EvalError("expression too deep");
  }
  return stack[0];
}

Program CompiledNet::compile_expr(const Expr& e) const {
  Program p;
  p.net_ = this;
  p.code_ = compile_code(e);
  return p;
}

SystemState CompiledNet::initial_state() const {
  SystemState s;
  s.marking.assign(place_names_.size(), 0);
  for (const auto& [p, n] : net_.initial_marking) s.marking[place_idx_.at(p)] = n;
  for (const auto& v : net_.variables) s.valuation.push_back(v.initial);
  return s;
}

bool CompiledNet::token_enabled(const SystemState& s, std::size_t t) const {
  for (const auto& [p, w] : trans_[t].pre)
    if (s.marking[p] < w) return false;
  return true;
}

bool CompiledNet::token_enabled_after_consuming(const SystemState& s, std::size_t consumed, std::size_t t) const {
  for (const auto& [p, w] : trans_[t].pre) {
    std::int64_t have = s.marking[p];
    for (const auto& [q, v] : trans_[consumed].pre)
      if (q == p) have -= v;
    if (have < w) return false;
  }
  return true;
}

bool CompiledNet::guard_holds(const SystemState& s, std::size_t t) const { return run(trans_[t].guard_code, s) != 0; }

std::vector<std::size_t> CompiledNet::enabled(const SystemState& s) const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < trans_.size(); ++t)
    if (is_enabled(s, t)) out.push_back(t);
  return out;
}

SystemState CompiledNet::fire(const SystemState& s, std::size_t t) const {
  if (t >= trans_.size()) throw PreconditionError("no such transition");
  if (!is_enabled(s, t)) throw PreconditionError("transition " + transition_id(t) + " is not enabled");
  SystemState n = s;
  for (const auto& [p, d] : trans_[t].effect) n.marking[p] = static_cast<std::int32_t>(n.marking[p] + d);
  for (const auto& [v, code] : trans_[t].updates) {
    std::int64_t val = run(code, s);
    if (val < bounds_.min || val > bounds_.max)
      throw EvalError("variable " + var_names_[v] + " leaves its bounds on " + transition_id(t));
    n.valuation[v] = val;
  }
  return n;
}

Value eval_expr(const Expr& e, const CompiledNet& net, const SystemState& s) {
  EvalEnv env;
  env.marking = [&](const std::string& p) -> std::int64_t {
    auto i = net.resolve_place(p);
    if (!i) throw EvalError("unresolved place " + p);
    return s.marking[*i];
  };
  env.variable = [&](const std::string& v) -> std::int64_t {
    auto i = net.var_index(v);
    if (!i) throw EvalError("unresolved variable " + v);
    return s.valuation[*i];
  };
  return eval(e, env);
}

}  // namespace tpnsec
