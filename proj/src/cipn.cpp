#include "tpnsec/cipn.hpp"

#include <algorithm>

namespace tpnsec {

CipnAction CipnAction::act(std::string actuator, std::int64_t value) {
  CipnAction a;
  a.kind = Kind::Act;
  a.name = std::move(actuator);
  a.value = value;
  return a;
}

CipnAction CipnAction::send(std::string signal, std::int64_t value, std::vector<std::string> dests) {
  CipnAction a;
  a.kind = Kind::Send;
  a.name = std::move(signal);
  a.value = value;
  a.dests = std::move(dests);
  return a;
}

CipnAction CipnAction::wait(Rational ms) {
  CipnAction a;
  a.kind = Kind::Delay;
  a.delay = ms;
  return a;
}

std::string CipnAction::to_string() const {
  switch (kind) {
    case Kind::Act: return "act " + quote_id(name) + "=" + std::to_string(value);
    case Kind::Delay: return "delay(" + delay.to_string() + "ms)";
    case Kind::Send: {
      std::string s = "send(";
      if (!dests.empty()) {
        s += "{";
        for (std::size_t i = 0; i < dests.size(); ++i) s += (i ? ", " : "") + quote_id(dests[i]);
        s += "}, ";
      }
      return s + quote_id(name) + ", " + std::to_string(value) + ")";
    }
  }
  return {};
}

const CipnPlace* CipnModel::find_place(const std::string& id) const {
  for (const auto& p : places)
    if (p.id == id) return &p;
  return nullptr;
}

std::string CipnModel::initial_place() const {
  std::string found;
  for (const auto& [p, n] : initial_marking) {
    if (n == 0) continue;
    if (n != 1 || !found.empty()) return {};
    found = p;
  }
  return found;
}

bool CipnModel::is_sensor(const std::string& n) const {
  return std::find(sensors.begin(), sensors.end(), n) != sensors.end();
}

bool CipnModel::is_signal(const std::string& n) const {
  return std::find(signals.begin(), signals.end(), n) != signals.end();
}

namespace {

struct Atoms {
  std::map<std::string, std::set<std::int64_t>> eq, ne;
  bool never = false;
};

std::optional<std::pair<std::string, std::int64_t>> var_literal(const Expr& e) {
  if (e.op() != Op::Eq && e.op() != Op::Ne) return std::nullopt;
  if (e.lhs().op() == Op::Var && e.rhs().op() == Op::Int) return std::pair{e.lhs().name(), e.rhs().value()};
  if (e.rhs().op() == Op::Var && e.lhs().op() == Op::Int) return std::pair{e.rhs().name(), e.lhs().value()};
  return std::nullopt;
}

void conjuncts(const Expr& e, Atoms& out) {
  if (e.op() == Op::And) {
    conjuncts(e.lhs(), out);
    conjuncts(e.rhs(), out);
    return;
  }
  if (e.op() == Op::Bool && e.value() == 0) out.never = true;
  bool negated = false;
  Expr x = e;
  if (x.op() == Op::Not) {
    negated = true;
    x = x.lhs();
  }
  if (auto vl = var_literal(x)) {
    bool is_eq = (x.op() == Op::Eq) != negated;
    (is_eq ? out.eq : out.ne)[vl->first].insert(vl->second);
  }
}

bool exclusive(const Expr& a, const Expr& b) {
  if (a.op() == Op::Or) return exclusive(a.lhs(), b) && exclusive(a.rhs(), b);
  if (b.op() == Op::Or) return exclusive(a, b.lhs()) && exclusive(a, b.rhs());
  Atoms x, y;
  conjuncts(a, x);
  conjuncts(b, y);
  if (x.never || y.never) return true;
  for (const auto& [var, vals] : x.eq) {
    if (auto it = y.eq.find(var); it != y.eq.end()) {
      for (auto v : vals)
        for (auto w : it->second)
          if (v != w) return true;
    }
    if (auto it = y.ne.find(var); it != y.ne.end())
      for (auto v : vals)
        if (it->second.count(v)) return true;
  }
  for (const auto& [var, vals] : y.eq)
    if (auto it = x.ne.find(var); it != x.ne.end())
      for (auto v : vals)
        if (it->second.count(v)) return true;
  return false;
}

}  // namespace

std::vector<Diagnostic> check_cipn(const CipnModel& m) {
  std::vector<Diagnostic> out;
  const std::string base = m.name.empty() ? std::string("cipn") : m.name;
  auto err = [&](const std::string& loc, const std::string& msg) { out.push_back({Severity::Error, {}, 0, 0, loc, msg}); };
  auto warn = [&](const std::string& loc, const std::string& msg) {
    out.push_back({Severity::Warning, {}, 0, 0, loc, msg});
  };

  std::set<std::string> ids, names;
  for (const auto& p : m.places)
    if (!ids.insert(p.id).second) err(base + "/" + p.id, "duplicate place " + p.id);
  for (const auto& t : m.transitions) {
    if (!ids.insert(t.id).second) err(base + "/" + t.id, "duplicate id " + t.id);
  }
  std::set<std::string> vars;
  for (const auto& s : m.sensors)
    if (!names.insert(s).second) err(base, "duplicate name " + s);
  for (const auto& s : m.signals)
    if (!names.insert(s).second) err(base, "duplicate name " + s);
  for (const auto& v : m.variables) {
    if (!names.insert(v.name).second) err(base, "duplicate name " + v.name);
    vars.insert(v.name);
  }

  if (m.places.empty()) {
    err(base, "no initial place");
  } else {
    int marked = 0, tokens = 0;
    for (const auto& [p, n] : m.initial_marking) {
      if (!m.find_place(p)) err(base, "initial marking names unresolved place " + p);
      if (n > 0) ++marked;
      tokens += n;
    }
    if (marked == 0) err(base, "no initial place");
    else if (marked != 1 || tokens != 1) err(base, "initial marking must put exactly one token in exactly one place");
  }

  std::map<std::string, std::vector<const CipnTransition*>> outgoing;
  for (const auto& t : m.transitions) {
    const std::string loc = base + "/" + t.id;
    if (t.inputs.empty() && t.outputs.empty()) err(loc, "isolated transition (no input or output arc)");
    for (const auto* arcs : {&t.inputs, &t.outputs})
      for (const auto& a : *arcs) {
        if (!m.find_place(a.place)) err(loc, "unresolved place " + a.place);
        if (a.weight != 1) err(loc, "CIPN arc weights must be 1 (" + a.place + ")");
      }
    for (const auto& a : t.inputs) outgoing[a.place].push_back(&t);
    std::string terr;
    if (type_of(t.cond, &terr) != Type::Bool || !terr.empty())
      err(loc, "condition must be boolean" + (terr.empty() ? std::string() : ": " + terr));
    std::set<std::string> ps, vs;
    t.cond.collect(&ps, &vs);
    if (!ps.empty()) err(loc, "conditions may not read markings; bind a sensor instead");
    for (const auto& v : vs)
      if (!names.count(v)) err(loc, "unresolved name " + v + " in condition");
    std::set<std::string> assigned;
    for (const auto& u : t.updates) {
      if (!vars.count(u.var)) err(loc, "update of unresolved variable " + u.var);
      if (!assigned.insert(u.var).second) err(loc, "variable assigned twice: " + u.var);
      std::set<std::string> uvs, ups;
      u.value.collect(&ups, &uvs);
      for (const auto& v : uvs)
        if (!vars.count(v)) err(loc, "update reads non-variable " + v);
      if (!ups.empty()) err(loc, "updates may not read markings");
    }
  }

  for (const auto& p : m.places) {
    const std::string loc = base + "/" + p.id;
    bool has_delay = false;
    for (const auto& a : p.actions) {
      if (a.kind == CipnAction::Kind::Delay) {
        has_delay = true;
        if (a.delay < Rational(0)) err(loc, "negative delay");
      }
      if (a.kind == CipnAction::Kind::Send && !m.is_signal(a.name)) err(loc, "send of undeclared signal " + a.name);
    }
    const auto& outs = outgoing[p.id];
    if (has_delay && outs.size() != 1)
      err(loc, "delay action requires exactly one outgoing transition (found " + std::to_string(outs.size()) + ")");
    for (std::size_t i = 0; i < outs.size(); ++i)
      for (std::size_t j = i + 1; j < outs.size(); ++j)
        if (!exclusive(outs[i]->cond, outs[j]->cond))
          warn(loc, "conditions of " + outs[i]->id + " and " + outs[j]->id + " are not mutually exclusive");
  }
  return out;
}

ActuatorBinding derive_actuator_binding(const CipnModel& m) {
  ActuatorBinding out;
  for (const auto& p : m.places)
    for (const auto& a : p.actions)
      if (a.kind == CipnAction::Kind::Act) {
        auto& v = out[{a.name, a.value}];
        if (std::find(v.begin(), v.end(), p.id) == v.end()) v.push_back(p.id);
      }
  return out;
}

int SignalTable::node_id(const std::string& node) const {
  auto it = std::find(nodes.begin(), nodes.end(), node);
  if (it == nodes.end()) throw ModelError("unknown node " + node);
  return static_cast<int>(it - nodes.begin()) + 1;
}

std::vector<std::string> SignalTable::receivers(const std::string& sender, const CipnAction& send) const {
  if (!send.dests.empty()) {
    for (const auto& d : send.dests) {
      node_id(d);
      if (d == sender) throw ModelError("node " + sender + " sends " + send.name + " to itself");
    }
    return send.dests;
  }
  std::vector<std::string> out;
  if (auto it = subscribers.find(send.name); it != subscribers.end())
    for (const auto& n : it->second)
      if (n != sender) out.push_back(n);
  return out;
}

SignalTable make_signal_table(const std::vector<std::pair<std::string, const CipnModel*>>& controllers) {
  SignalTable t;
  std::set<std::string> signals;
  for (const auto& [node, m] : controllers) {
    if (std::find(t.nodes.begin(), t.nodes.end(), node) != t.nodes.end()) throw ModelError("duplicate node " + node);
    t.nodes.push_back(node);
    for (const auto& s : m->signals) signals.insert(s);
  }
  int id = 1;
  for (const auto& s : signals) t.ids[s] = id++;
  for (const auto& [node, m] : controllers) {
    std::set<std::string> read;
    for (const auto& tr : m->transitions) {
      std::set<std::string> vs;
      tr.cond.collect(nullptr, &vs);
      for (const auto& v : vs)
        if (m->is_signal(v)) read.insert(v);
    }
    for (const auto& s : read) t.subscribers[s].push_back(node);
  }
  return t;
}

std::string mailbox_var(const std::string& dest, const std::string& signal) { return dest + "_sig_" + signal; }
std::string mailbox_flag(const std::string& dest, const std::string& signal) { return dest + "_sig_" + signal + "_rx"; }

namespace {

enum class Mode { Ideal, Channel };

struct Lowering {
  const CipnModel& m;
  const TransformContext& ctx;
  Mode mode;
  const ChannelParams* cp;
  Net net;

  std::string where(const std::string& id) const { return (m.name.empty() ? ctx.node : m.name) + "/" + id; }

  Expr rewrite(const Expr& e, std::set<std::string>& signals_read, const std::string& loc) const {
    if (auto vl = var_literal(e)) {
      const auto& [name, value] = *vl;
      if (m.is_sensor(name)) {
        auto it = ctx.sensors.find(name);
        if (it == ctx.sensors.end()) throw ModelError(loc + ": unbound sensor " + name);
        if (value != 0 && value != 1) throw ModelError(loc + ": sensor " + name + " compared with non-boolean value");
        bool positive = (value == 1) == (e.op() == Op::Eq);
        return positive ? it->second : !it->second;
      }
      if (m.is_signal(name)) {
        if (e.op() != Op::Eq) throw ModelError(loc + ": signal conditions must have the form signal==value");
        signals_read.insert(name);
        if (mode == Mode::Ideal)
          return var_eq(mailbox_flag(ctx.node, name), 1) && var_eq(mailbox_var(ctx.node, name), value);
        NodeVars n(ctx.node);
        return var_eq(n.app("RxSig"), ctx.signals->ids.at(name)) && var_eq(n.app("RxBuf"), value);
      }
      return e;
    }
    switch (e.op()) {
      case Op::Var:
        if (m.is_sensor(e.name()) || m.is_signal(e.name()))
          throw ModelError(loc + ": " + e.name() + " may only be compared with a literal");
        return e;
      case Op::Int:
      case Op::Bool:
      case Op::Mark: return e;
      case Op::Not: return !rewrite(e.lhs(), signals_read, loc);
      default: return Expr::binary(e.op(), rewrite(e.lhs(), signals_read, loc), rewrite(e.rhs(), signals_read, loc));
    }
  }

  bool reads_signal(const Expr& cond) const {
    std::set<std::string> vs;
    cond.collect(nullptr, &vs);
    return std::any_of(vs.begin(), vs.end(), [&](const std::string& v) { return m.is_signal(v); });
  }

  bool is_wait(const std::string& place) const {
    for (const auto& t : m.transitions)
      for (const auto& a : t.inputs)
        if (a.place == place && reads_signal(t.cond)) return true;
    return false;
  }

  static std::string chain(const std::string& p, std::size_t k) { return p + "__c" + std::to_string(k); }

  struct Stage {
    CipnAction action;
    std::string dest;
  };

  std::vector<Stage> stages(const CipnPlace& p) const {
    std::vector<Stage> out;
    for (const auto& a : p.actions) {
      if (a.kind == CipnAction::Kind::Delay) out.push_back({a, {}});
      if (a.kind == CipnAction::Kind::Send) {
        auto rs = ctx.signals->receivers(ctx.node, a);
        if (rs.empty()) throw ModelError(where(p.id) + ": send of " + a.name + " has no receivers");
        for (const auto& r : rs) out.push_back({a, r});
      }
    }
    return out;
  }

  Net run() {
    auto diags = check_cipn(m);
    if (has_errors(diags)) {
      std::string msg = "invalid CIPN '" + m.name + "':";
      for (const auto& d : diags)
        if (d.severity == Severity::Error) msg += "\n  " + d.to_string();
      throw ModelError(msg, diags);
    }
    if (!ctx.signals) throw ModelError("transform needs a signal table");
    net.name = ctx.node;
    for (const auto& v : m.variables) net.add_variable(v.name, v.initial);
    NodeVars nv(ctx.node);
    if (mode == Mode::Channel) {
      for (const auto& x : nv.all()) net.ensure_variable(x);
    }

    std::map<std::string, std::size_t> chain_len;
    std::map<std::string, std::vector<Stage>> all_stages;
    for (const auto& p : m.places) {
      all_stages[p.id] = stages(p);
      chain_len[p.id] = all_stages[p.id].size();
    }
    const std::string init = m.initial_place();
    for (const auto& p : m.places) {
      net.add_place(p.id, p.id == init ? 1 : 0);
      if (chain_len[p.id] > 0)
        for (std::size_t k = 0; k <= chain_len[p.id]; ++k) net.add_place(chain(p.id, k), p.id == init && k == 0 ? 1 : 0);
    }
    if (mode == Mode::Channel)
      for (auto& var : net.variables)
        if (var.name == nv.app("wfRx")) var.initial = (chain_len[init] == 0 && is_wait(init)) ? 1 : 0;

    auto wait_flag = [&](const std::vector<Arc>& outs) -> std::optional<Update> {
      if (mode != Mode::Channel) return std::nullopt;
      std::int64_t flag = 0;
      for (const auto& a : outs)
        if (chain_len[a.place] == 0 && is_wait(a.place)) flag = 1;
      return Update{nv.app("wfRx"), Expr::integer(flag)};
    };

    for (const auto& t : m.transitions) {
      Transition out;
      out.id = t.id;
      std::set<std::string> read;
      out.guard = rewrite(t.cond, read, where(t.id));
      out.updates = t.updates;
      if (mode == Mode::Ideal) {
        for (const auto& s : read) {
          out.updates.push_back({mailbox_var(ctx.node, s), Expr::integer(0)});
          out.updates.push_back({mailbox_flag(ctx.node, s), Expr::integer(0)});
        }
        for (const auto& s : read) {
          net.ensure_variable(mailbox_var(ctx.node, s));
          net.ensure_variable(mailbox_flag(ctx.node, s));
        }
      } else if (!read.empty()) {
        for (const char* x : {"RxSig", "RxBuf", "RxMAC"}) out.updates.push_back({nv.app(x), Expr::integer(0)});
      }
      for (const auto& a : t.inputs) {
        out.inputs.push_back({a.place, 1});
        if (chain_len[a.place]) out.inputs.push_back({chain(a.place, chain_len[a.place]), 1});
      }
      for (const auto& a : t.outputs) {
        out.outputs.push_back({a.place, 1});
        if (chain_len[a.place]) out.outputs.push_back({chain(a.place, 0), 1});
      }
      if (auto u = wait_flag(t.outputs)) out.updates.push_back(*u);
      net.add_transition(std::move(out));
    }

    for (const auto& p : m.places) {
      const auto& st = all_stages[p.id];
      for (std::size_t k = 1; k <= st.size(); ++k) {
        const Stage& s = st[k - 1];
        const std::string from = chain(p.id, k - 1), to = chain(p.id, k);
        const std::string idx = std::to_string(k);
        std::vector<Update> done;
        if (k == st.size() && mode == Mode::Channel)
          done.push_back({nv.app("wfRx"), Expr::integer(is_wait(p.id) ? 1 : 0)});
        if (s.action.kind == CipnAction::Kind::Delay) {
          Transition d;
          d.id = p.id + "__delay" + idx;
          d.inputs = {{from, 1}};
          d.outputs = {{to, 1}};
          d.interval = TimeInterval::closed(s.action.delay, s.action.delay);
          d.updates = done;
          net.add_transition(std::move(d));
          continue;
        }
        if (mode == Mode::Ideal) {
          net.ensure_variable(mailbox_var(s.dest, s.action.name));
          net.ensure_variable(mailbox_flag(s.dest, s.action.name));
          Transition d;
          d.id = p.id + "__send" + idx;
          d.inputs = {{from, 1}};
          d.outputs = {{to, 1}};
          d.updates = {{mailbox_var(s.dest, s.action.name), Expr::integer(s.action.value)},
                       {mailbox_flag(s.dest, s.action.name), Expr::integer(1)}};
          net.add_transition(std::move(d));
          continue;
        }
        const std::string wf = p.id + "__wfAck" + idx;
        net.add_place(wf);
        Transition req;
        req.id = p.id + "__txReq" + idx;
        req.inputs = {{from, 1}};
        req.outputs = {{wf, 1}};
        req.guard = var_eq(nv.xcvr("Tx"), 0);
        req.updates = {{nv.xcvr("PTx"), Expr::integer(s.action.value)},
                       {nv.xcvr("PTxSig"), Expr::integer(ctx.signals->ids.at(s.action.name))},
                       {nv.xcvr("Dst"), Expr::integer(ctx.signals->node_id(s.dest))},
                       {nv.xcvr("Tx"), Expr::integer(1)},
                       {nv.app("RxAck"), Expr::integer(0)}};
        net.add_transition(std::move(req));
        Transition ok;
        ok.id = p.id + "__ackOK" + idx;
        ok.inputs = {{wf, 1}};
        ok.outputs = {{to, 1}};
        ok.guard = var_eq(nv.app("RxAck"), 1);
        ok.updates = {{nv.app("RxAck"), Expr::integer(0)}};
        ok.updates.insert(ok.updates.end(), done.begin(), done.end());
        net.add_transition(std::move(ok));
        Transition to_retry;
        to_retry.id = p.id + "__wfAckTO" + idx;
        to_retry.inputs = {{wf, 1}};
        to_retry.outputs = {{from, 1}};
        to_retry.guard = var_eq(nv.xcvr("Tx"), 0) && var_eq(nv.app("RxAck"), 0);
        to_retry.interval = TimeInterval::closed(cp->t_wf_ack, cp->t_wf_ack);
        net.add_transition(std::move(to_retry));
      }
    }
    std::set<std::string> read;
    for (const auto& t : net.transitions) t.guard.collect(&read, nullptr);
    for (const auto& p : read)
      if (!net.has_place(p)) net.imports.push_back(p);
    return net;
  }
};

}  // namespace

Net transform_ideal(const CipnModel& m, const TransformContext& ctx) {
  Lowering l{m, ctx, Mode::Ideal, nullptr, {}};
  return l.run();
}

Net transform_channel(const CipnModel& m, const TransformContext& ctx, const ChannelParams& cp,
                      const SecurityConfig& sec) {
  Lowering l{m, ctx, Mode::Channel, &cp, {}};
  Net net = l.run();
  SecurityConfig local = sec;
  // Patches only attach where the controller has something to patch.
  bool receives = false, sends = false;
  for (const auto& t : net.transitions) {
    std::set<std::string> vs;
    t.guard.collect(nullptr, &vs);
    receives = receives || (t.id.find("__") == std::string::npos && vs.count(NodeVars(ctx.node).app("RxSig")));
    sends = sends || t.id.find("__wfAckTO") != std::string::npos;
  }
  if (!receives) local.auth = false;
  if (!sends) {
    local.app_retry_limit.reset();
    local.dos_detect = false;
  }
  if (!local.any()) return net;
  return apply_security_patches(net, local);
}

}  // namespace tpnsec
