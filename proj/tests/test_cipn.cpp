#include <random>

#include "doctest.h"
#include "tpnsec/dsl.hpp"
#include "tpnsec/scenario.hpp"

using namespace tpnsec;

namespace {

const std::string kCorpus = TPNSEC_CORPUS_DIR;

CipnModel load_cipn(const std::string& path) {
  auto r = parse_cipn(read_file(path), path);
  REQUIRE(r.ok());
  return *r.value;
}

ScenarioFile load_scn(const std::string& rel) {
  auto r = load_scenario(kCorpus + "/" + rel);
  REQUIRE(r.ok());
  return *r.value;
}

CipnModel parse_inline(const std::string& text) {
  auto r = parse_cipn(text);
  REQUIRE(r.ok());
  return *r.value;
}

bool has_warning(const std::vector<Diagnostic>& ds, const std::string& fragment) {
  for (const auto& d : ds)
    if (d.severity == Severity::Warning && d.message.find(fragment) != std::string::npos) return true;
  return false;
}

const Transition* find_t(const Net& n, const std::string& id) { return n.find_transition(id); }

bool has_update(const Transition& t, const std::string& var, std::int64_t v) {
  for (const auto& u : t.updates)
    if (u.var == var && u.value == Expr::integer(v)) return true;
  return false;
}

struct Controllers {
  std::vector<std::pair<std::string, CipnModel>> models;
  SignalTable signals;
  std::map<std::string, SensorBinding> sensors;
};

Controllers controllers_of(const ScenarioFile& s) {
  Controllers c;
  for (const auto& imp : s.controllers)
    c.models.emplace_back(imp.ns, load_cipn(s.base_dir + "/" + imp.path));
  std::vector<std::pair<std::string, const CipnModel*>> refs;
  for (const auto& [ns, m] : c.models) refs.emplace_back(ns, &m);
  c.signals = make_signal_table(refs);
  for (const auto& d : s.sensors) c.sensors[d.node][d.sensor] = d.expr;
  return c;
}

// Token game of a set of CIPNs communicating through one-slot mailboxes,
// written from the CIPN semantics only: a place's actions run in order once
// it is marked, a transition needs its input places marked with their
// actions finished and its condition true; reading a signal consumes it.
class CipnOracle {
 public:
  CipnOracle(const ScenarioFile& s, const Controllers& c) : c_(c) {
    (void)s;
    for (const auto& [ns, m] : c.models) {
      Node n{ns, &m, {}, {}};
      n.stage[m.initial_place()] = 0;
      for (const auto& v : m.variables) n.vars[v.name] = v.initial;
      nodes_.push_back(std::move(n));
    }
  }

  // Applies the controller-level effect of TPN transition `id` fired in `before`.
  std::string step(const std::string& id, const CompiledNet& net, const SystemState& before) {
    auto dot = id.find('.');
    if (dot == std::string::npos) return "";
    Node* n = node(id.substr(0, dot));
    if (!n) return "";  // plant
    const std::string local = id.substr(dot + 1);
    for (const char* tag : {"__send", "__delay"}) {
      auto pos = local.find(tag);
      if (pos == std::string::npos) continue;
      const std::string place = local.substr(0, pos);
      const std::size_t k = std::stoul(local.substr(pos + std::string(tag).size()));
      auto it = n->stage.find(place);
      if (it == n->stage.end()) return id + ": place " + place + " is not marked";
      auto st = stages(*n, place);
      if (it->second + 1 != static_cast<int>(k) || k > st.size()) return id + ": action out of order";
      const auto& [act, dest] = st[k - 1];
      const bool is_send = std::string(tag) == "__send";
      if (is_send != (act.kind == CipnAction::Kind::Send)) return id + ": wrong action kind";
      if (is_send) box_[{dest, act.name}] = {act.value, 1};
      ++it->second;
      return "";
    }
    const CipnTransition* t = nullptr;
    for (const auto& x : n->m->transitions)
      if (x.id == local) t = &x;
    if (!t) return id + ": not a CIPN transition";
    for (const auto& a : t->inputs) {
      auto it = n->stage.find(a.place);
      if (it == n->stage.end()) return id + ": input " + a.place + " not marked";
      if (it->second != static_cast<int>(stages(*n, a.place).size())) return id + ": actions of " + a.place + " unfinished";
    }
    std::set<std::string> read;
    if (!ev(*n, t->cond, net, before, read)) return id + ": condition false in the CIPN";
    std::map<std::string, std::int64_t> next = n->vars;
    for (const auto& u : t->updates) next[u.var] = ev(*n, u.value, net, before, read);
    n->vars = next;
    for (const auto& s : read) box_[{n->ns, s}] = {0, 0};
    for (const auto& a : t->inputs) n->stage.erase(a.place);
    for (const auto& a : t->outputs) n->stage[a.place] = 0;
    return "";
  }

  // Compares the oracle state with the TPN state projected onto controller places.
  std::string compare(const CompiledNet& net, const SystemState& s) const {
    auto mark = [&](const std::string& p) { return eval_expr(Expr::mark(p), net, s).v; };
    auto var = [&](const std::string& v) { return eval_expr(Expr::var(v), net, s).v; };
    for (const auto& n : nodes_) {
      for (const auto& p : n.m->places) {
        auto it = n.stage.find(p.id);
        const std::string q = n.ns + "." + p.id;
        if (mark(q) != (it != n.stage.end() ? 1 : 0)) return "marking of " + q + " differs";
        if (it != n.stage.end() && !stages(n, p.id).empty() && mark(q + "__c" + std::to_string(it->second)) != 1)
          return "action progress of " + q + " differs";
      }
      for (const auto& [v, val] : n.vars)
        if (var(v) != val) return "variable " + v + " differs";
    }
    for (const auto& [key, val] : box_) {
      if (var(mailbox_var(key.first, key.second)) != val.first) return "mailbox " + key.second + " value differs";
      if (var(mailbox_flag(key.first, key.second)) != val.second) return "mailbox " + key.second + " flag differs";
    }
    return "";
  }

 private:
  struct Node {
    std::string ns;
    const CipnModel* m;
    std::map<std::string, int> stage;  // marked place -> actions finished
    std::map<std::string, std::int64_t> vars;
  };

  Node* node(const std::string& ns) {
    for (auto& n : nodes_)
      if (n.ns == ns) return &n;
    return nullptr;
  }

  // Delays and sends of a place; a send without destinations goes to every
  // other controller with a condition on the signal.
  std::vector<std::pair<CipnAction, std::string>> stages(const Node& n, const std::string& place) const {
    std::vector<std::pair<CipnAction, std::string>> out;
    for (const auto& a : n.m->find_place(place)->actions) {
      if (a.kind == CipnAction::Kind::Delay) out.push_back({a, ""});
      if (a.kind != CipnAction::Kind::Send) continue;
      std::vector<std::string> dests = a.dests;
      if (dests.empty())
        for (const auto& [ns, m] : c_.models) {
          if (ns == n.ns) continue;
          bool reads = false;
          for (const auto& t : m.transitions) {
            std::set<std::string> vs;
            t.cond.collect(nullptr, &vs);
            reads = reads || vs.count(a.name);
          }
          if (reads) dests.push_back(ns);
        }
      for (const auto& d : dests) out.push_back({a, d});
    }
    return out;
  }

  std::int64_t ev(const Node& n, const Expr& e, const CompiledNet& net, const SystemState& s,
                  std::set<std::string>& read) const {
    auto sub = [&](const Expr& x) { return ev(n, x, net, s, read); };
    switch (e.op()) {
      case Op::Int:
      case Op::Bool: return e.value();
      case Op::Var: {
        if (n.m->is_sensor(e.name())) {
          EvalEnv env;
          env.marking = [&](const std::string& p) { return static_cast<std::int64_t>(s.marking[*net.resolve_place(p)]); };
          env.variable = [](const std::string& v) -> std::int64_t { throw EvalError("sensor binding reads " + v); };
          return eval(c_.sensors.at(n.ns).at(e.name()), env).v;
        }
        return n.vars.at(e.name());
      }
      case Op::Eq:
        if (e.lhs().op() == Op::Var && n.m->is_signal(e.lhs().name())) {
          read.insert(e.lhs().name());
          auto it = box_.find({n.ns, e.lhs().name()});
          return it != box_.end() && it->second.second == 1 && it->second.first == sub(e.rhs());
        }
        return sub(e.lhs()) == sub(e.rhs());
      case Op::Not: return !sub(e.lhs());
      case Op::Add: return sub(e.lhs()) + sub(e.rhs());
      case Op::Ne: return sub(e.lhs()) != sub(e.rhs());
      case Op::Lt: return sub(e.lhs()) < sub(e.rhs());
      case Op::Le: return sub(e.lhs()) <= sub(e.rhs());
      case Op::Gt: return sub(e.lhs()) > sub(e.rhs());
      case Op::Ge: return sub(e.lhs()) >= sub(e.rhs());
      case Op::And: return sub(e.lhs()) && sub(e.rhs());
      case Op::Or: return sub(e.lhs()) || sub(e.rhs());
      case Op::Mark: break;
    }
    throw EvalError("unexpected term in a CIPN condition: " + e.to_string());
  }

  const Controllers& c_;
  std::vector<Node> nodes_;
  std::map<std::pair<std::string, std::string>, std::pair<std::int64_t, std::int64_t>> box_;
};

const std::vector<std::string> kIdealScenarios = {"running_example/ideal.scn", "manipulator_2dof/ideal.scn",
                                                  "manipulator_3dof/ideal.scn"};

}  // namespace

TEST_CASE("well-formedness and determinism lint") {
  auto lc2 = load_cipn(kCorpus + "/running_example/lc2.cipn");
  auto ds = check_cipn(lc2);
  CHECK(!has_errors(ds));
  CHECK(ds.empty());

  auto two = parse_cipn("cipn X\nplace A initial\nplace B tokens=1\ntrans t { in: A out: B }\n");
  CHECK(!two.ok());

  auto racy = parse_inline(
      "cipn X\nsensor st\nplace A initial\nplace B\nplace C\n"
      "trans t1 cond=st==1 { in: A out: B }\ntrans t2 cond=st==1 { in: A out: C }\n"
      "trans t3 { in: B out: A }\ntrans t4 { in: C out: A }\n");
  auto rd = check_cipn(racy);
  CHECK(!has_errors(rd));
  CHECK(has_warning(rd, "t1 and t2"));
}

TEST_CASE("ideal lowering: sensors, delays, identity") {
  auto s = load_scn("running_example/ideal.scn");
  auto c = controllers_of(s);
  TransformContext ctx{"LC2", c.sensors["LC2"], &c.signals};
  Net lc2 = transform_ideal(c.models[1].second, ctx);
  const Transition* ret = find_t(lc2, "Tctrl_wfRet");
  REQUIRE(ret);
  CHECK(ret->guard == mark_eq("Pp&p_Init", 1));
  CHECK(ret->interval == TimeInterval::closed(Rational(0), Rational(0)));

  auto s2 = load_scn("manipulator_2dof/ideal.scn");
  auto c2 = controllers_of(s2);
  TransformContext ctxb{"LC_B", c2.sensors["LC_B"], &c2.signals};
  Net lcb = transform_ideal(c2.models[1].second, ctxb);
  int delays = 0;
  for (const auto& t : lcb.transitions)
    if (t.id.find("__delay") != std::string::npos) {
      ++delays;
      CHECK(t.interval == TimeInterval::closed(Rational(500), Rational(500)));
    }
  CHECK(delays == 2);

  auto plain = parse_inline("cipn X\nplace A initial\nplace B\ntrans t1 { in: A out: B }\ntrans t2 { in: B out: A }\n");
  SignalTable none = make_signal_table({{"X", &plain}});
  Net n = transform_ideal(plain, {"X", {}, &none});
  REQUIRE(n.places.size() == 2);
  REQUIRE(n.transitions.size() == 2);
  for (const auto& t : n.transitions) {
    CHECK(t.guard.is_true());
    CHECK(t.updates.empty());
    CHECK(t.interval == TimeInterval::closed(Rational(0), Rational(0)));
    REQUIRE(t.inputs.size() == 1);
    REQUIRE(t.outputs.size() == 1);
  }
  CHECK(n.find_transition("t1")->inputs[0].place == "A");
  CHECK(n.find_transition("t1")->outputs[0].place == "B");
  CHECK(n.initial_marking == std::map<std::string, int>{{"A", 1}});
}

TEST_CASE("channel lowering writes the transceiver and guards on the MAC") {
  auto s = load_scn("running_example/channel.scn");
  auto c = controllers_of(s);
  TransformContext ctx1{"LC1", c.sensors["LC1"], &c.signals};
  Net lc1 = transform_channel(c.models[0].second, ctx1, s.channel, {});
  bool pick1 = false, pick2 = false;
  for (const auto& t : lc1.transitions) {
    if (has_update(t, "LC1XCVR_Tx", 1) && has_update(t, "LC1XCVR_PTx", 1)) pick1 = true;
    if (has_update(t, "LC1XCVR_Tx", 1) && has_update(t, "LC1XCVR_PTx", 2)) pick2 = true;
  }
  CHECK(pick1);
  CHECK(pick2);
  CHECK(!lc1.has_place("Pa_DoSdetect"));

  SecurityConfig sec;
  sec.auth = true;
  sec.app_retry_limit = 5;
  TransformContext ctx2{"LC2", c.sensors["LC2"], &c.signals};
  Net lc2 = transform_channel(c.models[1].second, ctx2, s.channel, sec);
  const Transition* rx = find_t(lc2, "Tctrl_wfPick1");
  REQUIRE(rx);
  std::set<std::string> vars;
  rx->guard.collect(nullptr, &vars);
  CHECK(vars.count("LC2_RxMAC"));
  CHECK(lc2.has_place("Pa_Intrusion"));
  CHECK(lc2.has_place("Pa_DoSdetect"));
  Net lc1p = transform_channel(c.models[0].second, ctx1, s.channel, sec);
  CHECK(lc1p.has_place("Pa_DoSdetect"));
}

TEST_CASE("retry limit reaches the DoS-detect place under unbounded DoS") {
  auto s = load_scn("running_example/channel.scn");
  ScenarioOverrides o;
  o.attacks = std::vector<std::string>{"dos"};
  o.patches = {"dos-detect"};
  o.retry_limit = 5;
  auto sys = build_system(apply_overrides(s, o));
  CompiledNet net(sys.net);
  Verifier v(net);
  auto verdict = v.check(Property::ag("noDetect", mark_eq("LC1.Pa_DoSdetect", 0) && mark_eq("LC2.Pa_DoSdetect", 0)));
  CHECK(verdict.status == Status::Violated);
  REQUIRE(verdict.witness);
  CHECK(check_witness(net, Property::ag("noDetect", mark_eq("LC1.Pa_DoSdetect", 0) && mark_eq("LC2.Pa_DoSdetect", 0)),
                      *verdict.witness) == "");
}

TEST_CASE("lowering and patching are idempotent") {
  auto s = load_scn("running_example/channel.scn");
  auto c = controllers_of(s);
  for (std::size_t i = 0; i < c.models.size(); ++i) {
    const auto& [ns, m] = c.models[i];
    TransformContext ctx{ns, c.sensors[ns], &c.signals};
    CHECK(transform_ideal(m, ctx) == transform_ideal(m, ctx));
    Net plain = transform_channel(m, ctx, s.channel, {});
    SecurityConfig sec;
    sec.auth = true;
    sec.app_retry_limit = 5;
    Net once = apply_security_patches(plain, sec);
    CHECK(apply_security_patches(once, sec) == once);
    CHECK(transform_channel(m, ctx, s.channel, sec) == once);
  }
}

TEST_CASE("corpus controllers are 1-bounded and deterministic in isolation") {
  for (const auto& rel : kIdealScenarios) {
    auto s = load_scn(rel);
    auto c = controllers_of(s);
    for (const auto& [ns, m] : c.models) {
      CAPTURE(ns);
      TransformContext ctx{ns, c.sensors[ns], &c.signals};
      Net iso = with_free_environment(transform_ideal(m, ctx));
      CHECK(!has_errors(validate_net(iso)));
      CompiledNet net(iso);
      auto g = explore(net);
      REQUIRE(!g.truncated);
      const bool linted = has_warning(check_cipn(m), "");
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        auto cls = g.nodes[i];
        for (auto k : cls.state.marking) CHECK(k <= 1);
        // Two enabled CIPN transitions must not compete for one marked place.
        std::map<std::string, int> users;
        for (auto t : cls.enabled) {
          const auto& tr = net.transition(t);
          if (tr.id.find("__") != std::string::npos) continue;
          for (const auto& a : tr.inputs)
            if (a.place.find("__") == std::string::npos) ++users[a.place];
        }
        if (!linted)
          for (const auto& [p, n] : users) CHECK_MESSAGE(n <= 1, p);
      }
    }
  }
}

TEST_CASE("ideal lowering adds no execution path (co-simulation)") {
  std::mt19937 rng(12345);
  for (const auto& rel : kIdealScenarios) {
    CAPTURE(rel);
    auto s = load_scn(rel);
    auto c = controllers_of(s);
    auto sys = build_system(s);
    CompiledNet net(sys.net);
    std::size_t controller_steps = 0;
    for (int run = 0; run < 200; ++run) {
      CipnOracle oracle(s, c);
      StateClass cls = initial_class(net);
      REQUIRE(oracle.compare(net, cls.state) == "");
      for (int step = 0; step < 50; ++step) {
        auto f = fireable(net, cls);
        if (f.empty()) break;
        std::size_t t = f[rng() % f.size()];
        const std::string& id = net.transition_id(t);
        StateClass next = successor(net, cls, t);
        std::string err = oracle.step(id, net, cls.state);
        if (err.empty()) err = oracle.compare(net, next.state);
        REQUIRE_MESSAGE(err == "", "run " << run << " step " << step << ": " << err);
        if (id.find('.') != std::string::npos && id.find("__") == std::string::npos) ++controller_steps;
        cls = std::move(next);
      }
    }
    CHECK(controller_steps > 200);
  }
}
