#include "tpnsec/comm.hpp"

#include <algorithm>

namespace tpnsec {

namespace {

TimeInterval scale(const TimeInterval& iv, Rational f) {
  TimeInterval out = iv;
  out.lower = iv.lower * f;
  if (iv.upper) out.upper = *iv.upper * f;
  return out;
}

TimeInterval exactly(Rational t) { return TimeInterval::closed(t, t); }

Expr v(const std::string& name) { return Expr::var(name); }
Expr lit(std::int64_t x) { return Expr::integer(x); }

Transition make(std::string id, std::vector<std::string> in, std::vector<std::string> out, Expr guard = {},
                std::vector<Update> updates = {}, TimeInterval iv = TimeInterval::immediate()) {
  Transition t;
  t.id = std::move(id);
  for (auto& p : in) t.inputs.push_back({std::move(p), 1});
  for (auto& p : out) t.outputs.push_back({std::move(p), 1});
  t.guard = std::move(guard);
  t.updates = std::move(updates);
  t.interval = iv;
  return t;
}

}  // namespace

ChannelParams ChannelParams::scaled(Rational f) const {
  ChannelParams c = *this;
  c.t_tx_msg = scale(t_tx_msg, f);
  c.t_tx_ack = scale(t_tx_ack, f);
  c.t_boff = scale(t_boff, f);
  c.t_ack_to = t_ack_to * f;
  c.t_wf_ack = t_wf_ack * f;
  c.t_dos = scale(t_dos, f);
  return c;
}

std::string ChannelParams::check() const {
  const std::pair<const char*, const TimeInterval*> ivs[] = {
      {"msg", &t_tx_msg}, {"ack", &t_tx_ack}, {"backoff", &t_boff}, {"dos", &t_dos}};
  for (const auto& [name, iv] : ivs) {
    if (auto why = iv->check(); !why.empty()) return std::string(name) + ": " + why;
    if (!iv->upper) return std::string(name) + ": upper bound must be finite";
  }
  for (const auto& [name, iv] : {ivs[0], ivs[1], ivs[2]})
    if (iv->lower <= Rational(0)) return std::string(name) + ": lower bound must be positive";
  if (t_wf_ack <= Rational(0)) return "app_timeout must be positive";
  if (t_ack_to <= *t_tx_ack.upper) return "ack_timeout must exceed the ACK transmission upper bound";
  return {};
}

std::string SecurityConfig::check() const {
  if (dos_detect && !app_retry_limit) return "dos_detect requires a finite app_retry_limit";
  if (app_retry_limit && *app_retry_limit < 0) return "app_retry_limit must be >= 0";
  return {};
}

std::vector<std::string> NodeVars::all() const {
  std::vector<std::string> out;
  for (const char* x : {"PTx", "PTxSig", "Dst", "Tx", "Txd", "PRx", "PRxSig", "PRxMAC", "Rx", "TxAck", "RxAck", "TxCnt"})
    out.push_back(xcvr(x));
  for (const char* x : {"RxBuf", "RxSig", "RxMAC", "RxAck", "wfRx"}) out.push_back(app(x));
  return out;
}

Net make_transceiver(const std::string& node, const XcvrParams& p, const ChannelParams& cp) {
  if (p.max_datalink_retries < 0) throw ModelError("max_datalink_retries must be >= 0");
  NodeVars n(node);
  Net net;
  net.name = n.xcvr_namespace();
  net.add_place("Listen", 1).add_place("Backoff").add_place("CCA").add_place("TxPkt").add_place("WaitAck");
  net.add_place("RxIdle", 1).add_place("RxAckTx");
  for (const auto& x : n.all()) net.add_variable(x);
  net.add_variable("ChBusy");

  const Expr max = lit(p.max_datalink_retries);
  const Expr cnt = v(n.xcvr("TxCnt"));
  const Update inc{n.xcvr("TxCnt"), plus(cnt, lit(1))};
  const Update reset{n.xcvr("TxCnt"), lit(0)};
  const Update give_up{n.xcvr("Tx"), lit(0)};
  // registers are cleared when an attempt ends so a finished exchange leaves no trace
  const std::vector<Update> clear{{n.xcvr("PTx"), lit(0)}, {n.xcvr("PTxSig"), lit(0)}, {n.xcvr("Dst"), lit(0)}};
  auto finish = [&](std::vector<Update> us) {
    us.insert(us.end(), clear.begin(), clear.end());
    return us;
  };

  net.add_transition(make("T_req", {"Listen"}, {"Backoff"}, var_eq(n.xcvr("Tx"), 1),
                          {reset, {n.xcvr("RxAck"), lit(0)}}));
  net.add_transition(make("T_boff", {"Backoff"}, {"CCA"}, {}, {}, cp.t_boff));
  net.add_transition(make("T_ccaOk", {"CCA"}, {"TxPkt"}, var_eq("ChBusy", 0),
                          {{"ChBusy", lit(1)}, {n.xcvr("Txd"), lit(1)}}));
  net.add_transition(make("T_ccaBusy", {"CCA"}, {"Backoff"}, var_eq("ChBusy", 1) && lt(cnt, max), {inc}));
  net.add_transition(make("T_ccaFail", {"CCA"}, {"Listen"}, var_eq("ChBusy", 1) && ge(cnt, max), finish({give_up, reset})));
  net.add_transition(make("T_txd", {"TxPkt"}, {"WaitAck"}, var_eq(n.xcvr("Txd"), 0)));
  net.add_transition(make("T_gotAck", {"WaitAck"}, {"Listen"}, var_eq(n.xcvr("RxAck"), 1),
                          finish({{n.xcvr("RxAck"), lit(0)}, {n.app("RxAck"), lit(1)}, give_up, reset})));
  net.add_transition(make("T_ackTO", {"WaitAck"}, {"Backoff"}, var_eq(n.xcvr("RxAck"), 0) && lt(cnt, max), {inc},
                          exactly(cp.t_ack_to)));
  net.add_transition(make("T_ackFail", {"WaitAck"}, {"Listen"}, var_eq(n.xcvr("RxAck"), 0) && ge(cnt, max),
                          finish({give_up, reset}), exactly(cp.t_ack_to)));
  net.add_transition(make("T_rx", {"RxIdle"}, {"RxAckTx"}, var_eq(n.xcvr("Rx"), 1),
                          {{n.app("RxBuf"), v(n.xcvr("PRx"))},
                           {n.app("RxSig"), v(n.xcvr("PRxSig"))},
                           {n.app("RxMAC"), v(n.xcvr("PRxMAC"))},
                           {n.xcvr("Rx"), lit(0)},
                           {n.xcvr("PRx"), lit(0)},
                           {n.xcvr("PRxSig"), lit(0)},
                           {n.xcvr("PRxMAC"), lit(0)},
                           {n.xcvr("TxAck"), lit(1)}}));
  net.add_transition(make("T_rxDone", {"RxAckTx"}, {"RxIdle"}, var_eq(n.xcvr("TxAck"), 0)));
  return net;
}

Net make_channel(const std::vector<std::string>& nodes, const ChannelParams& p, const AttackConfig& a,
                 const std::map<std::string, int>& signal_ids) {
  if (nodes.size() < 2) throw ModelError("a channel needs at least two nodes");
  std::set<std::string> known(nodes.begin(), nodes.end());
  if (known.size() != nodes.size()) throw ModelError("duplicate channel node");
  Net net;
  net.name = "CH";
  net.add_place("Idle", 1);
  net.add_variable("ChBusy");
  for (const auto& node : nodes)
    for (const auto& x : NodeVars(node).all()) net.add_variable(x);
  const bool bounded_dos = a.dos.enabled && a.dos.max_consecutive;
  if (bounded_dos) net.add_variable("DoSCnt");

  const Update free_channel{"ChBusy", lit(0)};
  for (std::size_t si = 0; si < nodes.size(); ++si) {
    for (std::size_t ri = 0; ri < nodes.size(); ++ri) {
      if (si == ri) continue;
      NodeVars s(nodes[si]), r(nodes[ri]);
      const std::string pair = nodes[si] + "_" + nodes[ri];
      const std::string msg = "Msg_" + pair, ack = "Ack_" + pair;
      net.add_place(msg).add_place(ack);
      net.add_transition(make("Tch_Tx_" + pair, {"Idle"}, {msg},
                              var_eq(s.xcvr("Txd"), 1) && var_eq(s.xcvr("Dst"), static_cast<std::int64_t>(ri + 1))));
      auto deliver = [&](Expr payload, std::int64_t mac) {
        return std::vector<Update>{{r.xcvr("PRx"), std::move(payload)},
                                   {r.xcvr("PRxSig"), v(s.xcvr("PTxSig"))},
                                   {r.xcvr("PRxMAC"), lit(mac)},
                                   {r.xcvr("Rx"), lit(1)},
                                   {s.xcvr("Txd"), lit(0)}};
      };
      net.add_transition(make("Tch_TxMsg_" + pair, {msg}, {ack}, {}, deliver(v(s.xcvr("PTx")), kMacValid), p.t_tx_msg));
      std::vector<Update> acked{{s.xcvr("RxAck"), lit(1)}, {r.xcvr("TxAck"), lit(0)}, free_channel};
      if (bounded_dos) acked.push_back({"DoSCnt", lit(0)});
      net.add_transition(make("Tch_TxAck_" + pair, {ack}, {"Idle"}, var_eq(r.xcvr("TxAck"), 1), acked, p.t_tx_ack));

      if (a.msg_intercept)
        net.add_transition(make("Tch_MsgInt_" + pair, {msg}, {"Idle"}, {}, {{s.xcvr("Txd"), lit(0)}, free_channel},
                                p.t_tx_msg));
      if (a.msg_modify.enabled)
        net.add_transition(
            make("Tch_MsgMod_" + pair, {msg}, {ack}, {}, deliver(lit(a.msg_modify.payload), kMacInvalid), p.t_tx_msg));
      if (a.ack_intercept)
        net.add_transition(make("Tch_AckInt_" + pair, {ack}, {"Idle"}, var_eq(r.xcvr("TxAck"), 1),
                                {{r.xcvr("TxAck"), lit(0)}, free_channel}, p.t_tx_ack));
    }
  }

  if (a.ack_spoof) {
    for (const auto& node : nodes) {
      NodeVars s(node);
      const std::string imp = "AckImp_" + node;
      net.add_place(imp);
      net.add_transition(make("Tch_wfAckImp_" + node, {"Idle"}, {imp},
                              var_eq("ChBusy", 0) && mark_eq(s.xcvr_namespace() + ".WaitAck", 1),
                              {{"ChBusy", lit(1)}}, TimeInterval::at_least(0)));
      net.add_transition(make("Tch_TxAckImp_" + node, {imp}, {"Idle"}, {},
                              {{s.xcvr("RxAck"), lit(1)}, free_channel}, p.t_tx_ack));
    }
  }

  if (a.dos.enabled) {
    net.add_place("DoS");
    Expr guard = var_eq("ChBusy", 0);
    std::vector<Update> seize{{"ChBusy", lit(1)}};
    if (bounded_dos) {
      guard = guard && lt(v("DoSCnt"), lit(*a.dos.max_consecutive));
      seize.push_back({"DoSCnt", plus(v("DoSCnt"), lit(1))});
    }
    net.add_transition(make("Tch_DoS", {"Idle"}, {"DoS"}, guard, seize, TimeInterval::at_least(0)));
    net.add_transition(make("Tch_DoSRel", {"DoS"}, {"Idle"}, {}, {free_channel}, p.t_dos));
  }

  if (a.masquerade.enabled) {
    for (const auto& t : a.masquerade.targets) {
      if (!known.count(t.sender)) throw ModelError("masquerade target references unknown node " + t.sender);
      if (!known.count(t.receiver)) throw ModelError("masquerade target references unknown node " + t.receiver);
      if (t.sender == t.receiver) throw ModelError("masquerade sender and receiver must differ");
      auto sig = signal_ids.find(t.signal);
      if (sig == signal_ids.end()) throw ModelError("masquerade target references unknown signal " + t.signal);
      NodeVars s(t.sender), r(t.receiver);
      const std::string pair = t.sender + "_" + t.receiver;
      const std::string imp = "Imp_" + pair, imp_ack = "ImpAck_" + pair;
      if (net.has_place(imp)) throw ModelError("duplicate masquerade target " + pair);
      net.add_place(imp).add_place(imp_ack);
      net.add_transition(make("Tch_Imp_" + pair, {"Idle"}, {imp},
                              var_eq("ChBusy", 0) && var_eq(r.app("wfRx"), 1) && var_eq(s.xcvr("Tx"), 0),
                              {{"ChBusy", lit(1)}}, TimeInterval::at_least(0)));
      net.add_transition(make("Tch_TxImp_" + pair, {imp}, {imp_ack}, {},
                              {{r.xcvr("PRx"), lit(a.masquerade.payload)},
                               {r.xcvr("PRxSig"), lit(sig->second)},
                               {r.xcvr("PRxMAC"), lit(kMacInvalid)},
                               {r.xcvr("Rx"), lit(1)}},
                              p.t_tx_msg));
      net.add_transition(make("Tch_TxImpAck_" + pair, {imp_ack}, {"Idle"}, var_eq(r.xcvr("TxAck"), 1),
                              {{r.xcvr("TxAck"), lit(0)}, free_channel}, p.t_tx_ack));
    }
  }
  return net;
}

namespace {

std::string prefix_of(const std::string& id) {
  auto dot = id.rfind('.');
  return dot == std::string::npos ? std::string() : id.substr(0, dot + 1);
}

/// Node whose `<node><suffix>` variable the expression reads, if any.
std::optional<std::string> node_reading(const Expr& e, const std::string& suffix) {
  std::set<std::string> vars;
  e.collect(nullptr, &vars);
  for (const auto& x : vars)
    if (x.size() > suffix.size() && x.ends_with(suffix)) return x.substr(0, x.size() - suffix.size());
  return std::nullopt;
}

bool contains_conjunct(const Expr& e, const Expr& c) {
  if (e == c) return true;
  if (e.op() == Op::And) return contains_conjunct(e.lhs(), c) || contains_conjunct(e.rhs(), c);
  return false;
}

bool has_update(const Transition& t, const std::string& var) {
  return std::any_of(t.updates.begin(), t.updates.end(), [&](const Update& u) { return u.var == var; });
}

}  // namespace

Net apply_security_patches(const Net& in, const SecurityConfig& sec) {
  if (auto why = sec.check(); !why.empty()) throw ModelError("invalid security config: " + why);
  Net net = in;
  if (sec.auth) {
    std::size_t patched = 0;
    std::vector<Transition> intrusions;
    for (auto& t : net.transitions) {
      if (t.id.find("__") != std::string::npos) continue;
      auto node = node_reading(t.guard, "_RxSig");
      if (!node) continue;
      NodeVars n(*node);
      Expr mac_ok = var_eq(n.app("RxMAC"), kMacValid);
      if (!contains_conjunct(t.guard, mac_ok)) t.guard = conj(t.guard, mac_ok);
      ++patched;
      std::string base;
      for (const auto& a : t.inputs) base += (base.empty() ? "" : "_") + a.place;
      // A forged message is dropped and the controller keeps waiting. The
      // controller place is read through the guard, not consumed, so timers
      // that depend on it keep running. The first detection latches the
      // node's Pa_Intrusion place.
      Transition d;
      d.id = base + "__intrusion";
      if (net.find_transition(d.id) ||
          std::any_of(intrusions.begin(), intrusions.end(), [&](const Transition& x) { return x.id == d.id; }))
        continue;
      const std::string flag = prefix_of(t.inputs.empty() ? t.id : t.inputs.front().place) + "Pa_Intrusion";
      d.guard = ne(Expr::var(n.app("RxSig")), Expr::integer(0)) && var_eq(n.app("RxMAC"), kMacInvalid);
      for (const auto& a : t.inputs) d.guard = conj(d.guard, ge(Expr::mark(a.place), Expr::integer(a.weight)));
      d.updates = {{n.app("RxSig"), Expr::integer(0)}, {n.app("RxBuf"), Expr::integer(0)}, {n.app("RxMAC"), Expr::integer(0)}};
      Transition again = d;
      again.id = base + "__intrusionAgain";
      d.guard = conj(d.guard, mark_eq(flag, 0));
      d.outputs = {{flag, 1}};
      again.inputs = {{flag, 1}};
      again.outputs = {{flag, 1}};
      intrusions.push_back(std::move(d));
      intrusions.push_back(std::move(again));
    }
    if (patched == 0) throw ModelError("authentication patch: net has no receive transitions");
    for (auto& d : intrusions) {
      if (!net.has_place(d.outputs[0].place)) net.add_place(d.outputs[0].place);
      net.add_transition(std::move(d));
    }
  }

  if (sec.app_retry_limit) {
    const int limit = *sec.app_retry_limit;
    std::size_t patched = 0;
    std::vector<Transition> detects;
    for (auto& t : net.transitions) {
      auto pos = t.id.find("__wfAckTO");
      if (pos != std::string::npos) {
        auto node = node_reading(t.guard, "_RxAck");
        if (!node) continue;
        NodeVars n(*node);
        const std::string retry = n.app("AppRetry");
        net.ensure_variable(retry);
        Expr below = lt(Expr::var(retry), Expr::integer(limit));
        if (!contains_conjunct(t.guard, below)) {
          Transition d = t;
          d.id = t.id.substr(0, pos) + "__DoSdetect" + t.id.substr(pos + 9);
          d.guard = conj(t.guard, ge(Expr::var(retry), Expr::integer(limit)));
          d.updates = {{retry, Expr::integer(0)}};
          d.outputs = {{prefix_of(t.id) + "Pa_DoSdetect", 1}};
          t.guard = conj(t.guard, below);
          t.updates.push_back({retry, plus(Expr::var(retry), Expr::integer(1))});
          if (!net.find_transition(d.id)) detects.push_back(std::move(d));
        }
        ++patched;
      }
    }
    for (auto& t : net.transitions) {
      if (t.id.find("__ackOK") == std::string::npos) continue;
      auto node = node_reading(t.guard, "_RxAck");
      if (!node) continue;
      const std::string retry = NodeVars(*node).app("AppRetry");
      if (!has_update(t, retry)) t.updates.push_back({retry, Expr::integer(0)});
    }
    if (patched == 0) throw ModelError("retry-limit patch: net has no application send timeouts");
    for (auto& d : detects) {
      if (!net.has_place(d.outputs[0].place)) net.add_place(d.outputs[0].place);
      net.add_transition(std::move(d));
    }
  }
  return net;
}

}  // namespace tpnsec
