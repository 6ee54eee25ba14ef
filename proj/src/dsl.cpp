#include <algorithm>
#include <map>
#include <set>

#include "tpnsec/dsl.hpp"

namespace tpnsec {

using dsl::Abort;
using dsl::Lexer;
using dsl::Tok;
using dsl::Token;

std::string print_interval(const TimeInterval& iv) { return iv.to_string(); }

namespace {

/// Declaration positions, used to place semantic diagnostics on the offending id.
struct Positions {
  std::map<std::string, Token> ids;
  Token header;

  void annotate(std::vector<Diagnostic>& diags, const std::string& file) const {
    for (auto& d : diags) {
      d.file = file;
      if (d.line > 0) continue;
      std::string id = d.location;
      if (auto slash = id.rfind('/'); slash != std::string::npos) id = id.substr(slash + 1);
      const Token* t = &header;
      if (auto it = ids.find(id); it != ids.end()) t = &it->second;
      // messages that name an id ("duplicate place P") point at that id when known
      for (const auto& [name, tok] : ids)
        if (d.message.size() > name.size() && d.message.ends_with(" " + name) && t == &header) t = &tok;
      d.line = t->line;
      d.column = t->column;
    }
  }
};

std::vector<Arc> parse_arcs(Lexer& lx, bool cipn) {
  std::vector<Arc> out;
  auto at_end = [&] {
    const Token& t = lx.peek();
    return (t.kind == Tok::Punct && t.text == "}") ||
           (t.kind == Tok::Ident && t.text == "out" && lx.peek(1).kind == Tok::Punct && lx.peek(1).text == ":");
  };
  while (!at_end()) {
    Token p = lx.expect_id("place name");
    Arc a{p.text, 1};
    if (lx.accept("*")) {
      Token wt = lx.peek();
      auto w = dsl::parse_int(lx);
      if (w < 1) {
        lx.error(wt, "arc weight must be >= 1");
        throw Abort{};
      }
      if (cipn && w != 1) {
        lx.error(wt, "CIPN arc weights must be 1");
        throw Abort{};
      }
      a.weight = static_cast<int>(w);
    }
    out.push_back(a);
    if (!lx.accept(",")) break;
  }
  return out;
}

void parse_arc_block(Lexer& lx, std::vector<Arc>& in, std::vector<Arc>& out, bool cipn) {
  lx.expect("{", "'{' with the arc lists");
  if (lx.accept("in")) {
    lx.expect(":", "':'");
    in = parse_arcs(lx, cipn);
  }
  if (lx.accept("out")) {
    lx.expect(":", "':'");
    out = parse_arcs(lx, cipn);
  }
  lx.expect("}", "'}'");
}

std::string print_arcs(const std::vector<Arc>& arcs) {
  std::string s;
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    s += (i ? ", " : "") + quote_id(arcs[i].place);
    if (arcs[i].weight != 1) s += "*" + std::to_string(arcs[i].weight);
  }
  return s;
}

std::string print_arc_block(const std::vector<Arc>& in, const std::vector<Arc>& out) {
  std::string s = "{ in: " + print_arcs(in);
  if (!in.empty()) s += " ";
  s += "out: " + print_arcs(out);
  if (!out.empty()) s += " ";
  return s + "}";
}

Expr parse_bool(Lexer& lx, const char* what) {
  Token at = lx.peek();
  Expr e = dsl::parse_expression(lx);
  if (type_of(e, nullptr) != Type::Bool) {
    lx.error(at, std::string(what) + " must be a boolean expression");
    throw Abort{};
  }
  return e;
}

}  // namespace

Parsed<Expr> parse_expr(std::string_view text, const std::string& file) {
  Parsed<Expr> r;
  Lexer lx(text, file, r.diagnostics);
  try {
    Expr e = dsl::parse_expression(lx);
    if (lx.peek().kind != Tok::End) {
      lx.error(lx.peek(), "unexpected '" + lx.peek().text + "' after expression");
      throw Abort{};
    }
    if (!lx.failed()) r.value = e;
  } catch (const Abort&) {
  }
  return r;
}

Parsed<Net> parse_net(std::string_view text, const std::string& file) {
  Parsed<Net> r;
  Lexer lx(text, file, r.diagnostics);
  Net net;
  Positions pos;
  bool named = false;
  std::set<std::string> seen;
  auto declare = [&](const Token& t) {
    if (!seen.insert(t.text).second) {
      lx.error(t, "duplicate id " + t.text);
      return;
    }
    pos.ids.emplace(t.text, t);
  };
  while (lx.peek().kind != Tok::End) {
    try {
      Token kw = lx.peek();
      if (lx.accept("net")) {
        if (named) lx.error(kw, "more than one 'net' header");
        named = true;
        pos.header = kw;
        net.name = lx.expect_id("net name").text;
      } else if (lx.accept("var")) {
        Token v = lx.expect_id("variable name");
        lx.expect("=", "'='");
        auto init = dsl::parse_int(lx);
        if (net.has_variable(v.text)) {
          lx.error(v, "duplicate variable " + v.text);
        } else {
          net.add_variable(v.text, init);
          pos.ids.emplace(v.text, v);
        }
      } else if (lx.accept("import")) {
        do {
          Token i = lx.expect_id("imported place");
          if (std::find(net.imports.begin(), net.imports.end(), i.text) != net.imports.end()) {
            lx.error(i, "duplicate import " + i.text);
          } else {
            net.imports.push_back(i.text);
            pos.ids.emplace(i.text, i);
          }
        } while (lx.accept(","));
      } else if (lx.accept("place")) {
        Token p = lx.expect_id("place name");
        int tokens = 0;
        if (lx.accept("tokens")) {
          lx.expect("=", "'='");
          Token nt = lx.peek();
          auto n = dsl::parse_int(lx);
          if (n < 0) lx.error(nt, "negative token count");
          tokens = static_cast<int>(n);
        }
        declare(p);
        net.add_place(p.text, tokens);
      } else if (lx.accept("trans")) {
        Token id = lx.expect_id("transition name");
        Transition t;
        t.id = id.text;
        std::set<std::string> attrs;
        while (!lx.at("{")) {
          Token a = lx.expect_id("'interval=', 'guard=', 'update=' or '{'");
          if (!attrs.insert(a.text).second) lx.error(a, "attribute given twice: " + a.text);
          lx.expect("=", "'='");
          if (a.text == "interval") {
            t.interval = dsl::parse_interval(lx);
          } else if (a.text == "guard") {
            t.guard = parse_bool(lx, "guard");
          } else if (a.text == "update") {
            t.updates = dsl::parse_updates(lx);
          } else {
            lx.error(a, "unknown transition attribute '" + a.text + "'");
            throw Abort{};
          }
        }
        parse_arc_block(lx, t.inputs, t.outputs, false);
        declare(id);
        net.add_transition(std::move(t));
      } else {
        lx.error(kw, kw.kind == Tok::End ? "unexpected end of file" : "unexpected '" + kw.text + "' (expected net, var, import, place or trans)");
        throw Abort{};
      }
    } catch (const Abort&) {
      lx.next();
      lx.recover({"net", "var", "import", "place", "trans"});
    }
  }
  if (!named && !lx.failed()) lx.error(Token{Tok::End, "", 1, 1}, "missing 'net <name>' header");
  if (lx.failed()) return r;
  auto diags = validate_net(net);
  pos.annotate(diags, file);
  r.diagnostics.insert(r.diagnostics.end(), diags.begin(), diags.end());
  if (!has_errors(r.diagnostics)) r.value = std::move(net);
  return r;
}

std::string print_net(const Net& net) {
  std::string s = "net " + quote_id(net.name) + "\n";
  for (const auto& v : net.variables) s += "var " + quote_id(v.name) + " = " + std::to_string(v.initial) + "\n";
  if (!net.imports.empty()) {
    s += "import ";
    for (std::size_t i = 0; i < net.imports.size(); ++i) s += (i ? ", " : "") + quote_id(net.imports[i]);
    s += "\n";
  }
  for (const auto& p : net.places) {
    s += "place " + quote_id(p);
    if (auto it = net.initial_marking.find(p); it != net.initial_marking.end() && it->second != 0)
      s += " tokens=" + std::to_string(it->second);
    s += "\n";
  }
  for (const auto& t : net.transitions) {
    s += "trans " + quote_id(t.id);
    if (!t.interval.is_immediate()) s += " interval=" + print_interval(t.interval);
    if (!t.guard.is_true()) s += " guard=" + t.guard.to_string();
    if (!t.updates.empty()) s += " update=" + dsl::print_updates(t.updates);
    s += " " + print_arc_block(t.inputs, t.outputs) + "\n";
  }
  return s;
}

namespace {

CipnAction parse_action(Lexer& lx) {
  Token kw = lx.peek();
  if (lx.accept("act")) {
    Token a = lx.expect_id("actuator name");
    lx.expect("=", "'='");
    return CipnAction::act(a.text, dsl::parse_int(lx));
  }
  if (lx.accept("send")) {
    lx.expect("(", "'('");
    std::vector<std::string> dests;
    if (lx.accept("{")) {
      do dests.push_back(lx.expect_id("destination node").text);
      while (lx.accept(","));
      lx.expect("}", "'}'");
      lx.expect(",", "','");
    }
    Token sig = lx.expect_id("signal name");
    lx.expect(",", "','");
    auto v = dsl::parse_int(lx);
    lx.expect(")", "')'");
    return CipnAction::send(sig.text, v, dests);
  }
  if (lx.accept("delay")) {
    lx.expect("(", "'('");
    Rational d = dsl::parse_time(lx);
    lx.expect(")", "')'");
    return CipnAction::wait(d);
  }
  lx.error(kw, "unknown action '" + kw.text + "' (expected act, send or delay)");
  throw Abort{};
}

}  // namespace

Parsed<CipnModel> parse_cipn(std::string_view text, const std::string& file) {
  Parsed<CipnModel> r;
  Lexer lx(text, file, r.diagnostics);
  CipnModel m;
  Positions pos;
  bool named = false;
  std::set<std::string> seen;
  auto declare = [&](const Token& t) {
    if (!seen.insert(t.text).second) {
      lx.error(t, "duplicate id " + t.text);
      return false;
    }
    pos.ids.emplace(t.text, t);
    return true;
  };
  auto name_list = [&](std::vector<std::string>& into) {
    do {
      Token t = lx.expect_id("name");
      if (declare(t)) into.push_back(t.text);
    } while (lx.accept(","));
  };
  while (lx.peek().kind != Tok::End) {
    try {
      Token kw = lx.peek();
      if (lx.accept("cipn")) {
        if (named) lx.error(kw, "more than one 'cipn' header");
        named = true;
        pos.header = kw;
        m.name = lx.expect_id("model name").text;
      } else if (lx.accept("sensor")) {
        name_list(m.sensors);
      } else if (lx.accept("signal")) {
        name_list(m.signals);
      } else if (lx.accept("var")) {
        Token v = lx.expect_id("variable name");
        lx.expect("=", "'='");
        auto init = dsl::parse_int(lx);
        if (declare(v)) m.variables.push_back({v.text, init});
      } else if (lx.accept("place")) {
        Token p = lx.expect_id("place name");
        CipnPlace place{p.text, {}};
        int tokens = 0;
        for (;;) {
          if (lx.accept("initial")) {
            tokens = 1;
          } else if (lx.at("tokens") && lx.peek(1).text == "=") {
            lx.next();
            lx.next();
            tokens = static_cast<int>(dsl::parse_int(lx));
          } else {
            break;
          }
        }
        if (lx.accept("{")) {
          while (!lx.accept("}")) {
            place.actions.push_back(parse_action(lx));
            lx.accept(";");
          }
        }
        if (declare(p)) {
          if (tokens != 0) m.initial_marking[p.text] = tokens;
          m.places.push_back(std::move(place));
        }
      } else if (lx.accept("trans")) {
        Token id = lx.expect_id("transition name");
        CipnTransition t;
        t.id = id.text;
        std::set<std::string> attrs;
        while (!lx.at("{")) {
          Token a = lx.expect_id("'cond=', 'update=' or '{'");
          if (!attrs.insert(a.text).second) lx.error(a, "attribute given twice: " + a.text);
          lx.expect("=", "'='");
          if (a.text == "cond") {
            t.cond = parse_bool(lx, "condition");
          } else if (a.text == "update") {
            t.updates = dsl::parse_updates(lx);
          } else if (a.text == "interval") {
            lx.error(a, "CIPN transitions carry no firing interval; use a delay action");
            throw Abort{};
          } else {
            lx.error(a, "unknown transition attribute '" + a.text + "'");
            throw Abort{};
          }
        }
        parse_arc_block(lx, t.inputs, t.outputs, true);
        if (declare(id)) m.transitions.push_back(std::move(t));
      } else {
        lx.error(kw, "unexpected '" + kw.text + "' (expected cipn, sensor, signal, var, place or trans)");
        throw Abort{};
      }
    } catch (const Abort&) {
      lx.next();
      lx.recover({"cipn", "sensor", "signal", "var", "place", "trans"});
    }
  }
  if (lx.failed()) return r;
  auto diags = check_cipn(m);
  pos.annotate(diags, file);
  r.diagnostics.insert(r.diagnostics.end(), diags.begin(), diags.end());
  if (!has_errors(r.diagnostics)) r.value = std::move(m);
  return r;
}

std::string print_cipn(const CipnModel& m) {
  auto list = [](const std::vector<std::string>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + quote_id(xs[i]);
    return s;
  };
  std::string s = "cipn " + quote_id(m.name) + "\n";
  if (!m.sensors.empty()) s += "sensor " + list(m.sensors) + "\n";
  if (!m.signals.empty()) s += "signal " + list(m.signals) + "\n";
  for (const auto& v : m.variables) s += "var " + quote_id(v.name) + " = " + std::to_string(v.initial) + "\n";
  for (const auto& p : m.places) {
    s += "place " + quote_id(p.id);
    if (auto it = m.initial_marking.find(p.id); it != m.initial_marking.end() && it->second != 0)
      s += it->second == 1 ? " initial" : " tokens=" + std::to_string(it->second);
    if (!p.actions.empty()) {
      s += " {";
      for (std::size_t i = 0; i < p.actions.size(); ++i) s += (i ? "; " : " ") + p.actions[i].to_string();
      s += " }";
    }
    s += "\n";
  }
  for (const auto& t : m.transitions) {
    s += "trans " + quote_id(t.id);
    if (!t.cond.is_true()) s += " cond=" + t.cond.to_string();
    if (!t.updates.empty()) s += " update=" + dsl::print_updates(t.updates);
    s += " " + print_arc_block(t.inputs, t.outputs) + "\n";
  }
  return s;
}

Parsed<std::vector<Property>> parse_properties(std::string_view text, const std::string& file) {
  Parsed<std::vector<Property>> r;
  Lexer lx(text, file, r.diagnostics);
  std::vector<Property> props;
  std::set<std::string> names;
  while (lx.peek().kind != Tok::End) {
    try {
      Token at = lx.peek(1);
      Property p = dsl::parse_property(lx);
      if (!names.insert(p.name).second) lx.error(at, "duplicate property " + p.name);
      props.push_back(std::move(p));
    } catch (const Abort&) {
      lx.next();
      lx.recover({"property"});
    }
  }
  if (!lx.failed()) r.value = std::move(props);
  return r;
}

std::string print_properties(const std::vector<Property>& props) {
  std::string s;
  for (const auto& p : props) s += "property " + quote_id(p.name) + " : " + p.formula() + "\n";
  return s;
}

}  // namespace tpnsec
