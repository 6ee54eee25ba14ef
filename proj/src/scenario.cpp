#include "tpnsec/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

namespace tpnsec {

using dsl::Abort;
using dsl::Lexer;
using dsl::Tok;
using dsl::Token;

bool ScenarioFile::operator==(const ScenarioFile& o) const {
  return name == o.name && mode == o.mode && controllers == o.controllers && plants == o.plants &&
         sensors == o.sensors && has_channel == o.has_channel && channel == o.channel && xcvr == o.xcvr &&
         attacks == o.attacks && security == o.security && property_files == o.property_files &&
         properties == o.properties;
}

namespace {

bool parse_switch(Lexer& lx) {
  Token t = lx.peek();
  if (lx.accept("on") || lx.accept("true")) return true;
  if (lx.accept("off") || lx.accept("false")) return false;
  lx.error(t, "expected on or off");
  throw Abort{};
}

int parse_count(Lexer& lx, const char* what) {
  Token t = lx.peek();
  auto v = dsl::parse_int(lx);
  if (v < 0 || v > 1000000) {
    lx.error(t, std::string(what) + " must be between 0 and 1000000");
    throw Abort{};
  }
  return static_cast<int>(v);
}

/// Runs `field(key)` for every `key = ...` up to the closing brace.
template <class F>
void parse_block(Lexer& lx, F field) {
  lx.expect("{", "'{'");
  std::set<std::string> seen;
  while (!lx.accept("}")) {
    if (lx.peek().kind == Tok::End) {
      lx.error(lx.peek(), "unterminated block");
      throw Abort{};
    }
    Token key = lx.expect_id("key");
    lx.expect("=", "'='");
    if (!seen.insert(key.text).second && key.text != "target") lx.error(key, "key given twice: " + key.text);
    if (!field(key)) {
      lx.error(key, "unknown key '" + key.text + "'");
      throw Abort{};
    }
    if (!lx.accept(";")) lx.accept(",");
  }
}

void parse_channel(Lexer& lx, ChannelParams& c) {
  parse_block(lx, [&](const Token& k) {
    if (k.text == "msg") c.t_tx_msg = dsl::parse_interval(lx);
    else if (k.text == "ack") c.t_tx_ack = dsl::parse_interval(lx);
    else if (k.text == "backoff") c.t_boff = dsl::parse_interval(lx);
    else if (k.text == "dos") c.t_dos = dsl::parse_interval(lx);
    else if (k.text == "ack_timeout") c.t_ack_to = dsl::parse_time(lx);
    else if (k.text == "app_timeout") c.t_wf_ack = dsl::parse_time(lx);
    else return false;
    return true;
  });
}

void parse_attacks(Lexer& lx, AttackConfig& a) {
  lx.expect("{", "'{'");
  std::set<std::string> seen;
  while (!lx.accept("}")) {
    if (lx.peek().kind == Tok::End) {
      lx.error(lx.peek(), "unterminated block");
      throw Abort{};
    }
    Token key = lx.expect_id("attack name");
    if (!seen.insert(key.text).second) lx.error(key, "attack given twice: " + key.text);
    std::optional<bool> on;
    if (lx.accept("=")) on = parse_switch(lx);
    bool has_block = lx.at("{");
    if (!on && !has_block) {
      lx.error(lx.peek(), "expected '= on', '= off' or a parameter block");
      throw Abort{};
    }
    bool enabled = on.value_or(true);
    if (key.text == "dos") {
      a.dos.enabled = enabled;
      if (has_block)
        parse_block(lx, [&](const Token& k) {
          if (k.text != "max_consecutive") return false;
          if (lx.accept("unbounded")) a.dos.max_consecutive.reset();
          else a.dos.max_consecutive = parse_count(lx, "max_consecutive");
          return true;
        });
    } else if (key.text == "msg_modify") {
      a.msg_modify.enabled = enabled;
      if (has_block)
        parse_block(lx, [&](const Token& k) {
          if (k.text != "payload") return false;
          a.msg_modify.payload = dsl::parse_int(lx);
          return true;
        });
    } else if (key.text == "masquerade") {
      a.masquerade.enabled = enabled;
      if (has_block)
        parse_block(lx, [&](const Token& k) {
          if (k.text == "payload") {
            a.masquerade.payload = dsl::parse_int(lx);
          } else if (k.text == "target") {
            MasqueradeTarget t;
            t.sender = lx.expect_id("sender node").text;
            lx.expect("->", "'->'");
            t.receiver = lx.expect_id("receiver node").text;
            lx.expect(":", "':'");
            t.signal = lx.expect_id("signal").text;
            a.masquerade.targets.push_back(t);
          } else {
            return false;
          }
          return true;
        });
    } else if (key.text == "msg_intercept" || key.text == "ack_intercept" || key.text == "ack_spoof") {
      if (has_block) {
        lx.error(lx.peek(), key.text + " takes no parameters");
        throw Abort{};
      }
      bool& flag = key.text == "msg_intercept" ? a.msg_intercept : key.text == "ack_intercept" ? a.ack_intercept : a.ack_spoof;
      flag = enabled;
    } else {
      lx.error(key, "unknown attack '" + key.text + "'");
      throw Abort{};
    }
    if (!lx.accept(";")) lx.accept(",");
  }
}

void parse_security(Lexer& lx, SecurityConfig& s) {
  parse_block(lx, [&](const Token& k) {
    if (k.text == "auth") {
      s.auth = parse_switch(lx);
    } else if (k.text == "dos_detect") {
      s.dos_detect = parse_switch(lx);
    } else if (k.text == "app_retry_limit") {
      if (lx.accept("unbounded")) s.app_retry_limit.reset();
      else s.app_retry_limit = parse_count(lx, "app_retry_limit");
    } else {
      return false;
    }
    return true;
  });
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string on_off(bool b) { return b ? "on" : "off"; }

}  // namespace

Parsed<ScenarioFile> parse_scenario(std::string_view text, const std::string& file) {
  Parsed<ScenarioFile> r;
  Lexer lx(text, file, r.diagnostics);
  ScenarioFile s;
  std::set<std::string> once;
  std::set<std::string> namespaces;
  std::optional<Token> mode_tok, channel_tok;
  auto single = [&](const Token& kw) {
    if (!once.insert(kw.text).second) lx.error(kw, "more than one '" + kw.text + "' declaration");
  };
  auto import = [&](std::vector<ModelImport>& into) {
    Token ns = lx.expect_id("namespace");
    lx.expect("=", "'='");
    Token path = lx.expect_id("file path");
    if (!namespaces.insert(ns.text).second) lx.error(ns, "duplicate namespace " + ns.text);
    into.push_back({ns.text, path.text});
  };
  const std::initializer_list<std::string_view> starts = {"scenario", "mode",    "controller", "plant",    "sensor",
                                                          "channel",  "xcvr",    "attacks",    "security", "properties",
                                                          "property"};
  while (lx.peek().kind != Tok::End) {
    try {
      Token kw = lx.peek();
      if (lx.accept("scenario")) {
        single(kw);
        s.name = lx.expect_id("scenario name").text;
      } else if (lx.accept("mode")) {
        single(kw);
        mode_tok = kw;
        Token m = lx.expect_id("ideal or channel");
        if (m.text == "ideal") s.mode = CommMode::Ideal;
        else if (m.text == "channel") s.mode = CommMode::Channel;
        else lx.error(m, "unknown mode '" + m.text + "' (expected ideal or channel)");
      } else if (lx.accept("controller")) {
        import(s.controllers);
      } else if (lx.accept("plant")) {
        import(s.plants);
      } else if (lx.accept("sensor")) {
        Token id = lx.expect_id("<node>.<sensor>");
        auto dot = id.text.find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == id.text.size()) {
          lx.error(id, "sensor binding must name <node>.<sensor>");
          throw Abort{};
        }
        lx.expect("=", "'='");
        Token at = lx.peek();
        Expr e = dsl::parse_expression(lx);
        if (type_of(e, nullptr) != Type::Bool) lx.error(at, "sensor binding must be a boolean expression");
        SensorDecl d{id.text.substr(0, dot), id.text.substr(dot + 1), e};
        for (const auto& o : s.sensors)
          if (o.node == d.node && o.sensor == d.sensor) lx.error(id, "sensor bound twice: " + id.text);
        s.sensors.push_back(std::move(d));
      } else if (lx.accept("channel")) {
        single(kw);
        channel_tok = kw;
        s.has_channel = true;
        parse_channel(lx, s.channel);
      } else if (lx.accept("xcvr")) {
        single(kw);
        parse_block(lx, [&](const Token& k) {
          if (k.text != "max_retries") return false;
          s.xcvr.max_datalink_retries = parse_count(lx, "max_retries");
          return true;
        });
      } else if (lx.accept("attacks")) {
        single(kw);
        parse_attacks(lx, s.attacks);
      } else if (lx.accept("security")) {
        single(kw);
        parse_security(lx, s.security);
      } else if (lx.accept("properties")) {
        s.property_files.push_back(lx.expect_id("property file path").text);
      } else if (lx.at("property")) {
        Token name = lx.peek(1);
        Property p = dsl::parse_property(lx);
        for (const auto& o : s.properties)
          if (o.name == p.name) lx.error(name, "duplicate property " + p.name);
        s.properties.push_back(std::move(p));
      } else {
        lx.error(kw, "unknown key '" + kw.text + "'");
        throw Abort{};
      }
    } catch (const Abort&) {
      lx.next();
      lx.recover(starts);
    }
  }
  const Token top{Tok::End, "", 1, 1};
  if (!lx.failed()) {
    if (s.mode == CommMode::Channel && !s.has_channel)
      lx.error(mode_tok.value_or(top), "channel mode requires a channel block");
    if (s.mode == CommMode::Ideal && s.has_channel) lx.error(*channel_tok, "channel block given in ideal mode");
    if (s.has_channel)
      if (auto why = s.channel.check(); !why.empty()) lx.error(*channel_tok, "channel: " + why);
    if (auto why = s.security.check(); !why.empty()) lx.error(top, "security: " + why);
    if (s.controllers.empty()) lx.error(top, "scenario declares no controller");
  }
  if (!lx.failed()) r.value = std::move(s);
  return r;
}

std::string print_scenario(const ScenarioFile& s) {
  std::string o;
  if (!s.name.empty()) o += "scenario " + quote_id(s.name) + "\n";
  o += std::string("mode ") + (s.mode == CommMode::Channel ? "channel" : "ideal") + "\n";
  for (const auto& c : s.controllers) o += "controller " + quote_id(c.ns) + " = " + quoted(c.path) + "\n";
  for (const auto& p : s.plants) o += "plant " + quote_id(p.ns) + " = " + quoted(p.path) + "\n";
  for (const auto& d : s.sensors) o += "sensor " + quote_id(d.node + "." + d.sensor) + " = " + d.expr.to_string() + "\n";
  if (s.has_channel) {
    const auto& c = s.channel;
    o += "channel {\n";
    o += "  msg = " + print_interval(c.t_tx_msg) + "\n";
    o += "  ack = " + print_interval(c.t_tx_ack) + "\n";
    o += "  backoff = " + print_interval(c.t_boff) + "\n";
    o += "  ack_timeout = " + c.t_ack_to.to_string() + "\n";
    o += "  app_timeout = " + c.t_wf_ack.to_string() + "\n";
    o += "  dos = " + print_interval(c.t_dos) + "\n";
    o += "}\n";
  }
  if (!(s.xcvr == XcvrParams{})) o += "xcvr {\n  max_retries = " + std::to_string(s.xcvr.max_datalink_retries) + "\n}\n";
  const AttackConfig& a = s.attacks;
  if (!(a == AttackConfig{})) {
    const AttackConfig d;
    o += "attacks {\n";
    if (!(a.dos == d.dos)) {
      o += "  dos = " + on_off(a.dos.enabled);
      if (a.dos.max_consecutive) o += " { max_consecutive = " + std::to_string(*a.dos.max_consecutive) + " }";
      o += "\n";
    }
    if (!(a.msg_modify == d.msg_modify))
      o += "  msg_modify = " + on_off(a.msg_modify.enabled) + " { payload = " + std::to_string(a.msg_modify.payload) +
           " }\n";
    if (a.msg_intercept) o += "  msg_intercept = on\n";
    if (a.ack_intercept) o += "  ack_intercept = on\n";
    if (a.ack_spoof) o += "  ack_spoof = on\n";
    if (!(a.masquerade == d.masquerade)) {
      o += "  masquerade = " + on_off(a.masquerade.enabled) + " {\n";
      o += "    payload = " + std::to_string(a.masquerade.payload) + "\n";
      for (const auto& t : a.masquerade.targets)
        o += "    target = " + quote_id(t.sender) + " -> " + quote_id(t.receiver) + " : " + quote_id(t.signal) + "\n";
      o += "  }\n";
    }
    o += "}\n";
  }
  if (s.security.any()) {
    o += "security {\n";
    if (s.security.auth) o += "  auth = on\n";
    if (s.security.app_retry_limit) o += "  app_retry_limit = " + std::to_string(*s.security.app_retry_limit) + "\n";
    if (s.security.dos_detect) o += "  dos_detect = on\n";
    o += "}\n";
  }
  for (const auto& f : s.property_files) o += "properties " + quoted(f) + "\n";
  o += print_properties(s.properties);
  return o;
}

Parsed<ScenarioFile> load_scenario(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    Parsed<ScenarioFile> r;
    r.diagnostics.push_back({Severity::Error, path, 0, 0, path, e.what()});
    return r;
  }
  auto r = parse_scenario(text, path);
  if (r.value) r.value->base_dir = std::filesystem::path(path).parent_path().string();
  return r;
}

namespace {

std::string resolve_path(const ScenarioFile& s, const std::string& p) {
  std::filesystem::path fp(p);
  if (fp.is_absolute() || s.base_dir.empty()) return p;
  return (std::filesystem::path(s.base_dir) / fp).string();
}

template <class T>
T load_model(const ScenarioFile& s, const std::string& path, Parsed<T> (*parse)(std::string_view, const std::string&),
             std::vector<Diagnostic>& warnings) {
  const std::string full = resolve_path(s, path);
  std::string text;
  try {
    text = read_file(full);
  } catch (const std::exception& e) {
    throw ModelError(e.what(), {{Severity::Error, full, 0, 0, path, e.what()}});
  }
  auto r = parse(text, full);
  if (!r.ok()) {
    std::string msg = "cannot load " + full + ":";
    for (const auto& d : r.diagnostics)
      if (d.severity == Severity::Error) msg += "\n  " + d.to_string();
    throw ModelError(msg, r.diagnostics);
  }
  for (const auto& d : r.diagnostics) warnings.push_back(d);
  return std::move(*r.value);
}

}  // namespace

BuiltSystem build_system(const ScenarioFile& s) {
  BuiltSystem out;
  std::vector<std::pair<std::string, CipnModel>> ctrls;
  for (const auto& c : s.controllers) ctrls.emplace_back(c.ns, load_model<CipnModel>(s, c.path, parse_cipn, out.warnings));
  std::vector<std::pair<std::string, Net>> plants;
  for (const auto& p : s.plants) plants.emplace_back(p.ns, load_model<Net>(s, p.path, parse_net, out.warnings));

  std::vector<std::pair<std::string, const CipnModel*>> refs;
  for (const auto& [ns, m] : ctrls) refs.emplace_back(ns, &m);
  out.signals = make_signal_table(refs);

  for (const auto& d : s.sensors) {
    auto it = std::find_if(ctrls.begin(), ctrls.end(), [&](const auto& c) { return c.first == d.node; });
    if (it == ctrls.end()) throw ModelError("sensor binding names unknown controller " + d.node);
    if (!it->second.is_sensor(d.sensor))
      throw ModelError("sensor binding " + d.node + "." + d.sensor + ": controller declares no such sensor");
  }

  const bool channel = s.mode == CommMode::Channel;
  if (!channel && s.security.any())
    out.warnings.push_back({Severity::Warning, {}, 0, 0, s.name, "security patches have no effect in ideal mode"});
  if (!channel && s.attacks.any())
    out.warnings.push_back({Severity::Warning, {}, 0, 0, s.name, "attacks have no effect in ideal mode"});

  for (const auto& [ns, m] : ctrls) {
    TransformContext ctx;
    ctx.node = ns;
    ctx.signals = &out.signals;
    for (const auto& d : s.sensors)
      if (d.node == ns) ctx.sensors[d.sensor] = d.expr;
    out.parts.emplace_back(ns, channel ? transform_channel(m, ctx, s.channel, s.security) : transform_ideal(m, ctx));
  }
  for (auto& p : plants) out.parts.push_back(std::move(p));
  if (channel) {
    for (const auto& [ns, m] : ctrls) out.parts.emplace_back(NodeVars(ns).xcvr_namespace(), make_transceiver(ns, s.xcvr, s.channel));
    out.parts.emplace_back("CH", make_channel(out.signals.nodes, s.channel, s.attacks, out.signals.ids));
    // controllers own the initial values of the shared variables they declare
    std::map<std::string, std::int64_t> owned;
    for (std::size_t i = 0; i < ctrls.size(); ++i)
      for (const auto& v : out.parts[i].second.variables) owned.emplace(v.name, v.initial);
    for (std::size_t i = ctrls.size() + plants.size(); i < out.parts.size(); ++i)
      for (auto& v : out.parts[i].second.variables)
        if (auto it = owned.find(v.name); it != owned.end()) v.initial = it->second;
  }
  out.net = compose(out.parts);
  out.net.name = s.name.empty() ? out.net.name : s.name;

  auto diags = validate_net(out.net);
  if (!out.net.imports.empty())
    for (const auto& i : out.net.imports)
      diags.push_back({Severity::Error, {}, 0, 0, out.net.name, "import " + i + " is not provided by any model"});
  if (has_errors(diags)) {
    std::string msg = "composed system is invalid:";
    for (const auto& d : diags)
      if (d.severity == Severity::Error) msg += "\n  " + d.to_string();
    throw ModelError(msg, diags);
  }

  // every actuation place should be observed by some plant guard
  std::set<std::string> observed;
  for (const auto& [ns, plant] : out.parts) {
    if (std::none_of(s.plants.begin(), s.plants.end(), [&](const ModelImport& p) { return p.ns == ns; })) continue;
    for (const auto& t : plant.transitions) t.guard.collect(&observed, nullptr);
  }
  for (const auto& [ns, m] : ctrls)
    for (const auto& [act, places] : derive_actuator_binding(m))
      for (const auto& p : places)
        if (!observed.count(p) && !observed.count(ns + "." + p))
          out.warnings.push_back({Severity::Warning, {}, 0, 0, ns + "/" + p,
                                  "actuation " + act.first + "=" + std::to_string(act.second) + " in " + p +
                                      " is not observed by any plant"});

  for (const auto& f : s.property_files) {
    auto props = load_model<std::vector<Property>>(s, f, parse_properties, out.warnings);
    out.properties.insert(out.properties.end(), props.begin(), props.end());
  }
  out.properties.insert(out.properties.end(), s.properties.begin(), s.properties.end());
  std::set<std::string> names;
  for (const auto& p : out.properties)
    if (!names.insert(p.name).second) throw ModelError("duplicate property " + p.name);

  CompiledNet compiled(out.net);
  std::vector<Diagnostic> bad;
  for (const auto& p : out.properties) {
    try {
      for (const Expr* e : {&p.cond, &p.p, &p.q}) (void)compiled.compile_expr(*e);
      for (const auto& place : p.scope)
        if (!compiled.resolve_place(place)) throw EvalError("unresolved place " + place);
    } catch (const EvalError& e) {
      bad.push_back({Severity::Error, {}, 0, 0, p.name, e.what()});
    }
  }
  if (!bad.empty()) {
    std::string msg = "properties do not fit the composed system:";
    for (const auto& d : bad) msg += "\n  " + d.to_string();
    throw ModelError(msg, bad);
  }
  return out;
}

}  // namespace tpnsec

namespace tpnsec {

const std::vector<std::string>& attack_names() {
  static const std::vector<std::string> names = {"dos",           "msg_modify", "msg_intercept",
                                                 "ack_intercept", "ack_spoof",  "masquerade"};
  return names;
}

namespace {

void set_attack(AttackConfig& a, const std::string& name, bool on) {
  if (name == "dos") a.dos.enabled = on;
  else if (name == "msg_modify") a.msg_modify.enabled = on;
  else if (name == "msg_intercept") a.msg_intercept = on;
  else if (name == "ack_intercept") a.ack_intercept = on;
  else if (name == "ack_spoof") a.ack_spoof = on;
  else if (name == "masquerade") a.masquerade.enabled = on;
  else throw ModelError("unknown attack '" + name + "'");
}

}  // namespace

void set_attacks(AttackConfig& a, const std::vector<std::string>& names) {
  for (const auto& n : attack_names()) set_attack(a, n, false);
  for (const auto& n : names) {
    if (n == "all") {
      for (const auto& m : attack_names()) set_attack(a, m, true);
    } else if (n != "none") {
      set_attack(a, n, true);
    }
  }
}

void set_patches(SecurityConfig& sec, const std::vector<std::string>& names, std::optional<int> retry_limit) {
  std::optional<int> limit = retry_limit ? retry_limit : sec.app_retry_limit;
  sec = SecurityConfig{};
  for (const auto& n : names) {
    if (n == "auth") {
      sec.auth = true;
    } else if (n == "dos-detect") {
      sec.dos_detect = true;
      sec.app_retry_limit = limit.value_or(5);
    } else if (n == "all") {
      sec.auth = sec.dos_detect = true;
      sec.app_retry_limit = limit.value_or(5);
    } else if (n != "none") {
      throw ModelError("unknown patch '" + n + "'");
    }
  }
}

ScenarioFile apply_overrides(ScenarioFile s, const ScenarioOverrides& o) {
  if (o.attacks) set_attacks(s.attacks, *o.attacks);
  if (o.dos_bound) {
    if (*o.dos_bound < 0) throw ModelError("dos bound must be >= 0");
    s.attacks.dos.max_consecutive = *o.dos_bound;
  }
  if (!o.patches.empty()) set_patches(s.security, o.patches, o.retry_limit);
  else if (o.retry_limit) s.security.app_retry_limit = *o.retry_limit;
  if (o.scale) {
    if (o.scale->num() <= 0) throw ModelError("scale must be positive");
    s.channel = s.channel.scaled(*o.scale);
  }
  if (auto why = s.security.check(); !why.empty()) throw ModelError("security: " + why);
  if (s.mode == CommMode::Channel)
    if (auto why = s.channel.check(); !why.empty()) throw ModelError("channel: " + why);
  return s;
}

ScenarioOverrides parse_overrides(std::string_view text) {
  ScenarioOverrides o;
  auto split = [](std::string_view v, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= v.size()) {
      auto end = v.find(sep, start);
      if (end == std::string_view::npos) end = v.size();
      if (end > start) out.emplace_back(v.substr(start, end - start));
      start = end + 1;
    }
    return out;
  };
  auto to_int = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      int n = std::stoi(v, &used);
      if (used == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw ModelError(key + ": expected an integer, got '" + v + "'");
  };
  for (const auto& item : split(text, ' ')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ModelError("override '" + item + "' is not key=value");
    std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (key == "attacks") o.attacks = split(value, ',');
    else if (key == "patch") o.patches = split(value, ',');
    else if (key == "dos_bound") o.dos_bound = to_int(key, value);
    else if (key == "retry_limit") o.retry_limit = to_int(key, value);
    else if (key == "scale") {
      auto r = Rational::parse(value);
      if (!r) throw ModelError("scale: expected a number, got '" + value + "'");
      o.scale = *r;
    } else {
      throw ModelError("unknown override '" + key + "'");
    }
  }
  return o;
}

}  // namespace tpnsec
