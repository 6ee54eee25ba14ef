#include "tpnsec/report.hpp"

#include <cstdio>
#include <sstream>

namespace tpnsec {

TraceFile make_trace(const CompiledNet& net, const Property& prop, const Verdict& v, const std::string& system) {
  TraceFile t;
  t.property = prop.name;
  t.system = system;
  t.status = to_string(v.status);
  if (!v.witness) return t;
  const Witness& w = *v.witness;
  t.lasso = w.lasso;
  t.trigger = w.trigger;
  t.deadlock = w.ends_in_deadlock;
  SystemState s = net.initial_state();
  for (const auto& step : w.steps) {
    SystemState next = net.fire(s, step.transition);
    TraceFile::Step out{net.transition_id(step.transition), step.time, {}};
    for (std::size_t p = 0; p < net.num_places(); ++p)
      if (next.marking[p] != s.marking[p]) out.changes.emplace_back(net.place_name(p), next.marking[p]);
    for (std::size_t x = 0; x < net.num_variables(); ++x)
      if (next.valuation[x] != s.valuation[x]) out.changes.emplace_back(net.var_name(x), next.valuation[x]);
    t.steps.push_back(std::move(out));
    s = std::move(next);
  }
  return t;
}

std::string emit_trace(const TraceFile& t) {
  std::string o = "# witness trace: step, transition, absolute time (ms), changed places and variables\n";
  o += "property " + quote_id(t.property) + "\n";
  o += "system " + quote_id(t.system) + "\n";
  o += "status " + t.status + "\n";
  if (t.trigger) o += "trigger " + std::to_string(*t.trigger) + "\n";
  if (t.lasso) o += "lasso " + std::to_string(*t.lasso) + "\n";
  if (t.deadlock) o += "deadlock\n";
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    o += std::to_string(i + 1) + " " + quote_id(s.transition) + " " + s.time.to_string();
    for (const auto& [name, value] : s.changes) o += " " + quote_id(name) + "=" + std::to_string(value);
    o += "\n";
  }
  return o;
}

namespace {

struct Field {
  std::string text;
  int column;
};

/// Whitespace-separated fields; double quotes group a field and are removed.
std::vector<Field> split_fields(const std::string& line) {
  std::vector<Field> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
      ++i;
      continue;
    }
    Field f{{}, static_cast<int>(i) + 1};
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
      if (line[i] == '"') {
        auto close = line.find('"', i + 1);
        if (close == std::string::npos) close = line.size();
        f.text += line.substr(i + 1, close - i - 1);
        i = close + 1;
      } else {
        f.text += line[i++];
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

Parsed<TraceFile> parse_trace(std::string_view text, const std::string& file) {
  Parsed<TraceFile> r;
  TraceFile t;
  auto err = [&](int line, int col, const std::string& msg) {
    r.diagnostics.push_back({Severity::Error, file, line, col, file, msg});
  };
  auto index = [&](const Field& f, int line) -> std::optional<std::size_t> {
    try {
      std::size_t used = 0;
      auto v = std::stoull(f.text, &used);
      if (used == f.text.size()) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    err(line, f.column, "expected a step index, got '" + f.text + "'");
    return std::nullopt;
  };
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos && line.find('"') > hash) line.resize(hash);
    auto f = split_fields(line);
    if (f.empty()) continue;
    const std::string& key = f[0].text;
    if (key == "property" || key == "system" || key == "status") {
      if (f.size() != 2) {
        err(lineno, f[0].column, key + " takes one value");
        continue;
      }
      (key == "property" ? t.property : key == "system" ? t.system : t.status) = f[1].text;
    } else if (key == "lasso" || key == "trigger") {
      if (f.size() != 2) {
        err(lineno, f[0].column, key + " takes one step index");
        continue;
      }
      if (auto v = index(f[1], lineno)) (key == "lasso" ? t.lasso : t.trigger) = *v;
    } else if (key == "deadlock") {
      t.deadlock = true;
    } else if (!key.empty() && std::isdigit(static_cast<unsigned char>(key[0]))) {
      auto idx = index(f[0], lineno);
      if (!idx) continue;
      if (*idx != t.steps.size() + 1) {
        err(lineno, f[0].column, "step " + key + " out of order (expected " + std::to_string(t.steps.size() + 1) + ")");
        continue;
      }
      if (f.size() < 3) {
        err(lineno, f[0].column, "step needs a transition and a time");
        continue;
      }
      auto time = Rational::parse(f[2].text);
      if (!time) {
        err(lineno, f[2].column, "malformed time '" + f[2].text + "'");
        continue;
      }
      TraceFile::Step s{f[1].text, *time, {}};
      bool ok = true;
      for (std::size_t i = 3; i < f.size(); ++i) {
        auto eq = f[i].text.rfind('=');
        try {
          if (eq == std::string::npos || eq == 0) throw std::invalid_argument("no '='");
          std::size_t used = 0;
          std::string num = f[i].text.substr(eq + 1);
          auto v = std::stoll(num, &used);
          if (used != num.size()) throw std::invalid_argument("trailing characters");
          s.changes.emplace_back(f[i].text.substr(0, eq), v);
        } catch (const std::exception&) {
          err(lineno, f[i].column, "expected <name>=<integer>, got '" + f[i].text + "'");
          ok = false;
        }
      }
      if (ok) t.steps.push_back(std::move(s));
    } else {
      err(lineno, f[0].column, "unknown trace line '" + key + "'");
    }
  }
  if (t.lasso && *t.lasso > t.steps.size()) err(lineno, 1, "lasso index beyond the last step");
  if (t.trigger && *t.trigger > t.steps.size()) err(lineno, 1, "trigger index beyond the last step");
  if (!has_errors(r.diagnostics)) r.value = std::move(t);
  return r;
}

Witness to_witness(const CompiledNet& net, const TraceFile& t) {
  Witness w;
  for (const auto& s : t.steps) {
    auto i = net.transition_index(s.transition);
    if (!i) throw ModelError("trace names unknown transition " + s.transition);
    w.steps.push_back({*i, s.time});
  }
  w.lasso = t.lasso;
  w.trigger = t.trigger;
  w.ends_in_deadlock = t.deadlock;
  return w;
}

std::string format_replay(const TraceFile& t) {
  std::string o = "property " + t.property + " on " + t.system + ": " + t.status + "\n";
  for (std::size_t i = 0; i <= t.steps.size(); ++i) {
    if (t.trigger && *t.trigger == i) o += "    -- property premise holds from here\n";
    if (t.lasso && *t.lasso == i) o += "    -- cycle starts here and repeats forever\n";
    if (i == t.steps.size()) break;
    const auto& s = t.steps[i];
    char head[64];
    std::snprintf(head, sizeof head, "%5zu  t=%-10s ", i + 1, s.time.to_string().c_str());
    o += head + s.transition + "\n";
    for (const auto& [name, value] : s.changes) o += "         " + name + " = " + std::to_string(value) + "\n";
  }
  if (t.lasso) o += "    -- back to the cycle start\n";
  if (t.deadlock) o += "    -- deadlock: no transition can fire\n";
  return o;
}

std::string emit_verdicts(const std::vector<VerdictRow>& rows) {
  bool with_config = false;
  for (const auto& r : rows) with_config = with_config || !r.config.empty();
  std::string o = with_config ? "config\t" : "";
  o += "property\tstatus\twitness\tclasses\tedges\tseconds\tformula\n";
  for (const auto& r : rows) {
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.3f", r.stats.seconds);
    if (with_config) o += (r.config.empty() ? "-" : r.config) + "\t";
    o += r.property + "\t" + to_string(r.status) + "\t" + (r.witness_file.empty() ? "-" : r.witness_file) + "\t" +
         std::to_string(r.stats.classes) + "\t" + std::to_string(r.stats.edges) + "\t" + secs + "\t" + r.formula +
         "\n";
  }
  return o;
}

std::string echo_config(const ScenarioFile& s, const VerifyOptions& opts) {
  auto onoff = [](bool b) { return std::string(b ? "on" : "off"); };
  const auto& c = s.channel;
  const auto& a = s.attacks;
  std::string o;
  o += "mode = " + std::string(s.mode == CommMode::Channel ? "channel" : "ideal") + "\n";
  if (s.mode == CommMode::Channel) {
    o += "channel.msg = " + print_interval(c.t_tx_msg) + "\n";
    o += "channel.ack = " + print_interval(c.t_tx_ack) + "\n";
    o += "channel.backoff = " + print_interval(c.t_boff) + "\n";
    o += "channel.ack_timeout = " + c.t_ack_to.to_string() + "\n";
    o += "channel.app_timeout = " + c.t_wf_ack.to_string() + "\n";
    o += "channel.dos = " + print_interval(c.t_dos) + "\n";
    o += "xcvr.max_retries = " + std::to_string(s.xcvr.max_datalink_retries) + "\n";
  }
  o += "attacks.dos = " + onoff(a.dos.enabled) + "\n";
  o += "attacks.dos.max_consecutive = " +
       (a.dos.max_consecutive ? std::to_string(*a.dos.max_consecutive) : std::string("unbounded")) + "\n";
  o += "attacks.msg_modify = " + onoff(a.msg_modify.enabled) + "\n";
  o += "attacks.msg_modify.payload = " + std::to_string(a.msg_modify.payload) + "\n";
  o += "attacks.msg_intercept = " + onoff(a.msg_intercept) + "\n";
  o += "attacks.ack_intercept = " + onoff(a.ack_intercept) + "\n";
  o += "attacks.ack_spoof = " + onoff(a.ack_spoof) + "\n";
  o += "attacks.masquerade = " + onoff(a.masquerade.enabled) + "\n";
  o += "attacks.masquerade.payload = " + std::to_string(a.masquerade.payload) + "\n";
  for (const auto& t : a.masquerade.targets)
    o += "attacks.masquerade.target = " + t.sender + " -> " + t.receiver + " : " + t.signal + "\n";
  o += "security.auth = " + onoff(s.security.auth) + "\n";
  o += "security.app_retry_limit = " +
       (s.security.app_retry_limit ? std::to_string(*s.security.app_retry_limit) : std::string("unbounded")) + "\n";
  o += "security.dos_detect = " + onoff(s.security.dos_detect) + "\n";
  o += "explore.max_classes = " + std::to_string(opts.max_classes) + "\n";
  o += "explore.max_depth = " + (opts.max_depth ? std::to_string(opts.max_depth) : std::string("unbounded")) + "\n";
  o += "explore.order = " + std::string(opts.reverse_order ? "reverse" : "forward") + "\n";
  return o;
}

std::string format_report(const RunReport& r) {
  std::string o = "# scenario " + r.scenario + "\n# configuration\n";
  std::istringstream in(r.config_echo);
  for (std::string line; std::getline(in, line);) o += "#   " + line + "\n";
  char t[96];
  std::snprintf(t, sizeof t, "# build %.3f s, total %.3f s\n", r.build_seconds, r.total_seconds);
  o += t;
  o += emit_verdicts(r.rows);
  return o;
}

}  // namespace tpnsec
