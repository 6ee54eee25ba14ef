#include "tpnsec/golden.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "tpnsec/scenario.hpp"

namespace tpnsec {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, '\t')) out.push_back(cell);
  return out;
}

std::string shape_of(const Witness& w) {
  if (w.lasso) return "lasso";
  if (w.ends_in_deadlock) return "deadlock";
  return "finite";
}

std::string summarize(const CompiledNet& net, const Witness& w) {
  std::string s;
  for (std::size_t i = 0; i < w.steps.size() && i < 12; ++i)
    s += (s.empty() ? "" : " ") + net.transition_id(w.steps[i].transition) + "@" + w.steps[i].time.to_string();
  if (w.steps.size() > 12) s += " ... (" + std::to_string(w.steps.size()) + " steps)";
  return s;
}

}  // namespace

std::vector<GoldenEntry> load_golden(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot read " + path);
  std::vector<GoldenEntry> out;
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_tabs(line);
    if (cells.size() < 5) throw ModelError(path + ":" + std::to_string(no) + ": expected at least 5 tab-separated fields");
    GoldenEntry e{cells[0], cells[1], cells[2], cells[3], cells[4], cells.size() > 5 ? cells[5] : "", no};
    static const std::vector<std::string> kExpected = {"holds", "violated", "violated/lasso", "violated/deadlock"};
    if (std::find(kExpected.begin(), kExpected.end(), e.expected) == kExpected.end())
      throw ModelError(path + ":" + std::to_string(no) + ": unknown expected status '" + e.expected + "'");
    if (e.origin != "claim" && e.origin != "derived")
      throw ModelError(path + ":" + std::to_string(no) + ": origin must be claim or derived");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<GoldenResult> corpus_check(const std::string& golden_path, const VerifyOptions& opts) {
  auto entries = load_golden(golden_path);
  const auto dir = std::filesystem::path(golden_path).parent_path();
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < entries.size(); ++i) groups[{entries[i].scenario, entries[i].overrides}].push_back(i);

  std::vector<GoldenResult> results(entries.size());
  for (const auto& [key, idxs] : groups) {
    for (auto i : idxs) results[i].entry = entries[i];
    try {
      auto parsed = load_scenario((dir / key.first).string());
      if (!parsed.ok()) throw ModelError(parsed.diagnostics.front().to_string());
      ScenarioFile s = apply_overrides(*parsed.value, key.second == "-" ? ScenarioOverrides{} : parse_overrides(key.second));
      BuiltSystem sys = build_system(s);
      CompiledNet net(sys.net);
      Verifier verifier(net, opts);
      for (auto i : idxs) {
        auto& r = results[i];
        const Property* prop = nullptr;
        for (const auto& p : sys.properties)
          if (p.name == r.entry.property) prop = &p;
        if (!prop) {
          r.detail = "scenario has no property " + r.entry.property;
          continue;
        }
        Verdict v = verifier.check(*prop);
        r.actual = v.status;
        r.stats = v.stats;
        std::string actual = to_string(v.status);
        if (v.witness) {
          r.shape = shape_of(*v.witness);
          if (auto why = check_witness(net, *prop, *v.witness); !why.empty()) r.detail = "witness does not replay: " + why;
        }
        if (v.status == Status::Violated && r.entry.expected.find('/') != std::string::npos) actual += "/" + r.shape;
        if (actual == r.entry.expected && r.detail.empty()) {
          r.pass = true;
        } else if (r.detail.empty()) {
          r.detail = "got " + actual;
          if (v.status == Status::Inconclusive) r.detail += " (" + v.reason + ")";
          if (v.witness) r.detail += "; witness: " + summarize(net, *v.witness);
        }
      }
    } catch (const std::exception& e) {
      for (auto i : idxs) results[i].detail = e.what();
    }
  }
  return results;
}

}  // namespace tpnsec
