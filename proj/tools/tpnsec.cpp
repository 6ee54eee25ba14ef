#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "tpnsec/dsl.hpp"
#include "tpnsec/golden.hpp"
#include "tpnsec/report.hpp"
#include "tpnsec/scenario.hpp"
#include "tpnsec/verifier.hpp"

using namespace tpnsec;

namespace {

constexpr int kExitHolds = 0;
constexpr int kExitViolated = 1;
constexpr int kExitInconclusive = 2;
constexpr int kExitUsage = 3;


struct Overrides {
  std::vector<std::string> attacks;
  bool no_attacks = false;
  std::vector<std::string> patches;
  std::optional<int> dos_bound;
  std::optional<int> retry_limit;
  std::optional<double> scale;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--attacks", attacks, "Enable exactly these attacks (" + join(attack_names()) + ", all)")
        ->delimiter(',');
    cmd->add_flag("--no-attacks", no_attacks, "Disable every attack");
    cmd->add_option("--patch", patches, "Security patches to apply: auth, dos-detect, none")->delimiter(',');
    cmd->add_option("--dos-bound", dos_bound, "Maximum consecutive channel seizures (0 or more)");
    cmd->add_option("--retry-limit", retry_limit, "Application retry limit used by dos-detect");
    cmd->add_option("--scale", scale, "Multiply every channel timing bound by this factor")
        ->check(CLI::PositiveNumber);
  }

  static std::string join(const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ", ") + x;
    return s;
  }
};

/// Command line overrides scenario overrides defaults.
ScenarioFile resolve(ScenarioFile s, const Overrides& o) {
  if (o.no_attacks && !o.attacks.empty()) throw CLI::ValidationError("--no-attacks", "conflicts with --attacks");
  ScenarioOverrides lib;
  if (o.no_attacks) lib.attacks = std::vector<std::string>{};
  if (!o.attacks.empty()) lib.attacks = o.attacks;
  lib.patches = o.patches;
  lib.dos_bound = o.dos_bound;
  lib.retry_limit = o.retry_limit;
  if (o.scale) {
    lib.scale = Rational::parse(std::to_string(*o.scale));
    if (!lib.scale) throw CLI::ValidationError("--scale", "not a decimal number");
  }
  return apply_overrides(std::move(s), lib);
}

void print_diagnostics(const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds) std::cerr << d.to_string() << "\n";
}

int validate_file(const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  std::vector<Diagnostic> diags;
  std::string text;
  if (ext != ".scn") {
    try {
      text = read_file(path);
    } catch (const std::exception& e) {
      std::cerr << path << ": " << e.what() << "\n";
      return kExitUsage;
    }
  }
  if (ext == ".tpn") {
    diags = parse_net(text, path).diagnostics;
  } else if (ext == ".cipn") {
    diags = parse_cipn(text, path).diagnostics;
  } else if (ext == ".props") {
    diags = parse_properties(text, path).diagnostics;
  } else if (ext == ".trace") {
    diags = parse_trace(text, path).diagnostics;
  } else if (ext == ".scn") {
    auto s = load_scenario(path);
    diags = s.diagnostics;
    if (s.ok()) {
      try {
        auto b = build_system(*s.value);
        diags.insert(diags.end(), b.warnings.begin(), b.warnings.end());
      } catch (const ModelError& e) {
        std::cerr << path << ": " << e.what() << "\n";
        return kExitUsage;
      }
    }
  } else {
    std::cerr << path << ": unknown file type (expected .tpn, .cipn, .scn, .props or .trace)\n";
    return kExitUsage;
  }
  print_diagnostics(diags);
  if (has_errors(diags)) return kExitUsage;
  std::cout << path << ": ok\n";
  return kExitHolds;
}

ScenarioFile load_or_throw(const std::string& path) {
  auto s = load_scenario(path);
  print_diagnostics(s.diagnostics);
  if (!s.ok()) throw ModelError("cannot load scenario " + path);
  return *s.value;
}

std::string slug(std::string s) {
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return s;
}

struct VerifyArgs {
  std::string scenario;
  Overrides over;
  std::size_t max_classes = default_max_classes();
  std::size_t max_depth = 0;
  bool seed_order = false;
  bool matrix = false;
  std::vector<std::string> only;
  std::string witness_dir = "witnesses";
  bool no_witness = false;
};

struct Cell {
  std::string label;
  ScenarioFile scenario;
};

std::vector<Cell> matrix_cells(const ScenarioFile& base) {
  std::vector<Cell> cells;
  std::vector<std::string> attacks{"none"};
  for (const auto& a : attack_names())
    if (a != "masquerade" || !base.attacks.masquerade.targets.empty()) attacks.push_back(a);
  for (const auto& a : attacks) {
    for (const char* patch : {"none", "all"}) {
      ScenarioFile s = base;
      set_attacks(s.attacks, {a});
      set_patches(s.security, {patch}, std::nullopt);
      cells.push_back({"attack=" + a + " patch=" + patch, s});
    }
  }
  return cells;
}

int run_verify(const VerifyArgs& args) {
  auto t0 = std::chrono::steady_clock::now();
  ScenarioFile base = resolve(load_or_throw(args.scenario), args.over);
  VerifyOptions opts;
  opts.max_classes = args.max_classes;
  opts.max_depth = args.max_depth;
  opts.reverse_order = args.seed_order;

  std::vector<Cell> cells = args.matrix ? matrix_cells(base) : std::vector<Cell>{{"", base}};
  if (args.matrix && base.mode != CommMode::Channel) throw CLI::ValidationError("--matrix", "needs a channel-mode scenario");
  RunReport report;
  report.scenario = base.name.empty() ? args.scenario : base.name;
  report.config_echo = echo_config(base, opts);
  bool violated = false, inconclusive = false;
  for (const auto& cell : cells) {
    auto tb = std::chrono::steady_clock::now();
    BuiltSystem sys = build_system(cell.scenario);
    print_diagnostics(sys.warnings);
    CompiledNet net(sys.net);
    report.build_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - tb).count();
    Verifier verifier(net, opts);
    std::set<std::string> wanted(args.only.begin(), args.only.end());
    for (const auto& name : wanted) {
      bool known = false;
      for (const auto& p : sys.properties) known = known || p.name == name;
      if (!known) throw CLI::ValidationError("--property", "scenario has no property " + name);
    }
    for (const auto& prop : sys.properties) {
      if (!wanted.empty() && !wanted.count(prop.name)) continue;
      Verdict v = verifier.check(prop);
      VerdictRow row{prop.name, prop.formula(), v.status, "", v.stats, cell.label};
      violated = violated || v.status == Status::Violated;
      inconclusive = inconclusive || v.status == Status::Inconclusive;
      if (v.witness && !args.no_witness) {
        std::filesystem::create_directories(args.witness_dir);
        std::string file = slug(report.scenario) + "_" + slug(prop.name);
        if (!cell.label.empty()) file += "_" + slug(cell.label);
        auto path = (std::filesystem::path(args.witness_dir) / (file + ".trace")).string();
        std::ofstream(path) << emit_trace(make_trace(net, prop, v, report.scenario));
        row.witness_file = path;
      }
      if (v.status == Status::Inconclusive) std::cerr << prop.name << ": " << v.reason << "\n";
      report.rows.push_back(std::move(row));
    }
  }
  report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << format_report(report);
  if (violated) return kExitViolated;
  if (inconclusive) return kExitInconclusive;
  return kExitHolds;
}

int run_transform(const std::string& cipn, const std::string& scenario, const std::string& out, const Overrides& over) {
  ScenarioFile s = resolve(load_or_throw(scenario), over);
  std::string node;
  for (const auto& c : s.controllers) {
    std::filesystem::path p = std::filesystem::path(s.base_dir) / c.path;
    std::error_code ec;
    if (std::filesystem::equivalent(p, cipn, ec)) node = c.ns;
  }
  if (node.empty()) throw CLI::ValidationError("cipn", cipn + " is not a controller of " + scenario);
  BuiltSystem sys = build_system(s);
  print_diagnostics(sys.warnings);
  for (const auto& [ns, net] : sys.parts) {
    if (ns != node) continue;
    std::string text = "# generated from " + cipn + " for node " + node + "\n" + print_net(net);
    if (out.empty() || out == "-") {
      std::cout << text;
    } else {
      std::ofstream f(out);
      if (!f) throw ModelError("cannot write " + out);
      f << text;
    }
  }
  return kExitHolds;
}

int run_trace(const std::string& path, const std::string& scenario, const Overrides& over) {
  auto t = parse_trace(read_file(path), path);
  print_diagnostics(t.diagnostics);
  if (!t.ok()) return kExitUsage;
  std::cout << format_replay(*t.value);
  if (scenario.empty()) return kExitHolds;
  ScenarioFile s = resolve(load_or_throw(scenario), over);
  BuiltSystem sys = build_system(s);
  CompiledNet net(sys.net);
  const Property* prop = nullptr;
  for (const auto& p : sys.properties)
    if (p.name == t.value->property) prop = &p;
  if (!prop) throw ModelError("scenario has no property " + t.value->property);
  std::string why = check_witness(net, *prop, to_witness(net, *t.value));
  if (!why.empty()) {
    std::cout << "replay check failed: " << why << "\n";
    return kExitViolated;
  }
  std::cout << "replay check passed: the run is feasible and violates " << prop->name << "\n";
  return kExitHolds;
}

int run_corpus_check(const std::string& path, std::size_t max_classes) {
  VerifyOptions opts;
  opts.max_classes = max_classes;
  auto results = corpus_check(path, opts);
  std::size_t failed = 0;
  for (const auto& r : results) {
    const auto& e = r.entry;
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << e.scenario << " " << e.property << " ["
              << e.overrides << "] expected " << e.expected << " (" << e.origin << ")";
    if (r.pass) std::cout << ", " << r.stats.classes << " classes";
    else std::cout << ": " << r.detail;
    std::cout << "\n";
    failed += !r.pass;
  }
  std::cout << results.size() - failed << "/" << results.size() << " golden entries match\n";
  return failed ? kExitViolated : kExitHolds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Security-aware verification of networked CIPN controllers over time Petri nets"};
  app.require_subcommand(1);

  std::vector<std::string> validate_paths;
  auto* validate = app.add_subcommand("validate", "Parse and check model, scenario, property or trace files");
  validate->add_option("paths", validate_paths, "Files to check")->required()->check(CLI::ExistingFile);

  std::string cipn, scenario, out;
  Overrides transform_over;
  auto* transform = app.add_subcommand("transform", "Lower one controller of a scenario to a time Petri net");
  transform->add_option("cipn", cipn, "Controller model")->required()->check(CLI::ExistingFile);
  transform->add_option("--scenario,-s", scenario, "Scenario supplying bindings and mode")
      ->required()
      ->check(CLI::ExistingFile);
  transform->add_option("--out,-o", out, "Output .tpn file (default: standard output)");
  transform_over.add_to(transform);

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Check every property of a scenario");
  verify->add_option("scenario", va.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  va.over.add_to(verify);
  verify->add_option("--max-classes", va.max_classes, "State-class budget before giving up (inconclusive)");
  verify->add_option("--max-depth", va.max_depth, "Depth bound for exploration (0: none)");
  verify->add_flag("--seed-order", va.seed_order, "Explore successors in reverse transition order");
  verify->add_flag("--matrix", va.matrix, "Run every single attack, and no attack, with and without all patches");
  verify->add_option("--property,-p", va.only, "Only check these properties")->delimiter(',');
  verify->add_option("--witness-dir", va.witness_dir, "Directory for .trace files");
  verify->add_flag("--no-witness", va.no_witness, "Do not write witness files");

  std::string trace_path, trace_scenario;
  Overrides trace_over;
  auto* trace = app.add_subcommand("trace", "Print a witness trace, optionally replaying it against a scenario");
  trace->add_option("trace", trace_path, "Witness .trace file")->required()->check(CLI::ExistingFile);
  trace->add_option("--scenario,-s", trace_scenario, "Scenario to replay the witness on")->check(CLI::ExistingFile);
  trace_over.add_to(trace);

  std::string golden_path;
  std::size_t golden_max_classes = default_max_classes();
  auto* check = app.add_subcommand("corpus-check", "Compare verdicts against a golden table");
  check->add_option("golden", golden_path, "Golden table (.tsv)")->required()->check(CLI::ExistingFile);
  check->add_option("--max-classes", golden_max_classes, "State-class budget per system");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*validate) {
      int rc = kExitHolds;
      for (const auto& p : validate_paths) rc = std::max(rc, validate_file(p));
      return rc;
    }
    if (*transform) return run_transform(cipn, scenario, out, transform_over);
    if (*verify) return run_verify(va);
    if (*trace) return run_trace(trace_path, trace_scenario, trace_over);
    if (*check) return run_corpus_check(golden_path, golden_max_classes);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    print_diagnostics(e.diagnostics);
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
