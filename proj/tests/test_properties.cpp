// Invariants checked over random nets and the whole corpus.
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "product_search.hpp"
#include "random_nets.hpp"
#include "tpnsec/dsl.hpp"
#include "tpnsec/engine.hpp"
#include "tpnsec/scenario.hpp"
#include "tpnsec/verifier.hpp"

using namespace tpnsec;
namespace fs = std::filesystem;

namespace {

const std::string kCorpus = TPNSEC_CORPUS_DIR;

const std::vector<std::string> kScenarios = {
    "running_example/ideal.scn",   "running_example/channel.scn",   "manipulator_2dof/ideal.scn",
    "manipulator_2dof/channel.scn", "manipulator_3dof/ideal.scn", "manipulator_3dof/channel.scn"};

ScenarioFile load_scn(const std::string& rel) {
  auto r = load_scenario(kCorpus + "/" + rel);
  REQUIRE_MESSAGE(r.ok(), rel);
  return *r.value;
}

ScenarioFile with_attacks(ScenarioFile s, std::vector<std::string> attacks) {
  ScenarioOverrides o;
  o.attacks = std::move(attacks);
  return apply_overrides(std::move(s), o);
}

std::vector<fs::path> corpus_files(const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(kCorpus))
    if (e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

/// Reachable discrete states with places and variables by name.
using NamedState = std::pair<std::map<std::string, int>, std::map<std::string, std::int64_t>>;

std::set<NamedState> reachable_states(const Net& n) {
  CompiledNet net(n);
  auto g = explore(net);
  REQUIRE(!g.truncated);
  std::set<NamedState> out;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    auto c = g.nodes[i];
    NamedState s;
    for (std::size_t p = 0; p < net.num_places(); ++p) s.first[net.place_name(p)] = c.state.marking[p];
    for (std::size_t v = 0; v < net.num_variables(); ++v) s.second[net.var_name(v)] = c.state.valuation[v];
    out.insert(s);
  }
  return out;
}

Expr channel_tokens(const Net& n) {
  Expr sum = Expr::integer(0);
  for (const auto& p : n.places)
    if (p.starts_with("CH.")) sum = plus(sum, Expr::mark(p));
  return sum;
}

}  // namespace

TEST_CASE("firing moves exactly the arc weights and applies updates to the old valuation") {
  std::mt19937 rng(7);
  for (int i = 0; i < 300; ++i) {
    Net n = testing_support::random_net(rng);
    CompiledNet net(n);
    SystemState s = net.initial_state();
    for (int step = 0; step < 20; ++step) {
      auto en = net.enabled(s);
      if (en.empty()) break;
      std::size_t t = en[std::uniform_int_distribution<std::size_t>(0, en.size() - 1)(rng)];
      SystemState next = net.fire(s, t);
      std::vector<int> expect = s.marking;
      for (auto [p, w] : net.pre(t)) expect[p] -= w;
      for (auto [p, w] : net.post(t)) expect[p] += w;
      CHECK(next.marking == expect);
      std::vector<std::int64_t> val = s.valuation;
      for (const auto& u : net.transition(t).updates)
        val[*net.var_index(u.var)] = eval_expr(u.value, net, s).v;
      CHECK(next.valuation == val);
      s = next;
    }
  }
}

TEST_CASE("guard evaluation has no side effects and ignores evaluation order") {
  std::mt19937 rng(11);
  for (int i = 0; i < 200; ++i) {
    Net n = testing_support::random_net(rng);
    CompiledNet net(n);
    const SystemState s = net.initial_state();
    std::vector<bool> forward, backward(net.num_transitions());
    for (std::size_t t = 0; t < net.num_transitions(); ++t) forward.push_back(net.guard_holds(s, t));
    for (std::size_t t = net.num_transitions(); t-- > 0;) backward[t] = net.guard_holds(s, t);
    CHECK(forward == backward);
    CHECK(s == net.initial_state());
  }
}

TEST_CASE("composition is associative up to reachable states") {
  std::mt19937 rng(3);
  for (int i = 0; i < 60; ++i) {
    Net a = testing_support::random_net(rng), b = testing_support::random_net(rng),
        c = testing_support::random_net(rng);
    Net flat = compose({{"a", a}, {"b", b}, {"c", c}});
    Net left = compose({{"", compose({{"a", a}, {"b", b}})}, {"c", c}});
    Net right = compose({{"a", a}, {"", compose({{"b", b}, {"c", c}})}});
    CompiledNet probe(flat);
    if (explore(probe, {.max_classes = 3000}).truncated) continue;
    auto ref = reachable_states(flat);
    CHECK(reachable_states(left) == ref);
    CHECK(reachable_states(right) == ref);
  }
}

TEST_CASE("every corpus model and composed scenario validates") {
  for (const auto& f : corpus_files(".tpn")) {
    CAPTURE(f.string());
    auto r = parse_net(read_file(f.string()), f.string());
    REQUIRE(r.ok());
    CHECK(!has_errors(validate_net(with_free_environment(*r.value))));
  }
  for (const auto& f : corpus_files(".cipn")) {
    CAPTURE(f.string());
    CHECK(parse_cipn(read_file(f.string()), f.string()).ok());
  }
  for (const auto& rel : kScenarios) {
    CAPTURE(rel);
    for (bool attacked : {false, true}) {
      ScenarioFile s = load_scn(rel);
      if (attacked && s.mode == CommMode::Channel) {
        s = with_attacks(s, attack_names());
        set_patches(s.security, {"all"}, std::nullopt);
      }
      auto sys = build_system(s);
      CHECK(!has_errors(validate_net(sys.net)));
    }
  }
}

TEST_CASE("half duplex holds over full exploration of the corpus systems") {
  struct Case {
    std::string scenario;
    std::vector<std::string> attacks;
  };
  // Single attacks whose class graphs fit in a unit test. ACK interception
  // (duplicate transmissions) exceeds 3M classes on every corpus system.
  std::vector<Case> cases;
  for (const char* a : {"", "dos", "msg_modify", "msg_intercept", "ack_spoof"})
    for (const char* rel : {"running_example/channel.scn", "manipulator_2dof/channel.scn",
                            "manipulator_3dof/channel.scn"})
      cases.push_back({rel, *a ? std::vector<std::string>{a} : std::vector<std::string>{}});
  cases.push_back({"running_example/channel.scn", {"masquerade"}});
  for (const auto& c : cases) {
    CAPTURE(c.scenario);
    CAPTURE(c.attacks.size() ? c.attacks.front() : std::string("nominal"));
    auto sys = build_system(with_attacks(load_scn(c.scenario), c.attacks));
    CompiledNet net(sys.net);
    Verifier v(net, {.max_classes = 3000000});
    Expr one = eq(channel_tokens(sys.net), Expr::integer(1));
    CHECK(v.check(Property::ag("half-duplex", one)).status == Status::Holds);
    CHECK(v.check(Property::bounded("channel-safe", 1, [&] {
             std::vector<std::string> ch;
             for (const auto& p : sys.net.places)
               if (p.starts_with("CH.")) ch.push_back(p);
             return ch;
           }())).status == Status::Holds);
  }
}

TEST_CASE("every nominal run is also a run under each attack") {
  const std::size_t kDepth = 60;
  for (const std::string rel : {"running_example/channel.scn", "manipulator_2dof/channel.scn",
                                "manipulator_3dof/channel.scn"}) {
    ScenarioFile s = load_scn(rel);
    auto nominal = build_system(with_attacks(s, {}));
    CompiledNet nnet(nominal.net);
    auto g = explore(nnet);
    REQUIRE(!g.truncated);
    for (const auto& attack : attack_names()) {
      CAPTURE(rel);
      CAPTURE(attack);
      auto attacked = build_system(with_attacks(s, {attack}));
      CompiledNet anet(attacked.net);
      CHECK(testing_support::nominal_runs_blocked(nnet, g, anet, kDepth) == "");
    }
    // A net that disables one nominal transition must be caught.
    Net broken = nominal.net;
    broken.find_transition(nnet.transition_id(g.succ(0).front().transition))->guard = Expr::boolean(false);
    CompiledNet bnet(broken);
    CHECK(testing_support::nominal_runs_blocked(nnet, g, bnet, kDepth) != "");
  }
}

TEST_CASE("2-DOF manipulator moves in the expected order with the gripper dwell") {
  auto sys = build_system(load_scn("manipulator_2dof/ideal.scn"));
  CompiledNet net(sys.net);
  auto g = explore(net);
  REQUIRE(!g.truncated);
  const std::vector<std::string> cycle = {"TbCYL_extend",  "TcGRIP_grip",    "TbCYL_retract", "TaCYL_extend",
                                          "TbCYL_extend",  "TcGRIP_release", "TbCYL_retract", "TaCYL_retract"};
  auto short_id = [&](std::size_t t) {
    const auto& id = net.transition_id(t);
    return id.substr(id.find('.') + 1);
  };
  std::mt19937 rng(99);
  for (int walk = 0; walk < 50; ++walk) {
    std::size_t node = 0;
    std::vector<std::size_t> path;
    for (int step = 0; step < 150; ++step) {
      auto s = g.succ(node);
      REQUIRE(!s.empty());  // the work cycle never deadlocks
      const auto& e = s[std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng)];
      path.push_back(e.transition);
      node = e.target;
    }
    std::vector<std::string> moves;
    for (auto t : path)
      if (net.transition_id(t).starts_with("CYL.")) moves.push_back(short_id(t));
    REQUIRE(!moves.empty());
    CHECK(moves.front() == "Tst_press");
    for (std::size_t i = 1; i < moves.size(); ++i) CHECK(moves[i] == cycle[(i - 1) % cycle.size()]);

    // B starts lifting no earlier than 500 ms after the grip command.
    auto timed = concretize(net, path);
    REQUIRE(timed);
    std::optional<Rational> grip_cmd;
    for (const auto& st : *timed) {
      const auto& tr = net.transition(st.transition);
      for (const auto& a : tr.outputs)
        if (a.place == "LC_B.PbCTRL_Grip") grip_cmd = st.time;
      if (short_id(st.transition) == "TbCYL_retract" && grip_cmd) {
        CHECK(st.time - *grip_cmd >= Rational(500));
        grip_cmd.reset();
      }
    }
  }
}

TEST_CASE("corpus properties have the expected shapes") {
  std::map<std::string, Property::Kind> kinds;
  for (const auto& p : build_system(load_scn("manipulator_3dof/ideal.scn")).properties) kinds[p.name] = p.kind;
  CHECK(kinds.at("P4") == Property::Kind::Ag);
  CHECK(kinds.at("P5") == Property::Kind::LeadsTo);
  for (const auto& p : build_system(load_scn("running_example/ideal.scn")).properties)
    if (p.name == "P2") CHECK(p.kind == Property::Kind::LeadsTo);
}

TEST_CASE("corrupting any corpus line is reported on that line") {
  std::vector<fs::path> files;
  for (const char* ext : {".tpn", ".cipn", ".props", ".scn"})
    for (auto& f : corpus_files(ext)) files.push_back(f);
  for (const auto& f : files) {
    const std::string text = read_file(f.string());
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto first = lines[i].find_first_not_of(" \t");
      if (first == std::string::npos || lines[i][first] == '#') continue;
      std::string bad;
      for (std::size_t j = 0; j < lines.size(); ++j) bad += (j == i ? "@" + lines[j] : lines[j]) + "\n";
      std::vector<Diagnostic> diags;
      const auto ext = f.extension();
      if (ext == ".tpn") diags = parse_net(bad, f.string()).diagnostics;
      else if (ext == ".cipn") diags = parse_cipn(bad, f.string()).diagnostics;
      else if (ext == ".props") diags = parse_properties(bad, f.string()).diagnostics;
      else diags = parse_scenario(bad, f.string()).diagnostics;
      CAPTURE(f.string());
      CAPTURE(i + 1);
      REQUIRE(has_errors(diags));
      CHECK(diags.front().line == int(i + 1));
      CHECK(diags.front().file == f.string());
    }
  }
}

TEST_CASE("corpus files round-trip through the printers") {
  for (const auto& f : corpus_files(".tpn")) {
    CAPTURE(f.string());
    auto a = parse_net(read_file(f.string()));
    REQUIRE(a.ok());
    auto b = parse_net(print_net(*a.value));
    REQUIRE(b.ok());
    CHECK(*b.value == *a.value);
  }
  for (const auto& f : corpus_files(".cipn")) {
    CAPTURE(f.string());
    auto a = parse_cipn(read_file(f.string()));
    REQUIRE(a.ok());
    auto b = parse_cipn(print_cipn(*a.value));
    REQUIRE(b.ok());
    CHECK(*b.value == *a.value);
  }
  for (const auto& f : corpus_files(".props")) {
    CAPTURE(f.string());
    auto a = parse_properties(read_file(f.string()));
    REQUIRE(a.ok());
    auto b = parse_properties(print_properties(*a.value));
    REQUIRE(b.ok());
    CHECK(print_properties(*b.value) == print_properties(*a.value));
  }
  for (const auto& rel : kScenarios) {
    CAPTURE(rel);
    auto a = parse_scenario(read_file(kCorpus + "/" + rel));
    REQUIRE(a.ok());
    auto b = parse_scenario(print_scenario(*a.value));
    REQUIRE(b.ok());
    CHECK(*b.value == *a.value);
  }
}
