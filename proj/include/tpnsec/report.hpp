#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tpnsec/dsl.hpp"
#include "tpnsec/scenario.hpp"
#include "tpnsec/verifier.hpp"

namespace tpnsec {

/// Line-oriented witness file: keyword lines, then one step per line as
/// `<index> <transition> <time> <name>=<value>...` listing what changed.
struct TraceFile {
  std::string property;
  std::string system;
  std::string status;
  struct Step {
    std::string transition;
    Rational time;
    std::vector<std::pair<std::string, std::int64_t>> changes;
    bool operator==(const Step&) const = default;
  };
  std::vector<Step> steps;
  std::optional<std::size_t> lasso;
  std::optional<std::size_t> trigger;
  bool deadlock = false;
  bool operator==(const TraceFile&) const = default;
};

TraceFile make_trace(const CompiledNet& net, const Property& prop, const Verdict& v, const std::string& system);
std::string emit_trace(const TraceFile& t);
Parsed<TraceFile> parse_trace(std::string_view text, const std::string& file = {});
/// Maps transition ids back onto the net; throws ModelError on unknown ids.
Witness to_witness(const CompiledNet& net, const TraceFile& t);
/// Human-readable replay with the cycle and trigger points marked.
std::string format_replay(const TraceFile& t);

struct VerdictRow {
  std::string property;
  std::string formula;
  Status status = Status::Holds;
  std::string witness_file;  // "-" when there is none
  VerifyStats stats;
  std::string config;  // matrix mode: attack/patch label
};

/// Tab-separated table with a header line.
std::string emit_verdicts(const std::vector<VerdictRow>& rows);

struct RunReport {
  std::string scenario;
  std::string config_echo;
  std::vector<VerdictRow> rows;
  double build_seconds = 0;
  double total_seconds = 0;
};

/// Every resolved setting, defaults included.
std::string echo_config(const ScenarioFile& s, const VerifyOptions& opts);
std::string format_report(const RunReport& r);

}  // namespace tpnsec
