#pragma once

#include <string>
#include <vector>

#include "tpnsec/verifier.hpp"

namespace tpnsec {

/// One row of a golden-verdict table. `expected` is holds, violated,
/// violated/lasso or violated/deadlock; `origin` is claim (a published
/// verdict) or derived (recorded from a run of this tool).
struct GoldenEntry {
  std::string scenario;  // relative to the table's directory
  std::string property;
  std::string overrides;  // parse_overrides syntax, "-" for none
  std::string expected;
  std::string origin;
  std::string note;
  int line = 0;
};

struct GoldenResult {
  GoldenEntry entry;
  Status actual = Status::Inconclusive;
  std::string shape;  // lasso, deadlock or finite for violations
  bool pass = false;
  std::string detail;
  VerifyStats stats;
};

/// Tab-separated: scenario, property, overrides, expected, origin, note.
/// `#` starts a comment line. Throws ModelError on malformed rows.
std::vector<GoldenEntry> load_golden(const std::string& path);

/// Runs every entry, building each (scenario, overrides) system once.
/// Violations must come with a witness that replays.
std::vector<GoldenResult> corpus_check(const std::string& golden_path, const VerifyOptions& opts = {});

}  // namespace tpnsec
