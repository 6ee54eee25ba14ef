#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tpnsec/cipn.hpp"
#include "tpnsec/comm.hpp"
#include "tpnsec/dsl.hpp"
#include "tpnsec/verifier.hpp"

namespace tpnsec {

enum class CommMode { Ideal, Channel };

struct ModelImport {
  std::string ns;
  std::string path;
  bool operator==(const ModelImport&) const = default;
};

/// `sensor LC1.Pres1 = <expr over plant markings>`
struct SensorDecl {
  std::string node;
  std::string sensor;
  Expr expr;
  bool operator==(const SensorDecl&) const = default;
};

/// Declarative composition: controllers, plants, sensor bindings, channel,
/// attack and security configuration, and the properties to check.
struct ScenarioFile {
  std::string name;
  CommMode mode = CommMode::Ideal;
  std::vector<ModelImport> controllers;
  std::vector<ModelImport> plants;
  std::vector<SensorDecl> sensors;
  bool has_channel = false;
  ChannelParams channel;
  XcvrParams xcvr;
  AttackConfig attacks;
  SecurityConfig security;
  std::vector<std::string> property_files;
  std::vector<Property> properties;
  /// Directory that relative model paths are resolved against; not part of the text.
  std::string base_dir;

  bool operator==(const ScenarioFile& o) const;
};

Parsed<ScenarioFile> parse_scenario(std::string_view text, const std::string& file = {});
std::string print_scenario(const ScenarioFile& s);
/// Reads and parses a scenario file, setting base_dir to its directory.
Parsed<ScenarioFile> load_scenario(const std::string& path);

/// Composed system ready for verification.
struct BuiltSystem {
  Net net;
  std::vector<Property> properties;
  SignalTable signals;
  /// Every composed part (controllers, plants, transceivers, channel) by namespace.
  std::vector<std::pair<std::string, Net>> parts;
  std::vector<Diagnostic> warnings;
};

/// Loads the referenced models, transforms controllers for the scenario's mode,
/// applies security patches and composes. Throws ModelError with diagnostics.
BuiltSystem build_system(const ScenarioFile& s);

/// Attack names accepted by overrides, in the order used for matrices.
const std::vector<std::string>& attack_names();

/// Adjustments applied on top of a scenario file (command line, golden table).
struct ScenarioOverrides {
  std::optional<std::vector<std::string>> attacks;  // exact set; may contain "all" or "none"
  std::vector<std::string> patches;                 // auth, dos-detect, all, none
  std::optional<int> dos_bound;
  std::optional<int> retry_limit;
  std::optional<Rational> scale;
};

/// Enables exactly the named attacks. Throws ModelError on an unknown name.
void set_attacks(AttackConfig& a, const std::vector<std::string>& names);
/// Replaces the security configuration. dos-detect uses retry_limit, else the
/// previous limit, else 5.
void set_patches(SecurityConfig& sec, const std::vector<std::string>& names, std::optional<int> retry_limit);
/// Overrides take precedence over the file. Throws ModelError when the result
/// is inconsistent.
ScenarioFile apply_overrides(ScenarioFile s, const ScenarioOverrides& o);
/// Parses `attacks=a,b patch=auth dos_bound=4 retry_limit=5 scale=0.1`.
ScenarioOverrides parse_overrides(std::string_view text);

}  // namespace tpnsec
