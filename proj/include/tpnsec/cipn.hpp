#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tpnsec/comm.hpp"
#include "tpnsec/net.hpp"

namespace tpnsec {

struct CipnAction {
  enum class Kind { Act, Send, Delay };
  Kind kind = Kind::Act;
  std::string name;  // actuator or signal
  std::int64_t value = 0;
  std::vector<std::string> dests;  // Send only; empty = broadcast
  Rational delay;                  // Delay only, milliseconds

  static CipnAction act(std::string actuator, std::int64_t value);
  static CipnAction send(std::string signal, std::int64_t value, std::vector<std::string> dests = {});
  static CipnAction wait(Rational ms);
  std::string to_string() const;
  bool operator==(const CipnAction&) const = default;
};

struct CipnPlace {
  std::string id;
  std::vector<CipnAction> actions;
  bool operator==(const CipnPlace&) const = default;
};

/// Transition with a condition over sensors, received signals and local variables.
struct CipnTransition {
  std::string id;
  Expr cond;
  std::vector<Update> updates;  // local variables only
  std::vector<Arc> inputs;
  std::vector<Arc> outputs;
  bool operator==(const CipnTransition&) const = default;
};

struct CipnModel {
  std::string name;
  std::vector<std::string> sensors;
  std::vector<std::string> signals;
  std::vector<Variable> variables;
  std::vector<CipnPlace> places;
  std::map<std::string, int> initial_marking;
  std::vector<CipnTransition> transitions;

  const CipnPlace* find_place(const std::string& id) const;
  /// The single initially marked place, empty if the marking is malformed.
  std::string initial_place() const;
  bool is_sensor(const std::string& n) const;
  bool is_signal(const std::string& n) const;
  bool operator==(const CipnModel&) const = default;
};

/// Structural errors plus a determinism lint (warning) on syntactically
/// non-exclusive conditions out of one place.
std::vector<Diagnostic> check_cipn(const CipnModel& m);

/// sensor name -> boolean expression over plant markings.
using SensorBinding = std::map<std::string, Expr>;

/// (actuator, value) -> controller places issuing it.
using ActuatorBinding = std::map<std::pair<std::string, std::int64_t>, std::vector<std::string>>;
ActuatorBinding derive_actuator_binding(const CipnModel& m);

/// Signal ids and routing shared by every controller of a system.
struct SignalTable {
  std::vector<std::string> nodes;                               // declaration order, ids are 1-based
  std::map<std::string, int> ids;                               // 1-based, sorted by name
  std::map<std::string, std::vector<std::string>> subscribers;  // signal -> nodes with conditions on it

  int node_id(const std::string& node) const;
  /// Receivers of a send: the explicit list, or the subscribers except the sender.
  std::vector<std::string> receivers(const std::string& sender, const CipnAction& send) const;
};

SignalTable make_signal_table(const std::vector<std::pair<std::string, const CipnModel*>>& controllers);

/// Ideal-mode mailbox variable of `signal` at node `dest` and its arrival flag.
std::string mailbox_var(const std::string& dest, const std::string& signal);
std::string mailbox_flag(const std::string& dest, const std::string& signal);

struct TransformContext {
  std::string node;
  SensorBinding sensors;
  const SignalTable* signals = nullptr;
};

/// Instantaneous shared-memory communication; sends write mailbox variables.
Net transform_ideal(const CipnModel& m, const TransformContext& ctx);

/// Sends become Tx subnets driving the node's transceiver; signal conditions read
/// the node's receive buffer. Security patches are applied per `sec`.
Net transform_channel(const CipnModel& m, const TransformContext& ctx, const ChannelParams& cp,
                      const SecurityConfig& sec);

}  // namespace tpnsec
