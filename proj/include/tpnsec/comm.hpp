#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tpnsec/net.hpp"

namespace tpnsec {

/// Timing of the shared channel, milliseconds.
struct ChannelParams {
  TimeInterval t_tx_msg = TimeInterval::closed(4, 6);
  TimeInterval t_tx_ack = TimeInterval::closed(1, 2);
  TimeInterval t_boff = TimeInterval::closed(Rational(3, 10), 5);
  Rational t_ack_to = 10;
  Rational t_wf_ack = 50;
  TimeInterval t_dos = TimeInterval::closed(1, 40);

  /// Every bound multiplied by f.
  ChannelParams scaled(Rational f) const;
  /// Empty when the invariants hold, reason otherwise.
  std::string check() const;
  bool operator==(const ChannelParams&) const = default;
};

struct XcvrParams {
  int max_datalink_retries = 3;
  bool operator==(const XcvrParams&) const = default;
};

struct MasqueradeTarget {
  std::string sender;
  std::string receiver;
  std::string signal;
  bool operator==(const MasqueradeTarget&) const = default;
};

struct AttackConfig {
  struct Dos {
    bool enabled = false;
    std::optional<int> max_consecutive;  // nullopt = unbounded
    bool operator==(const Dos&) const = default;
  } dos;
  bool ack_intercept = false;
  bool ack_spoof = false;
  struct MsgModify {
    bool enabled = false;
    std::int64_t payload = 0;
    bool operator==(const MsgModify&) const = default;
  } msg_modify;
  bool msg_intercept = false;
  struct Masquerade {
    bool enabled = false;
    std::int64_t payload = 0;
    std::vector<MasqueradeTarget> targets;
    bool operator==(const Masquerade&) const = default;
  } masquerade;

  bool any() const {
    return dos.enabled || ack_intercept || ack_spoof || msg_modify.enabled || msg_intercept || masquerade.enabled;
  }
  bool operator==(const AttackConfig&) const = default;
};

struct SecurityConfig {
  bool auth = false;
  std::optional<int> app_retry_limit;  // nullopt = unbounded
  bool dos_detect = false;

  bool any() const { return auth || app_retry_limit || dos_detect; }
  std::string check() const;
  bool operator==(const SecurityConfig&) const = default;
};

/// MAC tag values carried with every delivered payload.
inline constexpr std::int64_t kMacNone = 0;
inline constexpr std::int64_t kMacValid = 1;
inline constexpr std::int64_t kMacInvalid = 2;

/// Shared-variable names of one node (Table-I style: `LC1XCVR_Tx`, `LC1_RxAck`).
struct NodeVars {
  explicit NodeVars(std::string node) : node(std::move(node)) {}
  std::string node;

  std::string xcvr(const std::string& v) const { return node + "XCVR_" + v; }
  std::string app(const std::string& v) const { return node + "_" + v; }
  /// Namespace of the node's transceiver net in a composition.
  std::string xcvr_namespace() const { return node + "XCVR"; }

  /// Every shared variable of the node, for declaring them in a generated net.
  std::vector<std::string> all() const;
};

Net make_transceiver(const std::string& node, const XcvrParams& p, const ChannelParams& cp);

/// `nodes` in declaration order; node ids (values of `<N>XCVR_Dst`) are 1-based
/// positions. `signal_ids` maps masquerade signal names to their ids.
Net make_channel(const std::vector<std::string>& nodes, const ChannelParams& p, const AttackConfig& a,
                 const std::map<std::string, int>& signal_ids = {});

/// Idempotent rewrite of a controller net or a composed model: MAC guards and
/// intrusion branches on receive transitions (auth), retry counting and a
/// DoS-detect branch on application timeouts (finite retry limit).
/// Throws ModelError when a requested patch has nothing to attach to.
Net apply_security_patches(const Net& net, const SecurityConfig& sec);

}  // namespace tpnsec
