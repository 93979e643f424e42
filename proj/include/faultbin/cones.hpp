#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "faultbin/faults.hpp"
#include "faultbin/netlist.hpp"

namespace faultbin {

/// Gate ids (sorted) from which the given output bit is reachable.
std::vector<GateId> fanin_cone(const Netlist& netlist, int output_bit);
/// Gate ids (sorted) in the fan-in cone of an arbitrary net.
std::vector<GateId> net_cone(const Netlist& netlist, NetId net);
/// Fan-in cone of the net annotated as carry_in_of_bit[k_plus_1].
std::vector<GateId> carryin_cone(const Netlist& netlist, int k_plus_1);

struct ConePartition {
  int k = 0;
  std::vector<GateId> g1;
  std::vector<GateId> g2;
  std::vector<GateId> g_carryin;
  std::vector<GateId> g_noncrit;  // g1 \ g2
  std::vector<GateId> g_crit;     // g2 \ g_carryin
  /// Carry-in cone gates that the set algebra leaves in neither class;
  /// their faults are filed under f_crit.
  std::vector<GateId> g_carryin_leftover;
  FaultList f_crit;
  FaultList f_noncrit;
};

/// Algorithm-1 partition for max non-critical bit k. A carry net override
/// replaces the netlist's carry_in_of_bit[k+1] annotation.
ConePartition partition(const Netlist& netlist, int k, bool collapse = true,
                        std::optional<NetId> carry_net = std::nullopt);

nlohmann::json partition_to_json(const ConePartition& part);

/// Worst-case error for non-critical faults with max non-critical bit k.
inline long error_bound(int k) { return (2L << (k + 1)) - 1; }

}  // namespace faultbin
