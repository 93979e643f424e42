#include <algorithm>

#include <nlohmann/json.hpp>

#include "faultbin/cones.hpp"

namespace faultbin {

namespace {

std::vector<GateId> cone_from(const Netlist& netlist, std::vector<NetId> stack) {
  std::vector<char> seen_net(netlist.net_count(), 0);
  std::vector<GateId> ids;
  while (!stack.empty()) {
    const NetId n = stack.back();
    stack.pop_back();
    if (seen_net[n]) continue;
    seen_net[n] = 1;
    const int d = netlist.driver(n);
    if (d < 0) continue;
    const auto& g = netlist.gates()[d];
    ids.push_back(g.id);
    for (NetId in : g.inputs) stack.push_back(in);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<GateId> set_union(const std::vector<GateId>& a, const std::vector<GateId>& b) {
  std::vector<GateId> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<GateId> set_minus(const std::vector<GateId>& a, const std::vector<GateId>& b) {
  std::vector<GateId> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<GateId> set_and(const std::vector<GateId>& a, const std::vector<GateId>& b) {
  std::vector<GateId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

std::vector<GateId> net_cone(const Netlist& netlist, NetId net) {
  if (net < 0 || net >= netlist.net_count()) {
    throw NetlistError(NetlistErrc::InvalidParameter, "net index out of range");
  }
  return cone_from(netlist, {net});
}

std::vector<GateId> fanin_cone(const Netlist& netlist, int output_bit) {
  if (output_bit < 0 || output_bit > netlist.msb_position()) {
    throw NetlistError(NetlistErrc::InvalidParameter,
                       "output bit " + std::to_string(output_bit) + " outside 0.." +
                           std::to_string(netlist.msb_position()));
  }
  return cone_from(netlist, {netlist.primary_outputs()[output_bit]});
}

std::vector<GateId> carryin_cone(const Netlist& netlist, int k_plus_1) {
  const auto c = netlist.carry_in_of_bit(k_plus_1);
  if (!c) {
    throw NetlistError(NetlistErrc::BadAnnotation,
                       "no carry_in_of_bit " + std::to_string(k_plus_1) +
                           " annotation; name the carry-in net of that output bit (e.g. --carry-net <net>)");
  }
  if (*c == kConstZeroCarry) return {};
  return cone_from(netlist, {*c});
}

ConePartition partition(const Netlist& netlist, int k, bool collapse, std::optional<NetId> carry_net) {
  const int n = netlist.msb_position();
  if (k < 0 || k >= n) {
    throw NetlistError(NetlistErrc::InvalidParameter,
                       "K must satisfy 0 <= K < " + std::to_string(n) + ", got " + std::to_string(k));
  }
  ConePartition p;
  p.k = k;
  std::vector<NetId> low(netlist.primary_outputs().begin(), netlist.primary_outputs().begin() + k + 1);
  std::vector<NetId> high(netlist.primary_outputs().begin() + k + 1, netlist.primary_outputs().end());
  p.g1 = cone_from(netlist, low);
  p.g2 = cone_from(netlist, high);
  if (carry_net) {
    p.g_carryin = *carry_net == kConstZeroCarry ? std::vector<GateId>{} : net_cone(netlist, *carry_net);
  } else {
    p.g_carryin = carryin_cone(netlist, k + 1);
  }
  p.g_noncrit = set_minus(p.g1, p.g2);
  p.g_crit = set_minus(p.g2, p.g_carryin);
  p.g_carryin_leftover = set_minus(set_and(p.g_carryin, p.g2), p.g_noncrit);
  p.f_crit = enumerate_faults(netlist, set_union(p.g_crit, p.g_carryin_leftover), collapse);
  p.f_noncrit = enumerate_faults(netlist, p.g_noncrit, collapse);
  return p;
}

nlohmann::json partition_to_json(const ConePartition& part) {
  auto faults = [](const FaultList& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : list.sites) {
      arr.push_back({{"gate", f.gate}, {"pin", pin_label(f.pin)}, {"polarity", f.polarity == StuckAt::SA0 ? "SA0" : "SA1"}});
    }
    return arr;
  };
  return {
      {"k", part.k},
      {"g1", part.g1},
      {"g2", part.g2},
      {"g_carryin", part.g_carryin},
      {"g_noncrit", part.g_noncrit},
      {"g_crit", part.g_crit},
      {"g_carryin_leftover", part.g_carryin_leftover},
      {"f_crit", faults(part.f_crit)},
      {"f_noncrit", faults(part.f_noncrit)},
      {"f_crit_uncollapsed", part.f_crit.uncollapsed_count()},
      {"f_noncrit_uncollapsed", part.f_noncrit.uncollapsed_count()},
      {"collapsed", part.f_crit.collapsed},
  };
}

}  // namespace faultbin
