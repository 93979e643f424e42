#include <algorithm>

#include "faultbin/atpg.hpp"

namespace faultbin {

namespace {

constexpr std::uint8_t kX = 2;

std::uint8_t eval3(GateKind kind, const std::uint8_t* in, std::size_t n) {
  switch (kind) {
    case GateKind::And:
    case GateKind::Nand: {
      std::uint8_t v = 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (in[i] == 0) {
          v = 0;
          break;
        }
        if (in[i] == kX) v = kX;
      }
      return (kind == GateKind::Nand && v != kX) ? v ^ 1 : v;
    }
    case GateKind::Or:
    case GateKind::Nor: {
      std::uint8_t v = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (in[i] == 1) {
          v = 1;
          break;
        }
        if (in[i] == kX) v = kX;
      }
      return (kind == GateKind::Nor && v != kX) ? v ^ 1 : v;
    }
    case GateKind::Xor:
    case GateKind::Xnor: {
      std::uint8_t v = kind == GateKind::Xnor ? 1 : 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (in[i] == kX) return kX;
        v ^= in[i];
      }
      return v;
    }
    case GateKind::Not: return in[0] == kX ? kX : in[0] ^ 1;
    case GateKind::Buf: return in[0];
  }
  return kX;
}

bool inverting(GateKind k) {
  return k == GateKind::Nand || k == GateKind::Nor || k == GateKind::Xnor || k == GateKind::Not;
}

}  // namespace

Podem::Podem(const Netlist& netlist) : nl_(&netlist), level_(netlist.net_count(), 0) {
  for (int gi : netlist.topo_order()) {
    const auto& g = netlist.gates()[gi];
    int d = 0;
    for (NetId in : g.inputs) d = std::max(d, level_[in]);
    level_[g.output] = d + 1;
  }
}

PodemResult Podem::run(const FaultSite& fault, long backtrack_limit) {
  const Netlist& nl = *nl_;
  const auto rf = resolve_fault(nl, fault);
  const Gate& fg = nl.gates()[rf.gate];
  const std::uint8_t stuck = rf.value ? 1 : 0;
  const NetId site_net = rf.pin == kOutputPin ? fg.output : fg.inputs[rf.pin];
  const auto& pis = nl.primary_inputs();
  const auto& pos = nl.primary_outputs();

  good_.assign(nl.net_count(), kX);
  bad_.assign(nl.net_count(), kX);
  pi_value_.assign(pis.size(), -1);
  std::vector<std::uint8_t> buf;

  auto imply = [&] {
    for (std::size_t i = 0; i < pis.size(); ++i) {
      const std::uint8_t v = pi_value_[i] < 0 ? kX : static_cast<std::uint8_t>(pi_value_[i]);
      good_[pis[i]] = v;
      bad_[pis[i]] = v;
    }
    for (int gi : nl.topo_order()) {
      const Gate& g = nl.gates()[gi];
      buf.resize(g.inputs.size());
      for (std::size_t p = 0; p < g.inputs.size(); ++p) buf[p] = good_[g.inputs[p]];
      good_[g.output] = eval3(g.kind, buf.data(), buf.size());
      for (std::size_t p = 0; p < g.inputs.size(); ++p) buf[p] = bad_[g.inputs[p]];
      if (gi == rf.gate && rf.pin != kOutputPin) buf[rf.pin] = stuck;
      bad_[g.output] = eval3(g.kind, buf.data(), buf.size());
      if (gi == rf.gate && rf.pin == kOutputPin) bad_[g.output] = stuck;
    }
  };
  auto is_d = [&](NetId n) { return good_[n] != kX && bad_[n] != kX && good_[n] != bad_[n]; };
  auto is_open = [&](NetId n) { return good_[n] == kX || bad_[n] == kX || good_[n] != bad_[n]; };

  // A difference can still reach an output only through nets that are
  // unresolved in either machine or already differ.
  std::vector<char> seen;
  std::vector<NetId> stack;
  auto x_path = [&] {
    if (!is_open(fg.output)) return false;
    seen.assign(nl.net_count(), 0);
    stack.assign(1, fg.output);
    seen[fg.output] = 1;
    while (!stack.empty()) {
      const NetId n = stack.back();
      stack.pop_back();
      if (nl.po_position(n) >= 0) return true;
      for (const auto& pin : nl.fanout(n)) {
        const NetId o = nl.gates()[pin.gate].output;
        if (!seen[o] && is_open(o)) {
          seen[o] = 1;
          stack.push_back(o);
        }
      }
    }
    return false;
  };

  // Objective (net, value) or net -1 when no guided choice exists.
  auto objective = [&]() -> std::pair<NetId, std::uint8_t> {
    if (good_[site_net] == kX) return {site_net, static_cast<std::uint8_t>(stuck ^ 1)};
    int best = -1;
    NetId best_net = -1;
    std::uint8_t best_val = 0;
    for (int gi : nl.topo_order()) {
      const Gate& g = nl.gates()[gi];
      if (good_[g.output] != kX && bad_[g.output] != kX) continue;
      bool has_d = gi == rf.gate && rf.pin != kOutputPin;
      for (NetId in : g.inputs) has_d = has_d || is_d(in);
      if (!has_d || level_[g.output] <= best) continue;
      for (std::size_t p = 0; p < g.inputs.size(); ++p) {
        if (good_[g.inputs[p]] != kX) continue;
        const bool and_like = g.kind == GateKind::And || g.kind == GateKind::Nand;
        best = level_[g.output];
        best_net = g.inputs[p];
        best_val = and_like ? 1 : 0;
        break;
      }
    }
    return {best_net, best_val};
  };

  // Walks an objective back to an unassigned primary input.
  auto backtrace = [&](NetId net, std::uint8_t v) -> std::pair<int, std::uint8_t> {
    while (nl.driver(net) >= 0) {
      const Gate& g = nl.gates()[nl.driver(net)];
      const std::uint8_t want = v ^ (inverting(g.kind) ? 1 : 0);
      NetId pick = -1;
      std::uint8_t next = want;
      switch (g.kind) {
        case GateKind::And:
        case GateKind::Nand:
        case GateKind::Or:
        case GateKind::Nor: {
          const bool and_like = g.kind == GateKind::And || g.kind == GateKind::Nand;
          const std::uint8_t non_controlling = and_like ? 1 : 0;
          // Needing every input non-controlling: satisfy the hardest first.
          const bool all_needed = want == non_controlling;
          for (NetId in : g.inputs) {
            if (good_[in] != kX) continue;
            if (pick < 0 || (all_needed ? level_[in] > level_[pick] : level_[in] < level_[pick])) pick = in;
          }
          next = want;
          break;
        }
        case GateKind::Xor:
        case GateKind::Xnor: {
          std::uint8_t parity = 0;
          for (NetId in : g.inputs) {
            if (good_[in] == kX) {
              if (pick < 0 || level_[in] < level_[pick]) pick = in;
            } else {
              parity ^= good_[in];
            }
          }
          next = want ^ parity;
          break;
        }
        case GateKind::Not:
        case GateKind::Buf:
          if (good_[g.inputs[0]] == kX) pick = g.inputs[0];
          next = want;
          break;
      }
      if (pick < 0) return {-1, 0};
      net = pick;
      v = next;
    }
    return {nl.pi_position(net), v};
  };

  struct Decision {
    int pi;
    bool flipped;
  };
  std::vector<Decision> decisions;
  PodemResult result;
  while (true) {
    imply();
    bool detected = false;
    for (NetId po : pos) {
      if (is_d(po)) {
        detected = true;
        break;
      }
    }
    if (detected) {
      result.outcome = PodemResult::Outcome::Detected;
      result.cube = pi_value_;
      return result;
    }
    const bool conflict = good_[site_net] == stuck || !x_path();
    if (!conflict) {
      auto [net, v] = objective();
      int pi = -1;
      std::uint8_t pv = 0;
      if (net >= 0) std::tie(pi, pv) = backtrace(net, v);
      if (pi < 0 || pi_value_[pi] >= 0) {
        pi = -1;
        for (std::size_t i = 0; i < pis.size(); ++i) {
          if (pi_value_[i] < 0) {
            pi = static_cast<int>(i);
            pv = 0;
            break;
          }
        }
      }
      if (pi >= 0) {
        pi_value_[pi] = static_cast<std::int8_t>(pv);
        decisions.push_back({pi, false});
        continue;
      }
      // Every input assigned yet no detection: a dead end like a conflict.
    }
    while (!decisions.empty() && decisions.back().flipped) {
      pi_value_[decisions.back().pi] = -1;
      decisions.pop_back();
    }
    if (decisions.empty()) {
      result.outcome = PodemResult::Outcome::Redundant;
      return result;
    }
    if (++result.backtracks > backtrack_limit) {
      result.outcome = PodemResult::Outcome::Aborted;
      return result;
    }
    auto& d = decisions.back();
    d.flipped = true;
    pi_value_[d.pi] ^= 1;
  }
}

}  // namespace faultbin
