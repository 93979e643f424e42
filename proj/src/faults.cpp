#include <algorithm>
#include <numeric>

#include "faultbin/faults.hpp"

namespace faultbin {

std::string pin_label(int pin) { return pin == kOutputPin ? "out" : "in" + std::to_string(pin); }

int pin_from_label(std::string_view label) {
  if (label == "out") return kOutputPin;
  if (label.size() > 2 && label.substr(0, 2) == "in") {
    int v = 0;
    for (char c : label.substr(2)) {
      if (c < '0' || c > '9') return -2;
      v = v * 10 + (c - '0');
      if (v > 1'000'000) return -2;
    }
    return v;
  }
  return -2;
}

std::string to_string(const FaultSite& f) {
  return "g" + std::to_string(f.gate) + "/" + pin_label(f.pin) + (f.polarity == StuckAt::SA0 ? "/SA0" : "/SA1");
}

std::size_t FaultList::uncollapsed_count() const {
  if (!collapsed) return sites.size();
  std::size_t n = 0;
  for (const auto& c : equivalence_classes) n += c.size();
  return n;
}

void check_fault(const Netlist& netlist, const FaultSite& fault) {
  const int gi = netlist.gate_index(fault.gate);
  if (gi < 0) throw NetlistError(NetlistErrc::BadInput, "fault references unknown gate " + std::to_string(fault.gate));
  const int arity = static_cast<int>(netlist.gates()[gi].inputs.size());
  if (fault.pin < kOutputPin || fault.pin >= arity) {
    throw NetlistError(NetlistErrc::BadInput, "fault references missing pin on gate " + std::to_string(fault.gate));
  }
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  // Keeps the smaller index as root so the representative is the first
  // site in enumeration order.
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

}  // namespace

FaultList enumerate_faults(const Netlist& netlist, std::span<const GateId> gates, bool collapse) {
  std::vector<int> indices;
  for (GateId id : gates) {
    const int gi = netlist.gate_index(id);
    if (gi < 0) throw NetlistError(NetlistErrc::BadInput, "unknown gate id " + std::to_string(id));
    indices.push_back(gi);
  }
  std::sort(indices.begin(), indices.end(),
            [&](int a, int b) { return netlist.gates()[a].id < netlist.gates()[b].id; });
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());

  FaultList list;
  // first_site[gate index] = index of that gate's output SA0 site, or -1.
  std::vector<int> first_site(netlist.gate_count(), -1);
  for (int gi : indices) {
    const auto& g = netlist.gates()[gi];
    first_site[gi] = static_cast<int>(list.sites.size());
    for (int pin = kOutputPin; pin < static_cast<int>(g.inputs.size()); ++pin) {
      list.sites.push_back({g.id, pin, StuckAt::SA0});
      list.sites.push_back({g.id, pin, StuckAt::SA1});
    }
  }
  if (!collapse) return list;

  auto site = [&](int gi, int pin, bool sa1) { return first_site[gi] + 2 * (pin + 1) + (sa1 ? 1 : 0); };
  UnionFind uf(list.sites.size());
  for (int gi : indices) {
    const auto& g = netlist.gates()[gi];
    const int arity = static_cast<int>(g.inputs.size());
    for (int p = 0; p < arity; ++p) {
      switch (g.kind) {
        case GateKind::And: uf.unite(site(gi, p, false), site(gi, kOutputPin, false)); break;
        case GateKind::Nand: uf.unite(site(gi, p, false), site(gi, kOutputPin, true)); break;
        case GateKind::Or: uf.unite(site(gi, p, true), site(gi, kOutputPin, true)); break;
        case GateKind::Nor: uf.unite(site(gi, p, true), site(gi, kOutputPin, false)); break;
        case GateKind::Not:
          uf.unite(site(gi, p, false), site(gi, kOutputPin, true));
          uf.unite(site(gi, p, true), site(gi, kOutputPin, false));
          break;
        case GateKind::Buf:
          uf.unite(site(gi, p, false), site(gi, kOutputPin, false));
          uf.unite(site(gi, p, true), site(gi, kOutputPin, true));
          break;
        case GateKind::Xor:
        case GateKind::Xnor: break;
      }
    }
    // A fanout-free internal net: the driver's output fault and the single
    // reader's input fault are the same fault.
    const auto fo = netlist.fanout(g.output);
    if (fo.size() == 1 && netlist.po_position(g.output) < 0 && first_site[fo[0].gate] >= 0) {
      for (bool v : {false, true}) uf.unite(site(gi, kOutputPin, v), site(fo[0].gate, fo[0].pin, v));
    }
  }

  std::vector<int> class_of(list.sites.size(), -1);
  FaultList out;
  out.collapsed = true;
  for (std::size_t i = 0; i < list.sites.size(); ++i) {
    const int root = uf.find(static_cast<int>(i));
    if (class_of[root] < 0) {
      class_of[root] = static_cast<int>(out.sites.size());
      out.sites.push_back(list.sites[root]);
      out.equivalence_classes.emplace_back();
    }
    out.equivalence_classes[class_of[root]].push_back(list.sites[i]);
  }
  return out;
}

FaultList enumerate_all_faults(const Netlist& netlist, bool collapse) {
  std::vector<GateId> ids;
  for (const auto& g : netlist.gates()) ids.push_back(g.id);
  return enumerate_faults(netlist, ids, collapse);
}

}  // namespace faultbin
