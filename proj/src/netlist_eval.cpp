#include <vector>

#include "faultbin/netlist.hpp"

namespace faultbin {

std::uint64_t eval_gate_word(GateKind kind, std::span<const std::uint64_t> in) {
  std::uint64_t v = in[0];
  switch (kind) {
    case GateKind::And:
    case GateKind::Nand:
      for (std::size_t i = 1; i < in.size(); ++i) v &= in[i];
      return kind == GateKind::And ? v : ~v;
    case GateKind::Or:
    case GateKind::Nor:
      for (std::size_t i = 1; i < in.size(); ++i) v |= in[i];
      return kind == GateKind::Or ? v : ~v;
    case GateKind::Xor:
    case GateKind::Xnor:
      for (std::size_t i = 1; i < in.size(); ++i) v ^= in[i];
      return kind == GateKind::Xor ? v : ~v;
    case GateKind::Not: return ~v;
    case GateKind::Buf: return v;
  }
  return v;
}

void simulate_block(const Netlist& netlist, std::span<const std::uint64_t> pi_words,
                    std::span<std::uint64_t> net_words) {
  const auto& pis = netlist.primary_inputs();
  if (pi_words.size() != pis.size() || net_words.size() != static_cast<std::size_t>(netlist.net_count())) {
    throw NetlistError(NetlistErrc::BadInput, "simulate_block: buffer sizes do not match netlist");
  }
  for (std::size_t i = 0; i < pis.size(); ++i) net_words[pis[i]] = pi_words[i];
  std::uint64_t scratch[64];
  std::vector<std::uint64_t> wide;
  for (int gi : netlist.topo_order()) {
    const Gate& g = netlist.gates()[gi];
    std::uint64_t* in = scratch;
    if (g.inputs.size() > 64) {
      wide.resize(g.inputs.size());
      in = wide.data();
    }
    for (std::size_t p = 0; p < g.inputs.size(); ++p) in[p] = net_words[g.inputs[p]];
    net_words[g.output] = eval_gate_word(g.kind, {in, g.inputs.size()});
  }
}

BitVec assemble_inputs(const Netlist& netlist, const BusValues& inputs) {
  BitVec pi(static_cast<int>(netlist.primary_inputs().size()));
  int offset = 0;
  for (const auto& bus : netlist.input_buses()) {
    auto it = inputs.find(bus.name);
    if (it == inputs.end()) {
      throw NetlistError(NetlistErrc::BadInput, "input bus '" + bus.name + "' not assigned");
    }
    if (it->second.width() != static_cast<int>(bus.nets.size())) {
      throw NetlistError(NetlistErrc::BadInput,
                         "input bus '" + bus.name + "' expects width " + std::to_string(bus.nets.size()) +
                             ", got " + std::to_string(it->second.width()));
    }
    for (int i = 0; i < it->second.width(); ++i) pi.set(offset + i, it->second.bit(i));
    offset += it->second.width();
  }
  for (const auto& [name, value] : inputs) {
    if (!netlist.find_input_bus(name)) {
      throw NetlistError(NetlistErrc::BadInput, "netlist has no input bus '" + name + "'");
    }
  }
  return pi;
}

BusValues split_outputs(const Netlist& netlist, const BitVec& outputs) {
  BusValues result;
  int offset = 0;
  for (const auto& bus : netlist.output_buses()) {
    BitVec v(static_cast<int>(bus.nets.size()));
    for (int i = 0; i < v.width(); ++i) v.set(i, outputs.bit(offset + i));
    offset += v.width();
    result.emplace(bus.name, std::move(v));
  }
  return result;
}

BitVec evaluate(const Netlist& netlist, const BitVec& inputs) {
  const auto& pis = netlist.primary_inputs();
  if (inputs.width() != static_cast<int>(pis.size())) {
    throw NetlistError(NetlistErrc::BadInput, "input vector width does not match netlist");
  }
  std::vector<std::uint64_t> pi_words(pis.size());
  for (std::size_t i = 0; i < pis.size(); ++i) pi_words[i] = inputs.bit(static_cast<int>(i)) ? ~0ULL : 0ULL;
  std::vector<std::uint64_t> nets(netlist.net_count());
  simulate_block(netlist, pi_words, nets);
  const auto& pos = netlist.primary_outputs();
  BitVec out(static_cast<int>(pos.size()));
  for (std::size_t i = 0; i < pos.size(); ++i) out.set(static_cast<int>(i), nets[pos[i]] & 1U);
  return out;
}

BusValues eval(const Netlist& netlist, const BusValues& inputs) {
  return split_outputs(netlist, evaluate(netlist, assemble_inputs(netlist, inputs)));
}

}  // namespace faultbin
