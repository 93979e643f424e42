#include <algorithm>
#include <bit>

#include "faultbin/fault_sim.hpp"
#include "faultbin/parallel.hpp"

namespace faultbin {

SimContext::SimContext(const Netlist& netlist) : netlist_(&netlist) {
  const int ng = netlist.gate_count();
  std::vector<int> rank(ng);
  for (int r = 0; r < ng; ++r) rank[netlist.topo_order()[r]] = r;
  cones_.resize(ng);
  reach_po_.resize(ng);
  std::vector<int> mark(ng, -1);
  std::vector<int> stack;
  for (int gi = 0; gi < ng; ++gi) {
    auto& cone = cones_[gi];
    auto& pos = reach_po_[gi];
    auto visit_net = [&](NetId n) {
      if (netlist.po_position(n) >= 0) pos.push_back(netlist.po_position(n));
      for (const auto& pin : netlist.fanout(n)) {
        if (mark[pin.gate] != gi) {
          mark[pin.gate] = gi;
          stack.push_back(pin.gate);
        }
      }
    };
    mark[gi] = gi;
    visit_net(netlist.gates()[gi].output);
    while (!stack.empty()) {
      const int g = stack.back();
      stack.pop_back();
      cone.push_back(g);
      visit_net(netlist.gates()[g].output);
    }
    std::sort(cone.begin(), cone.end(), [&rank](int a, int b) { return rank[a] < rank[b]; });
    std::sort(pos.begin(), pos.end());
  }
}

ResolvedFault resolve_fault(const Netlist& netlist, const FaultSite& fault) {
  check_fault(netlist, fault);
  return {netlist.gate_index(fault.gate), fault.pin, fault.stuck_value()};
}

FaultSimulator::FaultSimulator(const SimContext& ctx)
    : ctx_(&ctx), good_(ctx.netlist().net_count()), faulty_(ctx.netlist().net_count()) {}

void FaultSimulator::load_block(std::span<const std::uint64_t> pi_words) {
  simulate_block(ctx_->netlist(), pi_words, good_);
  faulty_ = good_;
}

void FaultSimulator::inject(const ResolvedFault& f) {
  const auto& nl = ctx_->netlist();
  const Gate& g = nl.gates()[f.gate];
  const std::uint64_t stuck = f.value ? ~0ULL : 0ULL;
  if (f.pin == kOutputPin) {
    faulty_[g.output] = stuck;
  } else {
    scratch_.resize(g.inputs.size());
    for (std::size_t p = 0; p < g.inputs.size(); ++p) scratch_[p] = good_[g.inputs[p]];
    scratch_[f.pin] = stuck;
    faulty_[g.output] = eval_gate_word(g.kind, scratch_);
  }
  if (faulty_[g.output] == good_[g.output]) return;
  for (int gi : ctx_->cone(f.gate)) {
    const Gate& d = nl.gates()[gi];
    scratch_.resize(d.inputs.size());
    for (std::size_t p = 0; p < d.inputs.size(); ++p) scratch_[p] = faulty_[d.inputs[p]];
    faulty_[d.output] = eval_gate_word(d.kind, scratch_);
  }
}

void FaultSimulator::restore(const ResolvedFault& f) {
  const auto& nl = ctx_->netlist();
  const NetId out = nl.gates()[f.gate].output;
  if (faulty_[out] == good_[out]) return;
  faulty_[out] = good_[out];
  for (int gi : ctx_->cone(f.gate)) {
    const NetId n = nl.gates()[gi].output;
    faulty_[n] = good_[n];
  }
}

std::uint64_t FaultSimulator::detect(const ResolvedFault& f) {
  inject(f);
  std::uint64_t diff = 0;
  const auto& pos = ctx_->netlist().primary_outputs();
  for (int o : ctx_->reachable_outputs(f.gate)) diff |= faulty_[pos[o]] ^ good_[pos[o]];
  restore(f);
  return diff;
}

void FaultSimulator::faulty_outputs(const ResolvedFault& f, std::span<std::uint64_t> po_words) {
  inject(f);
  const auto& pos = ctx_->netlist().primary_outputs();
  for (std::size_t o = 0; o < pos.size(); ++o) po_words[o] = faulty_[pos[o]];
  restore(f);
}

void simulate_block_faulty(const Netlist& netlist, std::span<const std::uint64_t> pi_words,
                           std::span<const FaultSite> faults, std::span<std::uint64_t> net_words) {
  const auto& pis = netlist.primary_inputs();
  for (std::size_t i = 0; i < pis.size(); ++i) net_words[pis[i]] = pi_words[i];
  // Per gate index: forced pins, evaluated in place.
  std::vector<std::vector<std::pair<int, bool>>> forced(netlist.gate_count());
  for (const auto& f : faults) {
    check_fault(netlist, f);
    forced[netlist.gate_index(f.gate)].emplace_back(f.pin, f.stuck_value());
  }
  std::vector<std::uint64_t> in;
  for (int gi : netlist.topo_order()) {
    const Gate& g = netlist.gates()[gi];
    in.assign(g.inputs.size(), 0);
    for (std::size_t p = 0; p < g.inputs.size(); ++p) in[p] = net_words[g.inputs[p]];
    for (const auto& [pin, v] : forced[gi]) {
      if (pin != kOutputPin) in[pin] = v ? ~0ULL : 0ULL;
    }
    std::uint64_t out = eval_gate_word(g.kind, in);
    for (const auto& [pin, v] : forced[gi]) {
      if (pin == kOutputPin) out = v ? ~0ULL : 0ULL;
    }
    net_words[g.output] = out;
  }
}

std::vector<std::uint64_t> pack_patterns(const Netlist& netlist, std::span<const BitVec> patterns) {
  const std::size_t n_in = netlist.primary_inputs().size();
  const std::size_t blocks = (patterns.size() + 63) / 64;
  std::vector<std::uint64_t> words(blocks * n_in, 0);
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    if (patterns[p].width() != static_cast<int>(n_in)) {
      throw NetlistError(NetlistErrc::BadInput, "pattern " + std::to_string(p) + " width does not match netlist inputs");
    }
    const std::size_t base = (p / 64) * n_in;
    for (std::size_t i = 0; i < n_in; ++i) {
      if (patterns[p].bit(static_cast<int>(i))) words[base + i] |= 1ULL << (p % 64);
    }
  }
  return words;
}

namespace {

std::uint64_t block_mask(std::size_t n_patterns, std::size_t block) {
  const std::size_t remaining = n_patterns - block * 64;
  return remaining >= 64 ? ~0ULL : ((1ULL << remaining) - 1);
}

}  // namespace

std::vector<int> first_detections(const Netlist& netlist, std::span<const BitVec> patterns,
                                  std::span<const FaultSite> faults, const FaultSimOptions& opts) {
  const auto words = pack_patterns(netlist, patterns);
  const std::size_t n_in = netlist.primary_inputs().size();
  const std::size_t blocks = (patterns.size() + 63) / 64;
  std::vector<ResolvedFault> resolved;
  for (const auto& f : faults) resolved.push_back(resolve_fault(netlist, f));
  const SimContext ctx(netlist);
  std::vector<int> first(faults.size(), -1);
  parallel_chunks(faults.size(), opts.threads, [&](std::size_t begin, std::size_t end, int) {
    FaultSimulator sim(ctx);
    for (std::size_t b = 0; b < blocks; ++b) {
      sim.load_block({words.data() + b * n_in, n_in});
      const std::uint64_t mask = block_mask(patterns.size(), b);
      for (std::size_t i = begin; i < end; ++i) {
        if (opts.drop && first[i] >= 0) continue;
        const std::uint64_t hit = sim.detect(resolved[i]) & mask;
        if (hit && first[i] < 0) first[i] = static_cast<int>(b * 64) + std::countr_zero(hit);
      }
    }
  });
  return first;
}

std::vector<std::vector<int>> detection_map(const Netlist& netlist, std::span<const BitVec> patterns,
                                            std::span<const FaultSite> faults, int threads) {
  const auto words = pack_patterns(netlist, patterns);
  const std::size_t n_in = netlist.primary_inputs().size();
  const std::size_t blocks = (patterns.size() + 63) / 64;
  std::vector<ResolvedFault> resolved;
  for (const auto& f : faults) resolved.push_back(resolve_fault(netlist, f));
  const SimContext ctx(netlist);
  // hits[fault] per block, merged into the per-pattern map in fault order.
  std::vector<std::vector<std::uint64_t>> hits(faults.size(), std::vector<std::uint64_t>(blocks, 0));
  parallel_chunks(faults.size(), threads, [&](std::size_t begin, std::size_t end, int) {
    FaultSimulator sim(ctx);
    for (std::size_t b = 0; b < blocks; ++b) {
      sim.load_block({words.data() + b * n_in, n_in});
      const std::uint64_t mask = block_mask(patterns.size(), b);
      for (std::size_t i = begin; i < end; ++i) hits[i][b] = sim.detect(resolved[i]) & mask;
    }
  });
  std::vector<std::vector<int>> map(patterns.size());
  for (std::size_t i = 0; i < faults.size(); ++i) {
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::uint64_t h = hits[i][b]; h; h &= h - 1) map[b * 64 + std::countr_zero(h)].push_back(static_cast<int>(i));
    }
  }
  return map;
}

}  // namespace faultbin
