#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "faultbin/fault_sim.hpp"
#include "faultbin/macsim.hpp"
#include "faultbin/parallel.hpp"

namespace faultbin {

BitVec inject_evaluate(const Netlist& netlist, std::span<const FaultSite> faults, const BitVec& inputs) {
  const auto& pis = netlist.primary_inputs();
  if (inputs.width() != static_cast<int>(pis.size())) {
    throw NetlistError(NetlistErrc::BadInput, "input vector width does not match netlist");
  }
  std::vector<std::uint64_t> pi_words(pis.size());
  for (std::size_t i = 0; i < pis.size(); ++i) pi_words[i] = inputs.bit(static_cast<int>(i)) ? ~0ULL : 0ULL;
  std::vector<std::uint64_t> nets(netlist.net_count());
  simulate_block_faulty(netlist, pi_words, faults, nets);
  const auto& pos = netlist.primary_outputs();
  BitVec out(static_cast<int>(pos.size()));
  for (std::size_t i = 0; i < pos.size(); ++i) out.set(static_cast<int>(i), nets[pos[i]] & 1U);
  return out;
}

BusValues inject_eval(const Netlist& netlist, std::span<const FaultSite> faults, const BusValues& inputs) {
  return split_outputs(netlist, inject_evaluate(netlist, faults, assemble_inputs(netlist, inputs)));
}

std::int64_t signed_output(const BitVec& outputs) { return outputs.to_int(); }

namespace {

std::vector<int> reachable_outputs(const Netlist& netlist, int gate_index) {
  std::vector<int> out;
  std::vector<char> seen(netlist.net_count(), 0);
  std::vector<NetId> stack{netlist.gates()[gate_index].output};
  while (!stack.empty()) {
    const NetId n = stack.back();
    stack.pop_back();
    if (seen[n]) continue;
    seen[n] = 1;
    if (netlist.po_position(n) >= 0) out.push_back(netlist.po_position(n));
    for (const auto& pin : netlist.fanout(n)) stack.push_back(netlist.gates()[pin.gate].output);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> input_support(const Netlist& netlist, const std::vector<int>& outputs) {
  std::vector<char> seen(netlist.net_count(), 0);
  std::vector<NetId> stack;
  for (int o : outputs) stack.push_back(netlist.primary_outputs()[o]);
  std::vector<int> support;
  while (!stack.empty()) {
    const NetId n = stack.back();
    stack.pop_back();
    if (seen[n]) continue;
    seen[n] = 1;
    if (netlist.pi_position(n) >= 0) support.push_back(netlist.pi_position(n));
    const int d = netlist.driver(n);
    if (d >= 0) {
      for (NetId in : netlist.gates()[d].inputs) stack.push_back(in);
    }
  }
  std::sort(support.begin(), support.end());
  return support;
}

// Enumerates assignments of the support bits (other inputs 0), 64 per block;
// block b covers assignments b*64 .. b*64+63.
struct SupportSweep {
  const Netlist& netlist;
  ResolvedFault fault;
  std::vector<int> outputs;
  std::vector<int> support;
  std::vector<std::int64_t> weight;  // signed weight of each listed output

  SupportSweep(const Netlist& nl, const FaultSite& f)
      : netlist(nl), fault(resolve_fault(nl, f)), outputs(reachable_outputs(nl, fault.gate)),
        support(input_support(nl, outputs)) {
    const int msb = nl.msb_position();
    if (msb > 62) throw NetlistError(NetlistErrc::InvalidParameter, "error sweep supports at most 63 output bits");
    for (int o : outputs) weight.push_back(o == msb ? -(std::int64_t{1} << o) : (std::int64_t{1} << o));
  }

  void load_exhaustive(std::uint64_t block, std::vector<std::uint64_t>& words) const {
    static constexpr std::uint64_t kLane[6] = {0xAAAAAAAAAAAAAAAAULL, 0xCCCCCCCCCCCCCCCCULL, 0xF0F0F0F0F0F0F0F0ULL,
                                               0xFF00FF00FF00FF00ULL, 0xFFFF0000FFFF0000ULL, 0xFFFFFFFF00000000ULL};
    std::fill(words.begin(), words.end(), 0);
    for (std::size_t j = 0; j < support.size(); ++j) {
      words[support[j]] = j < 6 ? kLane[j] : (((block >> (j - 6)) & 1U) ? ~0ULL : 0ULL);
    }
  }

  // diffs[p] = faulty - exact for each of the 64 loaded patterns.
  void diffs(FaultSimulator& sim, const std::vector<std::uint64_t>& words, std::vector<std::uint64_t>& po,
             std::int64_t* out) const {
    sim.load_block(words);
    sim.faulty_outputs(fault, po);
    const auto good = sim.good();
    const auto& pos = netlist.primary_outputs();
    std::fill(out, out + 64, 0);
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const std::uint64_t g = good[pos[outputs[i]]];
      const std::uint64_t f = po[outputs[i]];
      for (std::uint64_t up = f & ~g; up; up &= up - 1) out[std::countr_zero(up)] += weight[i];
      for (std::uint64_t down = g & ~f; down; down &= down - 1) out[std::countr_zero(down)] -= weight[i];
    }
  }
};

}  // namespace

std::vector<int> fault_input_support(const Netlist& netlist, const FaultSite& fault) {
  const auto rf = resolve_fault(netlist, fault);
  return input_support(netlist, reachable_outputs(netlist, rf.gate));
}

MaxErrorResult max_error(const Netlist& netlist, const FaultSite& fault, const MaxErrorOptions& opts) {
  const SupportSweep sweep(netlist, fault);
  const SimContext ctx(netlist);
  const std::size_t n_in = netlist.primary_inputs().size();
  MaxErrorResult result;
  result.support_bits = static_cast<int>(sweep.support.size());
  result.exhaustive = result.support_bits <= opts.max_exhaustive_bits;
  const std::uint64_t total = result.exhaustive ? (std::uint64_t{1} << result.support_bits)
                                                : static_cast<std::uint64_t>(std::max(1L, opts.samples));
  const std::uint64_t blocks = (total + 63) / 64;
  result.patterns = static_cast<long>(total);

  struct Best {
    std::int64_t err = 0;
    std::uint64_t index = 0;
    std::vector<std::uint64_t> words;
    int lane = -1;
  };
  const int workers = std::max(1, std::min<int>(resolve_threads(opts.threads), static_cast<int>(blocks)));
  std::vector<Best> best(workers);
  parallel_chunks(blocks, workers, [&](std::size_t begin, std::size_t end, int w) {
    FaultSimulator sim(ctx);
    std::vector<std::uint64_t> words(n_in);
    std::vector<std::uint64_t> po(netlist.primary_outputs().size());
    std::int64_t d[64];
    for (std::size_t b = begin; b < end; ++b) {
      if (result.exhaustive) {
        sweep.load_exhaustive(b, words);
      } else {
        std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                          static_cast<std::uint32_t>(b)};
        std::mt19937_64 rng(seq);
        for (auto& x : words) x = rng();
      }
      sweep.diffs(sim, words, po, d);
      const int lanes = static_cast<int>(std::min<std::uint64_t>(64, total - b * 64));
      for (int p = 0; p < lanes; ++p) {
        const std::int64_t e = d[p] < 0 ? -d[p] : d[p];
        if (e > best[w].err) {
          best[w] = {e, b * 64 + p, words, p};
        }
      }
    }
  });
  // Largest error; ties go to the earliest pattern, independent of chunking.
  const Best* top = &best[0];
  for (const auto& b : best) {
    if (b.err > top->err || (b.err == top->err && b.err > 0 && b.index < top->index)) top = &b;
  }
  result.max_error = top->err;
  if (top->err > 0) {
    BitVec v(static_cast<int>(n_in));
    for (std::size_t i = 0; i < n_in; ++i) v.set(static_cast<int>(i), (top->words[i] >> top->lane) & 1U);
    result.witness = v;
  }
  return result;
}

std::int64_t max_error_bruteforce(const Netlist& netlist, const FaultSite& fault) {
  const int n_in = static_cast<int>(netlist.primary_inputs().size());
  if (n_in > 24) throw NetlistError(NetlistErrc::InvalidParameter, "brute-force sweep limited to 24 inputs");
  std::int64_t best = 0;
  for (std::uint64_t v = 0; v < (std::uint64_t{1} << n_in); ++v) {
    const BitVec in = BitVec::from_uint(n_in, v);
    const std::int64_t diff = signed_output(inject_evaluate(netlist, {&fault, 1}, in)) - signed_output(evaluate(netlist, in));
    best = std::max(best, diff < 0 ? -diff : diff);
  }
  return best;
}

std::string_view to_string(ErrorFormat f) {
  return f == ErrorFormat::Int8Mac ? "int8_mac" : "bfloat16_mac_behavioral";
}

std::string_view to_string(ErrorMode m) {
  return m == ErrorMode::WorstCaseSigned ? "worst_case_signed" : "per_fault_netlist";
}

ErrorFormat error_format_from_string(std::string_view s) {
  if (s == "int8_mac") return ErrorFormat::Int8Mac;
  if (s == "bfloat16_mac_behavioral") return ErrorFormat::Bfloat16Behavioral;
  throw std::invalid_argument("unknown error format '" + std::string(s) + "'");
}

ErrorMode error_mode_from_string(std::string_view s) {
  if (s == "worst_case_signed") return ErrorMode::WorstCaseSigned;
  if (s == "per_fault_netlist") return ErrorMode::PerFaultNetlist;
  throw std::invalid_argument("unknown error mode '" + std::string(s) + "'");
}

std::int64_t worst_case_magnitude(int k) {
  if (k < 0 || k > 60) throw std::invalid_argument("error-model K out of range");
  return (std::int64_t{2} << (k + 1)) - 1;
}

std::int64_t behavioral_error(const ErrorModel& model, int polarity, std::int64_t exact_mac) {
  return exact_mac + (polarity < 0 ? -1 : 1) * worst_case_magnitude(model.k);
}

float behavioral_error_bf16(const ErrorModel& model, int polarity, float product) {
  if (product == 0.0F || !std::isfinite(product)) return product;
  if (model.k < 0 || model.k > 6) throw std::invalid_argument("bfloat16 error model needs 0 <= K <= 6");
  int exp = 0;
  std::frexp(product, &exp);  // |product| = m * 2^exp, m in [0.5, 1)
  // bfloat16 keeps 7 explicit mantissa bits: one ulp is 2^(exp - 8).
  const float ulp = std::ldexp(1.0F, exp - 8);
  const float magnitude = static_cast<float>((2 << model.k) - 1) * ulp;
  return product + (polarity < 0 ? -magnitude : magnitude);
}

FaultErrorTable::FaultErrorTable(const Netlist& mac, const FaultSite& fault, int max_bits) : fault_(fault) {
  if (mac.input_buses().size() != 3) {
    throw NetlistError(NetlistErrc::InvalidParameter, "fault error table expects a MAC with a, b, acc inputs");
  }
  const SupportSweep sweep(mac, fault);
  if (static_cast<int>(sweep.support.size()) > max_bits) {
    throw NetlistError(NetlistErrc::InvalidParameter,
                       "fault " + to_string(fault) + " reaches " + std::to_string(sweep.support.size()) +
                           " input bits; too many to tabulate");
  }
  for (int pos : sweep.support) {
    int bus = 0;
    int offset = pos;
    while (offset >= static_cast<int>(mac.input_buses()[bus].nets.size())) {
      offset -= static_cast<int>(mac.input_buses()[bus].nets.size());
      ++bus;
    }
    bits_.emplace_back(bus, offset);
  }
  const std::uint64_t total = std::uint64_t{1} << sweep.support.size();
  table_.assign(total, 0);
  const SimContext ctx(mac);
  FaultSimulator sim(ctx);
  std::vector<std::uint64_t> words(mac.primary_inputs().size());
  std::vector<std::uint64_t> po(mac.primary_outputs().size());
  std::int64_t d[64];
  for (std::uint64_t b = 0; b * 64 < total; ++b) {
    sweep.load_exhaustive(b, words);
    sweep.diffs(sim, words, po, d);
    for (std::uint64_t p = 0; p < 64 && b * 64 + p < total; ++p) {
      table_[b * 64 + p] = static_cast<std::int32_t>(d[p]);
      max_abs_ = std::max(max_abs_, d[p] < 0 ? -d[p] : d[p]);
    }
  }
}

std::int64_t FaultErrorTable::error(std::int64_t a, std::int64_t b, std::int64_t acc) const {
  const std::uint64_t operand[3] = {static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b),
                                    static_cast<std::uint64_t>(acc)};
  std::size_t idx = 0;
  for (std::size_t j = 0; j < bits_.size(); ++j) idx |= ((operand[bits_[j].first] >> bits_[j].second) & 1U) << j;
  return table_[idx];
}

}  // namespace faultbin
