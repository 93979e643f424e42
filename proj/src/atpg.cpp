#include <bit>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "faultbin/atpg.hpp"
#include "faultbin/parallel.hpp"

namespace faultbin {

std::string_view to_string(FaultStatus s) {
  switch (s) {
    case FaultStatus::Undetected: return "undetected";
    case FaultStatus::Detected: return "detected";
    case FaultStatus::Redundant: return "redundant";
    case FaultStatus::Aborted: return "aborted";
  }
  return "?";
}

std::size_t TestSet::detected() const {
  return static_cast<std::size_t>(std::count(status.begin(), status.end(), FaultStatus::Detected));
}
std::size_t TestSet::redundant() const {
  return static_cast<std::size_t>(std::count(status.begin(), status.end(), FaultStatus::Redundant));
}
std::size_t TestSet::aborted() const {
  return static_cast<std::size_t>(std::count(status.begin(), status.end(), FaultStatus::Aborted));
}

double TestSet::coverage() const {
  return faults.size() == 0 ? 1.0 : static_cast<double>(detected()) / static_cast<double>(faults.size());
}

double TestSet::detectable_coverage() const {
  const std::size_t detectable = faults.size() - redundant();
  return detectable == 0 ? 1.0 : static_cast<double>(detected()) / static_cast<double>(detectable);
}

namespace {

std::size_t class_size(const FaultList& faults, std::size_t i) {
  return faults.collapsed ? faults.equivalence_classes[i].size() : 1;
}

}  // namespace

std::size_t TestSet::uncollapsed_detected() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < faults.size(); ++i) {
    if (status[i] == FaultStatus::Detected) n += class_size(faults, i);
  }
  return n;
}

std::size_t TestSet::uncollapsed_redundant() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < faults.size(); ++i) {
    if (status[i] == FaultStatus::Redundant) n += class_size(faults, i);
  }
  return n;
}

double TestSet::uncollapsed_detectable_coverage() const {
  const std::size_t detectable = faults.uncollapsed_count() - uncollapsed_redundant();
  return detectable == 0 ? 1.0 : static_cast<double>(uncollapsed_detected()) / static_cast<double>(detectable);
}

namespace {

std::vector<BitVec> expected_outputs(const Netlist& netlist, const std::vector<BitVec>& patterns) {
  std::vector<BitVec> out;
  out.reserve(patterns.size());
  for (const auto& p : patterns) out.push_back(evaluate(netlist, p));
  return out;
}

BitVec pattern_from_words(std::span<const std::uint64_t> words, int bit) {
  BitVec p(static_cast<int>(words.size()));
  for (std::size_t i = 0; i < words.size(); ++i) p.set(static_cast<int>(i), (words[i] >> bit) & 1U);
  return p;
}

// Detection masks of one 64-pattern block for the listed faults.
std::vector<std::uint64_t> block_hits(const SimContext& ctx, std::span<const std::uint64_t> pi_words,
                                      const std::vector<ResolvedFault>& faults, const std::vector<int>& which,
                                      int threads) {
  std::vector<std::uint64_t> hits(which.size(), 0);
  parallel_chunks(which.size(), threads, [&](std::size_t begin, std::size_t end, int) {
    FaultSimulator sim(ctx);
    sim.load_block(pi_words);
    for (std::size_t i = begin; i < end; ++i) hits[i] = sim.detect(faults[which[i]]);
  });
  return hits;
}

// Keeps, scanning from the last pattern to the first, only patterns that
// detect a fault no later-kept pattern detects.
std::vector<BitVec> reverse_compact(const Netlist& netlist, const SimContext& ctx, const std::vector<BitVec>& patterns,
                                    const std::vector<ResolvedFault>& faults, std::vector<int> targets, int threads) {
  std::vector<BitVec> reversed(patterns.rbegin(), patterns.rend());
  const auto words = pack_patterns(netlist, reversed);
  const std::size_t n_in = netlist.primary_inputs().size();
  std::vector<char> keep(reversed.size(), 0);
  for (std::size_t b = 0; b * 64 < reversed.size() && !targets.empty(); ++b) {
    const std::size_t in_block = std::min<std::size_t>(64, reversed.size() - b * 64);
    const std::uint64_t mask = in_block == 64 ? ~0ULL : ((1ULL << in_block) - 1);
    const auto hits = block_hits(ctx, {words.data() + b * n_in, n_in}, faults, targets, threads);
    // Greedy in scan order: a pattern is kept when it is the first (in
    // reverse order) to detect some still-uncovered fault.
    std::vector<int> next;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const std::uint64_t h = hits[i] & mask;
      if (h) {
        keep[b * 64 + std::countr_zero(h)] = 1;
      } else {
        next.push_back(targets[i]);
      }
    }
    targets = std::move(next);
  }
  std::vector<BitVec> kept;
  for (std::size_t i = reversed.size(); i-- > 0;) {
    if (keep[i]) kept.push_back(reversed[i]);
  }
  return kept;
}

}  // namespace

TestSet generate_patterns(const Netlist& netlist, const FaultList& faults, const AtpgOptions& opts) {
  TestSet ts;
  ts.faults = faults;
  const std::size_t n = faults.size();
  ts.status.assign(n, FaultStatus::Undetected);
  ts.detected_by.assign(n, -1);
  if (n == 0) return ts;

  std::vector<ResolvedFault> resolved;
  for (const auto& f : faults.sites) resolved.push_back(resolve_fault(netlist, f));
  const SimContext ctx(netlist);
  const std::size_t n_in = netlist.primary_inputs().size();
  std::vector<BitVec> patterns;
  std::vector<char> detected(n, 0);
  auto remaining = [&] {
    std::vector<int> r;
    for (std::size_t i = 0; i < n; ++i) {
      if (!detected[i] && ts.status[i] == FaultStatus::Undetected) r.push_back(static_cast<int>(i));
    }
    return r;
  };

  // Phase 1: random patterns with fault dropping.
  std::mt19937_64 rng(opts.seed);
  std::vector<std::uint64_t> words(n_in);
  int idle = 0;
  for (int block = 0; block < opts.random_max_blocks && idle < opts.random_idle_blocks; ++block) {
    std::vector<int> targets;
    if (opts.fault_dropping) {
      targets = remaining();
    } else {
      for (std::size_t i = 0; i < n; ++i) targets.push_back(static_cast<int>(i));
    }
    if (targets.empty()) break;
    for (auto& w : words) w = rng();
    const auto hits = block_hits(ctx, words, resolved, targets, opts.threads);
    std::uint64_t useful = opts.fault_dropping ? 0 : ~0ULL;
    bool fresh = false;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (hits[i] && !detected[targets[i]]) {
        useful |= 1ULL << std::countr_zero(hits[i]);
        detected[targets[i]] = 1;
        fresh = true;
      }
    }
    idle = fresh ? 0 : idle + 1;
    for (std::uint64_t u = useful; u; u &= u - 1) patterns.push_back(pattern_from_words(words, std::countr_zero(u)));
  }

  // Phase 2: PODEM for what random patterns missed.
  Podem podem(netlist);
  FaultSimulator sim(ctx);
  for (std::size_t i = 0; i < n; ++i) {
    if (detected[i]) continue;
    const auto r = podem.run(faults.sites[i], opts.backtrack_limit);
    if (r.outcome == PodemResult::Outcome::Redundant) {
      ts.status[i] = FaultStatus::Redundant;
      continue;
    }
    if (r.outcome == PodemResult::Outcome::Aborted) {
      ts.status[i] = FaultStatus::Aborted;
      continue;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 fill(seq);
    BitVec p(static_cast<int>(n_in));
    for (std::size_t b = 0; b < n_in; ++b) p.set(static_cast<int>(b), r.cube[b] < 0 ? (fill() & 1U) : r.cube[b] == 1);
    for (std::size_t b = 0; b < n_in; ++b) words[b] = p.bit(static_cast<int>(b)) ? ~0ULL : 0ULL;
    sim.load_block(words);
    for (std::size_t j = i; j < n; ++j) {
      if (!detected[j] && ts.status[j] == FaultStatus::Undetected && sim.detect(resolved[j])) detected[j] = 1;
    }
    if (!detected[i]) throw std::logic_error("PODEM pattern does not detect its target " + to_string(faults.sites[i]));
    patterns.push_back(std::move(p));
  }

  // Phase 3: reverse-order compaction.
  if (opts.compact) {
    std::vector<int> targets;
    for (std::size_t i = 0; i < n; ++i) {
      if (detected[i]) targets.push_back(static_cast<int>(i));
    }
    patterns = reverse_compact(netlist, ctx, patterns, resolved, std::move(targets), opts.threads);
  }

  ts.patterns = std::move(patterns);
  ts.expected = expected_outputs(netlist, ts.patterns);
  fault_simulate(netlist, ts, opts.threads);
  for (std::size_t i = 0; i < n; ++i) {
    if (detected[i] && ts.status[i] != FaultStatus::Detected) {
      throw std::logic_error("compaction lost detection of " + to_string(faults.sites[i]));
    }
  }
  return ts;
}

void fault_simulate(const Netlist& netlist, TestSet& tests, int threads) {
  FaultSimOptions opts;
  opts.threads = threads;
  tests.detected_by = first_detections(netlist, tests.patterns, tests.faults.sites, opts);
  tests.status.resize(tests.faults.size(), FaultStatus::Undetected);
  for (std::size_t i = 0; i < tests.faults.size(); ++i) {
    if (tests.detected_by[i] >= 0) {
      tests.status[i] = FaultStatus::Detected;
    } else if (tests.status[i] == FaultStatus::Detected) {
      tests.status[i] = FaultStatus::Undetected;
    }
  }
}

std::vector<bool> serial_detects(const Netlist& netlist, const std::vector<BitVec>& patterns,
                                 std::span<const FaultSite> faults) {
  const auto words = pack_patterns(netlist, patterns);
  const std::size_t n_in = netlist.primary_inputs().size();
  const std::size_t blocks = (patterns.size() + 63) / 64;
  std::vector<std::uint64_t> good(netlist.net_count());
  std::vector<std::uint64_t> bad(netlist.net_count());
  std::vector<bool> out(faults.size(), false);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::span<const std::uint64_t> pi{words.data() + b * n_in, n_in};
    const std::size_t in_block = std::min<std::size_t>(64, patterns.size() - b * 64);
    const std::uint64_t mask = in_block == 64 ? ~0ULL : ((1ULL << in_block) - 1);
    simulate_block(netlist, pi, good);
    for (std::size_t i = 0; i < faults.size(); ++i) {
      if (out[i]) continue;
      simulate_block_faulty(netlist, pi, {&faults[i], 1}, bad);
      for (NetId po : netlist.primary_outputs()) {
        if ((good[po] ^ bad[po]) & mask) {
          out[i] = true;
          break;
        }
      }
    }
  }
  return out;
}

SplitTests split_pattern_generation(const Netlist& netlist, const ConePartition& part, const AtpgOptions& opts) {
  return {generate_patterns(netlist, part.f_crit, opts), generate_patterns(netlist, part.f_noncrit, opts)};
}

std::string patterns_to_text(const Netlist& netlist, const TestSet& tests) {
  std::ostringstream out;
  out << "# faultbin patterns: <inputs hex> <expected outputs hex>, bit 0 = first bus LSB\n";
  out << "# inputs";
  for (const auto& b : netlist.input_buses()) out << ' ' << b.name << '[' << b.nets.size() << ']';
  out << "\n# outputs";
  for (const auto& b : netlist.output_buses()) out << ' ' << b.name << '[' << b.nets.size() << ']';
  out << '\n';
  for (std::size_t i = 0; i < tests.patterns.size(); ++i) {
    out << tests.patterns[i].to_hex() << ' ' << tests.expected[i].to_hex() << '\n';
  }
  return out.str();
}

std::vector<BitVec> patterns_from_text(const Netlist& netlist, std::string_view text) {
  std::vector<BitVec> patterns;
  const int width = static_cast<int>(netlist.primary_inputs().size());
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto stop = line.find_first_of(" \t\r", start);
    const std::string token = line.substr(start, stop == std::string::npos ? std::string::npos : stop - start);
    try {
      patterns.push_back(BitVec::from_hex(width, token));
    } catch (const std::exception& e) {
      throw NetlistError(NetlistErrc::Syntax, std::string("bad pattern: ") + e.what(), line_no, static_cast<int>(start) + 1);
    }
  }
  return patterns;
}

std::string faults_to_csv(const std::vector<std::pair<std::string, const TestSet*>>& classes) {
  std::ostringstream out;
  out << "gate,pin,polarity,class,detected_by\n";
  for (const auto& [name, ts] : classes) {
    for (std::size_t i = 0; i < ts->faults.size(); ++i) {
      const auto& f = ts->faults.sites[i];
      out << f.gate << ',' << pin_label(f.pin) << ',' << (f.polarity == StuckAt::SA0 ? "SA0" : "SA1") << ',' << name
          << ',';
      if (ts->detected_by[i] >= 0) {
        out << ts->detected_by[i];
      } else {
        out << to_string(ts->status[i]);
      }
      out << '\n';
    }
  }
  return out.str();
}

nlohmann::json coverage_row(const std::string& name, const Netlist&, const std::vector<GateId>& cells,
                            const TestSet& tests) {
  return {
      {"name", name},
      {"cells", cells.size()},
      {"faults", tests.faults.size()},
      {"faults_uncollapsed", tests.faults.uncollapsed_count()},
      {"patterns", tests.patterns.size()},
      {"detected", tests.detected()},
      {"redundant", tests.redundant()},
      {"aborted", tests.aborted()},
      {"coverage", tests.detectable_coverage()},
      {"coverage_uncollapsed", tests.uncollapsed_detectable_coverage()},
      {"fault_coverage_raw", tests.coverage()},
  };
}

}  // namespace faultbin
