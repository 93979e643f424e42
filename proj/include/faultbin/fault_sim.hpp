#pragma once

#include <memory>
#include <span>
#include <vector>

#include "faultbin/faults.hpp"
#include "faultbin/netlist.hpp"

namespace faultbin {

/// Precomputed forward cones shared (read-only) by fault simulators.
class SimContext {
 public:
  explicit SimContext(const Netlist& netlist);

  const Netlist& netlist() const { return *netlist_; }
  /// Gates strictly downstream of gate index gi, in topological order.
  const std::vector<int>& cone(int gi) const { return cones_[gi]; }
  /// Output positions reachable from gate gi's output (including itself).
  const std::vector<int>& reachable_outputs(int gi) const { return reach_po_[gi]; }

 private:
  const Netlist* netlist_;
  std::vector<std::vector<int>> cones_;
  std::vector<std::vector<int>> reach_po_;
};

/// Fault location resolved to a gate index.
struct ResolvedFault {
  int gate = 0;
  int pin = kOutputPin;
  bool value = false;
};

ResolvedFault resolve_fault(const Netlist& netlist, const FaultSite& fault);

/// Single-fault, 64-pattern-parallel simulator (parallel-pattern single-fault
/// propagation). Not thread-safe; use one per worker.
class FaultSimulator {
 public:
  explicit FaultSimulator(const SimContext& ctx);

  /// Good-machine simulation of one block; pi_words[i] holds input i for the
  /// 64 patterns.
  void load_block(std::span<const std::uint64_t> pi_words);
  std::span<const std::uint64_t> good() const { return good_; }

  /// Bit p set when pattern p of the loaded block detects the fault.
  std::uint64_t detect(const ResolvedFault& f);
  /// Primary-output words under the fault.
  void faulty_outputs(const ResolvedFault& f, std::span<std::uint64_t> po_words);

 private:
  void inject(const ResolvedFault& f);
  void restore(const ResolvedFault& f);

  const SimContext* ctx_;
  std::vector<std::uint64_t> good_;
  std::vector<std::uint64_t> faulty_;
  std::vector<std::uint64_t> scratch_;
};

/// Reference simulator: full topological evaluation with any number of pins
/// forced to stuck values.
void simulate_block_faulty(const Netlist& netlist, std::span<const std::uint64_t> pi_words,
                           std::span<const FaultSite> faults, std::span<std::uint64_t> net_words);

/// Packs primary-input vectors into 64-pattern blocks (block b, input i at
/// [b * n_inputs + i]).
std::vector<std::uint64_t> pack_patterns(const Netlist& netlist, std::span<const BitVec> patterns);

struct FaultSimOptions {
  int threads = 0;
  /// Stop simulating a fault after its first detection.
  bool drop = true;
};

/// For each fault, the index of the first detecting pattern or -1.
std::vector<int> first_detections(const Netlist& netlist, std::span<const BitVec> patterns,
                                  std::span<const FaultSite> faults, const FaultSimOptions& opts = {});

/// Per pattern, the indices of all faults it detects (no dropping).
std::vector<std::vector<int>> detection_map(const Netlist& netlist, std::span<const BitVec> patterns,
                                            std::span<const FaultSite> faults, int threads = 0);

}  // namespace faultbin
