#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "faultbin/cones.hpp"
#include "faultbin/fault_sim.hpp"

namespace faultbin {

enum class FaultStatus : std::uint8_t { Undetected, Detected, Redundant, Aborted };
std::string_view to_string(FaultStatus s);

struct PodemResult {
  enum class Outcome : std::uint8_t { Detected, Redundant, Aborted };
  Outcome outcome = Outcome::Aborted;
  /// Per primary input: 0, 1, or -1 (unassigned) when detected.
  std::vector<std::int8_t> cube;
  long backtracks = 0;
};

/// PODEM test generation for one stuck-at fault. Redundant means the whole
/// decision space was exhausted without a test.
class Podem {
 public:
  explicit Podem(const Netlist& netlist);
  PodemResult run(const FaultSite& fault, long backtrack_limit = 10'000);

 private:
  const Netlist* nl_;
  std::vector<int> level_;
  std::vector<std::uint8_t> good_;
  std::vector<std::uint8_t> bad_;
  std::vector<std::int8_t> pi_value_;
};

struct TestSet {
  std::vector<BitVec> patterns;
  std::vector<BitVec> expected;
  FaultList faults;
  /// Per fault: first detecting pattern or -1.
  std::vector<int> detected_by;
  std::vector<FaultStatus> status;

  std::size_t detected() const;
  std::size_t redundant() const;
  std::size_t aborted() const;
  /// Detected / all faults in the list.
  double coverage() const;
  /// Detected / (all - proven redundant).
  double detectable_coverage() const;
  /// Same, weighting each collapsed site by its equivalence-class size.
  double uncollapsed_detectable_coverage() const;
  std::size_t uncollapsed_detected() const;
  std::size_t uncollapsed_redundant() const;
};

struct AtpgOptions {
  std::uint64_t seed = 1;
  long backtrack_limit = 10'000;
  /// Random phase stops after this many 64-pattern blocks without a new detection.
  int random_idle_blocks = 4;
  int random_max_blocks = 64;
  bool fault_dropping = true;
  bool compact = true;
  int threads = 0;
};

/// Random patterns with fault dropping, then PODEM on the remaining faults,
/// then reverse-order compaction. Fills expected outputs, first detections
/// and per-fault status.
TestSet generate_patterns(const Netlist& netlist, const FaultList& faults, const AtpgOptions& opts = {});

/// Re-simulates the test set's patterns against its faults, refreshing
/// detected_by and marking detected faults; redundant/aborted marks on
/// undetected faults are kept.
void fault_simulate(const Netlist& netlist, TestSet& tests, int threads = 0);

/// Faults detected by the pattern set according to independent serial
/// re-simulation (one fault at a time, full evaluation).
std::vector<bool> serial_detects(const Netlist& netlist, const std::vector<BitVec>& patterns,
                                 std::span<const FaultSite> faults);

struct SplitTests {
  TestSet crit;
  TestSet noncrit;
};

SplitTests split_pattern_generation(const Netlist& netlist, const ConePartition& part, const AtpgOptions& opts = {});

// File formats.
std::string patterns_to_text(const Netlist& netlist, const TestSet& tests);
std::vector<BitVec> patterns_from_text(const Netlist& netlist, std::string_view text);
/// gate,pin,polarity,class,detected_by rows for one or more classified lists.
std::string faults_to_csv(const std::vector<std::pair<std::string, const TestSet*>>& classes);
nlohmann::json coverage_row(const std::string& name, const Netlist& netlist, const std::vector<GateId>& cells,
                            const TestSet& tests);

}  // namespace faultbin
