#pragma once

#include <compare>
#include <span>
#include <string>
#include <vector>

#include "faultbin/netlist.hpp"

namespace faultbin {

enum class StuckAt : std::uint8_t { SA0, SA1 };

inline constexpr int kOutputPin = -1;

/// A stuck-at fault on one gate pin. Output-pin faults act on the whole net
/// (stem); input-pin faults act only on that gate's view of the net (branch).
struct FaultSite {
  GateId gate = 0;
  int pin = kOutputPin;
  StuckAt polarity = StuckAt::SA0;

  bool stuck_value() const { return polarity == StuckAt::SA1; }
  friend auto operator<=>(const FaultSite&, const FaultSite&) = default;
};

std::string pin_label(int pin);
int pin_from_label(std::string_view label);
std::string to_string(const FaultSite& f);

struct FaultList {
  std::vector<FaultSite> sites;
  bool collapsed = false;
  /// For a collapsed list, the members of each site's equivalence class
  /// (the representative first); empty otherwise.
  std::vector<std::vector<FaultSite>> equivalence_classes;

  std::size_t size() const { return sites.size(); }
  std::size_t uncollapsed_count() const;
};

/// Stuck-at faults on every pin of the given gates (by id), ordered by gate
/// id, output pin first, SA0 before SA1. With collapse, structurally
/// equivalent sites within the set are merged.
FaultList enumerate_faults(const Netlist& netlist, std::span<const GateId> gates, bool collapse = true);
FaultList enumerate_all_faults(const Netlist& netlist, bool collapse = true);

/// Throws NetlistError(BadInput) if the site does not exist.
void check_fault(const Netlist& netlist, const FaultSite& fault);

}  // namespace faultbin
